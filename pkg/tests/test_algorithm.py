import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import hippa.algorithm as alg
from hippa.algorithm import (
    FIXED_POINT,
    PROX_FAILURE,
    STEP_TOL,
    GammaSchedule,
    RunConfig,
    Trajectory,
    audit_trajectory,
    iteration_bound,
    run,
)
from hippa.catalogue import catalogue
from hippa.functions import norm_power, sum_shifted
from hippa.prox import ProxConvergenceError, ProxResult
from hippa.sets import ball, whole_space

R1 = whole_space(1)


def cubic_root_oracle(x):
    """Positive root of y**2 - 2(x+1)y + x**2 = 0 (the p=3 prox of x**2 at x > 0)."""
    return (x + 1) - math.sqrt(2 * x + 1)


def test_geometric_iterates():
    cfg = RunConfig.constant(2.0, 1.0, 1e-10)
    traj = run(norm_power(2, 1), R1, cfg, [1.0])
    xs = np.array([x[0] for x in traj.iterates])
    assert np.allclose(xs, 3.0 ** -np.arange(xs.size), rtol=1e-13, atol=0)
    assert traj.stop_reason == STEP_TOL
    assert traj.step_norms[-1] <= 1e-10 < traj.step_norms[-2]
    assert audit_trajectory(traj, cfg, norm_power(2, 1)).passed


def test_start_at_minimizer_is_a_fixed_point():
    f = norm_power(2, 3)
    cfg = RunConfig.constant(2.0, 1.0, 1e-10)
    traj = run(f, whole_space(3), cfg, np.zeros(3))
    assert traj.iterations == 0 and traj.stop_reason == FIXED_POINT
    assert audit_trajectory(traj, cfg, f).passed


def test_cubic_penalty_matches_root_recursion():
    traj = run(norm_power(2, 1), R1, RunConfig.constant(3.0, 1.0, 1e-10), [1.0])
    xs = [x[0] for x in traj.iterates]
    assert xs[1] == pytest.approx(2 - math.sqrt(3), abs=1e-12)
    assert xs[2] == pytest.approx(0.0286355175, abs=1e-10)
    for a, b in zip(xs, xs[1:]):
        assert abs(b - cubic_root_oracle(a)) <= 1e-10


@pytest.mark.parametrize("p, gmax, gap, eps, expected", [(2.0, 1.0, 1.0, 0.1, 200), (2.0, 1.0, 0.0, 0.1, 0),
                                                         (3.0, 2.0, 4.0, 0.5, 192)])
def test_iteration_bound(p, gmax, gap, eps, expected):
    cfg = RunConfig(p, gmax / 2, gmax, eps)
    assert iteration_bound(cfg, 5.0 + gap, 5.0) == expected


def test_iteration_bound_negative_gap():
    with pytest.raises(ValueError, match="below the infimum"):
        iteration_bound(RunConfig(2.0, 0.5, 1.0, 0.1), 0.0, 1.0)


def test_corrupted_trajectory_fails_monotonicity():
    f = norm_power(2, 1)
    cfg = RunConfig.constant(2.0, 1.0, 1e-10)
    traj = run(f, R1, cfg, [1.0])
    traj.f_values[3] = traj.f_values[2] * 2
    report = audit_trajectory(traj, cfg, f)
    check = report.get("f_decreasing")
    assert not check.passed and check.index == 3
    assert not report.passed


@pytest.mark.parametrize("name", sorted(catalogue()))
def test_catalogue_runs_pass_audit(name):
    f = catalogue()[name]
    S = f.domain if f.domain is not None else whole_space(f.dim)
    x0 = S.project(f.known_minimizer + 0.5)
    p = max(2.0, f.modulus.q) if f.modulus is not None else 2.0
    cfg = RunConfig.constant(p, 1.0, 1e-8)
    traj = run(f, S, cfg, x0)
    report = audit_trajectory(traj, cfg, f, final_tol=1e-6)
    assert report.passed, report.to_dict()


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 10.0), st.floats(1.001, 10.0), st.integers(0, 2**31 - 1),
       st.sampled_from(["uniform_random", "geometric", "constant"]))
def test_schedules_stay_in_open_interval(lo, ratio, seed, kind):
    hi = lo * ratio
    sched = {"uniform_random": GammaSchedule("uniform_random", seed=seed),
             "geometric": GammaSchedule("geometric", gamma0=lo / 2, factor=1.7),
             "constant": GammaSchedule()}[kind]
    cfg = RunConfig(2.0, lo, hi, 1e-6, sched)
    gen = cfg.gammas()
    for _ in range(200):
        g = next(gen)
        assert lo < g < hi


def test_seeded_schedule_is_reproducible():
    cfg = RunConfig(2.0, 0.5, 2.0, 1e-6, GammaSchedule("uniform_random", seed=11))
    a, b = cfg.gammas(), cfg.gammas()
    assert [next(a) for _ in range(20)] == [next(b) for _ in range(20)]


def test_invalid_configs():
    with pytest.raises(ValueError):
        RunConfig(2.0, 1.0, 1.0, 1e-6)
    with pytest.raises(ValueError):
        RunConfig(2.0, 0.5, 1.0, 0.0)
    with pytest.raises(ValueError):
        RunConfig(1.0, 0.5, 1.0, 1e-6)
    with pytest.raises(ValueError):
        RunConfig(2.0, 0.5, 1.0, 1e-6, GammaSchedule("constant", 1.0))
    with pytest.raises(ValueError):
        GammaSchedule("cyclic")


def test_infeasible_start_is_projected(caplog):
    f = norm_power(2, 2)
    C = ball([1.0, 1.0], 0.5)
    cfg = RunConfig.constant(2.0, 1.0, 1e-10)
    with caplog.at_level(logging.WARNING, logger="hippa.algorithm"):
        traj = run(f, C, cfg, [5.0, 5.0])
    assert "projecting" in caplog.text
    assert C.contains(traj.iterates[0])
    corner = np.array([1.0, 1.0]) - 0.5 / math.sqrt(2)
    assert np.allclose(traj.final, corner, atol=1e-8)


def test_non_finite_start_rejected():
    from hippa.functions import ObjectiveFunction

    f = ObjectiveFunction(func=lambda x: math.inf if x[0] > 2 else float(x @ x), label="wall", dim=2)
    with pytest.raises(ValueError, match="not finite"):
        run(f, whole_space(2), RunConfig.constant(2.0, 1.0, 1e-6), [3.0, 0.0])


def test_prox_failure_stops_run(monkeypatch):
    real = alg.prox
    calls = {"n": 0}

    def flaky(f, C, params, x, tol):
        calls["n"] += 1
        if calls["n"] == 3:
            best = ProxResult(np.asarray(x), f(x), 1.0, 10, "projected_gradient")
            raise ProxConvergenceError("cap", best)
        return real(f, C, params, x, tol)

    monkeypatch.setattr(alg, "prox", flaky)
    f = norm_power(2, 1)
    cfg = RunConfig.constant(2.0, 1.0, 1e-10)
    traj = run(f, R1, cfg, [1.0])
    assert traj.stop_reason == PROX_FAILURE and traj.iterations == 2
    report = audit_trajectory(traj, cfg, f)
    assert report.get("prox").passed is False


def test_counterexample_run_warns_without_modulus():
    f = sum_shifted()
    cfg = RunConfig.constant(2.0, 1.0, 1e-10)
    traj = run(f, R1, cfg, [1.0])
    report = audit_trajectory(traj, cfg, f)
    assert any("no declared modulus" in w for w in report.warnings)
    assert report.passed


def test_summability_check_catches_inflated_steps():
    f = norm_power(2, 1)
    cfg = RunConfig.constant(2.0, 1.0, 1e-10)
    traj = run(f, R1, cfg, [1.0])
    traj.step_norms[0] = 10.0
    assert audit_trajectory(traj, cfg, f).get("summability").passed is False


def test_max_iter_stop():
    traj = run(norm_power(2, 1), R1, RunConfig.constant(2.0, 1.0, 1e-10, max_iter=3), [1.0])
    assert traj.stop_reason == alg.MAX_ITER and traj.iterations == 3


def test_trajectory_errors():
    traj = Trajectory(iterates=[np.array([3.0, 4.0]), np.array([0.0, 0.0])])
    assert traj.errors([0.0, 0.0]).tolist() == [5.0, 0.0]
