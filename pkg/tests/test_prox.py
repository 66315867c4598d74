import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hippa.catalogue import catalogue
from hippa.core import ProxParams
from hippa.functions import ObjectiveFunction, lq_sum, norm_power, restrict
from hippa.prox import (
    CLOSED_FORM,
    GRID_ORACLE,
    PROJECTED_GRADIENT,
    RADIAL,
    GridSpec,
    ProxConvergenceError,
    ProxEvaluationError,
    moreau_env,
    prox,
    prox_grid_oracle,
)
from hippa.sets import ball, box, halfspace, whole_space

CATALOGUE = catalogue()
W2 = whole_space(2)


def sample_points(f, n, seed):
    rng = np.random.default_rng(seed)
    if f.domain is not None:
        return f.domain.sample(rng, n, f.dim, scale=0.9)
    return rng.uniform(-2.0, 2.0, (n, f.dim))


def test_quadratic_closed_form():
    res = prox(norm_power(2, 2), W2, ProxParams(2, 1.0), [1.0, 0.0])
    assert np.allclose(res.minimizer, [1 / 3, 0.0], atol=1e-14)
    assert res.envelope_value == pytest.approx(1 / 3, rel=1e-14)
    assert res.method == CLOSED_FORM


def test_cubic_penalty_radial():
    f = norm_power(2, 1)
    res = prox(f, whole_space(1), ProxParams(3, 1.0), [1.0])
    assert res.minimizer[0] == pytest.approx(2 - math.sqrt(3), abs=1e-13)
    assert res.method == RADIAL
    pg = prox(f, whole_space(1), ProxParams(3, 1.0), [1.0], method=PROJECTED_GRADIENT)
    assert pg.minimizer[0] == pytest.approx(2 - math.sqrt(3), abs=1e-8)


def test_envelope_values():
    f = norm_power(2, 1)
    assert moreau_env(f, whole_space(1), ProxParams(2, 2.0), [1.0]) == pytest.approx(0.2, rel=1e-14)
    assert moreau_env(norm_power(2, 2), W2, ProxParams(2, 1.0), [0.0, 0.0]) == 0.0


@pytest.mark.parametrize("name", sorted(CATALOGUE))
def test_fixed_point_at_minimizer(name):
    f = CATALOGUE[name]
    S = f.domain if f.domain is not None else whole_space(f.dim)
    tol = 1e-10
    for p in (1.5, 2.0, 3.0):
        res = prox(f, S, ProxParams(p, 1.0), f.known_minimizer, inner_tol=tol)
        assert np.linalg.norm(res.minimizer - f.known_minimizer) <= 10 * tol
        assert res.envelope_value == pytest.approx(f.known_inf, abs=1e-12)


@pytest.mark.parametrize("name", sorted(CATALOGUE))
def test_envelope_majorization(name):
    f = CATALOGUE[name]
    S = f.domain if f.domain is not None else whole_space(f.dim)
    for x in sample_points(f, 10, seed=1):
        for p in (1.5, 2.0, 3.0):
            e1 = moreau_env(f, S, ProxParams(p, 0.5), x)
            e2 = moreau_env(f, S, ProxParams(p, 2.0), x)
            assert e2 <= e1 + 1e-9
            assert e1 <= f(x) + 1e-9


@pytest.mark.parametrize("name", ["norm_power:q=2,dim=1", "norm_power:q=4,dim=2", "affine:q=2,A=diag(2,1)",
                                  "shift:norm_power(2)-5"])
def test_inf_equality_on_dense_sample(name):
    f = CATALOGUE[name]
    pts = list(sample_points(f, 200, seed=2)) + [f.known_minimizer]
    params = ProxParams(2.0, 1.0)
    env_min = min(moreau_env(f, W2 if f.dim == 2 else whole_space(f.dim), params, x) for x in pts)
    f_min = min(f(x) for x in pts)
    assert env_min == pytest.approx(f_min, abs=2e-10)
    assert env_min == pytest.approx(f.known_inf, abs=2e-10)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=2), st.sampled_from([1.5, 2.0, 3.0, 4.0]),
       st.floats(0.1, 5.0))
def test_prox_optimality_against_neighbours(x, p, gamma):
    f = norm_power(3, 2)
    res = prox(f, W2, ProxParams(p, gamma), x)
    phi = lambda y: f(y) + np.linalg.norm(np.asarray(x) - y) ** p / (p * gamma)
    assert res.envelope_value == pytest.approx(phi(res.minimizer), abs=1e-14)
    rng = np.random.default_rng(0)
    for d in rng.normal(size=(20, 2)):
        assert phi(res.minimizer + 1e-4 * d) >= res.envelope_value - 1e-12
    assert res.envelope_value <= f(x) + 1e-12


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 4.0])
def test_radial_matches_projected_gradient(p):
    f = norm_power(3, 2)
    x = np.array([0.8, -1.1])
    r = prox(f, W2, ProxParams(p, 0.7), x)
    g = prox(f, W2, ProxParams(p, 0.7), x, method=PROJECTED_GRADIENT)
    assert r.method == RADIAL
    assert np.linalg.norm(r.minimizer - g.minimizer) <= 1e-7
    assert g.envelope_value >= r.envelope_value - 1e-12


def test_grid_oracle_matches_closed_form():
    f = norm_power(2, 2)
    x = np.array([1.0, 0.0])
    h = 1e-3
    res = prox_grid_oracle(f, W2, ProxParams(2, 1.0), x, GridSpec.around([0.0, 0.0], 1.0, h))
    assert np.max(np.abs(res.minimizer - [1 / 3, 0.0])) <= h
    assert res.method == GRID_ORACLE and math.isnan(res.subproblem_residual)


def test_grid_oracle_fractional_power_1d():
    f = norm_power(1.5, 1, radius_hint=2.0)
    params = ProxParams(1.5, 1.0)
    h = 1e-4
    oracle = prox_grid_oracle(f, whole_space(1), params, [1.0], GridSpec([-2.0], [2.0], h))
    for method in (RADIAL, PROJECTED_GRADIENT):
        res = prox(f, whole_space(1), params, [1.0], method=method)
        assert abs(res.minimizer[0] - oracle.minimizer[0]) <= h
        assert res.envelope_value <= oracle.envelope_value + 1e-12


def test_grid_oracle_at_minimizer():
    f = norm_power(2, 2)
    res = prox_grid_oracle(f, W2, ProxParams(3, 1.0), [0.0, 0.0], GridSpec.around([0.0, 0.0], 0.5, 1e-3))
    assert np.max(np.abs(res.minimizer)) <= 1e-3


def test_only_fixed_point_on_grid_is_minimizer():
    f = norm_power(2, 1)
    params = ProxParams(2.0, 1.0)
    xs = np.linspace(-1, 1, 41)
    for x in xs:
        y = prox_grid_oracle(f, whole_space(1), params, [x], GridSpec([-1.0], [1.0], 1e-3)).minimizer[0]
        if abs(y - x) <= 1e-3 / 2:
            assert abs(x) <= 2e-3


@pytest.mark.parametrize("C, x", [
    (ball([0.5, 0.5], 0.3), [2.0, 1.0]),
    (box([0.2, -1.0], [1.0, 1.0]), [1.5, 0.5]),
    (halfspace([1.0, 1.0], -0.5), [1.0, 0.0]),
])
def test_constrained_prox_agrees_with_grid(C, x):
    f = norm_power(2, 2)
    params = ProxParams(3.0, 1.0)
    h = 1e-3
    res = prox(f, C, params, x)
    assert C.contains(res.minimizer)
    oracle = prox_grid_oracle(f, C, params, x, GridSpec.around([0.0, 0.0], 2.0, h))
    assert np.max(np.abs(res.minimizer - oracle.minimizer)) <= 2 * h
    assert res.envelope_value <= oracle.envelope_value + 1e-12


def test_nonconvex_subproblem_uses_restarts():
    f = lq_sum(0.5)
    params = ProxParams(2.0, 1.0)
    x = np.array([0.3, 0.25])
    res = prox(f, W2, params, x)
    oracle = prox_grid_oracle(f, W2, params, x, GridSpec.around([0.0, 0.0], 1.0, 1e-3))
    assert res.envelope_value <= oracle.envelope_value + 1e-9


@pytest.mark.parametrize("name", ["norm_power:q=2,dim=3", "norm_power:q=3,dim=2", "affine:q=3,A=3x2"])
def test_outer_semicontinuity(name):
    f = CATALOGUE[name]
    S = whole_space(f.dim)
    xbar = np.full(f.dim, 0.7)
    ref = prox(f, S, ProxParams(2.5, 1.0), xbar).minimizer
    for k in range(1, 4):
        xk = xbar + 10.0 ** (-6 - k) * np.ones(f.dim)
        yk = prox(f, S, ProxParams(2.5, 1.0 + 10.0 ** -(k + 3)), xk).minimizer
        assert np.linalg.norm(yk - ref) <= 1e-4


def test_non_finite_start_is_an_evaluation_error():
    f = ObjectiveFunction(func=lambda y: math.inf if y[0] > 0 else float(y @ y), label="bad", dim=2)
    with pytest.raises(ProxEvaluationError):
        prox(f, W2, ProxParams(2.0, 1.0), [1.0, 0.0])


def test_inner_cap_carries_best_iterate():
    f = CATALOGUE["affine:q=3,A=3x2"]
    with pytest.raises(ProxConvergenceError) as info:
        prox(f, W2, ProxParams(2.0, 1.0), [3.0, -2.0], method=PROJECTED_GRADIENT, max_inner=1)
    best = info.value.best
    assert best.envelope_value <= f([3.0, -2.0])
    assert best.method == PROJECTED_GRADIENT


def test_grid_oracle_rejects_high_dimension():
    f = norm_power(2, 3)
    with pytest.raises(ValueError, match="dimension"):
        prox_grid_oracle(f, whole_space(3), ProxParams(2, 1.0), [1.0, 0.0, 0.0],
                         GridSpec.around([0.0] * 3, 1.0, 0.1))


def test_invalid_arguments():
    f = norm_power(2, 2)
    with pytest.raises(ValueError):
        prox(f, W2, ProxParams(2, 1.0), [1.0, 0.0], inner_tol=0.0)
    with pytest.raises(ValueError):
        prox(f, W2, ProxParams(2, 1.0), [1.0, 0.0], method="newton")
    with pytest.raises(ValueError):
        GridSpec([1.0], [0.0], 0.1)


def test_domain_restricted_function():
    f = restrict(norm_power(2, 2), ball([0.0, 0.0], 1.0))
    res = prox(f, W2, ProxParams(2.0, 1.0), [0.9, 0.0])
    assert res.minimizer == pytest.approx([0.3, 0.0], abs=1e-8)
