"""The high-order proximal-point outer loop, its stopping rule and trajectory audit."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .core import HALF_LINE, ProxParams, as_vector
from .functions import ObjectiveFunction
from .prox import ProxConvergenceError, effective_set, prox
from .sets import ConvexSet

logger = logging.getLogger(__name__)

STEP_TOL = "step_tol"
MAX_ITER = "max_iter"
FIXED_POINT = "fixed_point"
PROX_FAILURE = "prox_failure"

FIXED_POINT_TOL = 1e-14
CONSTANT_BAND = 1e-9


@dataclass(frozen=True)
class GammaSchedule:
    """How ``gamma_k`` is chosen inside ``(gamma_min, gamma_max)``.

    ``kind`` is ``"constant"`` (``gamma``; default the interval midpoint),
    ``"uniform_random"`` (``seed``) or ``"geometric"`` (``gamma0 * factor**k``,
    clamped into the open interval).
    """

    kind: str = "constant"
    gamma: Optional[float] = None
    seed: int = 0
    gamma0: Optional[float] = None
    factor: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "uniform_random", "geometric"):
            raise ValueError(f"unknown gamma schedule {self.kind!r}")
        if self.kind == "geometric" and (self.gamma0 is None or not self.gamma0 > 0 or not self.factor > 0):
            raise ValueError("geometric schedule needs gamma0 > 0 and factor > 0")

    def describe(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "constant":
            out["gamma"] = self.gamma
        elif self.kind == "uniform_random":
            out["seed"] = self.seed
        else:
            out.update(gamma0=self.gamma0, factor=self.factor)
        return out


@dataclass(frozen=True)
class RunConfig:
    p: float
    gamma_min: float
    gamma_max: float
    epsilon: float
    schedule: GammaSchedule = field(default_factory=GammaSchedule)
    max_iter: int = 1_000_000
    inner_tol: Optional[float] = None

    def __post_init__(self):
        ProxParams(self.p, self.gamma_min)
        if not self.gamma_max > self.gamma_min:
            raise ValueError("gamma_max must exceed gamma_min")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iter < 0:
            raise ValueError("max_iter must be nonnegative")
        if self.inner_tol is not None and not self.inner_tol > 0:
            raise ValueError("inner_tol must be positive")
        g = self.schedule.gamma
        if self.schedule.kind == "constant" and g is not None and not self.gamma_min < g < self.gamma_max:
            raise ValueError(f"constant gamma {g} is outside ({self.gamma_min}, {self.gamma_max})")

    @classmethod
    def constant(cls, p: float, gamma: float, epsilon: float, **kw) -> "RunConfig":
        """A run with ``gamma_k == gamma``, inside a relative band of width 1e-9."""
        return cls(p, gamma * (1 - CONSTANT_BAND), gamma * (1 + CONSTANT_BAND), epsilon,
                   GammaSchedule("constant", gamma), **kw)

    @property
    def resolved_inner_tol(self) -> float:
        if self.inner_tol is not None:
            return self.inner_tol
        return min(1e-10, self.epsilon / 100.0)

    def gammas(self) -> Iterator[float]:
        lo, hi = self.gamma_min, self.gamma_max
        s = self.schedule
        if s.kind == "constant":
            g = s.gamma if s.gamma is not None else 0.5 * (lo + hi)
            while True:
                yield g
        elif s.kind == "uniform_random":
            rng = np.random.default_rng(s.seed)
            while True:
                g = float(rng.uniform(lo, hi))
                if lo < g < hi:
                    yield g
        else:
            margin = 1e-12 * (hi - lo)
            k = 0
            while True:
                yield float(min(max(s.gamma0 * s.factor**k, lo + margin), hi - margin))
                k += 1

    def describe(self) -> dict:
        return {
            "p": self.p,
            "gamma_min": self.gamma_min,
            "gamma_max": self.gamma_max,
            "epsilon": self.epsilon,
            "schedule": self.schedule.describe(),
            "max_iter": self.max_iter,
            "inner_tol": self.resolved_inner_tol,
        }


@dataclass
class Trajectory:
    """Iterates and per-step records of one run.

    ``env_values[k]``, ``step_norms[k]`` and ``gammas[k]`` describe the step
    from ``iterates[k]`` to ``iterates[k+1]``.
    """

    iterates: list = field(default_factory=list)
    f_values: list = field(default_factory=list)
    env_values: list = field(default_factory=list)
    step_norms: list = field(default_factory=list)
    gammas: list = field(default_factory=list)
    prox_methods: list = field(default_factory=list)
    stop_reason: str = MAX_ITER
    wall_time: float = 0.0
    error: Optional[str] = None

    @property
    def iterations(self) -> int:
        return len(self.iterates) - 1

    @property
    def final(self) -> np.ndarray:
        return self.iterates[-1]

    def errors(self, xbar) -> np.ndarray:
        xbar = as_vector(xbar)
        return np.array([np.linalg.norm(x - xbar) for x in self.iterates])


def run(f: ObjectiveFunction, C: ConvexSet, cfg: RunConfig, x0) -> Trajectory:
    """Iterate ``x_{k+1} = prox(f, C, (p, gamma_k), x_k)`` until the step is at most ``epsilon``.

    An infeasible ``x0`` is projected onto the constraint set. A failing prox
    ends the run with ``stop_reason == "prox_failure"`` and the partial
    trajectory.
    """
    t0 = time.perf_counter()
    x = as_vector(x0, f.dim)
    S = effective_set(f, C)
    if not S.contains(x):
        logger.warning("x0 is outside the feasible set; projecting it")
        x = S.project(x)
    fx = f.func(x)
    if not np.isfinite(fx):
        raise ValueError(f"{f.label} is not finite at x0")
    traj = Trajectory(iterates=[x], f_values=[float(fx)])
    tol = cfg.resolved_inner_tol
    gammas = cfg.gammas()
    for _ in range(cfg.max_iter):
        g = next(gammas)
        try:
            res = prox(f, C, ProxParams(cfg.p, g), x, tol)
        except ProxConvergenceError as exc:
            traj.stop_reason = PROX_FAILURE
            traj.error = str(exc)
            break
        y = res.minimizer
        step = float(np.linalg.norm(y - x))
        if step <= FIXED_POINT_TOL:
            traj.stop_reason = FIXED_POINT
            break
        traj.iterates.append(y)
        traj.f_values.append(float(f.func(y)))
        traj.env_values.append(res.envelope_value)
        traj.step_norms.append(step)
        traj.gammas.append(g)
        traj.prox_methods.append(res.method)
        x = y
        if step <= cfg.epsilon:
            traj.stop_reason = STEP_TOL
            break
    else:
        traj.stop_reason = MAX_ITER
    traj.wall_time = time.perf_counter() - t0
    return traj


def iteration_bound(cfg: RunConfig, f_x0: float, f_inf: float) -> int:
    """``ceil(p * gamma_max * (f(x0) - inf f) / epsilon**p)``."""
    gap = float(f_x0) - float(f_inf)
    if gap < 0:
        raise ValueError(f"f(x0)={f_x0} is below the infimum {f_inf}")
    val = cfg.p * cfg.gamma_max * gap / cfg.epsilon**cfg.p
    near = round(val)
    if abs(val - near) <= 1e-9 * max(1.0, val):
        return int(near)
    return int(math.ceil(val))


@dataclass
class AuditCheck:
    name: str
    passed: Optional[bool]
    detail: str = ""
    index: Optional[int] = None

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail, "index": self.index}


@dataclass
class AuditReport:
    checks: list
    warnings: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed is not False for c in self.checks)

    def get(self, name: str) -> AuditCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": [c.to_dict() for c in self.checks],
                "warnings": list(self.warnings)}


def _strict_decrease(name, values) -> AuditCheck:
    """Strict decrease, except where the change is below the floating-point resolution of the values."""
    v = np.asarray(values, dtype=float)
    d = np.diff(v)
    unresolved = np.abs(d) <= 4 * np.finfo(float).eps * np.abs(v[:-1])
    bad = np.nonzero((d >= 0) & ~unresolved)[0]
    if bad.size:
        i = int(bad[0])
        return AuditCheck(name, False, f"value {float(v[i + 1])!r} at {i + 1} is not below {float(v[i])!r}", i + 1)
    return AuditCheck(name, True, f"{v.size} values")


def final_error_tolerance(cfg: RunConfig) -> float:
    return max(10.0 * cfg.epsilon, 1e-8)


def audit_trajectory(traj: Trajectory, cfg: RunConfig, f: Optional[ObjectiveFunction] = None,
                     final_tol: Optional[float] = None) -> AuditReport:
    """Check the global-convergence guarantees on a finished run.

    Checks are: strictly decreasing f and envelope values, the summability
    bound on ``sum step**p``, realized iterations against
    :func:`iteration_bound`, boundedness of the iterates and, when the
    minimizer is known, the distance of the final iterate to it. A check that
    cannot be evaluated reports ``passed=None``.
    """
    checks, warnings = [], []
    f0 = traj.f_values[0]
    inf = f.known_inf if f is not None and f.known_inf is not None else traj.f_values[-1]
    checks.append(_strict_decrease("f_decreasing", traj.f_values))
    checks.append(_strict_decrease("env_decreasing", traj.env_values))

    total = float(np.sum(np.asarray(traj.step_norms) ** cfg.p))
    budget = cfg.p * cfg.gamma_max * (f0 - inf)
    checks.append(AuditCheck("summability", total <= budget + 1e-6, f"sum step^p={total:.6g} <= {budget:.6g}"))

    if f0 >= inf:
        bound = iteration_bound(cfg, f0, inf)
        checks.append(AuditCheck("iteration_bound", traj.iterations <= bound,
                                 f"{traj.iterations} <= {bound}"))
    else:
        checks.append(AuditCheck("iteration_bound", False, f"f(x0)={f0} below declared infimum {inf}"))

    checks.append(_boundedness(traj, f, f0, inf))

    if f is not None and f.modulus is None:
        warnings.append(f"{f.label}: no declared modulus; convergence guarantees are unverifiable")
    if f is not None and f.known_minimizer is not None:
        tol = final_error_tolerance(cfg) if final_tol is None else final_tol
        err = float(np.linalg.norm(traj.final - f.known_minimizer))
        checks.append(AuditCheck("final_error", err <= tol, f"||x_final - xbar||={err:.3g} <= {tol:.3g}"))
    if traj.stop_reason == PROX_FAILURE:
        checks.append(AuditCheck("prox", False, traj.error or "prox failure"))
    return AuditReport(checks, warnings)


def _boundedness(traj, f, f0, inf) -> AuditCheck:
    if f is None:
        return AuditCheck("bounded", None, "no function supplied")
    mod = f.modulus
    if f.radial is not None:
        center = f.radial.center
        radius = float(np.linalg.norm(traj.iterates[0] - center))
        how = "radial sublevel ball"
    elif mod is not None and mod.interval == HALF_LINE and mod.radius is None and f.known_minimizer is not None:
        # quarter-modulus growth confines the sublevel set of f(x0)
        center = f.known_minimizer
        radius = (4.0 * (f0 - inf) / mod.rho) ** (1.0 / mod.q)
        how = "growth-condition ball"
    else:
        return AuditCheck("bounded", None, "no sublevel-set bound available")
    dist = np.array([np.linalg.norm(x - center) for x in traj.iterates])
    slack = 1e-9 * (1.0 + radius)
    bad = np.nonzero(dist > radius + slack)[0]
    if bad.size:
        i = int(bad[0])
        return AuditCheck("bounded", False, f"iterate {i} at distance {dist[i]:.6g} > {radius:.6g} ({how})", i)
    return AuditCheck("bounded", True, f"max distance {dist.max():.6g} <= {radius:.6g} ({how})")
