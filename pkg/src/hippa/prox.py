"""High-order proximal operator and Moreau envelope.

The subproblem solved at ``x`` is

    min_{y in C}  f(y) + (1/(p*gamma)) * ||x - y||**p .
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .core import ProxParams, as_vector, power_penalty, power_penalty_grad
from .functions import ObjectiveFunction
from .sets import BALL, ConvexSet

logger = logging.getLogger(__name__)

CLOSED_FORM = "closed_form"
RADIAL = "radial_1d"
PROJECTED_GRADIENT = "projected_gradient"
GRID_ORACLE = "grid_oracle"
METHODS = (CLOSED_FORM, RADIAL, PROJECTED_GRADIENT, GRID_ORACLE)

DEFAULT_INNER_TOL = 1e-10
MAX_INNER = 100_000
ARMIJO_FACTOR = 0.5
ARMIJO_SLOPE = 1e-4
RADIAL_SCAN = 2001
STALL_ITERS = 30


class ProxEvaluationError(ValueError):
    """The objective is not finite where the subproblem starts."""


class ProxConvergenceError(RuntimeError):
    """The inner solver hit its iteration cap; ``best`` holds the best iterate found."""

    def __init__(self, message: str, best: "ProxResult"):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class ProxResult:
    minimizer: np.ndarray
    envelope_value: float
    subproblem_residual: float
    inner_iterations: int
    method: str


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned box ``[lower, upper]`` sampled with spacing ``h``."""

    lower: np.ndarray
    upper: np.ndarray
    h: float

    def __post_init__(self):
        lo, up = as_vector(self.lower), as_vector(self.upper)
        if lo.size != up.size or np.any(lo >= up):
            raise ValueError("grid box needs lower < upper in every coordinate")
        if not self.h > 0:
            raise ValueError("grid spacing must be positive")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)

    @classmethod
    def around(cls, center, half_width: float, h: float) -> "GridSpec":
        c = as_vector(center)
        return cls(c - half_width, c + half_width, h)


def effective_set(f: ObjectiveFunction, C: ConvexSet) -> ConvexSet:
    """The constraint set of the subproblem: ``C`` combined with ``f``'s domain hint."""
    dom = f.domain
    if dom is None or dom.is_whole or dom is C:
        return C
    if C.is_whole:
        return dom
    raise ValueError("prox over the intersection of two distinct non-trivial sets is not supported")


def _objective(f: ObjectiveFunction, x: np.ndarray, params: ProxParams):
    p, g = params.p, params.gamma

    def phi(y):
        return f.func(y) + float(np.linalg.norm(x - y)) ** p / (p * g)

    return phi


def _numeric_grad(func, y: np.ndarray) -> np.ndarray:
    out = np.empty_like(y)
    for i in range(y.size):
        h = 1e-7 * max(1.0, abs(y[i]))
        e = np.zeros_like(y)
        e[i] = h
        out[i] = (func(y + e) - func(y - e)) / (2 * h)
    return out


def _make_grad(f: ObjectiveFunction, x: np.ndarray, params: ProxParams):
    if f.grad is not None:
        fg = f.grad
    else:
        fg = lambda y: _numeric_grad(f.func, y)  # noqa: E731

    def grad(y):
        return np.asarray(fg(y), dtype=float) + power_penalty_grad(x, y, params)

    return grad


def _residual(S: ConvexSet, y: np.ndarray, g: np.ndarray) -> float:
    return float(np.linalg.norm(y - S.project(y - g)))


def _finish(f, x, params, y, residual, iters, method) -> ProxResult:
    env = f.func(y) + power_penalty(x, y, params)
    return ProxResult(y, float(env), float(residual), int(iters), method)


def _closed_form(f, x, params) -> Optional[ProxResult]:
    qd = f.quadratic
    n = x.size
    if qd.H.shape != (n, n):
        return None
    M = qd.H + np.eye(n) / params.gamma
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return None
    rhs = x / params.gamma - qd.c
    y = np.linalg.solve(L.T, np.linalg.solve(L, rhs))
    res = float(np.linalg.norm(M @ y - rhs))
    return _finish(f, x, params, y, res, 0, CLOSED_FORM)


def _radial_applies(f: ObjectiveFunction, S: ConvexSet, x: np.ndarray) -> bool:
    rp = f.radial
    if rp is None or rp.center.size != x.size:
        return False
    if S.is_whole:
        return True
    return S.kind == BALL and np.allclose(S.center, rp.center, rtol=0.0, atol=1e-14)


def _radial(f, S, x, params) -> ProxResult:
    """Reduce to ``min_r g(r) + (R - r)**p/(p*gamma)`` on the ray from the center through ``x``."""
    rp = f.radial
    p, gam = params.p, params.gamma
    d = x - rp.center
    R = float(np.linalg.norm(d))
    if R == 0.0:
        return _finish(f, x, params, rp.center.copy(), 0.0, 0, RADIAL)
    u = d / R
    # a nondecreasing profile never gains from moving past x or off the ray
    rmax = R if S.is_whole else min(R, S.radius)

    def phi(r):
        return rp.value(r) + (R - r) ** p / (p * gam)

    rs = np.linspace(0.0, rmax, RADIAL_SCAN)
    try:
        with np.errstate(all="ignore"):
            vals = np.asarray(phi(rs), dtype=float)
        if vals.shape != rs.shape:
            raise TypeError
    except (TypeError, ValueError):
        vals = np.array([phi(r) for r in rs])
    i = int(np.argmin(vals))
    lo, hi = rs[max(i - 1, 0)], rs[min(i + 1, rs.size - 1)]
    evals = rs.size
    r_best, v_best = float(rs[i]), float(vals[i])

    def dphi(r):
        return rp.deriv(r) - (R - r) ** (p - 1.0) / gam

    xtol = max(1e-300, 4e-16 * rmax)
    refined = None
    if rp.deriv is not None and hi > lo:
        a, b = lo, hi
        try:
            fa, fb = dphi(a), dphi(b)
        except (ZeroDivisionError, OverflowError, ValueError):
            fa = fb = math.nan
        if np.isfinite(fa) and np.isfinite(fb) and fa < 0.0 < fb:
            refined = brentq(dphi, a, b, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=500)
    if refined is None and hi > lo:
        out = minimize_scalar(phi, bounds=(lo, hi), method="bounded",
                              options={"xatol": max(1e-14, xtol), "maxiter": 500})
        refined = float(out.x)
        evals += int(out.nfev)
    for r in (refined, 0.0, rmax):
        if r is not None and phi(r) < v_best:
            r_best, v_best = float(r), phi(r)
    y = rp.center + r_best * u
    if r_best == rmax and rmax == R:
        y = x.copy()
    res = 0.0
    if rp.deriv is not None and 0.0 < r_best < rmax:
        res = abs(dphi(r_best))
    elif rp.deriv is not None and r_best == 0.0:
        res = max(0.0, -dphi(0.0)) if np.isfinite(dphi(0.0)) else 0.0
    return _finish(f, x, params, y, res, evals, RADIAL)


def _pg_single(phi, grad, S, y0, inner_tol, max_inner):
    """One projected-gradient descent; returns ``(y, value, residual, iterations, stalled)``.

    Trial steps are secant (Barzilai-Borwein) curvature estimates, then Armijo
    backtracking. The run counts as stalled when the objective stops
    improving beyond rounding for ``STALL_ITERS`` consecutive steps.
    """
    y = S.project(y0)
    v = phi(y)
    g = grad(y)
    res = _residual(S, y, g)
    # initial Lipschitz estimate by a secant probe
    probe = S.project(y - 1e-6 * g)
    dy = np.linalg.norm(probe - y)
    L = np.linalg.norm(grad(probe) - g) / dy if dy > 0 else 1.0
    step = 1.0 / L if L > 0 and np.isfinite(L) else 1.0
    it = flat = 0
    while res > inner_tol and it < max_inner:
        it += 1
        t = step
        while True:
            y_new = S.project(y - t * g)
            v_new = phi(y_new)
            move = y_new - y
            if np.isfinite(v_new) and v_new <= v - (ARMIJO_SLOPE / t) * float(move @ move):
                break
            t *= ARMIJO_FACTOR
            if t < 1e-30:
                return y, v, res, it, True
        flat = flat + 1 if v - v_new <= 4 * np.finfo(float).eps * (1.0 + abs(v)) else 0
        g_new = grad(y_new)
        s, dg = y_new - y, g_new - g
        ss, sy = float(s @ s), float(s @ dg)
        if sy > 0:
            step = ss / sy
        else:
            L = float(np.sqrt((dg @ dg) / ss)) if ss > 0 else 0.0
            step = 1.0 / L if L > 0 and np.isfinite(L) else 2.0 * t
        y, v, g = y_new, v_new, g_new
        res = _residual(S, y, g)
        if flat >= STALL_ITERS:
            return y, v, res, it, True
    return y, v, res, it, False


def _projected_gradient(f, S, x, params, inner_tol, max_inner) -> ProxResult:
    phi = _objective(f, x, params)
    grad = _make_grad(f, x, params)
    starts = [S.project(x)]
    if f.known_minimizer is not None and f.known_minimizer.size == x.size:
        guess = S.project(f.known_minimizer)
        if not np.array_equal(guess, starts[0]):
            starts += [guess, 0.5 * (starts[0] + guess)]
    best = None
    total = 0
    capped = False
    for y0 in starts:
        y, v, res, it, stalled = _pg_single(phi, grad, S, y0, inner_tol, max_inner)
        total += it
        if stalled:
            logger.debug("projected gradient stalled at residual %.3g", res)
        capped |= res > inner_tol and not stalled
        if best is None or v < best[1]:
            best = (y, v, res)
    y, _, res = best
    result = _finish(f, x, params, y, res, total, PROJECTED_GRADIENT)
    if capped and res > inner_tol:
        raise ProxConvergenceError(
            f"projected gradient hit the {max_inner}-iteration cap (residual {res:.3g})", result)
    return result


def prox(f: ObjectiveFunction, C: ConvexSet, params: ProxParams, x, inner_tol: float = DEFAULT_INNER_TOL,
         method: Optional[str] = None, max_inner: int = MAX_INNER) -> ProxResult:
    """Evaluate the high-order proximal operator of ``f`` over ``C`` at ``x``.

    Dispatch tries a closed form (quadratic ``f``, ``p == 2``, unconstrained),
    then the radial 1-D reduction, then projected gradient with Armijo
    backtracking restarted from ``x``, the projected known minimizer and their
    midpoint. ``method`` forces one solver.

    Raises
    ------
    ProxEvaluationError
        If ``f`` is not finite at the projected starting point.
    ProxConvergenceError
        If the inner iteration cap is exceeded; carries the best iterate.
    """
    if not inner_tol > 0:
        raise ValueError("inner_tol must be positive")
    x = as_vector(x, f.dim)
    S = effective_set(f, C)
    start = S.project(x)
    f0 = f.func(start)
    if not np.isfinite(f0):
        raise ProxEvaluationError(f"{f.label} is not finite at the starting point {start.tolist()}")
    if method not in (None,) + METHODS:
        raise ValueError(f"unknown prox method {method!r}")
    if method == GRID_ORACLE:
        raise ValueError("use prox_grid_oracle for the grid method")
    if method in (None, CLOSED_FORM) and f.quadratic is not None and params.p == 2.0 and S.is_whole:
        out = _closed_form(f, x, params)
        if out is not None:
            return out
    if method in (None, RADIAL) and _radial_applies(f, S, x):
        return _radial(f, S, x, params)
    if method not in (None, PROJECTED_GRADIENT):
        raise ValueError(f"method {method!r} does not apply to {f.label}")
    return _projected_gradient(f, S, x, params, inner_tol, max_inner)


def moreau_env(f: ObjectiveFunction, C: ConvexSet, params: ProxParams, x,
               inner_tol: float = DEFAULT_INNER_TOL) -> float:
    """Optimal value of the proximal subproblem at ``x``."""
    return prox(f, C, params, x, inner_tol).envelope_value


_EXHAUSTIVE_MAX = 50_000
_COARSE_PER_AXIS = 101


def _grid_axes(lower, upper, h):
    return [np.linspace(lo, up, int(round((up - lo) / h)) + 1) for lo, up in zip(lower, upper)]


def _sweep(phi, S, axes):
    best_y, best_v, n = None, math.inf, 0
    pts = np.array(np.meshgrid(*axes, indexing="ij")).reshape(len(axes), -1).T
    vals = np.full(len(pts), math.inf)
    for j, y in enumerate(pts):
        if not S.is_whole and not S.contains(y, 1e-12):
            continue
        v = phi(y)
        n += 1
        if np.isfinite(v):
            vals[j] = v
            if v < best_v:
                best_y, best_v = y, v
    return best_y, best_v, n, pts, vals


def prox_grid_oracle(f: ObjectiveFunction, C: ConvexSet, params: ProxParams, x,
                     grid_spec: GridSpec, n_candidates: int = 3) -> ProxResult:
    """Brute-force subproblem minimizer over a grid, for validating the solvers.

    Grids up to 50k points are swept exhaustively. Larger grids are searched
    coarse-to-fine, zooming into a window of two coarse cells around each of
    the best ``n_candidates`` coarse points, until the spacing reaches ``h``.
    """
    x = as_vector(x, f.dim)
    if x.size > 2:
        raise ValueError("grid oracle supports dimension <= 2 only")
    if grid_spec.lower.size != x.size:
        raise ValueError("grid dimension does not match x")
    S = effective_set(f, C)
    phi = _objective(f, x, params)
    lower, upper, h = grid_spec.lower, grid_spec.upper, grid_spec.h
    npts = int(np.prod([round((u - l) / h) + 1 for l, u in zip(lower, upper)]))
    if npts <= _EXHAUSTIVE_MAX:
        y, v, n, _, _ = _sweep(phi, S, _grid_axes(lower, upper, h))
    else:
        y, v, n = _zoom(phi, S, lower, upper, h, n_candidates)
    if y is None:
        raise ProxEvaluationError("no grid point with a finite subproblem value")
    return _finish(f, x, params, y, math.nan, n, GRID_ORACLE)


def _zoom(phi, S, lower, upper, h, n_candidates):
    coarse = max((u - l) / (_COARSE_PER_AXIS - 1) for l, u in zip(lower, upper))
    boxes = [(lower, upper)]
    total = 0
    best = (None, math.inf)
    spacing = coarse
    while True:
        spacing = max(spacing, h)
        found = []
        for lo, up in boxes:
            y, v, n, pts, vals = _sweep(phi, S, _grid_axes(lo, up, spacing))
            total += n
            order = np.argsort(vals)[:n_candidates]
            found += [(vals[j], pts[j]) for j in order if np.isfinite(vals[j])]
        found.sort(key=lambda t: t[0])
        if found and found[0][0] < best[1]:
            best = (found[0][1], found[0][0])
        if spacing <= h:
            return best[0], best[1], total
        nxt = max(spacing / 20.0, h)
        boxes = []
        for _, c in found[:n_candidates]:
            lo = np.maximum(lower, c - 2 * spacing)
            up = np.minimum(upper, c + 2 * spacing)
            # snap to the h-lattice so the final sweep lies on the requested grid
            lo = lower + np.floor((lo - lower) / h) * h
            up = lower + np.ceil((up - lower) / h) * h
            boxes.append((lo, np.minimum(up, upper)))
        spacing = nxt
