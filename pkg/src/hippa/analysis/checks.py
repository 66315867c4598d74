"""Sampled checkers for uniform quasiconvexity and its consequences."""

from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np
from scipy.optimize import linprog

from ..core import UNIT_INTERVAL, Modulus, as_vector
from ..functions import ObjectiveFunction
from ..sets import ConvexSet, ball, box
from .report import CheckReport

Sampler = Callable[[np.random.Generator, int], np.ndarray]

DEFAULT_SLACK = 1e-9
LATTICE_FRACTION = 0.1
LATTICE_STEP = 0.25


def sampling_region(f: ObjectiveFunction, modulus: Optional[Modulus] = None, scale: float = 2.0) -> ConvexSet:
    """Where sampled checks draw points: the modulus ball, else ``f``'s domain, else a box."""
    mod = modulus if modulus is not None else f.modulus
    if mod is not None and mod.radius is not None and mod.center is not None:
        return ball(mod.center, mod.radius)
    if f.domain is not None and not f.domain.is_whole:
        return f.domain
    if f.dim is None:
        raise ValueError(f"{f.label}: dimension unknown, pass a sampler")
    c = np.zeros(f.dim) if f.known_minimizer is None else f.known_minimizer
    return box(c - scale, c + scale)


def region_sampler(region: ConvexSet, lattice_fraction: float = LATTICE_FRACTION,
                   lattice_step: float = LATTICE_STEP) -> Sampler:
    """Uniform points of ``region``, a fraction of them snapped to a coarse lattice.

    Lattice points make isolated features at "round" coordinates (kinks,
    jumps) reachable by random sampling.
    """

    def draw(rng: np.random.Generator, n: int) -> np.ndarray:
        pts = region.sample(rng, n)
        m = int(round(lattice_fraction * n))
        if m:
            snapped = np.round(pts[:m] / lattice_step) * lattice_step
            keep = np.array([region.contains(s, 0.0) for s in snapped])
            pts[:m][keep] = snapped[keep]
        return pts

    return draw


def default_sampler(f: ObjectiveFunction, modulus: Optional[Modulus] = None) -> Sampler:
    return region_sampler(sampling_region(f, modulus))


def _slack(base: float, scale: float) -> float:
    return base * (1.0 + abs(scale))


def _modulus_term(mod: Optional[Modulus], t: float) -> float:
    if mod is None:
        return 0.0
    if mod.interval == UNIT_INTERVAL and t >= 1.0:
        return 0.0
    return mod(t)


def _uqc_violation(f, x, y, lam, mod, slack):
    fx, fy = f.func(x), f.func(y)
    if not (np.isfinite(fx) and np.isfinite(fy)):
        return None
    z = lam * x + (1 - lam) * y
    rhs = max(fx, fy)
    lhs = f.func(z) + lam * (1 - lam) * _modulus_term(mod, float(np.linalg.norm(x - y)))
    return lhs - rhs - _slack(slack, rhs), lhs, rhs


def check_uniform_quasiconvexity(f: ObjectiveFunction, sampler: Optional[Sampler] = None,
                                 modulus: Optional[Modulus] = None, n_samples: int = 10_000,
                                 seed: int = 0, slack: float = DEFAULT_SLACK) -> CheckReport:
    """Test ``f(lam x + (1-lam) y) + lam(1-lam) phi(||x-y||) <= max(f(x), f(y))`` on random triples.

    Without a modulus (``f.modulus`` is also ``None``) this is the plain
    quasiconvexity test. A stored witness triple of ``f`` is tried first.
    """
    mod = modulus if modulus is not None else f.modulus
    sampler = sampler or default_sampler(f, mod)
    rng = np.random.default_rng(seed)
    X, Y = sampler(rng, n_samples), sampler(rng, n_samples)
    lams = rng.uniform(size=n_samples)
    triples = []
    if f.witness is not None:
        triples.append(tuple(f.witness))
    triples += list(zip(X, Y, lams))
    first, count, worst, tested = None, 0, 0.0, 0
    for x, y, lam in triples:
        out = _uqc_violation(f, x, y, float(lam), mod, slack)
        if out is None:
            continue
        tested += 1
        viol, lhs, rhs = out
        if viol > 0:
            count += 1
            worst = max(worst, viol)
            if first is None:
                first = {"x": np.asarray(x).tolist(), "y": np.asarray(y).tolist(), "lam": float(lam),
                         "lhs": lhs, "rhs": rhs, "violation": viol}
    details = {"modulus": None if mod is None else {"rho": mod.rho, "q": mod.q, "interval": mod.interval}}
    if first is not None:
        first.update(violations=count, max_violation=worst)
        return CheckReport("uniform_quasiconvexity", False, tested, first, slack, details)
    return CheckReport("uniform_quasiconvexity", True, tested, None, slack, details)


def check_line_segment(f: ObjectiveFunction, x, y, modulus: Optional[Modulus] = None,
                       n_grid: int = 41, slack: float = DEFAULT_SLACK) -> CheckReport:
    """Uniform quasiconvexity of ``t -> f(y + t (x-y)/||x-y||)`` on ``[0, ||x-y||]``.

    All pairs of an ``n_grid`` point grid are combined with ``n_grid`` interior
    values of ``lam``.
    """
    x, y = as_vector(x), as_vector(y)
    L = float(np.linalg.norm(x - y))
    if L == 0.0:
        raise ValueError("line-segment check needs x != y")
    mod = modulus if modulus is not None else f.modulus
    u = (x - y) / L
    ts = np.linspace(0.0, L, n_grid)
    lams = np.linspace(0.0, 1.0, n_grid + 2)[1:-1]
    hv = np.array([f.func(y + t * u) for t in ts])
    first, count, tested = None, 0, 0
    for i in range(n_grid):
        for j in range(i + 1, n_grid):
            if not (np.isfinite(hv[i]) and np.isfinite(hv[j])):
                continue
            rhs = max(hv[i], hv[j])
            gap = _modulus_term(mod, ts[j] - ts[i])
            for lam in lams:
                t = lam * ts[i] + (1 - lam) * ts[j]
                lhs = f.func(y + t * u) + lam * (1 - lam) * gap
                tested += 1
                viol = lhs - rhs - _slack(slack, rhs)
                if viol > 0:
                    count += 1
                    if first is None:
                        first = {"t1": float(ts[i]), "t2": float(ts[j]), "lam": float(lam),
                                 "point": (y + t * u).tolist(), "lhs": lhs, "rhs": rhs, "violation": viol}
    if first is not None:
        first["violations"] = count
        return CheckReport("line_segment", False, tested, first, slack)
    return CheckReport("line_segment", True, tested, None, slack)


def check_differential(f: ObjectiveFunction, modulus: Optional[Modulus] = None, n_samples: int = 2000,
                       seed: int = 0, sampler: Optional[Sampler] = None,
                       slack: float = DEFAULT_SLACK) -> CheckReport:
    """First-order characterization and generalized monotonicity on sampled pairs.

    For ``f(x) <= f(y)``: ``<grad f(y), x - y> <= -phi(||y - x||)``; and
    ``<grad f(y), x - y> > -phi`` must imply ``<grad f(x), y - x> <= -phi``.
    """
    if f.grad is None:
        raise NotImplementedError(f"{f.label} has no gradient; differential check unsupported")
    mod = modulus if modulus is not None else f.modulus
    sampler = sampler or default_sampler(f, mod)
    rng = np.random.default_rng(seed)
    X, Y = sampler(rng, n_samples), sampler(rng, n_samples)
    pairs = []
    if f.known_minimizer is not None:
        pairs.append((f.known_minimizer, Y[0]))
    pairs += list(zip(X, Y))
    tested = 0
    for x, y in pairs:
        fx, fy = f.func(x), f.func(y)
        if fx > fy:
            x, y, fx, fy = y, x, fy, fx
        phi = _modulus_term(mod, float(np.linalg.norm(x - y)))
        gy = f.gradient(y)
        inner = float(gy @ (x - y))
        tol = _slack(slack, max(abs(inner), phi))
        back = float(f.gradient(x) @ (y - x))
        tested += 1
        # generalized monotonicity: the two inner products cannot both exceed -phi
        if inner > -phi + tol and back > -phi + tol:
            return CheckReport("differential", False, tested, {
                "x": x.tolist(), "y": y.tolist(), "inner": back, "neg_phi": -phi,
                "violation": min(inner, back) + phi, "part": "monotonicity"}, slack)
        if inner > -phi + tol:
            return CheckReport("differential", False, tested, {
                "x": x.tolist(), "y": y.tolist(), "inner": inner, "neg_phi": -phi,
                "violation": inner + phi, "part": "characterization"}, slack)
    return CheckReport("differential", True, tested, None, slack)


def check_growth(f: ObjectiveFunction, xbar=None, modulus: Optional[Modulus] = None, n_samples: int = 2000,
                 seed: int = 0, sampler: Optional[Sampler] = None, slack: float = DEFAULT_SLACK) -> CheckReport:
    """Quarter-modulus growth ``f(xbar) + phi(||y - xbar||)/4 <= f(y)`` around the minimizer."""
    xbar = f.known_minimizer if xbar is None else as_vector(xbar)
    if xbar is None:
        raise ValueError("growth check needs the minimizer")
    mod = modulus if modulus is not None else f.modulus
    if mod is None:
        raise ValueError("growth check needs a modulus")
    sampler = sampler or default_sampler(f, mod)
    rng = np.random.default_rng(seed)
    fbar = f.func(xbar)
    tested = 0
    for y in sampler(rng, n_samples):
        fy = f.func(y)
        if not np.isfinite(fy):
            continue
        tested += 1
        lhs = fbar + 0.25 * _modulus_term(mod, float(np.linalg.norm(y - xbar)))
        if lhs > fy + _slack(slack, fy):
            return CheckReport("growth", False, tested, {"y": y.tolist(), "lhs": lhs, "f_y": fy,
                                                         "violation": lhs - fy}, slack)
    return CheckReport("growth", True, tested, None, slack)


SUPERCOERCIVE_MIN_SLOPE = -0.05


def check_supercoercivity(f: ObjectiveFunction, m: float = 2, directions=None, radii=None,
                          n_directions: int = 16, seed: int = 0, r_max: float = 1e6) -> CheckReport:
    """Empirical ``liminf f(x)/||x||**m > 0`` along rays.

    Over the top decade of radii the ratio must stay positive and must not
    decay: the log-log slope of the ratio against the radius has to be at
    least -0.05 on every ray.
    """
    if m < 2:
        raise ValueError("supercoercivity order m must be >= 2")
    if f.dim is None:
        raise ValueError("dimension unknown")
    rng = np.random.default_rng(seed)
    if directions is None:
        directions = rng.standard_normal((n_directions, f.dim))
    D = np.atleast_2d(np.asarray(directions, dtype=float))
    D = D / np.linalg.norm(D, axis=1, keepdims=True)
    radii = np.logspace(0, math.log10(r_max), 61) if radii is None else np.asarray(radii, dtype=float)
    top = radii[radii >= radii[-1] / 10.0]
    worst_min, worst_slope = math.inf, math.inf
    wit = None
    for d in D:
        ratios = np.array([f.func(r * d) / r**m for r in top])
        lo = float(ratios.min())
        slope = -math.inf
        if lo > 0 and np.all(np.isfinite(ratios)):
            slope = float(np.polyfit(np.log(top), np.log(ratios), 1)[0])
        if lo <= 0 or slope < SUPERCOERCIVE_MIN_SLOPE:
            if wit is None or slope < wit["slope"]:
                wit = {"direction": d.tolist(), "radius": float(top[int(np.argmin(ratios))]),
                       "min_ratio": lo, "slope": slope}
        worst_min, worst_slope = min(worst_min, lo), min(worst_slope, slope)
    details = {"min_ratio": worst_min, "min_slope": worst_slope, "m": m}
    return CheckReport("supercoercivity", wit is None, len(D) * len(top), wit, 0.0, details)


def finite_difference_hessian(func, x: np.ndarray, h: float = 1e-4) -> np.ndarray:
    n = x.size
    H = np.empty((n, n))
    E = np.eye(n) * h
    for i in range(n):
        for j in range(i, n):
            v = (func(x + E[i] + E[j]) - func(x + E[i] - E[j])
                 - func(x - E[i] + E[j]) + func(x - E[i] - E[j])) / (4 * h * h)
            H[i, j] = H[j, i] = v
    return H


def check_local_strong_convexity(f: ObjectiveFunction, xbar=None, rho: Optional[float] = None,
                                 h: float = 1e-4, slack: float = 1e-6) -> CheckReport:
    """Finite-difference Hessian at the minimizer satisfies ``H >= rho I`` up to ``slack``."""
    xbar = f.known_minimizer if xbar is None else as_vector(xbar)
    if rho is None:
        if f.modulus is None:
            raise ValueError("pass rho or give f a modulus")
        rho = f.modulus.rho
    H = finite_difference_hessian(f.func, xbar, h)
    if not np.all(np.isfinite(H)):
        raise NotImplementedError("Hessian estimate is not finite; local strong convexity unsupported")
    w, V = np.linalg.eigh(H)
    details = {"min_eigenvalue": float(w[0]), "rho": rho}
    if w[0] < rho - slack:
        return CheckReport("local_strong_convexity", False, 1, {
            "xbar": xbar.tolist(), "min_eigenvalue": float(w[0]), "eigenvector": V[:, 0].tolist(),
            "rho": rho, "violation": rho - float(w[0])}, slack, details)
    return CheckReport("local_strong_convexity", True, 1, None, slack, details)


DEFAULT_LADDER = np.logspace(-2, -8, 13)
SMALL_STEP = 1e-5


def check_stationarity(f: ObjectiveFunction, C: ConvexSet, x, n_directions: int = 32, probe_steps=None,
                       seed: int = 0, slack: Optional[float] = None, probe_radius: float = 1e-3) -> CheckReport:
    """Estimate the lower Dini derivative along feasible directions at ``x``.

    For each direction the estimate is the minimum forward difference
    quotient over the steps of the ladder no larger than 1e-5; ``x`` is
    stationary iff every estimate is at least ``-slack`` (default
    ``1e-6 (1 + |f(x)|)``). A local-minimum probe of the neighbourhood is
    reported in ``details`` and does not affect the verdict.
    """
    x = as_vector(x, f.dim)
    if not C.contains(x):
        raise ValueError("stationarity check needs x in C")
    fx = f.func(x)
    slack = 1e-6 * (1.0 + abs(fx)) if slack is None else slack
    ladder = np.sort(np.asarray(DEFAULT_LADDER if probe_steps is None else probe_steps, dtype=float))[::-1]
    small = ladder[ladder <= SMALL_STEP]
    if small.size == 0:
        small = ladder[-max(1, ladder.size // 2):]
    rng = np.random.default_rng(seed)
    eye = np.eye(x.size)
    dirs = list(eye) + list(-eye)
    extra = rng.standard_normal((max(0, n_directions - len(dirs)), x.size))
    dirs += list(extra / np.linalg.norm(extra, axis=1, keepdims=True))
    estimates, worst = [], None
    for d in dirs:
        if not C.feasible_direction(x, d, probe=float(small[-1])):
            continue
        qs = [(f.func(x + t * d) - fx) / t for t in small if C.contains(x + t * d, 1e-12)]
        if not qs:
            continue
        est = float(min(qs))
        estimates.append(est)
        if worst is None or est < worst[0]:
            worst = (est, d)
    probe = rng.standard_normal((64, x.size))
    probe = x + probe_radius * probe / np.linalg.norm(probe, axis=1, keepdims=True)
    lower = [p for p in probe if C.contains(p, 1e-12) and f.func(p) < fx]
    details = {"directions": len(estimates), "min_estimate": None if worst is None else worst[0],
               "local_min_probe": not lower}
    if worst is not None and worst[0] < -slack:
        return CheckReport("stationarity", False, len(estimates), {
            "x": x.tolist(), "direction": worst[1].tolist(), "dini_estimate": worst[0],
            "violation": -worst[0]}, slack, details)
    return CheckReport("stationarity", True, len(estimates), None, slack, details)


MIN_FIT_SAMPLES = 10


def estimate_modulus(f: ObjectiveFunction, sampler: Optional[Sampler] = None, n_samples: int = 2000,
                     seed: int = 0, q_bounds: tuple = (0.1, 10.0)) -> Modulus:
    """Fit the largest power modulus ``rho t**q`` under the observed quasiconvexity slack.

    The fit is the lower envelope ``log rho + q log t <= log(s / (lam(1-lam)))``
    maximizing the summed fitted values, a linear program in ``(log rho, q)``.
    The result is checked on a fresh sample and shrunk until it passes.
    """
    sampler = sampler or default_sampler(f)
    rng = np.random.default_rng(seed)
    X, Y = sampler(rng, n_samples), sampler(rng, n_samples)
    lams = rng.uniform(0.05, 0.95, size=n_samples)
    logt, logs = [], []
    for x, y, lam in zip(X, Y, lams):
        fx, fy = f.func(x), f.func(y)
        if not (np.isfinite(fx) and np.isfinite(fy)):
            continue
        t = float(np.linalg.norm(x - y))
        s = max(fx, fy) - f.func(lam * x + (1 - lam) * y)
        if s < -1e-12 * (1 + abs(max(fx, fy))):
            raise ValueError(f"{f.label} is not quasiconvex: witness x={x.tolist()}, y={y.tolist()}, "
                             f"lam={lam:.6g}, violation {-s:.3g}")
        if t < 1e-3:
            continue
        if s <= 0:
            raise ValueError(f"{f.label}: zero slack at distance {t:.3g}; no positive power modulus fits")
        logt.append(math.log(t))
        logs.append(math.log(s / (lam * (1 - lam))))
    if len(logt) < MIN_FIT_SAMPLES:
        raise ValueError(f"insufficient data for a modulus fit ({len(logt)} usable samples)")
    lt, ls = np.array(logt), np.array(logs)
    res = linprog(c=[-lt.size, -lt.sum()], A_ub=np.column_stack([np.ones_like(lt), lt]), b_ub=ls,
                  bounds=[(None, None), q_bounds], method="highs")
    if not res.success:
        raise ValueError(f"modulus fit failed: {res.message}")
    a, q = float(res.x[0]), float(res.x[1])
    rho = math.exp(a) * (1 - 1e-6)
    check_seed = seed + 1
    for _ in range(40):
        mod = Modulus(rho, q)
        if check_uniform_quasiconvexity(f, sampler, mod, n_samples, check_seed).passed:
            return mod
        rho *= 0.9
    raise ValueError("fitted modulus does not validate on a fresh sample")
