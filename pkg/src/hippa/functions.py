"""Objective functions with declared moduli, calculus combinators and counterexamples."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .core import (
    HALF_LINE,
    UNIT_INTERVAL,
    DomainError,
    Modulus,
    as_vector,
    kappa,
    sigma_hat,
)
from .sets import ConvexSet

FULL_RANK_RTOL = 1e-10


@dataclass(frozen=True)
class RadialProfile:
    """``f(x) = value(||x - center||)`` with ``value`` nondecreasing on ``r >= 0``."""

    center: np.ndarray
    value: Callable[[float], float]
    deriv: Optional[Callable[[float], float]] = None


@dataclass(frozen=True)
class Quadratic:
    """``f(x) = 0.5 x'Hx + c'x + const``."""

    H: np.ndarray
    c: np.ndarray
    const: float = 0.0


@dataclass(frozen=True, eq=False)
class ObjectiveFunction:
    """An extended-real objective ``R^n -> R u {+inf}`` and what is known about it.

    ``radial`` and ``quadratic`` are structural hints used by the prox solver;
    ``witness`` holds a triple ``(x, y, lam)`` refuting quasiconvexity when
    ``quasiconvex`` is ``False``.
    """

    func: Callable[[np.ndarray], float]
    label: str
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    domain: Optional[ConvexSet] = None
    modulus: Optional[Modulus] = None
    known_minimizer: Optional[np.ndarray] = None
    known_inf: Optional[float] = None
    dim: Optional[int] = None
    radial: Optional[RadialProfile] = None
    quadratic: Optional[Quadratic] = None
    quasiconvex: Optional[bool] = None
    witness: Optional[tuple] = None

    def __call__(self, x) -> float:
        return float(self.func(as_vector(x, self.dim)))

    def gradient(self, x) -> np.ndarray:
        if self.grad is None:
            raise NotImplementedError(f"{self.label} has no gradient")
        return np.asarray(self.grad(as_vector(x, self.dim)), dtype=float)

    @property
    def has_gradient(self) -> bool:
        return self.grad is not None


@dataclass(frozen=True, eq=False)
class UniformlyRegularMap:
    """A map ``T`` with ``||T(x) - T(y)|| >= theta(||x - y||)``.

    ``vjp(x, v)`` returns ``J_T(x)' v`` and enables gradients of compositions.
    """

    apply: Callable[[np.ndarray], np.ndarray]
    regularity_modulus: Modulus
    is_homogeneous_additive: bool
    vjp: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    label: str = "T"

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.apply(as_vector(x)), dtype=float)

    def check_homogeneous_additive(self, points: np.ndarray, lams, tol: float = 1e-10) -> bool:
        pts = np.asarray(points, dtype=float)
        for x, y, lam in zip(pts[0::2], pts[1::2], lams):
            lhs = self(lam * x + (1 - lam) * y)
            rhs = lam * self(x) + (1 - lam) * self(y)
            if np.linalg.norm(lhs - rhs) > tol * (1 + np.linalg.norm(rhs)):
                return False
        return True

    def check_regularity(self, points: np.ndarray, tol: float = 1e-12) -> bool:
        pts = np.asarray(points, dtype=float)
        for x, y in zip(pts[0::2], pts[1::2]):
            gap = np.linalg.norm(self(x) - self(y))
            if gap < self.regularity_modulus(np.linalg.norm(x - y)) - tol:
                return False
        return True


def identity_map(dim: int) -> UniformlyRegularMap:
    return UniformlyRegularMap(
        apply=lambda x: x,
        regularity_modulus=Modulus(1.0, 1.0, phi=lambda t: t),
        is_homogeneous_additive=True,
        vjp=lambda x, v: v,
        label=f"identity[{dim}]",
    )


def affine_map(A, b) -> UniformlyRegularMap:
    """``x -> Ax - b``; regular with modulus ``sigma_min * t`` when ``A`` has full column rank."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = as_vector(b, A.shape[0])
    s = np.linalg.svd(A, compute_uv=False)
    smin = float(s[-1]) if A.shape[0] >= A.shape[1] else 0.0
    if smin <= FULL_RANK_RTOL * float(s[0]):
        raise ValueError(
            f"A ({A.shape[0]}x{A.shape[1]}) is not of full column rank "
            f"(sigma_min={smin:.3g}, sigma_max={s[0]:.3g}); x -> Ax-b is not uniformly regular"
        )
    return UniformlyRegularMap(
        apply=lambda x: A @ x - b,
        regularity_modulus=Modulus(smin, 1.0, phi=lambda t: smin * t),
        is_homogeneous_additive=True,
        vjp=lambda x, v: A.T @ v,
        label="affine",
    )


def _norm_power_modulus(q: float, radius: Optional[float], dim: int) -> Optional[Modulus]:
    if q <= 1.0:
        return None
    if q < 2.0:
        r = 1.0 if radius is None else float(radius)
        rho = q * kappa(q) * r ** (q - 2.0) / 2.0
        return Modulus(rho, 2.0, HALF_LINE, center=np.zeros(dim), radius=r)
    if q == 2.0:
        return Modulus(1.0, 2.0, HALF_LINE, phi=lambda t: t * t)
    return Modulus(sigma_hat(q), q, HALF_LINE)


def norm_power(q: float, dim: int, radius_hint: Optional[float] = None) -> ObjectiveFunction:
    """``f(x) = ||x||**q`` with its norm-power modulus.

    For ``q`` in (1, 2) the modulus is only valid on the ball of radius
    ``radius_hint`` (default 1); for ``q <= 1`` no modulus is declared.
    """
    q = float(q)
    if not q > 0:
        raise DomainError(f"norm_power requires q > 0, got {q}")
    if dim < 1:
        raise DomainError("dimension must be positive")

    def func(x):
        return float(np.linalg.norm(x)) ** q

    def grad(x):
        r = float(np.linalg.norm(x))
        if r == 0.0:
            return np.zeros_like(x)
        return q * r ** (q - 2.0) * x

    def dvalue(r):
        if r == 0.0:
            return 0.0 if q > 1 else (q if q == 1 else math.inf)
        return q * r ** (q - 1.0)

    quad = Quadratic(2.0 * np.eye(dim), np.zeros(dim)) if q == 2.0 else None
    return ObjectiveFunction(
        func=func,
        grad=grad,
        label=f"norm_power(q={q:g},dim={dim})",
        modulus=_norm_power_modulus(q, radius_hint, dim),
        known_minimizer=np.zeros(dim),
        known_inf=0.0,
        dim=dim,
        radial=RadialProfile(np.zeros(dim), lambda r: r**q, dvalue),
        quadratic=quad,
        quasiconvex=True,
    )


def compose(T: UniformlyRegularMap, h: ObjectiveFunction, convex_pair: bool = False,
            dim: Optional[int] = None, known_minimizer=None, known_inf=None,
            region: Optional[tuple] = None) -> ObjectiveFunction:
    """``x -> h(T(x))`` with modulus ``phi_h(theta_T(t))``.

    ``(T, h)`` must be a convex pair: guaranteed when ``T`` is homogeneous
    additive, otherwise asserted by passing ``convex_pair=True``. A ball-local
    modulus of ``h`` needs the caller to supply the matching ``region`` in
    x-space as ``(center, radius)``.
    """
    if h.modulus is None or T.regularity_modulus is None:
        raise ValueError("compose needs a modulus on h and a regularity modulus on T")
    if not (T.is_homogeneous_additive or convex_pair):
        raise ValueError("(T, h) is not known to be a convex pair; pass convex_pair=True to assert it")
    mh, mt = h.modulus, T.regularity_modulus
    center, radius = None, None
    if mh.radius is not None:
        if region is None:
            raise ValueError("h has a ball-local modulus; pass region=(center, radius) in x-space")
        center, radius = as_vector(region[0]), float(region[1])
    interval = UNIT_INTERVAL if UNIT_INTERVAL in (mh.interval, mt.interval) else HALF_LINE
    modulus = Modulus(
        mh.rho * mt.rho**mh.q,
        mh.q * mt.q,
        interval,
        phi=lambda t: mh(mt(t)),
        center=center,
        radius=radius,
    )

    def func(x):
        return h.func(T.apply(x))

    grad = None
    if h.grad is not None and T.vjp is not None:
        def grad(x):
            return T.vjp(x, h.grad(T.apply(x)))

    return ObjectiveFunction(
        func=func,
        grad=grad,
        label=f"{h.label}o{T.label}",
        modulus=modulus,
        known_minimizer=None if known_minimizer is None else as_vector(known_minimizer),
        known_inf=known_inf,
        dim=dim,
        quasiconvex=True,
    )


def affine_norm_power(A, b, q: float, radius_hint: Optional[float] = None) -> ObjectiveFunction:
    """``f(x) = ||Ax - b||**q`` for ``A`` of full column rank."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    m, n = A.shape
    T = affine_map(A, b)
    b = as_vector(b, m)
    x_ls = np.linalg.lstsq(A, b, rcond=None)[0]
    res = float(np.linalg.norm(A @ x_ls - b))
    outer = norm_power(q, m, radius_hint)
    region = None
    if outer.modulus is not None and outer.modulus.radius is not None:
        smax = float(np.linalg.norm(A, 2))
        r = outer.modulus.radius
        if r <= res:
            outer = replace(outer, modulus=None)
        else:
            region = (x_ls, (r - res) / smax)
    if outer.modulus is None:
        f = ObjectiveFunction(
            func=lambda x: outer.func(A @ x - b),
            grad=lambda x: A.T @ outer.grad(A @ x - b),
            label="", dim=n, quasiconvex=True,
        )
    else:
        f = compose(T, outer, dim=n, region=region)
    quad = None
    if q == 2.0:
        quad = Quadratic(2.0 * A.T @ A, -2.0 * A.T @ b, float(b @ b))
    return replace(
        f,
        label=f"affine_norm_power(q={q:g},m={m},n={n})",
        known_minimizer=x_ls,
        known_inf=res**q,
        quadratic=quad,
    )


QUOTIENT_CASES = ("affine", "nonneg_concave", "nonpos_convex")


def quotient(h: ObjectiveFunction, g, case: str, M: float,
             g_grad: Optional[Callable] = None, known_minimizer=None,
             known_inf: Optional[float] = None) -> ObjectiveFunction:
    """``h / g`` with modulus ``phi_h / M``.

    ``h`` must be uniformly convex; ``g`` finite, positive and at most ``M``,
    with ``case`` naming which of the three structural hypotheses holds.
    """
    if case not in QUOTIENT_CASES:
        raise ValueError(f"case must be one of {QUOTIENT_CASES}, got {case!r}")
    if not M > 0:
        raise DomainError("M must be positive")
    if h.modulus is None:
        raise ValueError("quotient needs a uniform-convexity modulus on h")
    if isinstance(g, ObjectiveFunction):
        g_grad = g_grad or g.grad
        g = g.func
    bound = float(M)

    def gval(x):
        v = float(g(x))
        if not v > 0:
            raise ValueError(f"denominator g evaluated to {v} <= 0")
        if v > bound * (1 + 1e-12):
            raise ValueError(f"denominator g evaluated to {v} > M={bound}")
        return v

    def func(x):
        hv = h.func(x)
        if hv == math.inf:
            return math.inf
        return hv / gval(x)

    grad = None
    if h.grad is not None and g_grad is not None:
        def grad(x):
            gv = gval(x)
            return (h.grad(x) * gv - h.func(x) * np.asarray(g_grad(x))) / gv**2

    return ObjectiveFunction(
        func=func,
        grad=grad,
        label=f"quotient({h.label},{case},M={bound:g})",
        domain=h.domain,
        modulus=h.modulus.scaled(1.0 / bound),
        known_minimizer=None if known_minimizer is None else as_vector(known_minimizer),
        known_inf=known_inf,
        dim=h.dim,
        quasiconvex=True,
    )


def shift_add(f: ObjectiveFunction, a: float) -> ObjectiveFunction:
    a = float(a)
    radial = None
    if f.radial is not None:
        rv = f.radial.value
        radial = replace(f.radial, value=lambda r: rv(r) + a)
    quad = None if f.quadratic is None else replace(f.quadratic, const=f.quadratic.const + a)
    return replace(
        f,
        func=lambda x: f.func(x) + a,
        label=f"({f.label}+{a:g})",
        known_inf=None if f.known_inf is None else f.known_inf + a,
        radial=radial,
        quadratic=quad,
    )


def scale(f: ObjectiveFunction, b: float) -> ObjectiveFunction:
    b = float(b)
    if not b > 0:
        raise DomainError(f"scale factor must be positive, got {b}")
    radial = None
    if f.radial is not None:
        rv, rd = f.radial.value, f.radial.deriv
        radial = replace(f.radial, value=lambda r: b * rv(r),
                         deriv=None if rd is None else (lambda r: b * rd(r)))
    quad = None
    if f.quadratic is not None:
        qd = f.quadratic
        quad = Quadratic(b * qd.H, b * qd.c, b * qd.const)
    grad = None
    if f.grad is not None:
        fg = f.grad
        grad = lambda x: b * fg(x)  # noqa: E731
    return replace(
        f,
        func=lambda x: b * f.func(x),
        grad=grad,
        label=f"{b:g}*{f.label}",
        modulus=None if f.modulus is None else f.modulus.scaled(b),
        known_inf=None if f.known_inf is None else b * f.known_inf,
        radial=radial,
        quadratic=quad,
    )


def restrict(f: ObjectiveFunction, C: ConvexSet) -> ObjectiveFunction:
    """``f + indicator(C)``."""
    if C.is_whole:
        return f
    inner = f.func

    def func(x):
        if not C.contains(x, 1e-12):
            return math.inf
        return inner(x)

    xm = f.known_minimizer
    keep = xm is not None and C.contains(xm, 1e-12)
    return replace(
        f,
        func=func,
        label=f"{f.label}|C",
        domain=C,
        known_minimizer=xm if keep else None,
        known_inf=f.known_inf if keep else None,
        dim=f.dim if f.dim is not None else C.dim,
    )


# --- counterexamples -------------------------------------------------------

def bumped_square(shift: float = 0.0) -> ObjectiveFunction:
    """``x -> phi(x - shift)`` where ``phi(x) = x**2`` except ``phi(0) = -1`` (1-D)."""
    s = float(shift)

    def func(x):
        z = float(x[0]) - s
        return -1.0 if z == 0.0 else z * z

    return ObjectiveFunction(
        func=func,
        label=f"bumped_square(shift={s:g})",
        known_minimizer=np.array([s]),
        known_inf=-1.0,
        dim=1,
        quasiconvex=True,
    )


def sum_shifted() -> ObjectiveFunction:
    """``phi(x-1) + phi(x+1)``: a sum of uniformly quasiconvex terms that is not quasiconvex."""
    left, right = bumped_square(1.0), bumped_square(-1.0)
    return ObjectiveFunction(
        func=lambda x: left.func(x) + right.func(x),
        grad=lambda x: 4.0 * x,
        label="counterexample:sum_shifted",
        known_minimizer=np.zeros(1),
        known_inf=2.0,
        dim=1,
        quasiconvex=False,
        # value 3 at x=1 and 2 at x=0, but 3.62 at 0.9
        witness=(np.array([1.0]), np.array([0.0]), 0.9),
    )


def lq_sum(q: float = 0.5, dim: int = 2) -> ObjectiveFunction:
    """``sum_i |x_i|**q`` for ``q`` in (0, 1): not quasiconvex for ``dim >= 2``."""
    q = float(q)
    if not 0 < q < 1 or dim < 2:
        raise DomainError("lq_sum counterexample needs 0 < q < 1 and dim >= 2")
    e1, e2 = np.zeros(dim), np.zeros(dim)
    e1[0], e2[1] = 1.0, 1.0
    return ObjectiveFunction(
        func=lambda x: float(np.sum(np.abs(x) ** q)),
        label=f"counterexample:lq_sum(q={q:g})",
        known_minimizer=np.zeros(dim),
        known_inf=0.0,
        dim=dim,
        quasiconvex=False,
        witness=(e1, e2, 0.5),
    )


def lq_norm(q: float = 0.5, dim: int = 2) -> ObjectiveFunction:
    """``(sum_i |x_i|**q)**(1/q)`` for ``q`` in (0, 1)."""
    q = float(q)
    if not 0 < q < 1 or dim < 2:
        raise DomainError("lq_norm counterexample needs 0 < q < 1 and dim >= 2")
    e1, e2 = np.zeros(dim), np.zeros(dim)
    e1[0], e2[1] = 1.0, 1.0
    return ObjectiveFunction(
        func=lambda x: float(np.sum(np.abs(x) ** q)) ** (1.0 / q),
        label=f"counterexample:lq_norm(q={q:g})",
        known_minimizer=np.zeros(dim),
        known_inf=0.0,
        dim=dim,
        quasiconvex=False,
        witness=(e1, e2, 0.5),
    )


def counterexample_suite(q: float = 0.5) -> list[ObjectiveFunction]:
    return [sum_shifted(), lq_sum(q), lq_norm(q)]
