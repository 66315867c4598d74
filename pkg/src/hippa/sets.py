"""Closed convex feasible sets with exact Euclidean projections."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import as_vector

WHOLE = "whole_space"
BALL = "ball"
BOX = "box"
HALFSPACE = "halfspace"


@dataclass(frozen=True, eq=False)
class ConvexSet:
    """One of four closed convex sets with a closed-form projection.

    Build instances through :func:`whole_space`, :func:`ball`, :func:`box` or
    :func:`halfspace`. ``dim`` is ``None`` for a dimension-agnostic whole space.
    """

    kind: str
    dim: Optional[int] = None
    center: Optional[np.ndarray] = None
    radius: Optional[float] = None
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    normal: Optional[np.ndarray] = None
    offset: Optional[float] = None
    _normal_sq: float = field(default=0.0, repr=False)

    def _check(self, x) -> np.ndarray:
        return as_vector(x, self.dim)

    @property
    def is_whole(self) -> bool:
        return self.kind == WHOLE

    def distance(self, x) -> float:
        x = self._check(x)
        return float(np.linalg.norm(x - self.project(x)))

    def contains(self, x, tol: float = 1e-9) -> bool:
        return self.distance(x) <= tol

    def project(self, x) -> np.ndarray:
        x = self._check(x)
        if self.kind == WHOLE:
            return x.copy()
        if self.kind == BALL:
            d = x - self.center
            r = float(np.linalg.norm(d))
            if r <= self.radius:
                return x.copy()
            return self.center + (self.radius / r) * d
        if self.kind == BOX:
            return np.clip(x, self.lower, self.upper)
        viol = float(self.normal @ x) - self.offset
        if viol <= 0.0:
            return x.copy()
        return x - (viol / self._normal_sq) * self.normal

    def feasible_direction(self, x, d, probe: float = 1e-6) -> bool:
        """Whether ``x + probe*d`` stays in the set (a one-step proxy for D_C(x))."""
        x = self._check(x)
        d = as_vector(d, x.size)
        if not self.contains(x, 1e-9):
            raise ValueError("feasible_direction requires a feasible base point")
        if self.kind == WHOLE:
            return True
        return self.contains(x + probe * d, tol=1e-12)

    def sample(self, rng: np.random.Generator, n: int, dim: Optional[int] = None,
               scale: float = 1.0) -> np.ndarray:
        """Draw ``n`` points of the set (whole space and halfspaces: a box of half-width ``scale``)."""
        dim = self.dim if self.dim is not None else dim
        if dim is None:
            raise ValueError("dimension needed to sample a dimension-agnostic set")
        if self.kind == BALL:
            g = rng.standard_normal((n, dim))
            g /= np.linalg.norm(g, axis=1, keepdims=True)
            r = self.radius * rng.uniform(size=(n, 1)) ** (1.0 / dim)
            return self.center + r * g
        if self.kind == BOX:
            return rng.uniform(self.lower, self.upper, size=(n, dim))
        pts = rng.uniform(-scale, scale, size=(n, dim))
        if self.kind == HALFSPACE:
            pts = np.array([self.project(p) for p in pts])
        return pts

    def describe(self) -> dict:
        out: dict = {"kind": self.kind, "dim": self.dim}
        if self.kind == BALL:
            out.update(center=self.center.tolist(), radius=self.radius)
        elif self.kind == BOX:
            out.update(lower=self.lower.tolist(), upper=self.upper.tolist())
        elif self.kind == HALFSPACE:
            out.update(a=self.normal.tolist(), beta=self.offset)
        return out


def whole_space(dim: Optional[int] = None) -> ConvexSet:
    return ConvexSet(WHOLE, dim)


def ball(center, radius: float) -> ConvexSet:
    c = as_vector(center)
    if not radius > 0:
        raise ValueError("ball radius must be positive")
    return ConvexSet(BALL, c.size, center=c, radius=float(radius))


def box(lower, upper) -> ConvexSet:
    lo, up = as_vector(lower), as_vector(upper)
    if lo.size != up.size:
        raise ValueError("box bounds have different dimensions")
    if np.any(lo > up):
        raise ValueError("box requires lower <= upper componentwise")
    return ConvexSet(BOX, lo.size, lower=lo, upper=up)


def halfspace(a, beta: float) -> ConvexSet:
    """The set ``{x : <a, x> <= beta}``."""
    a = as_vector(a)
    nsq = float(a @ a)
    if nsq == 0.0:
        raise ValueError("halfspace normal must be nonzero")
    return ConvexSet(HALFSPACE, a.size, normal=a, offset=float(beta), _normal_sq=nsq)
