"""Shared numeric types, the p-power regularizer and the norm-power constants."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

logger = logging.getLogger(__name__)

#: Branch switch point of :func:`kappa`, as tabulated (4 decimals).
T_HAT = 1.3214

#: Validity intervals a power lower bound may be declared on.
UNIT_INTERVAL = "[0,1)"
HALF_LINE = "[0,inf)"

_SQRT3 = math.sqrt(3.0)


class DomainError(ValueError):
    """An argument lies outside the domain of a formula."""


def as_vector(x, dim: Optional[int] = None) -> np.ndarray:
    """Return ``x`` as a finite 1-D float64 array (scalars become 1-vectors)."""
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"expected a non-empty 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite coordinates")
    if dim is not None and v.size != dim:
        raise ValueError(f"dimension mismatch: expected {dim}, got {v.size}")
    return v


def _pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = as_vector(x)
    y = as_vector(y)
    if x.size != y.size:
        raise ValueError(f"dimension mismatch: {x.size} != {y.size}")
    return x, y


@dataclass(frozen=True)
class Modulus:
    """Power lower bound ``phi(t) >= rho * t**q`` valid for ``t`` in ``interval``.

    ``phi`` is an optional exact evaluator. ``center``/``radius`` restrict the
    region of ``x``-space on which the modulus was derived (ball-local moduli).
    """

    rho: float
    q: float
    interval: str = HALF_LINE
    phi: Optional[Callable[[float], float]] = None
    center: Optional[np.ndarray] = None
    radius: Optional[float] = None

    def __post_init__(self):
        if not self.rho > 0:
            raise DomainError(f"modulus rho must be positive, got {self.rho}")
        if not self.q > 0:
            raise DomainError(f"modulus exponent q must be positive, got {self.q}")
        if self.interval not in (UNIT_INTERVAL, HALF_LINE):
            raise DomainError(f"unknown interval {self.interval!r}")
        if self.radius is not None and not self.radius > 0:
            raise DomainError("ball radius must be positive")

    def __call__(self, t: float) -> float:
        if self.phi is not None:
            return float(self.phi(t))
        return self.rho * float(t) ** self.q

    def power_bound(self, t: float) -> float:
        return self.rho * float(t) ** self.q

    def scaled(self, factor: float) -> "Modulus":
        """Modulus of ``factor * f`` (``factor > 0``)."""
        if not factor > 0:
            raise DomainError("scale factor must be positive")
        phi = None
        if self.phi is not None:
            inner = self.phi
            phi = lambda t: factor * inner(t)  # noqa: E731
        return Modulus(self.rho * factor, self.q, self.interval, phi, self.center, self.radius)

    def validate_phi(self, ts) -> bool:
        """Sampled check of the evaluator invariants on the grid ``ts``."""
        if self.phi is None:
            return True
        ts = np.sort(np.asarray(ts, dtype=float))
        if self.interval == UNIT_INTERVAL:
            ts = ts[ts < 1.0]
        vals = np.array([self.phi(t) for t in ts])
        if abs(self.phi(0.0)) > 0:
            return False
        if np.any(np.diff(vals) < -1e-15 * (1 + np.abs(vals[1:]))):
            return False
        return bool(np.all(vals >= self.rho * ts**self.q * (1 - 1e-12)))


@dataclass(frozen=True)
class ProxParams:
    """Proximal order ``p > 1`` and regularization weight ``gamma > 0``."""

    p: float
    gamma: float

    def __post_init__(self):
        if not self.p > 1:
            raise DomainError(f"proximal order p must exceed 1, got {self.p}")
        if not self.gamma > 0:
            raise DomainError(f"gamma must be positive, got {self.gamma}")


def power_penalty(x, y, params: ProxParams) -> float:
    """``(1/(p*gamma)) * ||x - y||**p``."""
    x, y = _pair(x, y)
    return float(np.linalg.norm(x - y)) ** params.p / (params.p * params.gamma)


def power_penalty_grad(x, y, params: ProxParams) -> np.ndarray:
    """Gradient of :func:`power_penalty` with respect to ``y``.

    Uses the ``0/0 = 0`` convention, so the result is exactly zero at ``y == x``
    for every ``p > 1``.
    """
    x, y = _pair(x, y)
    d = y - x
    r = float(np.linalg.norm(d))
    if r == 0.0:
        return np.zeros_like(d)
    return (r ** (params.p - 2.0) / params.gamma) * d


def _kappa_low(t: float) -> float:
    return (2.0 + _SQRT3) * (t - 1.0) / 16.0


def _kappa_high(t: float) -> float:
    return (2.0 + _SQRT3) / 16.0 * (1.0 - (3.0 - _SQRT3) ** (1.0 - t))


def kappa(t: float) -> float:
    """Strong-monotonicity constant of ``||.||**(t-2) .`` on balls, ``1 < t < 2``.

    At ``t == T_HAT`` both branches apply; the smaller value is returned.
    """
    t = float(t)
    if not 1.0 < t < 2.0:
        raise DomainError(f"kappa is defined on (1, 2), got {t}")
    if t < T_HAT:
        return _kappa_low(t)
    if t > T_HAT:
        return _kappa_high(t)
    low, high = _kappa_low(t), _kappa_high(t)
    logger.debug("kappa branches disagree at t_hat: %.6g vs %.6g; using min", low, high)
    return min(low, high)


def t_hat_equation(t: float) -> float:
    """Residual of the equation whose root on (1, 2] defines the kappa switch point."""
    return t * (t - 1.0) / 2.0 - (1.0 - (1.0 + (2.0 - _SQRT3) * t / (t - 1.0)) ** (1.0 - t))


def solve_t_hat(xtol: float = 1e-12) -> float:
    return brentq(t_hat_equation, 1.1, 1.9, xtol=xtol)


def sigma_hat(p: float) -> float:
    """Uniform-convexity coefficient ``(1/2)**((3p-2)/2)`` of ``||.||**p``, ``p >= 2``."""
    p = float(p)
    if not p >= 2.0:
        raise DomainError(f"sigma_hat requires p >= 2, got {p}")
    return 0.5 ** ((3.0 * p - 2.0) / 2.0)
