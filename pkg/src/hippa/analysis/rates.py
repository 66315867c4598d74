"""Empirical convergence rates, their theoretical bounds and the per-iterate inequalities."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..algorithm import Trajectory
from ..core import DomainError, Modulus, as_vector, kappa, sigma_hat
from .report import CheckReport

logger = logging.getLogger(__name__)

ERROR_FLOOR = 1e-12
MIN_USABLE = 4
SUPERLINEAR_SLOPE = 1.2
MAX_RESIDUAL = 0.1
RATIO_BAND = 0.10
# a tail whose 1 - ratio shrinks by a quarter across the window is drifting towards 1
DRIFT_SHRINK = 0.75

LINEAR = "linear"
SUPERLINEAR = "superlinear"
INCONCLUSIVE = "inconclusive"

# rows of the rate table
P_BELOW_2 = "p_in_(1,2)"
P_EQ_Q_EQ_2 = "p=q=2"
P_EQ_Q_ABOVE_2 = "p=q>2"
P_ABOVE_Q = "p>q"
CASES = (P_BELOW_2, P_EQ_Q_EQ_2, P_EQ_Q_ABOVE_2, P_ABOVE_Q)


@dataclass
class RateEstimate:
    regime: str
    linear_factor: Optional[float] = None
    superlinear_degree: Optional[float] = None
    tail_window: Optional[tuple] = None
    residual: Optional[float] = None
    constant: Optional[float] = None
    diagnostics: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "regime": self.regime,
            "linear_factor": self.linear_factor,
            "superlinear_degree": self.superlinear_degree,
            "tail_window": None if self.tail_window is None else list(self.tail_window),
            "residual": self.residual,
            "constant": self.constant,
            "diagnostics": list(self.diagnostics),
        }


def _fit(le0: np.ndarray, le1: np.ndarray) -> tuple[float, float, float]:
    A = np.column_stack([le0, np.ones_like(le0)])
    (slope, icpt), *_ = np.linalg.lstsq(A, le1, rcond=None)
    rms = float(np.sqrt(np.mean((A @ np.array([slope, icpt]) - le1) ** 2)))
    return float(slope), float(icpt), rms


def _drifts_to_one(ratios: np.ndarray) -> bool:
    gaps = 1.0 - ratios
    return bool(ratios.size >= 2 and gaps[0] > 0 and gaps[-1] < DRIFT_SHRINK * gaps[0])


def estimate_rate_from_errors(errors, floor: float = ERROR_FLOOR) -> RateEstimate:
    """Classify an error sequence ``e_k`` as linear, superlinear or inconclusive.

    Only the leading run of errors above ``floor`` is used. The tail window is
    the last half of the usable consecutive pairs (at least two). The linear
    factor is the geometric mean of the tail ratios; the superlinear degree is
    the least-squares slope of ``log e_{k+1}`` on ``log e_k`` over the window.
    A tail whose ratios creep towards 1 is reported as inconclusive with a
    sublinear diagnostic rather than linear.
    """
    e = np.asarray(errors, dtype=float)
    n = 0
    while n < e.size and e[n] > floor:
        n += 1
    e = e[:n]
    if n < MIN_USABLE:
        return RateEstimate(INCONCLUSIVE, diagnostics=[f"only {n} errors above the {floor:g} floor; need {MIN_USABLE}"])
    pairs = n - 1
    w = max(2, (pairs + 1) // 2)
    start = pairs - w
    e0, e1 = e[start:pairs], e[start + 1:n]
    ratios = e1 / e0
    factor = float(np.exp(np.mean(np.log(ratios))))
    le0, le1 = np.log(e0), np.log(e1)
    diag = []
    if np.ptp(le0) < 1e-12:
        return RateEstimate(INCONCLUSIVE, linear_factor=factor, tail_window=(start, n - 1),
                            diagnostics=["errors do not decrease"])
    slope, icpt, rms = _fit(le0, le1)
    est = RateEstimate(INCONCLUSIVE, tail_window=(start, n - 1), residual=rms)
    if slope >= SUPERLINEAR_SLOPE and rms < MAX_RESIDUAL:
        est.regime = SUPERLINEAR
        est.superlinear_degree = slope
        est.constant = float(np.exp(icpt))
    elif factor < 1.0 and np.all(np.abs(ratios - factor) <= RATIO_BAND * factor) and not _drifts_to_one(ratios):
        est.regime = LINEAR
        est.linear_factor = factor
    else:
        est.linear_factor = factor if factor < 1.0 else None
        est.superlinear_degree = slope if slope > 1.0 else None
        diag.append(f"tail ratios {ratios.min():.4g}..{ratios.max():.4g}, slope {slope:.3g}, rms {rms:.3g}")
    if _drifts_to_one(ratios) or (ratios.size >= 2 and ratios[-1] > ratios[0] and ratios[-1] > 0.9):
        diag.append("ratios increase towards 1: convergence may be sublinear")
    est.diagnostics = diag
    return est


def estimate_rate(traj: Trajectory, xbar) -> RateEstimate:
    return estimate_rate_from_errors(traj.errors(xbar))


def theoretical_rate(case: str, p: float, q: float, rho: float, gamma_min: float,
                     sigma_p: Optional[float] = None) -> float:
    """Rate bound of one row of the rate table.

    Rows ``p_in_(1,2)``, ``p=q=2`` and ``p=q>2`` return a linear factor; row
    ``p>q`` returns the superlinear degree ``(p-1)/(q-1)``.
    """
    if case not in CASES:
        raise ValueError(f"unknown case {case!r}; expected one of {CASES}")
    if not rho > 0 or not gamma_min > 0:
        raise ValueError("rho and gamma_min must be positive")
    if case == P_BELOW_2:
        if not 1 < p < 2:
            raise ValueError(f"case {case} needs 1 < p < 2, got p={p}")
        if sigma_p is None or not sigma_p > 0:
            raise ValueError(f"case {case} needs a positive sigma_p")
        bound = 2.0 / (p * rho * gamma_min + sigma_p)
        if bound >= 1.0:
            warnings.warn(f"rate bound {bound:.4g} >= 1 is vacuous for these parameters", RuntimeWarning,
                          stacklevel=2)
        return bound
    if case == P_EQ_Q_EQ_2:
        if p != 2 or q != 2:
            raise ValueError(f"case {case} needs p = q = 2, got p={p}, q={q}")
        return 1.0 / (1.0 + gamma_min * rho)
    if case == P_EQ_Q_ABOVE_2:
        if not (p == q and p > 2):
            raise ValueError(f"case {case} needs p = q > 2, got p={p}, q={q}")
        if not gamma_min > 1.0 / rho:
            raise ValueError(f"case {case} needs gamma_min > 1/rho = {1.0 / rho:.6g}")
        return (p / (p * gamma_min * rho + sigma_hat(p))) ** (1.0 / (p - 1.0))
    if not (p > q >= 2):
        raise ValueError(f"case {case} needs p > q >= 2, got p={p}, q={q}")
    return (p - 1.0) / (q - 1.0)


def classify_case(p: float, q: float) -> str:
    if 1 < p < 2:
        return P_BELOW_2
    if p == q == 2:
        return P_EQ_Q_EQ_2
    if p == q and p > 2:
        return P_EQ_Q_ABOVE_2
    if p > q >= 2:
        return P_ABOVE_Q
    raise ValueError(f"no rate row for p={p}, q={q}")


def sigma_p_for_run(p: float, traj: Trajectory, xbar) -> float:
    """``kappa(p) * r**(p-2) / 2`` with ``r`` twice the largest iterate distance to ``xbar``."""
    r = 2.0 * float(np.max(traj.errors(xbar)))
    if r == 0.0:
        raise DomainError("sigma_p needs a run that leaves the minimizer")
    return kappa(p) * r ** (p - 2.0) / 2.0


def _phi_over_t(modulus: Modulus, t: float) -> float:
    if t == 0.0:
        return 0.0
    return modulus(t) / t


def verify_iterate_inequality(traj: Trajectory, xbar, modulus: Modulus, p: float,
                              sigma_p: Optional[float] = None, slack: float = 1e-8) -> CheckReport:
    """Check the one-step error inequality behind the linear rates on every step.

    With ``e = ||xbar - x_k||``, ``e+ = ||xbar - x_{k+1}||`` and ``gamma = gamma_k``:

    * ``p == 2``: ``gamma*phi(e+)/e+ + e+ <= e``
    * ``p > 2``: ``gamma*phi(e+)/e+ + (sigma_hat(p)/p)*e+**(p-1) <= e**(p-1)``
    * ``1 < p < 2``: ``(p*gamma/2)*phi(e+)/e+ + (sigma_p/2)*e+ <= e``, from the
      first step whose length is below 1 onwards

    Each right-hand side gets a relative slack.
    """
    xbar = as_vector(xbar)
    e = traj.errors(xbar)
    steps = np.asarray(traj.step_norms)
    start = 0
    if 1 < p < 2:
        if sigma_p is None:
            sigma_p = sigma_p_for_run(p, traj, xbar) if e.max() > 0 else 1.0
        below = np.nonzero(steps < 1.0)[0]
        start = int(below[0]) if below.size else len(steps)
    sh = sigma_hat(p) if p > 2 else None
    checked = 0
    worst = (-math.inf, None)
    for k in range(start, len(steps)):
        ek, ek1, g = e[k], e[k + 1], traj.gammas[k]
        term = _phi_over_t(modulus, ek1)
        if p == 2:
            lhs, rhs = g * term + ek1, ek
        elif p > 2:
            lhs, rhs = g * term + (sh / p) * ek1 ** (p - 1), ek ** (p - 1)
        else:
            lhs, rhs = (p * g / 2) * term + (sigma_p / 2) * ek1, ek
        checked += 1
        excess = lhs - rhs * (1 + slack)
        if excess > worst[0]:
            worst = (excess, k, lhs, rhs)
    if worst[1] is not None and worst[0] > 0:
        _, k, lhs, rhs = worst
        return CheckReport("iterate_inequality", False, checked, slack_used=slack,
                           witness={"k": k, "x_k": traj.iterates[k].tolist(),
                                    "x_k1": traj.iterates[k + 1].tolist(),
                                    "lhs": lhs, "rhs": rhs, "violation": lhs - rhs})
    return CheckReport("iterate_inequality", True, checked, slack_used=slack,
                       details={"start_index": start})
