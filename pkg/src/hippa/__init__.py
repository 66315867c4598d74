"""High-order proximal-point methods for uniformly quasiconvex minimization."""

from .algorithm import GammaSchedule, RunConfig, Trajectory, audit_trajectory, iteration_bound, run
from .core import DomainError, Modulus, ProxParams, kappa, power_penalty, sigma_hat
from .functions import (
    ObjectiveFunction,
    affine_norm_power,
    compose,
    counterexample_suite,
    norm_power,
    quotient,
    restrict,
    scale,
    shift_add,
)
from .prox import GridSpec, ProxResult, moreau_env, prox, prox_grid_oracle
from .sets import ball, box, halfspace, whole_space

__all__ = [
    "DomainError",
    "GammaSchedule",
    "GridSpec",
    "Modulus",
    "ObjectiveFunction",
    "ProxParams",
    "ProxResult",
    "RunConfig",
    "Trajectory",
    "affine_norm_power",
    "audit_trajectory",
    "ball",
    "box",
    "compose",
    "counterexample_suite",
    "halfspace",
    "iteration_bound",
    "kappa",
    "moreau_env",
    "norm_power",
    "power_penalty",
    "prox",
    "prox_grid_oracle",
    "quotient",
    "restrict",
    "run",
    "scale",
    "shift_add",
    "sigma_hat",
    "whole_space",
]
