"""String ids for problems, feasible sets and starting points, plus the test catalogue."""

from __future__ import annotations

import os
from typing import Optional

import numpy as np

from .core import Modulus, as_vector
from .functions import (
    ObjectiveFunction,
    UniformlyRegularMap,
    affine_norm_power,
    compose,
    lq_norm,
    lq_sum,
    norm_power,
    quotient,
    restrict,
    scale,
    shift_add,
    sum_shifted,
)
from .sets import ConvexSet, ball, box, halfspace, whole_space


class UsageError(ValueError):
    """A malformed problem, set or starting-point description."""


def _split(text: str) -> tuple[str, dict, list]:
    head, _, rest = text.partition(":")
    opts, bare = {}, []
    for part in filter(None, rest.split(",")):
        key, eq, val = part.partition("=")
        if eq:
            opts[key.strip()] = val.strip()
        else:
            bare.append(key.strip())
    return head.strip(), opts, bare


def _vec(text: str) -> np.ndarray:
    try:
        return as_vector([float(t) for t in text.split(";")])
    except ValueError as exc:
        raise UsageError(f"bad vector {text!r}: {exc}") from None


def _num(opts: dict, key: str, default=None, cast=float):
    if key not in opts:
        if default is None:
            raise UsageError(f"missing parameter {key!r}")
        return default
    try:
        return cast(opts[key])
    except ValueError:
        raise UsageError(f"bad value for {key!r}: {opts[key]!r}") from None


def load_matrix(path: str) -> np.ndarray:
    """Plain row-major CSV."""
    if not os.path.exists(path):
        raise UsageError(f"no such file: {path}")
    return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=float, ndmin=2))


def _concave_quotient(dim: int) -> ObjectiveFunction:
    """``||x||**2 / (1.5 - ||x||**2/2)`` on the unit ball (positive concave denominator)."""
    unit = ball(np.zeros(dim), 1.0)
    h = restrict(norm_power(2.0, dim), unit)
    g = ObjectiveFunction(func=lambda x: 1.5 - 0.5 * float(x @ x), grad=lambda x: -x, label="1.5-|x|^2/2",
                          dim=dim)
    return quotient(h, g, "nonneg_concave", 1.5, known_minimizer=np.zeros(dim), known_inf=0.0)


def parse_problem(text: str, x0_norm: Optional[float] = None) -> ObjectiveFunction:
    """Build an objective from ids such as ``norm_power:q=2,dim=5``.

    Recognized families: ``norm_power:q=,dim=[,r=]``, ``affine:q=,A=<csv>,b=<csv>``,
    ``quotient:dim=,g=<positive constant>``, ``quotient:dim=,kind=concave`` and
    ``counterexample:<sum_shifted|lq_sum|lq_norm>[,q=]``. For norm powers with
    ``1 < q < 2`` the modulus ball radius defaults to ``10 * x0_norm``.
    """
    head, opts, bare = _split(text)
    try:
        if head == "norm_power":
            q = _num(opts, "q")
            dim = _num(opts, "dim", cast=int)
            r = _num(opts, "r", default=0.0)
            if r <= 0 and 1 < q < 2:
                r = 10.0 * x0_norm if x0_norm else 1.0
            return norm_power(q, dim, r if r > 0 else None)
        if head == "affine":
            q = _num(opts, "q")
            A = load_matrix(opts.get("A", ""))
            b = load_matrix(opts.get("b", "")).ravel()
            r = _num(opts, "r", default=0.0)
            return affine_norm_power(A, b, q, r if r > 0 else None)
        if head == "quotient":
            dim = _num(opts, "dim", cast=int)
            if opts.get("kind") == "concave":
                return _concave_quotient(dim)
            c = _num(opts, "g", default=1.0)
            g = ObjectiveFunction(func=lambda x: c, grad=lambda x: np.zeros_like(x), label=f"{c:g}", dim=dim)
            return quotient(norm_power(2.0, dim), g, "affine", c, known_minimizer=np.zeros(dim), known_inf=0.0)
        if head == "counterexample":
            name = bare[0] if bare else opts.get("name", "")
            q = _num(opts, "q", default=0.5)
            if name == "sum_shifted":
                return sum_shifted()
            if name == "lq_sum":
                return lq_sum(q)
            if name == "lq_norm":
                return lq_norm(q)
            raise UsageError(f"unknown counterexample {name!r}")
    except UsageError:
        raise
    except ValueError as exc:
        raise UsageError(f"invalid problem {text!r}: {exc}") from None
    raise UsageError(f"unknown problem family {head!r}")


def parse_set(text: str, dim: Optional[int] = None) -> ConvexSet:
    """``whole``, ``ball:c=<v>,r=<r>``, ``box:l=<v>,u=<v>`` or ``halfspace:a=<v>,beta=<b>``.

    Vectors are ``;``-separated; a one-entry vector is broadcast to ``dim``.
    """
    head, opts, _ = _split(text)

    def vec(key):
        if key not in opts:
            raise UsageError(f"missing parameter {key!r} for set {head!r}")
        v = _vec(opts[key])
        if v.size == 1 and dim:
            v = np.full(dim, v[0])
        return v

    try:
        if head == "whole":
            return whole_space(dim)
        if head == "ball":
            return ball(vec("c"), _num(opts, "r"))
        if head == "box":
            return box(vec("l"), vec("u"))
        if head == "halfspace":
            return halfspace(vec("a"), _num(opts, "beta"))
    except UsageError:
        raise
    except ValueError as exc:
        raise UsageError(f"invalid set {text!r}: {exc}") from None
    raise UsageError(f"unknown set kind {head!r}")


def parse_x0(text: str, f: ObjectiveFunction, dim: Optional[int] = None) -> np.ndarray:
    """``ones``, ``zeros``, ``minimizer``, a CSV file, or comma-separated numbers."""
    n = f.dim if f.dim is not None else dim
    if text in ("ones", "zeros"):
        if n is None:
            raise UsageError("dimension unknown for x0")
        return np.ones(n) if text == "ones" else np.zeros(n)
    if text == "minimizer":
        if f.known_minimizer is None:
            raise UsageError(f"{f.label} has no known minimizer")
        return f.known_minimizer.copy()
    if os.path.exists(text):
        return as_vector(load_matrix(text).ravel(), n)
    try:
        return as_vector([float(t) for t in text.split(",")], n)
    except ValueError as exc:
        raise UsageError(f"bad x0 {text!r}: {exc}") from None


def scaling_map(c: float, dim: int) -> UniformlyRegularMap:
    c = float(c)
    return UniformlyRegularMap(
        apply=lambda x: c * x,
        regularity_modulus=Modulus(abs(c), 1.0, phi=lambda t: abs(c) * t),
        is_homogeneous_additive=True,
        vjp=lambda x, v: c * v,
        label=f"{c:g}x",
    )


def catalogue() -> dict:
    """Named objectives with declared moduli and known minimizers used across the test suite."""
    A = np.array([[2.0, 0.0], [0.0, 1.0]])
    A3 = np.array([[1.0, 0.5], [0.0, 1.0], [1.0, -1.0]])
    fns = {
        "norm_power:q=1.5,dim=2,r=2": norm_power(1.5, 2, 2.0),
        "norm_power:q=2,dim=1": norm_power(2.0, 1),
        "norm_power:q=2,dim=3": norm_power(2.0, 3),
        "norm_power:q=3,dim=2": norm_power(3.0, 2),
        "norm_power:q=4,dim=2": norm_power(4.0, 2),
        "affine:q=2,A=diag(2,1)": affine_norm_power(A, [1.0, -1.0], 2.0),
        "affine:q=3,A=3x2": affine_norm_power(A3, [0.5, 0.0, 1.0], 3.0),
        "quotient:dim=2,g=2": parse_problem("quotient:dim=2,g=2"),
        "quotient:dim=2,kind=concave": _concave_quotient(2),
        "shift:norm_power(2)-5": shift_add(norm_power(2.0, 2), -5.0),
        "scale:2*norm_power(4)": scale(norm_power(4.0, 2), 2.0),
        "compose:norm_power(2)o2x": compose(scaling_map(2.0, 2), norm_power(2.0, 2), dim=2,
                                            known_minimizer=np.zeros(2), known_inf=0.0),
    }
    return fns
