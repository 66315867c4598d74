import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hippa.core import (
    HALF_LINE,
    T_HAT,
    UNIT_INTERVAL,
    DomainError,
    Modulus,
    ProxParams,
    as_vector,
    kappa,
    power_penalty,
    power_penalty_grad,
    sigma_hat,
    solve_t_hat,
    t_hat_equation,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
vectors = st.lists(finite, min_size=1, max_size=5).map(np.array)


def test_as_vector_scalar_and_errors():
    assert as_vector(3.0).shape == (1,)
    with pytest.raises(ValueError):
        as_vector([[1.0, 2.0]])
    with pytest.raises(ValueError):
        as_vector([1.0, math.nan])
    with pytest.raises(ValueError):
        as_vector([1.0, 2.0], dim=3)


@pytest.mark.parametrize("rho, q", [(0.0, 2.0), (-1.0, 2.0), (1.0, 0.0)])
def test_modulus_rejects_nonpositive(rho, q):
    with pytest.raises(DomainError):
        Modulus(rho, q)


def test_modulus_evaluation_and_scaling():
    m = Modulus(0.5, 3.0)
    assert m(2.0) == pytest.approx(4.0)
    exact = Modulus(1.0, 2.0, phi=lambda t: t * t + t**3)
    assert exact(1.0) == pytest.approx(2.0)
    assert exact.power_bound(1.0) == pytest.approx(1.0)
    s = exact.scaled(3.0)
    assert s.rho == 3.0 and s(1.0) == pytest.approx(6.0)
    with pytest.raises(DomainError):
        m.scaled(0.0)


def test_modulus_validate_phi():
    ts = np.linspace(0, 3, 50)
    assert Modulus(1.0, 2.0, phi=lambda t: t * t).validate_phi(ts)
    assert not Modulus(2.0, 2.0, phi=lambda t: t * t).validate_phi(ts)
    assert not Modulus(1.0, 2.0, phi=lambda t: t * t + 1.0).validate_phi(ts)
    # only [0, 1) matters on the unit interval
    assert Modulus(1.0, 2.0, UNIT_INTERVAL, phi=lambda t: t * t if t < 1 else 0.0).validate_phi(ts)


@pytest.mark.parametrize("p, gamma", [(1.0, 1.0), (0.5, 1.0), (2.0, 0.0), (2.0, -1.0)])
def test_prox_params_domain(p, gamma):
    with pytest.raises(DomainError):
        ProxParams(p, gamma)


@pytest.mark.parametrize(
    "x, y, p, gamma, expected",
    [
        ([0.0, 0.0], [3.0, 4.0], 2.0, 1.0, 12.5),
        ([1.0], [3.0], 3.0, 2.0, 8.0 / 6.0),
        ([0.0], [0.0], 1.5, 1.0, 0.0),
    ],
)
def test_power_penalty_values(x, y, p, gamma, expected):
    assert power_penalty(x, y, ProxParams(p, gamma)) == pytest.approx(expected)


@pytest.mark.parametrize("p", [1.1, 1.5, 2.0, 3.0])
def test_power_penalty_grad_zero_at_equal_points(p):
    g = power_penalty_grad([1.0, 2.0], [1.0, 2.0], ProxParams(p, 1.0))
    assert np.all(g == 0.0)


@settings(max_examples=60, deadline=None)
@given(vectors, st.floats(1.2, 4.0), st.floats(0.1, 5.0))
def test_power_penalty_grad_matches_finite_differences(x, p, gamma):
    params = ProxParams(p, gamma)
    y = x + np.linspace(0.3, 1.1, x.size)
    g = power_penalty_grad(x, y, params)
    h = 1e-6
    fd = np.array([(power_penalty(x, y + h * e, params) - power_penalty(x, y - h * e, params)) / (2 * h)
                   for e in np.eye(x.size)])
    assert np.allclose(g, fd, rtol=1e-5, atol=1e-7)


@settings(max_examples=60, deadline=None)
@given(vectors, st.floats(1.1, 4.0))
def test_power_penalty_symmetric_nonnegative(x, p):
    y = x[::-1] + 0.5
    params = ProxParams(p, 1.0)
    assert power_penalty(x, y, params) >= 0
    assert power_penalty(x, y, params) == pytest.approx(power_penalty(y, x, params))


def test_kappa_branches():
    low = (2 + math.sqrt(3)) * (1.2 - 1) / 16
    assert kappa(1.2) == pytest.approx(low)
    high = (2 + math.sqrt(3)) / 16 * (1 - (3 - math.sqrt(3)) ** (1 - 1.7))
    assert kappa(1.7) == pytest.approx(high)
    # both branch formulas evaluated at the switch point; the smaller one is used
    assert kappa(T_HAT) == pytest.approx(min(0.0749677, 0.0171354), rel=1e-4)


@pytest.mark.parametrize("t", [1.0, 2.0, 0.5, 2.5])
def test_kappa_domain(t):
    with pytest.raises(DomainError):
        kappa(t)


def test_t_hat_root_matches_tabulated_value():
    root = solve_t_hat()
    assert abs(t_hat_equation(root)) < 1e-12
    assert root == pytest.approx(T_HAT, abs=1e-4)


@pytest.mark.parametrize("p, expected", [(2.0, 0.25), (3.0, 0.5**3.5), (4.0, 1 / 32)])
def test_sigma_hat(p, expected):
    assert sigma_hat(p) == pytest.approx(expected)


def test_sigma_hat_domain():
    with pytest.raises(DomainError):
        sigma_hat(1.5)


def test_interval_constants_distinct():
    assert UNIT_INTERVAL != HALF_LINE
