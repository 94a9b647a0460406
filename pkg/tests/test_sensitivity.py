import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from preintegrate import sensitivity
from preintegrate.errors import DegenerateInputError
from preintegrate.sensitivity import QuadraticForm


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def within(est, exact, k=4.0):
    return abs(est.tau_upper - exact) <= k * est.stderr + 1e-12


def test_constant_function_zero():
    est = sensitivity.jansen_tau_projection(lambda X: np.full(X.shape[0], 3.0), unit([1, 1, 0]), n=256, reps=5)
    assert est.tau_upper == 0.0 and est.variance == 0.0


def test_linear_exact():
    c = np.array([1.0, -2.0, 0.5])
    theta = unit([1.0, 1.0, 1.0])
    est = sensitivity.jansen_tau_projection(lambda X: X @ c, theta, n=2**12, reps=10)
    assert within(est, (c @ theta) ** 2)
    assert est.tau_upper == pytest.approx((c @ theta) ** 2, rel=1e-2)


@settings(max_examples=6, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_quadratic_closed_form(seed):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((4, 4))
    q = QuadraticForm(0.5 * (B + B.T), rng.standard_normal(4))
    theta = unit(rng.standard_normal(4))
    est = sensitivity.jansen_tau_projection(q, theta, n=2**12, seed=seed, reps=20)
    assert within(est, q.tau_upper(theta))
    assert q.tau_upper(theta) <= q.gradient_bound(theta) + 1e-12


def test_coordinate_uniform():
    est = sensitivity.jansen_tau_coordinate(lambda X: X[:, 0], 0, 3, n=2**12, reps=10, domain="uniform")
    assert within(est, 1 / 12)


def test_coordinate_product_gaussian():
    f = lambda X: X[:, 0] * X[:, 1]
    for j in (0, 1):
        assert within(sensitivity.jansen_tau_coordinate(f, j, 3, n=2**12, reps=20), 1.0)
    assert sensitivity.jansen_tau_coordinate(f, 2, 3, n=256, reps=5).tau_upper == 0.0


def test_sign_symmetry_and_scale():
    q = QuadraticForm(np.diag([1.0, 2.0, 0.0]), np.array([0.5, 0.0, 1.0]))
    theta = unit([1, 2, 3])
    a = sensitivity.jansen_tau_projection(q, theta, n=2**10, seed=4, reps=5)
    b = sensitivity.jansen_tau_projection(q, -theta, n=2**10, seed=4, reps=5)
    c = sensitivity.jansen_tau_projection(lambda X: 3 * q(X), theta, n=2**10, seed=4, reps=5)
    assert abs(a.tau_upper - b.tau_upper) <= 4 * math.hypot(a.stderr, b.stderr)
    assert c.tau_upper == pytest.approx(9 * a.tau_upper, rel=1e-12)


def test_completion_checks():
    theta = unit([1, 0, 0])
    with pytest.raises(ValueError):
        sensitivity.jansen_tau_projection(lambda X: X[:, 0], theta, np.ones((3, 2)), n=64, reps=2)
    with pytest.raises(ValueError):
        sensitivity.jansen_tau_projection(lambda X: X[:, 0], np.array([1.0, 1.0, 0.0]), n=64, reps=2)


def test_mean_dimension():
    add = sensitivity.mean_dimension(lambda X: X[:, 0] + X[:, 1] ** 2 + np.sin(X[:, 2]), 3, n=2**12, reps=10)
    assert abs(add.nu - 1) <= 4 * add.stderr + 1e-9
    prod = sensitivity.mean_dimension(lambda X: X[:, 0] * X[:, 1], 2, n=2**12, reps=10)
    assert abs(prod.nu - 2) <= 4 * prod.stderr
    with pytest.raises(DegenerateInputError):
        sensitivity.mean_dimension(lambda X: np.zeros(X.shape[0]), 2, n=64, reps=2)


def test_poincare_gap_linear_and_quadratic():
    c = np.array([1.0, 2.0])
    theta = unit([1, 1])
    gap = sensitivity.poincare_gap(lambda X: X @ c, theta, np.outer(c, c), n=2**12, reps=10)
    assert abs(gap.gap) <= 4 * gap.stderr + 1e-9 and not gap.violated
    q = QuadraticForm(np.array([[2.0, 0.5], [0.5, -1.0]]), np.zeros(2))
    gap = sensitivity.poincare_gap(q, theta, q.gradient_covariance(), n=2**12, reps=20)
    expect = 0.5 * (theta @ q.A @ theta) ** 2
    assert abs(gap.gap - expect) <= 4 * gap.stderr
    zero = sensitivity.poincare_gap(lambda X: np.ones(X.shape[0]), theta, np.zeros((2, 2)), n=64, reps=2)
    assert (zero.tau_upper, zero.bound, zero.gap) == (0.0, 0.0, 0.0)
