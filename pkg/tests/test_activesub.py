import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import ortho_group

from preintegrate import activesub, finance, linalg
from preintegrate.errors import EvaluationError
from preintegrate.sensitivity import QuadraticForm


class Counting:
    def __init__(self, f):
        self.f, self.calls, self.rows = f, 0, 0

    def __call__(self, X):
        self.calls += 1
        self.rows += X.shape[0]
        return self.f(X)


def test_fd_gradient_linear_exact_and_call_count():
    c = np.array([1.0, -2.0, 0.5, 3.0])
    f = Counting(lambda X: X @ c)
    g = activesub.fd_gradient(f, np.array([0.3, -1.0, 2.0, 0.0]))
    assert np.allclose(g, c, atol=1e-8)
    assert (f.calls, f.rows) == (1, 5)


def test_fd_gradient_quadratic_bias():
    eps = 1e-4
    f = lambda X: 0.5 * np.sum(X * X, axis=-1)
    x = np.array([1.0, -0.5, 2.0])
    g = activesub.fd_gradient(f, x, eps)
    assert np.allclose(g, x + eps / 2, atol=1e-9)


def test_fd_gradient_asian_pathwise():
    mp = finance.MarketParams(d=8)
    fac = finance.standard_factor(8)
    f = finance.asian_integrands(mp, fac)["payoff"]
    x = np.full(8, 0.3)
    j = np.arange(1, 9)
    S = mp.S0 * np.exp((mp.r - mp.sigma**2 / 2) * j * mp.dt + mp.sigma * fac.R @ x)
    pathwise = mp.sigma * (S @ fac.R) / 8
    assert np.allclose(activesub.fd_gradient(f, x), pathwise, rtol=1e-4)


def test_fd_gradient_reports_coordinate():
    def f(X):
        out = X[:, 0].copy()
        out[X[:, 2] > 0.5] = np.nan
        return out

    with pytest.raises(EvaluationError) as info:
        activesub.fd_gradient(f, np.array([0.0, 0.0, 0.5]), eps=1e-3)
    assert info.value.coordinate == 2


def test_C_linear_and_centered():
    c = np.array([1.0, 2.0, -1.0])
    f = lambda X: X @ c
    C = activesub.estimate_C(f, 3, M=16, seed=1)
    assert np.allclose(C, np.outer(c, c), atol=1e-7)
    assert np.allclose(activesub.estimate_C(f, 3, M=16, seed=1, centered=True), 0, atol=1e-7)


def test_C_quadratic_converges():
    rng = np.random.default_rng(5)
    B = rng.standard_normal((4, 4))
    q = QuadraticForm(B + B.T, np.zeros(4))
    C = activesub.estimate_C(q, 4, M=2**12, seed=3, grad=q.gradient)
    exact = q.gradient_covariance()
    assert np.linalg.norm(C - exact) <= 0.1 * np.linalg.norm(exact)


def test_small_M_warns(caplog):
    activesub.estimate_C(lambda X: X.sum(axis=1), 8, M=4, seed=0)
    assert "below the dimension" in caplog.text


def test_rotation_diagonal():
    rot = activesub.rotation_from_C(np.diag([1.0, 5.0, 2.0]))
    assert np.allclose(np.abs(rot.theta), [0, 1, 0])
    assert np.allclose(rot.spectrum, [5, 2, 1])


@pytest.mark.parametrize("mode", [activesub.EIGVEC_COMPLEMENT, activesub.HOUSEHOLDER])
def test_rotation_rank_one(mode):
    v = np.array([3.0, 0.0, 4.0, 0.0, 0.0]) / 5
    rot = activesub.rotation_from_C(7 * np.outer(v, v), mode)
    assert abs(abs(rot.theta @ v) - 1) <= 1e-12
    assert np.allclose(rot.Theta[:, 0], rot.theta)
    assert linalg.orthogonality_error(rot.Theta) <= 1e-12


def test_rotation_unknown_mode():
    with pytest.raises(ValueError):
        activesub.rotation_from_C(np.eye(2), "qr")


def test_rotation_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    A = rng.standard_normal((6, 6))
    rot = activesub.rotation_from_C(A @ A.T, activesub.HOUSEHOLDER, centered=True)
    path = tmp_path / "rot.csv"
    rot.to_csv(path)
    back = activesub.Rotation.from_csv(path)
    assert np.array_equal(back.Theta, rot.Theta)
    assert np.array_equal(back.spectrum, rot.spectrum)
    assert back.completion_mode == activesub.HOUSEHOLDER and back.centered


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_spectrum_rotation_invariant(seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((5, 5))
    C = A @ A.T
    Q = ortho_group.rvs(5, random_state=seed)
    a = activesub.rotation_from_C(C).spectrum
    b = activesub.rotation_from_C(Q @ C @ Q.T).spectrum
    assert np.allclose(a, b, rtol=1e-9, atol=1e-9 * a[0])


def test_gpca_orders_directions():
    w = np.array([0.1, 0.0, 3.0])
    V, spec = activesub.gpca_dimred(lambda X: np.sin(X @ w), 3, M=64, seed=2)
    assert abs(abs(V[:, 0] @ w) / np.linalg.norm(w) - 1) <= 1e-6
    assert spec[0] >= spec[1] >= spec[2]
