import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import ortho_group

from preintegrate import linalg
from preintegrate.errors import DefinitenessError


def brownian(d, T=1.0):
    t = np.arange(1, d + 1) * T / d
    return np.minimum.outer(t, t)


def random_spd(rng, n):
    B = rng.standard_normal((n, n))
    return B @ B.T + 1e-3 * np.eye(n)


def test_cholesky_identity_and_hand_case():
    assert np.array_equal(linalg.cholesky_lower(np.eye(3)), np.eye(3))
    L = linalg.cholesky_lower([[0.5, 0.5], [0.5, 1.0]])
    r = np.sqrt(0.5)
    assert np.allclose(L, [[r, 0], [r, r]], atol=1e-15)


def test_cholesky_reports_pivot():
    S = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    with pytest.raises(DefinitenessError) as info:
        linalg.cholesky_lower(S)
    assert info.value.pivot == 1


def test_asymmetric_rejected():
    with pytest.raises(ValueError):
        linalg.sym_eigen([[1.0, 2.0], [2.1, 1.0]])


def test_diagonal_eigen():
    vals, vecs = linalg.sym_eigen(np.diag([3.0, 2.0, 1.0]))
    assert vals.tolist() == [3.0, 2.0, 1.0]
    assert np.array_equal(vecs, np.eye(3))
    vals, vecs = linalg.sym_eigen(np.diag([1.0, 3.0, 2.0]))
    assert vals.tolist() == [3.0, 2.0, 1.0]
    assert np.array_equal(np.abs(vecs), np.eye(3)[:, [1, 2, 0]])


def test_randomized_corpus_against_reference():
    rng = np.random.default_rng(0)
    orders = np.concatenate([[2, 3, 100], rng.integers(2, 101, size=97)])
    for n in orders:
        S = random_spd(rng, n)
        L = linalg.cholesky_lower(S)
        assert np.abs(L @ L.T - S).max() <= 1e-10 * np.abs(S).max()
        assert np.all(np.diag(L) > 0) and np.array_equal(L, np.tril(L))
        vals, V = linalg.sym_eigen(S)
        ref = np.linalg.eigvalsh(S)[::-1]
        assert np.allclose(vals, ref, rtol=0, atol=1e-10 * np.abs(S).max())
        assert linalg.orthogonality_error(V) <= 1e-10
        assert np.abs(S @ V - V * vals).max() <= 1e-8 * np.abs(S).max()


def test_sign_convention():
    rng = np.random.default_rng(1)
    S = random_spd(rng, 12)
    _, V = linalg.sym_eigen(S)
    for col in V.T:
        i = np.argmax(np.abs(col))
        assert col[i] > 0


def test_repeated_eigenvalue_ordering_reproducible():
    S = np.diag([2.0, 5.0, 2.0, 5.0])
    a = linalg.sym_eigen(S)
    b = linalg.sym_eigen(S.copy())
    assert a.values.tolist() == [5.0, 5.0, 2.0, 2.0]
    assert np.array_equal(a.vectors, b.vectors)
    # ties: lexicographically larger vector first
    assert a.vectors[:, 0].tolist() == [0.0, 1.0, 0.0, 0.0]


def test_brownian_reconstruction_and_spectrum():
    d = 8
    S = brownian(d)
    vals, V = linalg.sym_eigen(S)
    assert np.abs(V * vals @ V.T - S).max() <= 1e-10
    k = np.arange(1, d + 1)
    closed = (1.0 / d) / 4 / np.sin((2 * k - 1) * np.pi / (2 * (2 * d + 1))) ** 2
    assert np.allclose(vals, closed, rtol=1e-8, atol=0)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 20))
def test_similarity_invariance(seed, n):
    rng = np.random.default_rng(seed)
    S = random_spd(rng, n)
    Q = ortho_group.rvs(n, random_state=seed)
    a = linalg.sym_eigen(S).values
    b = linalg.sym_eigen(Q.T @ S @ Q).values
    assert np.allclose(a, b, rtol=0, atol=1e-10 * max(1.0, a[0]))


def test_deterministic_bits():
    S = random_spd(np.random.default_rng(3), 30)
    a, b = linalg.sym_eigen(S), linalg.sym_eigen(S)
    assert np.array_equal(a.vectors, b.vectors) and np.array_equal(a.values, b.values)


def test_power_leading():
    lam, v = linalg.power_leading(np.diag([3.0, 2.0, 1.0]))
    assert lam == pytest.approx(3.0)
    assert np.allclose(v, [1, 0, 0], atol=1e-6)
    lam, v = linalg.power_leading(np.eye(4))
    assert lam == pytest.approx(1.0) and np.linalg.norm(v) == pytest.approx(1.0)


def test_power_matches_jacobi_with_gap():
    rng = np.random.default_rng(5)
    checked = 0
    while checked < 10:
        S = random_spd(rng, 8)
        vals, V = linalg.sym_eigen(S)
        if vals[0] - vals[1] < 0.1 * vals[0]:
            continue
        lam, v = linalg.power_leading(S)
        assert lam == pytest.approx(vals[0], rel=1e-8)
        assert np.allclose(v, V[:, 0], atol=1e-6)
        checked += 1


def test_power_iteration_cap():
    from preintegrate.errors import NumericalError

    S = np.diag([1.0, 0.999999, 0.5])
    with pytest.raises(NumericalError) as info:
        linalg.power_leading(S, tol=1e-15, max_iter=5)
    assert info.value.residual is not None


def test_householder_cases():
    assert np.array_equal(linalg.householder_completion(np.array([1.0, 0, 0])), np.eye(3))
    Q = linalg.householder_completion(np.array([-1.0, 0, 0]))
    assert np.allclose(Q[:, 0], [-1, 0, 0]) and linalg.orthogonality_error(Q) < 1e-15
    with pytest.raises(ValueError):
        linalg.householder_completion(np.zeros(3))
    with pytest.raises(ValueError):
        linalg.householder_completion(np.array([1.0, 1.0]))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 60))
def test_householder_random(seed, n):
    theta = np.random.default_rng(seed).standard_normal(n)
    theta /= np.linalg.norm(theta)
    Q = linalg.householder_completion(theta)
    assert linalg.orthogonality_error(Q) <= 1e-12
    assert np.abs(Q[:, 0] - theta).max() <= 1e-12
