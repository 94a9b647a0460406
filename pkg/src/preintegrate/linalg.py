"""Small dense symmetric linear algebra.

Everything here works on plain ``numpy`` arrays of order at most a few
hundred.  The eigensolver is a cyclic Jacobi method with round-robin pair
ordering, so each sweep is a fixed sequence of vectorised plane rotations and
the output is bit-reproducible for identical input.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import DefinitenessError, NumericalError

SYMMETRY_TOL = 1e-12


class EigenPairs(NamedTuple):
    """Descending eigenvalues and the orthogonal matrix of paired eigenvectors."""

    values: np.ndarray
    vectors: np.ndarray


def as_symmetric(S) -> np.ndarray:
    """Validate symmetry to ``1e-12`` relative and return the symmetrised copy."""
    A = np.array(S, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    scale = max(np.abs(A).max(initial=0.0), 1e-300)
    if np.abs(A - A.T).max(initial=0.0) > SYMMETRY_TOL * scale:
        raise ValueError("matrix is not symmetric")
    return 0.5 * (A + A.T)


def orthogonality_error(Q) -> float:
    """``max |Q^T Q - I|``."""
    Q = np.asarray(Q, dtype=float)
    return float(np.abs(Q.T @ Q - np.eye(Q.shape[1])).max())


def cholesky_lower(S) -> np.ndarray:
    """Lower-triangular ``L`` with positive diagonal and ``L L^T = S``."""
    A = as_symmetric(S)
    n = A.shape[0]
    floor = 1e-12 * max(np.trace(A), 0.0)
    L = np.zeros_like(A)
    for j in range(n):
        pivot = A[j, j] - L[j, :j] @ L[j, :j]
        if pivot <= floor:
            raise DefinitenessError(
                f"matrix is not positive definite: pivot {j} equals {pivot:.3e}", pivot=j
            )
        L[j, j] = np.sqrt(pivot)
        L[j + 1 :, j] = (A[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / L[j, j]
    return L


def _round_robin(n: int):
    """Rounds of disjoint index pairs covering every pair exactly once."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        p, q = [], []
        for i in range(m // 2):
            a, b = players[i], players[m - 1 - i]
            if a < n and b < n:
                p.append(min(a, b))
                q.append(max(a, b))
        rounds.append((np.array(p, dtype=np.intp), np.array(q, dtype=np.intp)))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def fix_signs(V: np.ndarray) -> np.ndarray:
    """Flip columns so each one's largest-magnitude entry is positive.

    Entries within ``1e-12`` of the column maximum count as ties and the
    lowest such index decides.
    """
    V = np.array(V, dtype=float)
    mags = np.abs(V)
    top = mags.max(axis=0, keepdims=True)
    lead = np.argmax(mags >= top * (1.0 - 1e-12), axis=0)
    signs = np.sign(V[lead, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def sym_eigen(S, max_sweeps: int = 100) -> EigenPairs:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi.

    Eigenvalues are returned in descending order.  Each eigenvector has its
    largest-magnitude entry positive; exactly equal eigenvalues are ordered by
    the lexicographic order of their (sign-fixed) eigenvectors, largest first.

    Raises
    ------
    NumericalError
        If the off-diagonal mass has not vanished after ``max_sweeps`` sweeps.
    """
    A = as_symmetric(S)
    n = A.shape[0]
    V = np.eye(n)
    fro = np.linalg.norm(A)
    if n > 1 and fro > 0.0:
        rounds = _round_robin(n)
        tiny = np.finfo(float).tiny
        for sweep in range(max_sweeps + 1):
            off = np.linalg.norm(A - np.diag(np.diag(A)))
            if off <= 1e-15 * fro:
                break
            if sweep == max_sweeps:
                raise NumericalError(
                    f"Jacobi iteration did not converge in {max_sweeps} sweeps", residual=off
                )
            for p, q in rounds:
                app, aqq, apq = A[p, p], A[q, q], A[p, q]
                active = np.abs(apq) > tiny
                safe = np.where(active, apq, 1.0)
                tau = (aqq - app) / (2.0 * safe)
                t = np.sign(tau) / (np.abs(tau) + np.sqrt(1.0 + tau * tau))
                t[tau == 0.0] = 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                c = np.where(active, c, 1.0)
                s = np.where(active, s, 0.0)
                Ap, Aq = A[:, p], A[:, q]
                A[:, p], A[:, q] = c * Ap - s * Aq, s * Ap + c * Aq
                Ap, Aq = A[p, :], A[q, :]
                A[p, :], A[q, :] = c[:, None] * Ap - s[:, None] * Aq, s[:, None] * Ap + c[:, None] * Aq
                Vp, Vq = V[:, p], V[:, q]
                V[:, p], V[:, q] = c * Vp - s * Vq, s * Vp + c * Vq
    values = np.diag(A).copy()
    V = fix_signs(V)
    # primary key is the last one: eigenvalue descending, then vectors descending
    order = np.lexsort([-V[i] for i in range(n - 1, -1, -1)] + [-values])
    return EigenPairs(values[order], V[:, order])


def power_leading(S, tol: float = 1e-12, max_iter: int = 100_000):
    """Leading eigenpair of a PSD matrix by power iteration.

    Stops once ``||S v - lam v|| <= tol * max|S|``.  With a zero spectral gap
    any unit vector in the leading eigenspace is acceptable.
    """
    A = as_symmetric(S)
    n = A.shape[0]
    scale = np.abs(A).max(initial=0.0)
    v = np.ones(n) + np.arange(n) / (10.0 * n)
    v /= np.linalg.norm(v)
    if scale == 0.0:
        return 0.0, fix_signs(v[:, None])[:, 0]
    residual = np.inf
    for _ in range(max_iter):
        w = A @ v
        lam = float(v @ w)
        residual = float(np.linalg.norm(w - lam * v))
        if residual <= tol * scale:
            return lam, fix_signs(v[:, None])[:, 0]
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0, fix_signs(v[:, None])[:, 0]
        v = w / norm
    raise NumericalError(f"power iteration did not converge in {max_iter} steps", residual=residual)


def householder_completion(theta) -> np.ndarray:
    """Orthogonal matrix whose first column is ``theta``.

    Uses the reflection ``I - 2 w w^T`` with ``w`` along ``theta - e1`` when
    ``theta[0] <= 0``, and the negated reflection along ``theta + e1``
    otherwise; both keep the normalising denominator at least 2.  ``theta = e1``
    returns the identity.
    """
    theta = np.asarray(theta, dtype=float)
    norm = np.linalg.norm(theta)
    if norm == 0.0:
        raise ValueError("cannot complete the zero vector")
    if abs(norm - 1.0) > 1e-10:
        raise ValueError(f"theta must be a unit vector, has norm {norm:.12g}")
    n = theta.shape[0]
    e1 = np.zeros(n)
    e1[0] = 1.0
    if np.array_equal(theta, e1):
        return np.eye(n)
    if theta[0] <= 0.0:
        w = theta - e1
        w /= np.linalg.norm(w)
        return np.eye(n) - 2.0 * np.outer(w, w)
    w = theta + e1
    w /= np.linalg.norm(w)
    return 2.0 * np.outer(w, w) - np.eye(n)
