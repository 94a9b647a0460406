"""Gradient covariance estimation and the rotations built from it."""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import EvaluationError
from .gaussmap import GaussianSampler

log = logging.getLogger(__name__)

EIGVEC_COMPLEMENT = "eigvec-complement"
HOUSEHOLDER = "householder"
FORWARD_DIFFERENCE = "forward-difference"
ANALYTIC = "analytic"


def _evaluate(f, X):
    vals = np.asarray(f(X), dtype=float).reshape(X.shape[0])
    return vals


def fd_gradient(f, x, eps: float = 1e-6) -> np.ndarray:
    """Forward-difference gradient of ``f`` at one point with exactly ``d + 1`` evaluations.

    ``f`` is called once on a ``(d + 1, d)`` batch: ``x`` followed by
    ``x + eps * e_j`` for each ``j``.
    """
    x = np.asarray(x, dtype=float)
    return fd_gradients(f, x[None, :], eps)[0]


def fd_gradients(f, X, eps: float = 1e-6) -> np.ndarray:
    """Forward-difference gradients at each row of ``X`` (one batched call of ``f``)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    M, d = X.shape
    pts = np.repeat(X[:, None, :], d + 1, axis=1)
    idx = np.arange(d)
    pts[:, idx + 1, idx] += eps
    vals = _evaluate(f, pts.reshape(-1, d)).reshape(M, d + 1)
    bad = ~np.isfinite(vals)
    if np.any(bad):
        row, col = np.argwhere(bad)[0]
        coord = None if col == 0 else int(col - 1)
        where = "base point" if coord is None else f"coordinate {coord}"
        raise EvaluationError(f"non-finite value at sample {row}, {where}", coordinate=coord)
    return (vals[:, 1:] - vals[:, :1]) / eps


@dataclass(frozen=True, eq=False)
class GradientSample:
    grads: np.ndarray
    eval_points: np.ndarray
    fd_epsilon: float | None
    mode: str = FORWARD_DIFFERENCE

    @property
    def M(self) -> int:
        return self.grads.shape[0]


def sample_gradients(
    f,
    d: int,
    M: int = 128,
    seed: int = 0,
    sampler: GaussianSampler = GaussianSampler(),
    eps: float = 1e-6,
    grad=None,
) -> GradientSample:
    """Gradients of ``f`` at ``M`` Gaussian points.

    ``grad``, when given, is an analytic gradient ``(M, d) -> (M, d)`` used
    instead of finite differences.
    """
    if M < 2:
        raise ValueError("need at least two gradient samples")
    if M < d:
        log.warning("gradient sample size M=%d is below the dimension d=%d", M, d)
    X = sampler.sample(M, d, seed)
    if grad is not None:
        G = np.asarray(grad(X), dtype=float)
        if not np.all(np.isfinite(G)):
            raise EvaluationError("analytic gradient returned non-finite values")
        return GradientSample(G, X, None, ANALYTIC)
    return GradientSample(fd_gradients(f, X, eps), X, eps, FORWARD_DIFFERENCE)


def covariance_from_gradients(G, centered: bool = False) -> np.ndarray:
    G = np.asarray(G, dtype=float)
    if centered:
        G = G - G.mean(axis=0)
    C = G.T @ G / G.shape[0]
    return 0.5 * (C + C.T)


def estimate_C(
    f,
    d: int,
    M: int = 128,
    seed: int = 0,
    sampler: GaussianSampler = GaussianSampler(),
    centered: bool = False,
    eps: float = 1e-6,
    grad=None,
) -> np.ndarray:
    """``(1/M) sum g g^T`` over gradients at ``M`` Gaussian points (optionally centered)."""
    gs = sample_gradients(f, d, M, seed, sampler, eps, grad)
    return covariance_from_gradients(gs.grads, centered)


@dataclass(frozen=True, eq=False)
class Rotation:
    theta: np.ndarray
    Theta: np.ndarray
    spectrum: np.ndarray
    completion_mode: str = EIGVEC_COMPLEMENT
    centered: bool = False

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write(f"# completion_mode={self.completion_mode}\n")
        buf.write(f"# centered={int(self.centered)}\n")
        buf.write("# spectrum=" + ",".join(f"{v:.17g}" for v in self.spectrum) + "\n")
        np.savetxt(buf, self.Theta, delimiter=",", fmt="%.17g")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "Rotation":
        text = source if "\n" in str(source) else open(source).read()
        meta = {}
        rows = []
        for line in text.splitlines():
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                meta[key] = val
            elif line.strip():
                rows.append([float(v) for v in line.split(",")])
        Theta = np.array(rows)
        spectrum = np.array([float(v) for v in meta.get("spectrum", "").split(",") if v])
        return cls(
            Theta[:, 0].copy(),
            Theta,
            spectrum,
            meta.get("completion_mode", EIGVEC_COMPLEMENT),
            meta.get("centered", "0") == "1",
        )


def rotation_from_C(C, completion_mode: str = EIGVEC_COMPLEMENT, centered: bool = False) -> Rotation:
    """Leading eigenvector of ``C`` and an orthogonal matrix with it as first column.

    ``completion_mode`` picks the remaining columns: the other eigenvectors
    in descending order, or a Householder reflection of the leading one.
    """
    vals, vecs = linalg.sym_eigen(C)
    theta = vecs[:, 0].copy()
    if completion_mode == EIGVEC_COMPLEMENT:
        Theta = vecs
    elif completion_mode == HOUSEHOLDER:
        Theta = linalg.householder_completion(theta)
    else:
        raise ValueError(f"unknown completion mode {completion_mode!r}")
    return Rotation(theta, Theta, vals, completion_mode, centered)


def gpca_dimred(
    h,
    d: int,
    M: int = 128,
    seed: int = 0,
    sampler: GaussianSampler = GaussianSampler(),
    eps: float = 1e-6,
    grad=None,
):
    """Eigenvectors (descending) of the gradient covariance of ``h`` on ``R^d``.

    Returns ``(V, spectrum)``; integrating ``h(V x)`` puts the dominant
    gradient directions first.
    """
    C = estimate_C(h, d, M, seed, sampler, False, eps, grad)
    vals, vecs = linalg.sym_eigen(C)
    return vecs, vals
