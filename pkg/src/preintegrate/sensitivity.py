"""Jansen-type estimates of upper Sobol' indices and mean dimension.

For a direction ``theta`` with orthogonal completion ``Psi`` the index is

    tau2(theta) = 1/2 E (f(z theta + Psi y) - f(z' theta + Psi y))^2

with independent standard normals ``z, z'`` and ``y``.  Each replicate draws a
``(d + 1)``-dimensional point set ordered ``(z, z', y)``; standard errors come
from independent replicates of the whole estimator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import DegenerateInputError
from .gaussmap import GaussianSampler, norm_inv_cdf

ORTHO_TOL = 1e-8
GAUSSIAN = "gaussian"
UNIFORM = "uniform"


@dataclass(frozen=True)
class ProjectionIndexEstimate:
    theta: np.ndarray
    tau_upper: float
    stderr: float
    variance: float
    variance_stderr: float
    n: int
    seed: int
    reps: int


@dataclass(frozen=True, eq=False)
class QuadraticForm:
    """``f(x) = x^T A x / 2 + b^T x``."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", linalg.as_symmetric(self.A))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float))

    @property
    def d(self) -> int:
        return self.b.size

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * np.einsum("...i,ij,...j->...", x, self.A, x) + x @ self.b

    def gradient(self, x):
        return np.asarray(x, dtype=float) @ self.A + self.b

    def variance(self) -> float:
        return float(0.5 * np.sum(self.A * self.A) + self.b @ self.b)

    def tau_upper(self, theta) -> float:
        """Exact ``tau2(theta)``."""
        theta = np.asarray(theta, dtype=float)
        At = self.A @ theta
        return float(At @ At + (theta @ self.b) ** 2 - 0.5 * (theta @ At) ** 2)

    def gradient_bound(self, theta) -> float:
        """``theta^T E(grad grad^T) theta``."""
        theta = np.asarray(theta, dtype=float)
        At = self.A @ theta
        return float(At @ At + (theta @ self.b) ** 2)

    def gradient_covariance(self) -> np.ndarray:
        return self.A @ self.A + np.outer(self.b, self.b)


def _replicate_seeds(seed: int, reps: int):
    return np.random.SeedSequence(seed).generate_state(reps, dtype=np.uint64)


def _summarise(values):
    values = np.asarray(values, dtype=float)
    se = float(values.std(ddof=1) / np.sqrt(values.size)) if values.size > 1 else float("nan")
    return float(values.mean()), se


def _check_completion(theta, completion):
    Theta = np.column_stack([theta, completion])
    if Theta.shape[0] != Theta.shape[1]:
        raise ValueError("completion must have d - 1 columns")
    if linalg.orthogonality_error(Theta) > ORTHO_TOL:
        raise ValueError("(theta, completion) is not orthogonal")


def jansen_tau_projection(
    f,
    theta,
    completion=None,
    n: int = 2**12,
    seed: int = 0,
    reps: int = 30,
    sampler: GaussianSampler = GaussianSampler(),
) -> ProjectionIndexEstimate:
    """Estimate ``tau2(theta)`` for ``f`` on Gaussian inputs."""
    theta = np.asarray(theta, dtype=float)
    if abs(np.linalg.norm(theta) - 1.0) > 1e-10:
        raise ValueError("theta must be a unit vector")
    d = theta.size
    if completion is None:
        completion = linalg.householder_completion(theta)[:, 1:]
    completion = np.asarray(completion, dtype=float).reshape(d, d - 1)
    _check_completion(theta, completion)
    taus, vars_ = [], []
    for s in _replicate_seeds(seed, reps):
        g = sampler.sample(n, d + 1, int(s))
        base = g[:, 2:] @ completion.T
        fx = np.asarray(f(base + np.outer(g[:, 0], theta)), dtype=float)
        fy = np.asarray(f(base + np.outer(g[:, 1], theta)), dtype=float)
        taus.append(0.5 * np.mean((fx - fy) ** 2))
        vars_.append(np.var(np.concatenate([fx, fy]), ddof=1))
    tau, se = _summarise(taus)
    var, vse = _summarise(vars_)
    return ProjectionIndexEstimate(theta, tau, se, var, vse, n, seed, reps)


def _uniform_design(sampler, n, d, seed):
    u = sampler.uniform(n, d + 1, seed)
    return u[:, 1:], u[:, 0]


def jansen_tau_coordinate(
    f,
    j: int,
    d: int,
    n: int = 2**12,
    seed: int = 0,
    reps: int = 30,
    sampler: GaussianSampler = GaussianSampler(),
    domain: str = GAUSSIAN,
) -> ProjectionIndexEstimate:
    """Estimate ``tau2`` of coordinate ``j`` (zero-based) on Gaussian or unit-cube inputs."""
    if not 0 <= j < d:
        raise ValueError(f"coordinate must lie in [0, {d})")
    e = np.zeros(d)
    e[j] = 1.0
    rest = np.delete(np.eye(d), j, axis=1)
    if domain == GAUSSIAN:
        return jansen_tau_projection(f, e, rest, n, seed, reps, sampler)
    if domain != UNIFORM:
        raise ValueError(f"unknown domain {domain!r}")
    taus, vars_ = [], []
    for s in _replicate_seeds(seed, reps):
        u = sampler.uniform(n, d + 1, int(s))
        x = np.empty((n, d))
        x[:, j] = u[:, 0]
        x[:, rest.argmax(axis=0)] = u[:, 2:]
        y = x.copy()
        y[:, j] = u[:, 1]
        fx = np.asarray(f(x), dtype=float)
        fy = np.asarray(f(y), dtype=float)
        taus.append(0.5 * np.mean((fx - fy) ** 2))
        vars_.append(np.var(np.concatenate([fx, fy]), ddof=1))
    tau, se = _summarise(taus)
    var, vse = _summarise(vars_)
    return ProjectionIndexEstimate(e, tau, se, var, vse, n, seed, reps)


@dataclass(frozen=True)
class MeanDimension:
    nu: float
    stderr: float
    per_coordinate: np.ndarray
    variance: float


def mean_dimension(
    f,
    d: int,
    n: int = 2**12,
    seed: int = 0,
    reps: int = 30,
    sampler: GaussianSampler = GaussianSampler(),
    domain: str = GAUSSIAN,
) -> MeanDimension:
    """``sum_j tau2_j / sigma^2`` with every coordinate swapped against one shared sample."""
    nus, per, vars_ = [], [], []
    for s in _replicate_seeds(seed, reps):
        u = sampler.uniform(n, d + 1, int(s))
        if domain == GAUSSIAN:
            u = norm_inv_cdf(u)
        elif domain != UNIFORM:
            raise ValueError(f"unknown domain {domain!r}")
        x, alt = u[:, 1:], u[:, 0]
        fx = np.asarray(f(x), dtype=float)
        var = np.var(fx, ddof=1)
        if not var > 0:
            raise DegenerateInputError("integrand has zero variance; mean dimension is undefined")
        taus = np.empty(d)
        for j in range(d):
            y = x.copy()
            y[:, j] = alt
            taus[j] = 0.5 * np.mean((fx - np.asarray(f(y), dtype=float)) ** 2)
        nus.append(taus.sum() / var)
        per.append(taus)
        vars_.append(var)
    nu, se = _summarise(nus)
    return MeanDimension(nu, se, np.mean(per, axis=0), float(np.mean(vars_)))


@dataclass(frozen=True)
class PoincareGap:
    tau_upper: float
    bound: float
    gap: float
    stderr: float
    violated: bool


def poincare_gap(f, theta, C_hat, n: int = 2**12, seed: int = 0, reps: int = 30, **kwargs) -> PoincareGap:
    """Compare ``tau2(theta)`` with its gradient bound ``theta^T C theta``."""
    theta = np.asarray(theta, dtype=float)
    bound = float(theta @ np.asarray(C_hat, dtype=float) @ theta)
    est = jansen_tau_projection(f, theta, None, n, seed, reps, **kwargs)
    gap = bound - est.tau_upper
    return PoincareGap(est.tau_upper, bound, gap, est.stderr, bool(gap < -3.0 * est.stderr))
