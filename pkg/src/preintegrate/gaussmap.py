"""Standard normal special functions, Gaussian samplers and Hermite rules."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy import special

from . import lowdisc

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def norm_pdf(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x - LOG_SQRT_2PI)


def norm_cdf(x):
    return special.ndtr(np.asarray(x, dtype=float))


def norm_cdf_upper(x):
    """``1 - Phi(x)`` evaluated directly so the upper tail keeps relative accuracy."""
    return special.ndtr(-np.asarray(x, dtype=float))


def log_norm_cdf_upper(x):
    return special.log_ndtr(-np.asarray(x, dtype=float))


def norm_inv_cdf(u):
    """Inverse of the standard normal CDF on (0, 1).

    A rational-approximation start (``scipy.special.ndtri``) is polished by one
    Halley step.  Above 1/2 the residual is formed against the upper tail,
    where ``1 - u`` is exact.
    """
    u = np.asarray(u, dtype=float)
    if np.any(~(u > 0.0) | ~(u < 1.0)):
        raise ValueError("norm_inv_cdf needs 0 < u < 1")
    z = special.ndtri(u)
    upper = u > 0.5
    tail = special.ndtr(np.where(upper, -z, z))
    resid = np.where(upper, (1.0 - u) - tail, tail - u)
    dens = norm_pdf(z)
    with np.errstate(divide="ignore", invalid="ignore"):
        e = np.where(dens > 0.0, resid / dens, 0.0)
    z = z - e / (1.0 + 0.5 * z * e)
    return z if z.ndim else float(z)


def gaussian_partial_moment(a, gamma, order: int):
    """``int_gamma^inf z**order * exp(a z) * phi(z) dz`` for order 0 or 1.

    ``gamma = -inf`` gives the full moment.  Exponents are combined in log
    space so large ``a`` does not overflow before the tail factor shrinks it.
    """
    a = np.asarray(a, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    m0 = np.exp(0.5 * a * a + special.log_ndtr(a - gamma))
    if order == 0:
        return m0
    if order != 1:
        raise ValueError("order must be 0 or 1")
    with np.errstate(invalid="ignore"):
        head = np.exp(0.5 * a * a - 0.5 * (gamma - a) ** 2 - LOG_SQRT_2PI)
    head = np.where(np.isneginf(gamma), 0.0, head)
    return head + a * m0


@dataclass(frozen=True)
class HermiteRule:
    """Nodes and weights with ``sum(w * h(x)) ~ E h(Z)`` for ``Z ~ N(0, 1)``."""

    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, h):
        return np.sum(self.weights * h(self.nodes), axis=-1)


@functools.lru_cache(maxsize=None)
def gauss_hermite(q: int) -> HermiteRule:
    """q-point Gauss-Hermite rule for the standard normal weight."""
    if not 1 <= q <= 128:
        raise ValueError(f"q must lie in [1, 128], got {q}")
    x, w = hermegauss(q)
    # exact mirror symmetry, so odd moments cancel pair by pair
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    w = w / w.sum()
    x.setflags(write=False)
    w.setflags(write=False)
    return HermiteRule(x, w)


@dataclass(frozen=True)
class GaussianSampler:
    """Maps uniform points to N(0, I_d) through a componentwise inverse CDF.

    ``method`` is ``"rqmc"`` (scrambled Sobol', ``n`` a power of two) or
    ``"mc"`` (counter-based pseudorandom stream).
    """

    method: str = "rqmc"
    scramble: str = lowdisc.DEFAULT_SCRAMBLE

    def uniform(self, n: int, d: int, seed: int) -> np.ndarray:
        if self.method == "rqmc":
            return lowdisc.rqmc_uniform(n, d, seed, self.scramble)
        if self.method == "mc":
            return lowdisc.mc_uniform(n, d, seed)
        raise ValueError(f"unknown sampling method {self.method!r}")

    def sample(self, n: int, d: int, seed: int) -> np.ndarray:
        return norm_inv_cdf(self.uniform(n, d, seed))
