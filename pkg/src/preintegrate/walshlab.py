"""Walsh-coefficient laboratory for scrambled-net variance in base 2.

Inputs are restricted to dyadic step functions, which have finite Walsh
expansions, so the variance identity

    Var(mu_hat) = (1/n) * sum_{l != 0} Gamma_l * sigma2_l

can be checked as an equality rather than a truncated estimate.  Group ``l``
collects the indices ``k`` with ``bit_length(k_j) == l_j`` in every
coordinate.

Coordinates and axes are zero-based throughout.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import lowdisc
from .lowdisc import PointSet

MAX_CELLS = 4096
MAX_DIM = 4


@dataclass(frozen=True, eq=False)
class DyadicStepFunction:
    """Function on [0,1)^d constant on cells of side ``2**-resolution[j]``.

    ``values[c_1, ..., c_d]`` is the value on cell ``prod_j [c_j, c_j + 1) / 2**r_j``.
    """

    resolution: tuple
    values: np.ndarray

    def __post_init__(self):
        res = tuple(int(r) for r in self.resolution)
        vals = np.array(self.values, dtype=float, copy=True)
        if vals.shape != tuple(2**r for r in res):
            raise ValueError(f"values shape {vals.shape} does not match resolution {res}")
        if len(res) > MAX_DIM or vals.size > MAX_CELLS:
            raise ValueError(f"exact mode is limited to d <= {MAX_DIM} and {MAX_CELLS} cells")
        vals.setflags(write=False)
        object.__setattr__(self, "resolution", res)
        object.__setattr__(self, "values", vals)

    @property
    def d(self) -> int:
        return len(self.resolution)

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        idx = tuple(
            np.floor(x[:, j] * 2**r).astype(np.intp) for j, r in enumerate(self.resolution)
        )
        return self.values[idx]

    def mean(self) -> float:
        return float(self.values.mean())

    def variance(self) -> float:
        return float(np.mean((self.values - self.values.mean()) ** 2))

    @classmethod
    def random(cls, resolution, rng: np.random.Generator, low: int = -16, high: int = 16):
        """Integer-valued random step function.

        Integer values keep every Walsh coefficient, group variance and
        predicted variance exactly representable, so inequalities between
        them can be asserted without tolerance.
        """
        shape = tuple(2**r for r in resolution)
        return cls(tuple(resolution), rng.integers(low, high + 1, size=shape).astype(float))

    @classmethod
    def from_callable(cls, fn, resolution):
        """Sample ``fn`` at cell midpoints."""
        grids = [(np.arange(2**r) + 0.5) / 2**r for r in resolution]
        mesh = np.meshgrid(*grids, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        return cls(tuple(resolution), np.asarray(fn(pts), dtype=float).reshape(mesh[0].shape))


def _bit_reverse(c: np.ndarray, r: int) -> np.ndarray:
    out = np.zeros_like(c)
    for p in range(r):
        out |= ((c >> p) & 1) << (r - 1 - p)
    return out


def _popcount(x: np.ndarray) -> np.ndarray:
    return np.bitwise_count(x.astype(np.uint64)).astype(np.int64)


def _walsh_matrix(r: int) -> np.ndarray:
    """``W[k, c] = wal_k(c / 2**r) / 2**r`` for ``k, c < 2**r``."""
    k = np.arange(2**r)
    rev = _bit_reverse(np.arange(2**r), r)
    return (1.0 - 2.0 * (_popcount(k[:, None] & rev[None, :]) & 1)) / 2**r


def walsh_coefficient(f: DyadicStepFunction, k) -> complex:
    """Exact ``f_hat(k)`` by direct complex summation over the cells of ``f``.

    Reference implementation; :func:`walsh_coefficients` is the fast path.
    """
    k = tuple(int(v) for v in k)
    if len(k) != f.d:
        raise ValueError("index length does not match dimension")
    if any(kj >= 2**r for kj, r in zip(k, f.resolution)):
        return 0j
    omega = complex(-1.0, 0.0)  # exp(2 pi i / b) for b = 2, exactly
    total = 0j
    for cell in itertools.product(*[range(2**r) for r in f.resolution]):
        exponent = 0
        for c, r, kj in zip(cell, f.resolution, k):
            # digit i of x = c / 2**r pairs with digit i-1 of k
            for i in range(1, r + 1):
                exponent += ((c >> (r - i)) & 1) * ((kj >> (i - 1)) & 1)
        total += f.values[cell] * np.conj(omega**exponent)
    return total / f.values.size


def walsh_coefficients(f: DyadicStepFunction) -> np.ndarray:
    """All nonzero-able coefficients ``f_hat[k]`` for ``k_j < 2**r_j`` (real in base 2)."""
    out = f.values
    for axis, r in enumerate(f.resolution):
        out = np.moveaxis(np.tensordot(_walsh_matrix(r), out, axes=([1], [axis])), 0, axis)
    return out


def group_variances(f: DyadicStepFunction) -> np.ndarray:
    """``sigma2[l]`` for ``0 <= l_j <= r_j``; entry ``l = 0`` holds ``mean**2``."""
    coef2 = walsh_coefficients(f) ** 2
    out = np.zeros(tuple(r + 1 for r in f.resolution))
    levels = np.meshgrid(
        *[_bit_length(np.arange(2**r)) for r in f.resolution], indexing="ij"
    )
    np.add.at(out, tuple(levels), coef2)
    return out


def _bit_length(k: np.ndarray) -> np.ndarray:
    out = np.zeros_like(k)
    v = k.copy()
    while np.any(v):
        out += v > 0
        v >>= 1
    return out


def _cells(X: np.ndarray, levels) -> np.ndarray:
    """Cell id of every point at per-coordinate resolution ``levels``."""
    total = sum(levels)
    cols = [
        (X[:, j] >> np.uint64(lowdisc.BITS - lv)).astype(np.int64)
        for j, lv in enumerate(levels)
        if lv > 0
    ]
    if not cols:
        return np.zeros(X.shape[0], dtype=np.int64)
    if total <= 62:
        key = np.zeros(X.shape[0], dtype=np.int64)
        for col, lv in zip(cols, [lv for lv in levels if lv > 0]):
            key = (key << lv) | col
        return key
    return np.unique(np.stack(cols, axis=1), axis=0, return_inverse=True)[1].ravel()


def _same_cell_pairs(X: np.ndarray, levels) -> int:
    counts = np.unique(_cells(X, levels), return_counts=True)[1]
    return int(np.sum(counts.astype(np.int64) ** 2))


def gain_coefficient(ps: PointSet, ell, method: str = "bucket") -> float:
    """Gain coefficient ``Gamma_l`` of the points ``ps`` under scrambling.

    ``method="pairs"`` evaluates the O(n^2 d) double sum directly;
    ``method="bucket"`` expands the product over coordinates and counts
    same-cell pairs by sorting, which is O(2^|supp l| n d).
    """
    ell = tuple(int(v) for v in ell)
    if len(ell) > ps.d:
        raise ValueError("index vector longer than point dimension")
    if any(v < 0 for v in ell):
        raise ValueError("gain index must be nonnegative")
    if not any(ell):
        raise ValueError("Gamma_0 is not part of the variance sum")
    X = ps.digits()[:, : len(ell)]
    n = ps.n
    if method == "pairs":
        prod = np.ones((n, n))
        for j, lv in enumerate(ell):
            if lv == 0:
                continue
            hi = X[:, j] >> np.uint64(lowdisc.BITS - lv)
            lo = X[:, j] >> np.uint64(lowdisc.BITS - lv + 1)
            prod *= 2.0 * (hi[:, None] == hi[None, :]) - (lo[:, None] == lo[None, :])
        return float(prod.sum() / n)
    if method != "bucket":
        raise ValueError(f"unknown method {method!r}")
    support = [j for j, lv in enumerate(ell) if lv > 0]
    total = 0
    for picks in itertools.product((True, False), repeat=len(support)):
        levels = [0] * len(ell)
        sign = 1
        weight = 1
        for j, fine in zip(support, picks):
            if fine:
                levels[j] = ell[j]
                weight *= 2
            else:
                levels[j] = ell[j] - 1
                sign = -sign
        total += sign * weight * _same_cell_pairs(X, levels)
    return total / n


def gain_table(ps: PointSet, max_levels) -> np.ndarray:
    """``Gamma_l`` for all ``0 <= l_j <= max_levels[j]``; entry 0 is set to 0."""
    shape = tuple(int(r) + 1 for r in max_levels)
    out = np.zeros(shape)
    for ell in itertools.product(*[range(s) for s in shape]):
        if any(ell):
            out[ell] = gain_coefficient(ps, ell)
    return out


def predicted_variance(f: DyadicStepFunction, ps: PointSet) -> float:
    """Scrambled-net variance of the equal-weight average of ``f`` over ``ps``."""
    sig = group_variances(f)
    sig.flat[0] = 0.0
    gains = gain_table(ps, f.resolution)
    return float(np.sum(gains * sig) / ps.n)


def variance_breakdown(f: DyadicStepFunction, ps: PointSet):
    """Rows ``(ell, Gamma_l, sigma2_l, Gamma_l * sigma2_l / n)`` for every ``l != 0``."""
    sig = group_variances(f)
    gains = gain_table(ps, f.resolution)
    rows = []
    for ell in itertools.product(*[range(r + 1) for r in f.resolution]):
        if any(ell):
            rows.append((ell, gains[ell], sig[ell], gains[ell] * sig[ell] / ps.n))
    return rows


def empirical_scramble_variance(
    f, base: PointSet, reps: int, seed: int, kind: str = lowdisc.NESTED_UNIFORM
):
    """Mean and variance of the RQMC average of ``f`` over ``reps`` scrambles of ``base``.

    Returns ``(mean, variance, stderr_of_variance)``; the variance is the
    unbiased sample variance across replicates.
    """
    if reps < 100:
        raise ValueError("need at least 100 replicates")
    seeds = np.random.SeedSequence(seed).generate_state(reps, dtype=np.uint64)
    est = np.empty(reps)
    for i, s in enumerate(seeds):
        est[i] = np.mean(f(lowdisc.scramble(base, kind, int(s)).points))
    mean = float(est.mean())
    dev = est - mean
    var = float(np.sum(dev**2) / (reps - 1))
    m4 = float(np.mean(dev**4))
    se = float(np.sqrt(max(m4 - var**2 * (reps - 3) / (reps - 1), 0.0) / reps))
    return mean, var, se


def coordinate_preintegrate_dyadic(f: DyadicStepFunction, axis: int) -> DyadicStepFunction:
    """Average ``f`` over coordinate ``axis``; the result has resolution 0 there."""
    if not 0 <= axis < f.d:
        raise ValueError(f"axis must lie in [0, {f.d})")
    res = list(f.resolution)
    res[axis] = 0
    return DyadicStepFunction(tuple(res), f.values.mean(axis=axis, keepdims=True))


def pad_resolution(f: DyadicStepFunction, resolution) -> DyadicStepFunction:
    """Same function represented on a finer grid."""
    vals = f.values
    for axis, (r0, r1) in enumerate(zip(f.resolution, resolution)):
        if r1 < r0:
            raise ValueError("cannot coarsen")
        vals = np.repeat(vals, 2 ** (r1 - r0), axis=axis)
    return DyadicStepFunction(tuple(resolution), vals)
