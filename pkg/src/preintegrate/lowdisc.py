"""Base-2 Sobol' nets, scrambling, and elementary-interval checks.

Points are carried internally as 52-bit integers ``X`` with ``x = X / 2**52``.
Unscrambled points are emitted exactly as ``X / 2**52`` so that the radical
inverse can be checked bit for bit.  Scrambled points are emitted as
``(X + 1/2) / 2**52``, which never equals 0 or 1 and leaves every elementary
interval of resolution up to 52 bits unchanged.

Two scramblings are provided.  Both preserve the (t, m, d)-net property and
produce the same variance for the RQMC estimate:

``"linear-matrix+digital-shift"``
    random lower-triangular binary matrix with unit diagonal applied to the
    digit vector, followed by a random digital shift (the default, cheaper).
``"nested-uniform"``
    a nested uniform scramble realised by a seeded hash of the digit prefix,
    so no permutation tree is ever stored.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import ConfigurationError

BITS = 52
_SCALE = float(2**BITS)
_MASK = np.uint64(2**BITS - 1)

LINEAR_MATRIX = "linear-matrix+digital-shift"
NESTED_UNIFORM = "nested-uniform"
NO_SCRAMBLE = "none"
SCRAMBLE_KINDS = (LINEAR_MATRIX, NESTED_UNIFORM)
DEFAULT_SCRAMBLE = LINEAR_MATRIX

DIRECTION_FILE = "new-joe-kuo-6.1000.txt"
MAX_M = 31


@dataclass(frozen=True)
class NetParams:
    """Parameters of a base-2 (t, m, d)-net; ``n = 2**m``."""

    t: int
    m: int
    d: int
    base: int = 2

    def __post_init__(self):
        if self.base != 2:
            raise ConfigurationError("only base 2 is supported")
        if self.m < 0 or self.t < 0 or self.t > self.m:
            raise ConfigurationError(f"need 0 <= t <= m, got t={self.t}, m={self.m}")
        if self.d < 1:
            raise ConfigurationError(f"dimension must be positive, got {self.d}")

    @property
    def n(self) -> int:
        return 2**self.m


@dataclass(frozen=True, eq=False)
class PointSet:
    """An immutable ``n x d`` block of points in [0, 1)^d with its provenance."""

    points: np.ndarray
    params: NetParams
    scramble: str = NO_SCRAMBLE
    seed: int | None = None
    _ints: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True)
        if pts.ndim != 2:
            raise ValueError("points must be a 2-d array")
        if not np.all((pts >= 0.0) & (pts < 1.0)):
            raise ValueError("points must lie in [0, 1)")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self._ints is not None:
            self._ints.setflags(write=False)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def digits(self) -> np.ndarray:
        """Leading 52 binary digits of every coordinate as unsigned integers."""
        if self._ints is not None:
            return self._ints
        return np.floor(self.points * _SCALE).astype(np.uint64)

    def to_csv(self, path) -> None:
        np.savetxt(path, self.points, delimiter=",", fmt="%.17g")


@dataclass(frozen=True)
class ElementaryInterval:
    """Product of dyadic intervals ``[c_j / 2**k_j, (c_j + 1) / 2**k_j)``."""

    k: tuple
    c: tuple

    def __post_init__(self):
        if len(self.k) != len(self.c):
            raise ValueError("k and c must have equal length")
        for kj, cj in zip(self.k, self.c):
            if kj < 0 or not 0 <= cj < 2**kj:
                raise ValueError(f"invalid digit {cj} at resolution {kj}")

    @property
    def volume(self) -> float:
        return 2.0 ** -sum(self.k)

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(points)
        inside = np.ones(pts.shape[0], dtype=bool)
        for j, (kj, cj) in enumerate(zip(self.k, self.c)):
            inside &= np.floor(pts[:, j] * 2.0**kj) == cj
        return inside


# ---------------------------------------------------------------------------
# direction numbers


@functools.lru_cache(maxsize=None)
def _direction_table() -> tuple:
    text = resources.files("preintegrate").joinpath("data", DIRECTION_FILE).read_text()
    rows = []
    for line in text.splitlines()[1:]:
        parts = line.split()
        if not parts:
            continue
        s, a = int(parts[1]), int(parts[2])
        rows.append((s, a, tuple(int(v) for v in parts[3 : 3 + s])))
    return tuple(rows)


def max_dimension() -> int:
    """Largest dimension supported by the bundled direction numbers."""
    return len(_direction_table()) + 1


@functools.lru_cache(maxsize=64)
def _generator_columns(d: int, ncols: int) -> np.ndarray:
    """Left-aligned direction integers ``V[j, k]`` for dimensions ``0..d-1``."""
    if d > max_dimension():
        raise ConfigurationError(
            f"dimension {d} exceeds the direction-number table (max {max_dimension()})"
        )
    V = np.zeros((d, ncols), dtype=np.uint64)
    for k in range(ncols):
        V[0, k] = 1 << (BITS - 1 - k)
    table = _direction_table()
    for j in range(1, d):
        s, a, m_init = table[j - 1]
        mk = list(m_init)
        for k in range(s, ncols):
            new = mk[k - s] ^ (mk[k - s] << s)
            for i in range(1, s):
                if (a >> (s - 1 - i)) & 1:
                    new ^= mk[k - i] << i
            mk.append(new)
        for k in range(ncols):
            V[j, k] = mk[k] << (BITS - 1 - k)
    V.setflags(write=False)
    return V


def _digital_net_ints(V: np.ndarray, m: int) -> np.ndarray:
    """Points of the digital net with generator columns ``V`` in natural index order."""
    d = V.shape[0]
    X = np.zeros((2**m, d), dtype=np.uint64)
    for k in range(m):
        half = 2**k
        X[half : 2 * half] = X[:half] ^ V[:, k]
    return X


def _check_m(m: int) -> None:
    if not 0 <= m <= MAX_M:
        raise ConfigurationError(f"m must lie in [0, {MAX_M}], got {m}")


def generate_sobol(m: int, d: int) -> PointSet:
    """First ``2**m`` points of the unscrambled Sobol' sequence in ``d`` dimensions."""
    _check_m(m)
    if d < 1:
        raise ConfigurationError(f"dimension must be positive, got {d}")
    X = _digital_net_ints(_generator_columns(d, max(m, 1)), m)
    return PointSet(X.astype(float) / _SCALE, _sobol_params(m, d), NO_SCRAMBLE, None, X)


def _sobol_params(m: int, d: int) -> NetParams:
    # Sobol' has t = 0 up to d = 2; beyond that t is probed by smallest_t, not tabulated.
    return NetParams(0 if d <= 2 else m, m, d)


# ---------------------------------------------------------------------------
# scrambling


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed) & (2**64 - 1)))


def _linear_tables(rng: np.random.Generator, d: int):
    """Byte lookup tables for random unit lower-triangular matrices, plus shifts."""
    noise = rng.integers(0, 2**BITS, size=(d, BITS), dtype=np.uint64)
    shift = rng.integers(0, 2**BITS, size=d, dtype=np.uint64)
    rows_below = np.array([(1 << (BITS - 1 - s)) - 1 for s in range(BITS)], dtype=np.uint64)
    diag = np.array([1 << (BITS - 1 - s) for s in range(BITS)], dtype=np.uint64)
    cols = diag | (noise & rows_below)  # column s of L, row 0 is the leading digit
    nchunks = -(-BITS // 8)
    tables = np.zeros((d, nchunks, 256), dtype=np.uint64)
    for c in range(nchunks):
        for b in range(8):
            s = 8 * c + b
            if s >= BITS:
                break
            # input digit s sits at integer bit BITS-1-s; chunk c holds bits by offset
            bit_in_chunk = _chunk_bit(s)
            step = 1 << bit_in_chunk
            idx = np.arange(256)
            has = (idx & step) != 0
            tables[:, c, has] ^= cols[:, s : s + 1]
    return tables, shift


def _chunk_bit(s: int) -> int:
    # chunk c covers integer bits [BITS-8(c+1), BITS-8c) clipped at zero
    pos = BITS - 1 - s
    c = s // 8
    low = max(BITS - 8 * (c + 1), 0)
    return pos - low


def _apply_linear(tables: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Apply the per-dimension binary matrices encoded in ``tables`` to ``X``."""
    out = np.zeros_like(X)
    nchunks = tables.shape[1]
    dims = np.arange(X.shape[1])
    for c in range(nchunks):
        low = max(BITS - 8 * (c + 1), 0)
        width = BITS - 8 * c - low
        byte = (X >> np.uint64(low)) & np.uint64(2**width - 1)
        out ^= tables[dims, c, byte.astype(np.intp)]
    return out


_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _mix64(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = z + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def _nested_uniform(X: np.ndarray, seed: int) -> np.ndarray:
    n, d = X.shape
    keys = _mix64(np.uint64(int(seed) & (2**64 - 1)) ^ _mix64(np.arange(d, dtype=np.uint64)))
    flips = np.zeros_like(X)
    for k in range(BITS):
        prefix = X >> np.uint64(BITS - k) if k > 0 else np.zeros_like(X)
        with np.errstate(over="ignore"):
            h = _mix64(_mix64(keys + np.uint64(k)) ^ prefix)
        flips |= (h >> np.uint64(63)) << np.uint64(BITS - 1 - k)
    return X ^ flips


def _scramble_ints(X: np.ndarray, kind: str, seed: int) -> np.ndarray:
    if kind == LINEAR_MATRIX:
        tables, shift = _linear_tables(_rng(seed), X.shape[1])
        return _apply_linear(tables, X) ^ shift
    if kind == NESTED_UNIFORM:
        return _nested_uniform(X, seed)
    raise ConfigurationError(f"unknown scramble kind {kind!r}; expected one of {SCRAMBLE_KINDS}")


def _centered(X: np.ndarray) -> np.ndarray:
    return (X.astype(float) + 0.5) / _SCALE


def scramble(ps: PointSet, kind: str = DEFAULT_SCRAMBLE, seed: int = 0) -> PointSet:
    """Randomize ``ps`` digit-wise; deterministic in ``(kind, seed)``."""
    if not np.all(np.isfinite(ps.points)):
        raise ValueError("point set has non-finite coordinates")
    Y = _scramble_ints(ps.digits(), kind, seed)
    return PointSet(_centered(Y), ps.params, kind, int(seed), Y)


def scrambled_sobol(m: int, d: int, seed: int, kind: str = DEFAULT_SCRAMBLE) -> PointSet:
    """Equivalent to ``scramble(generate_sobol(m, d), kind, seed)``.

    For the linear-matrix kind the matrix is applied to the generator columns
    rather than to every point, which is much cheaper for large ``n``.
    """
    _check_m(m)
    if kind != LINEAR_MATRIX:
        return scramble(generate_sobol(m, d), kind, seed)
    tables, shift = _linear_tables(_rng(seed), d)
    V = _generator_columns(d, max(m, 1))
    LV = _apply_linear(tables, np.ascontiguousarray(V.T)).T
    Y = _digital_net_ints(np.ascontiguousarray(LV), m) ^ shift
    return PointSet(_centered(Y), _sobol_params(m, d), kind, int(seed), Y)


def rqmc_uniform(n: int, d: int, seed: int, kind: str = DEFAULT_SCRAMBLE) -> np.ndarray:
    """``n x d`` scrambled Sobol' points; ``n`` must be a power of two."""
    m = int(n).bit_length() - 1
    if n < 1 or 2**m != n:
        raise ConfigurationError(f"RQMC sample size must be a power of two, got {n}")
    return scrambled_sobol(m, d, seed, kind).points


def mc_uniform(n: int, d: int, seed: int) -> np.ndarray:
    """``n x d`` pseudorandom points in (0, 1) from a counter-based generator."""
    u = _rng(seed).random((n, d))
    # random() can return exactly 0
    return np.where(u == 0.0, 2.0**-53, u)


# ---------------------------------------------------------------------------
# net structure


def _compositions(total: int, parts: int):
    """All ``parts``-tuples of nonnegative integers summing to ``total``."""
    for cuts in itertools.combinations(range(total + parts - 1), parts - 1):
        prev = -1
        out = []
        for c in cuts:
            out.append(c - prev - 1)
            prev = c
        out.append(total + parts - 2 - prev)
        yield tuple(out)


def is_net(ps: PointSet, t: int, m: int, d: int) -> bool:
    """True iff ``ps`` is a (t, m, d)-net in base 2.

    Only intervals with ``|k| = m - t`` are counted: every coarser elementary
    interval is a disjoint union of those, so exact counts there imply exact
    counts everywhere.
    """
    NetParams(t, m, d)
    if ps.n != 2**m:
        raise ValueError(f"point set has {ps.n} points, expected 2**m = {2**m}")
    if ps.d < d:
        raise ValueError(f"point set has dimension {ps.d} < {d}")
    X = ps.digits()[:, :d]
    level = m - t
    expected = 2**t
    for k in _compositions(level, d):
        cell = np.zeros(ps.n, dtype=np.int64)
        for j, kj in enumerate(k):
            if kj:
                cell = (cell << kj) | (X[:, j] >> np.uint64(BITS - kj)).astype(np.int64)
        counts = np.bincount(cell, minlength=2**level)
        if counts.shape[0] != 2**level or np.any(counts != expected):
            return False
    return True


def smallest_t(ps: PointSet, d: int | None = None) -> int:
    """Smallest t for which ``ps`` passes :func:`is_net`; diagnostic only."""
    d = ps.d if d is None else d
    m = int(math.log2(ps.n))
    for t in range(m + 1):
        if is_net(ps, t, m, d):
            return t
    return m
