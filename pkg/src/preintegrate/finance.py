"""Brownian path factors and Asian / basket option integrands.

All integrands take standard normal inputs ``z`` and are built as
:class:`~preintegrate.preint.KinkIntegrand` instances, so each one can be
evaluated directly, rotated, or pre-integrated in closed form.

The payoff integrand is the undiscounted ``(S_bar - K)_+``.  Greek integrands
are derivatives of the discounted price ``exp(-rT) E (S_bar - K)_+``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path

import numpy as np

from . import gaussmap, linalg
from .preint import KinkIntegrand

ASIAN_INTEGRANDS = ("payoff", "delta", "gamma", "rho", "theta", "vega")
BASKET_KINDS = (
    "basket-ordinary-standard",
    "basket-ordinary-pca",
    "basket-full-standard",
    "basket-full-pca",
)
RECONSTRUCTION_TOL = 1e-10


@dataclass(frozen=True)
class MarketParams:
    S0: float = 100.0
    K: float = 100.0
    r: float = 0.1
    sigma: float = 0.4
    T: float = 1.0
    d: int = 50

    def __post_init__(self):
        if self.S0 <= 0 or self.T <= 0 or self.d < 1:
            raise ValueError("S0, T and d must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        object.__setattr__(self, "d", int(self.d))

    @property
    def dt(self) -> float:
        return self.T / self.d

    def replace(self, **changes) -> "MarketParams":
        return type(self)(**{**self.__dict__, **changes})


@dataclass(frozen=True)
class BasketParams:
    S0_1: float = 100.0
    S0_2: float = 100.0
    r1: float = 0.1
    r2: float = 0.2
    sigma1: float = 0.2
    sigma2: float = 0.4
    w1: float = 0.8
    w2: float = 0.2
    rho: float = 0.5
    K: float = 95.0
    T: float = 1.0
    d: int = 50

    def __post_init__(self):
        if min(self.S0_1, self.S0_2, self.T) <= 0 or self.d < 1:
            raise ValueError("prices, T and d must be positive")
        if min(self.sigma1, self.sigma2) < 0:
            raise ValueError("volatilities must be nonnegative")
        if min(self.w1, self.w2) < 0 or abs(self.w1 + self.w2 - 1.0) > 1e-12:
            raise ValueError("basket weights must be nonnegative and sum to 1")
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError("correlation must lie in [-1, 1]")
        object.__setattr__(self, "d", int(self.d))

    @property
    def dt(self) -> float:
        return self.T / self.d

    def replace(self, **changes) -> "BasketParams":
        return type(self)(**{**self.__dict__, **changes})


@dataclass(frozen=True, eq=False)
class FactorMatrix:
    """Square root ``R`` of a covariance, ``R R^T = cov``."""

    R: np.ndarray
    cov: np.ndarray
    kind: str

    def __post_init__(self):
        R = np.array(self.R, dtype=float)
        cov = np.array(self.cov, dtype=float)
        scale = max(np.abs(cov).max(initial=0.0), 1e-300)
        err = np.abs(R @ R.T - cov).max(initial=0.0)
        if err > RECONSTRUCTION_TOL * scale:
            raise ValueError(f"factor does not reproduce covariance (error {err:.3e})")
        R.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.R.shape[1]

    def rotated(self, Theta) -> "FactorMatrix":
        return FactorMatrix(self.R @ np.asarray(Theta, dtype=float), self.cov, f"rotated({self.kind})")


def brownian_cov(d: int, T: float) -> np.ndarray:
    """``Sigma[i, j] = dt * min(i, j)`` with one-based step indices."""
    t = np.arange(1, d + 1) * (T / d)
    return np.minimum.outer(t, t)


def standard_factor(d: int, T: float = 1.0) -> FactorMatrix:
    if d < 1 or T <= 0:
        raise ValueError("need d >= 1 and T > 0")
    R = np.tril(np.full((d, d), math.sqrt(T / d)))
    return FactorMatrix(R, brownian_cov(d, T), "standard")


def _eigen_factor(cov: np.ndarray) -> np.ndarray:
    vals, vecs = linalg.sym_eigen(cov)
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def pca_factor(d: int, T: float = 1.0) -> FactorMatrix:
    if d < 1 or T <= 0:
        raise ValueError("need d >= 1 and T > 0")
    cov = brownian_cov(d, T)
    return FactorMatrix(_eigen_factor(cov), cov, "pca")


def basket_cov(bp: BasketParams) -> np.ndarray:
    S = brownian_cov(bp.d, bp.T)
    s1, s2 = bp.sigma1, bp.sigma2
    c = bp.rho * s1 * s2
    return np.block([[s1 * s1 * S, c * S], [c * S, s2 * s2 * S]])


def basket_factors(bp: BasketParams, kind: str) -> FactorMatrix:
    """Joint ``2d x 2d`` factor of both log-price paths (volatilities included)."""
    cov = basket_cov(bp)
    if kind in ("basket-ordinary-standard", "basket-ordinary-pca"):
        if abs(bp.rho) >= 1.0:
            raise ValueError("ordinary basket factors need |rho| < 1")
        base = standard_factor if kind.endswith("standard") else pca_factor
        R = base(bp.d, bp.T).R
        Z = np.zeros_like(R)
        s1, s2 = bp.sigma1, bp.sigma2
        top = np.hstack([s1 * R, Z])
        bottom = np.hstack([s2 * bp.rho * R, s2 * math.sqrt(1.0 - bp.rho**2) * R])
        return FactorMatrix(np.vstack([top, bottom]), cov, kind)
    if kind == "basket-full-standard":
        return FactorMatrix(linalg.cholesky_lower(cov), cov, kind)
    if kind == "basket-full-pca":
        return FactorMatrix(_eigen_factor(cov), cov, kind)
    raise ValueError(f"unknown basket factor kind {kind!r}")


def _unit_factor(mp: MarketParams, factor) -> np.ndarray:
    R = factor.R if isinstance(factor, FactorMatrix) else np.asarray(factor, dtype=float)
    if R.shape[0] != mp.d:
        raise ValueError(f"factor has {R.shape[0]} rows, expected {mp.d}")
    return R


def asian_integrands(mp: MarketParams, factor) -> dict:
    """Payoff and Greek integrands of the arithmetic Asian call.

    ``factor`` maps standard normals to a unit-volatility Brownian path
    ``B = R z``; the asset path is ``S_j = S0 exp((r - sigma^2/2) j dt + sigma B_j)``.
    """
    R = _unit_factor(mp, factor)
    d, dt, s, r, T, K, S0 = mp.d, mp.dt, mp.sigma, mp.r, mp.T, mp.K, mp.S0
    j = np.arange(1, d + 1)
    drift = math.log(S0) + (r - 0.5 * s * s) * j * dt
    F = s * R
    w = np.full(d, 1.0 / d)
    disc = math.exp(-r * T)

    def make(name, p, q=None, p0=0.0):
        return KinkIntegrand(drift, F, w, K, p, q, p0, None, name)

    out = {
        "payoff": make("payoff", w, None, -K),
        "delta": make("delta", disc * w / S0),
        "rho": make("rho", disc * (-T + j * dt) / d, None, disc * T * K),
        "theta": make(
            "theta",
            disc * (-r + (r - 0.5 * s * s) * j / d) / d,
            disc * s / (2.0 * T * d) * R,
            disc * r * K,
        ),
        "vega": make("vega", -disc * s * j * dt / d, disc / d * R),
    }
    # likelihood-ratio weight on the first Brownian increment B_1 ~ N(0, dt)
    if s > 0:
        gamma_lin = np.outer(w, R[0]) * disc / (S0 * S0 * s * dt)
        out["gamma"] = make("gamma", -disc * w / (S0 * S0), gamma_lin)
    return {k: out[k] for k in ASIAN_INTEGRANDS if k in out}


def basket_integrand(bp: BasketParams, factor) -> KinkIntegrand:
    """Undiscounted ``(w1 S_bar1 + w2 S_bar2 - K)_+`` on ``2d`` standard normals."""
    R = factor.R if isinstance(factor, FactorMatrix) else np.asarray(factor, dtype=float)
    d, dt = bp.d, bp.dt
    if R.shape[0] != 2 * d:
        raise ValueError(f"basket factor must have {2 * d} rows")
    j = np.arange(1, d + 1)
    drift = np.concatenate(
        [
            math.log(bp.S0_1) + (bp.r1 - 0.5 * bp.sigma1**2) * j * dt,
            math.log(bp.S0_2) + (bp.r2 - 0.5 * bp.sigma2**2) * j * dt,
        ]
    )
    w = np.concatenate([np.full(d, bp.w1 / d), np.full(d, bp.w2 / d)])
    return KinkIntegrand(drift, R, w, bp.K, w, None, -bp.K, None, "basket")


def geometric_moments(mp: MarketParams):
    """Mean and variance of ``(1/d) sum_j log S_j``."""
    d, dt, s = mp.d, mp.dt, mp.sigma
    mean = math.log(mp.S0) + (mp.r - 0.5 * s * s) * dt * (d + 1) / 2.0
    var = s * s * dt * (d + 1) * (2 * d + 1) / (6.0 * d)
    return mean, var


def geometric_integrand(mp: MarketParams, factor) -> KinkIntegrand:
    """Undiscounted ``(exp(mean_j log S_j) - K)_+``, a single lognormal term."""
    R = _unit_factor(mp, factor)
    mean, _ = geometric_moments(mp)
    loading = mp.sigma * R.mean(axis=0)
    return KinkIntegrand([mean], loading[None, :], [1.0], mp.K, [1.0], None, -mp.K, None, "geometric")


def geometric_asian_price(mp: MarketParams) -> float:
    """Closed-form undiscounted ``E (G - K)_+`` for the geometric average ``G``."""
    m, v = geometric_moments(mp)
    if v == 0.0:
        return max(math.exp(m) - mp.K, 0.0)
    s = math.sqrt(v)
    if mp.K <= 0:
        return math.exp(m + 0.5 * v) - mp.K
    lk = math.log(mp.K)
    return float(
        math.exp(m + 0.5 * v) * gaussmap.norm_cdf((m + v - lk) / s)
        - mp.K * gaussmap.norm_cdf((m - lk) / s)
    )


def asian_mean(mp: MarketParams) -> float:
    """``E S_bar`` (the ``K = 0`` payoff)."""
    j = np.arange(1, mp.d + 1)
    return float(mp.S0 * np.mean(np.exp(mp.r * j * mp.dt)))


def load_params(source) -> MarketParams | BasketParams:
    """Read a ``key = value`` parameter file, or a bundled preset by name."""
    text = None
    if isinstance(source, Path) or Path(str(source)).is_file():
        text = Path(source).read_text()
    else:
        preset = resources.files("preintegrate") / "data" / "presets" / f"{source}.txt"
        if not preset.is_file():
            raise ValueError(f"no parameter file or preset named {source!r}")
        text = preset.read_text()
    values = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ValueError(f"malformed parameter line: {raw!r}")
        values[key.strip()] = val.strip()
    cls = BasketParams if "rho" in values or "w1" in values else MarketParams
    known = {f.name: f.type for f in fields(cls)}
    unknown = set(values) - set(known)
    if unknown:
        raise ValueError(f"unknown parameters for {cls.__name__}: {sorted(unknown)}")
    return cls(**{k: int(v) if k == "d" else float(v) for k, v in values.items()})
