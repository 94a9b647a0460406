"""Closed-form pre-integration of kinked lognormal integrands.

Every option integrand in this package has the form

    f(z) = 1{A(z) >= K} * ( sum_j S_j(z) * (p_j + q_j . z) + p_0 + q_0 . z )

with ``S_j(z) = exp(mu_j + F_j . z)`` and ``A(z) = sum_j w_j S_j(z)``.  When
every entry of the pre-integrated column of ``F`` has the same sign, ``A`` is
monotone in that coordinate, the kink sits at a single threshold ``gamma``,
and the conditional expectation over the coordinate reduces to order-0 and
order-1 Gaussian partial moments.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special

from . import gaussmap
from .errors import MonotonicityError, NumericalError

log = logging.getLogger(__name__)

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 100
MAX_STEP = 20.0
Z_LIMIT = 60.0
SCAN_HALF_WIDTH = 8.0
TAIL = 12.0
PANEL_NODES = 16
MAX_PANEL = 2.0


@dataclass(frozen=True, eq=False)
class KinkIntegrand:
    """Kinked sum of lognormal terms; see the module docstring for the formula."""

    drift: np.ndarray
    loading: np.ndarray
    weights: np.ndarray
    strike: float
    term_const: np.ndarray
    term_lin: np.ndarray | None = None
    base_const: float = 0.0
    base_lin: np.ndarray | None = None
    name: str = "integrand"

    def __post_init__(self):
        F = np.atleast_2d(np.asarray(self.loading, dtype=float))
        J, D = F.shape
        object.__setattr__(self, "loading", F)
        object.__setattr__(self, "drift", np.broadcast_to(np.asarray(self.drift, float), (J,)).copy())
        w = np.broadcast_to(np.asarray(self.weights, float), (J,)).copy()
        if np.any(w < 0):
            raise ValueError("averaging weights must be nonnegative")
        object.__setattr__(self, "weights", w)
        object.__setattr__(
            self, "term_const", np.broadcast_to(np.asarray(self.term_const, float), (J,)).copy()
        )
        tl = np.zeros((J, D)) if self.term_lin is None else np.asarray(self.term_lin, float)
        bl = np.zeros(D) if self.base_lin is None else np.asarray(self.base_lin, float)
        if tl.shape != (J, D) or bl.shape != (D,):
            raise ValueError("linear coefficient shapes do not match the loading matrix")
        object.__setattr__(self, "term_lin", tl)
        object.__setattr__(self, "base_lin", bl)
        object.__setattr__(self, "strike", float(self.strike))
        object.__setattr__(self, "base_const", float(self.base_const))

    @property
    def dim(self) -> int:
        return self.loading.shape[1]

    @property
    def has_linear_part(self) -> bool:
        return bool(np.any(self.term_lin) or np.any(self.base_lin))

    def _log_terms(self, z):
        return self.drift + z @ self.loading.T

    def average(self, z) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=float))
        return np.exp(self._log_terms(z)) @ self.weights

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        single = z.ndim == 1
        z = np.atleast_2d(z)
        S = np.exp(self._log_terms(z))
        inside = S @ self.weights >= self.strike
        smooth = S @ self.term_const + self.base_const
        if self.has_linear_part:
            smooth = smooth + np.einsum("nj,jk,nk->n", S, self.term_lin, z) + z @ self.base_lin
        out = np.where(inside, smooth, 0.0)
        return float(out[0]) if single else out

    def rotated(self, Q) -> "KinkIntegrand":
        """The integrand ``x -> f(Q x)``."""
        Q = np.asarray(Q, dtype=float)
        return replace(
            self,
            loading=self.loading @ Q,
            term_lin=self.term_lin @ Q,
            base_lin=self.base_lin @ Q,
        )

    def scaled(self, c: float) -> "KinkIntegrand":
        return replace(
            self,
            term_const=c * self.term_const,
            term_lin=c * self.term_lin,
            base_const=c * self.base_const,
            base_lin=c * self.base_lin,
        )


@dataclass(frozen=True)
class ThresholdSolve:
    gamma: float
    iterations: int
    residual: float


def _threshold_batch(log_amp, loading, log_k, max_iter=NEWTON_MAX_ITER, tol=NEWTON_TOL):
    """Roots of ``log sum_j exp(log_amp[:, j] + loading[j] * z) = log_k``, row by row.

    ``loading`` must be nonnegative.  The left side is convex and increasing
    in ``z`` with slope bounded by ``max(loading)``, so Newton from 0 converges
    globally; steps are capped at ``MAX_STEP`` and rows that still fail fall
    back to bisection.  Returns ``(gamma, iterations, residual)`` with
    ``gamma = -inf`` where the sum exceeds the target for every ``z`` and
    ``+inf`` where it never reaches it.
    """
    N = log_amp.shape[0]
    gamma = np.zeros(N)
    iters = np.zeros(N, dtype=np.int64)
    resid = np.zeros(N)
    moving = loading > 0
    if not np.any(moving):
        level = special.logsumexp(log_amp, axis=1)
        gamma[:] = np.where(level >= log_k, -np.inf, np.inf)
        return gamma, iters, resid
    # terms with zero loading set a floor the sum can never go below
    if not np.all(moving):
        floor = special.logsumexp(log_amp[:, ~moving], axis=1)
        below = floor >= log_k
    else:
        below = np.zeros(N, dtype=bool)
    active = np.flatnonzero(~below)
    gamma[below] = -np.inf
    z = np.zeros(active.size)
    la = log_amp[active]
    for it in range(max_iter):
        e = la + loading * z[:, None]
        top = e.max(axis=1)
        w = np.exp(e - top[:, None])
        s = w.sum(axis=1)
        h = top + np.log(s) - log_k
        slope = (w @ loading) / s
        done = np.abs(h) <= tol
        iters[active[~done]] += 1
        if np.all(done):
            break
        step = np.clip(h / slope, -MAX_STEP, MAX_STEP)
        z = np.where(done, z, z - step)
        escaped = np.abs(z) > Z_LIMIT
        if np.any(escaped):
            gamma[active[escaped]] = np.where(z[escaped] > 0, np.inf, -np.inf)
            keep = ~escaped
            active, z, la = active[keep], z[keep], la[keep]
    else:
        e = la + loading * z[:, None]
        h = special.logsumexp(e, axis=1) - log_k
        bad = np.abs(h) > tol
        if np.any(bad):
            z[bad] = _bisect(la[bad], loading, log_k)
    gamma[active] = z
    e = la + loading * z[:, None]
    resid[active] = np.abs(np.expm1(special.logsumexp(e, axis=1) - log_k))
    return gamma, iters, resid


def _bisect(la, loading, log_k):
    lo = np.full(la.shape[0], -1.0)
    hi = np.full(la.shape[0], 1.0)

    def h(z):
        return special.logsumexp(la + loading * z[:, None], axis=1) - log_k

    while np.any(h(lo) > 0) or np.any(h(hi) < 0):
        lo = np.where(h(lo) > 0, 2 * lo, lo)
        hi = np.where(h(hi) < 0, 2 * hi, hi)
        if np.max(hi) > 1e6 or np.min(lo) < -1e6:
            raise NumericalError("threshold bracket did not close")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        pos = h(mid) >= 0
        hi = np.where(pos, mid, hi)
        lo = np.where(pos, lo, mid)
    return 0.5 * (lo + hi)


def _check_signs(loading) -> int:
    """+1 if all loadings are >= 0, -1 if all are <= 0, else raise."""
    if np.all(loading >= 0):
        return 1
    if np.all(loading <= 0):
        return -1
    raise MonotonicityError(
        "pre-integration column has mixed signs; the closed form needs a monotone average"
    )


def solve_threshold(amplitudes, loadings, K: float) -> ThresholdSolve:
    """Root of ``(1/J) sum_j amplitudes[j] * exp(loadings[j] * z) = K``.

    Returns ``gamma = -inf`` when ``K <= 0`` (the average always exceeds it).
    """
    a = np.asarray(amplitudes, dtype=float)
    l = np.asarray(loadings, dtype=float)
    if np.any(a <= 0):
        raise ValueError("amplitudes must be positive")
    if K <= 0:
        return ThresholdSolve(-math.inf, 0, 0.0)
    if _check_signs(l) < 0 and np.any(l < 0):
        raise MonotonicityError("loadings are all negative; flip the column before solving")
    g, it, res = _threshold_batch(np.log(a / a.size)[None, :], l, math.log(K))
    return ThresholdSolve(float(g[0]), int(it[0]), float(res[0]))


def _gl_panels(q: int, width: float = 0.0):
    """Nodes/weights on [0, 1] of a composite Gauss-Legendre rule.

    Uses at least ``q`` nodes, and enough panels that none is wider than
    ``MAX_PANEL`` once the unit interval is stretched to ``width``.
    """
    per = min(q, PANEL_NODES)
    panels = max(1, -(-q // per), math.ceil(width / MAX_PANEL))
    x, w = np.polynomial.legendre.leggauss(per)
    x = (x + 1.0) / 2.0
    w = w / 2.0
    nodes = np.concatenate([(p + x) / panels for p in range(panels)])
    weights = np.concatenate([w / panels for _ in range(panels)])
    return nodes, weights


@dataclass(frozen=True, eq=False)
class PreintegratedIntegrand:
    """Conditional expectation of a :class:`KinkIntegrand` over one input.

    ``inner`` is expressed in the coordinates used for integration, i.e. after
    any rotation; column ``column`` is integrated out and the remaining
    columns, in their original order, are the inputs of this function.

    ``rule`` is ``"closed-form"`` (Gaussian partial moments) or
    ``"quadrature"``: the kink is located first and each region where the
    payoff is active is integrated with a ``q``-node composite
    Gauss-Legendre rule, so the quadrature never straddles the kink.
    """

    inner: KinkIntegrand
    column: int = 0
    rule: str = "closed-form"
    q: int = 64
    sign_fixed: bool = False
    mixed: bool = False
    stats: dict = field(default_factory=dict, compare=False)

    @property
    def dim(self) -> int:
        return self.inner.dim - 1

    def _split(self, x_rest):
        x_rest = np.atleast_2d(np.asarray(x_rest, dtype=float))
        if x_rest.shape[1] != self.dim:
            raise ValueError(f"expected {self.dim} inputs, got {x_rest.shape[1]}")
        F = self.inner.loading
        rest = np.delete(np.arange(self.inner.dim), self.column)
        la = self.inner.drift + x_rest @ F[:, rest].T
        l = F[:, self.column]
        alpha = self.inner.term_const + x_rest @ self.inner.term_lin[:, rest].T
        beta = self.inner.term_lin[:, self.column]
        alpha0 = self.inner.base_const + x_rest @ self.inner.base_lin[rest]
        beta0 = self.inner.base_lin[self.column]
        return la, l, alpha, beta, alpha0, beta0

    def threshold(self, x_rest):
        la, l, *_ = self._split(x_rest)
        w = self.inner.weights
        live = w > 0
        if self.inner.strike <= 0:
            n = la.shape[0]
            return np.full(n, -np.inf), np.zeros(n, dtype=np.int64), np.zeros(n)
        return _threshold_batch(
            la[:, live] + np.log(w[live]), l[live], math.log(self.inner.strike)
        )

    def __call__(self, x_rest):
        x_rest = np.asarray(x_rest, dtype=float)
        single = x_rest.ndim == 1
        if self.mixed:
            out = self._mixed_quadrature(np.atleast_2d(x_rest))
        else:
            gamma, iters, _ = self.threshold(x_rest)
            self.stats["newton_iterations"] = self.stats.get("newton_iterations", 0) + int(iters.sum())
            self.stats["evaluations"] = self.stats.get("evaluations", 0) + iters.size
            if self.rule == "closed-form":
                out = self._closed_form(x_rest, gamma)
            else:
                out = self._quadrature(x_rest, gamma)
        return float(out[0]) if single else out

    def _closed_form(self, x_rest, gamma):
        la, l, alpha, beta, alpha0, beta0 = self._split(x_rest)
        g = gamma[:, None]
        finite = np.isfinite(gamma)
        with np.errstate(invalid="ignore", over="ignore"):
            upper = np.exp(la + 0.5 * l * l + special.log_ndtr(l - g))
            dens = np.where(
                finite[:, None],
                np.exp(la + l * g - 0.5 * g * g - gaussmap.LOG_SQRT_2PI),
                0.0,
            )
        upper = np.where(np.isposinf(g), 0.0, upper)
        terms = (alpha + beta * l) * upper + beta * dens
        tail = gaussmap.norm_cdf_upper(gamma)
        dens0 = np.where(finite, gaussmap.norm_pdf(np.where(finite, gamma, 0.0)), 0.0)
        return terms.sum(axis=1) + alpha0 * tail + beta0 * dens0

    def _smooth_along(self, la, l, alpha, beta, alpha0, beta0, z):
        """Active-region integrand at points ``z`` (rows x nodes), without the indicator."""
        S = np.exp(la[:, None, :] + z[:, :, None] * l)
        val = np.einsum("nqj,nqj->nq", S, alpha[:, None, :] + z[:, :, None] * beta)
        return val + alpha0[:, None] + beta0 * z

    def _quadrature(self, x_rest, gamma, chunk=512):
        la, l, alpha, beta, alpha0, beta0 = self._split(x_rest)
        # the integrand is a mixture of Gaussians centred at the loadings; beyond
        # TAIL standard deviations from all of them the mass is below rounding
        floor = min(l.min(initial=0.0), 0.0) - TAIL
        ceil = max(l.max(initial=0.0), 0.0) + TAIL
        out = np.zeros(la.shape[0])
        for s in range(0, la.shape[0], chunk):
            sl = slice(s, s + chunk)
            g = gamma[sl]
            empty = g >= ceil
            lo = np.where(empty, ceil, np.maximum(g, floor))
            width = ceil - lo
            t, wt = _gl_panels(self.q, float(width.max(initial=0.0)))
            z = lo[:, None] + width[:, None] * t
            vals = self._smooth_along(la[sl], l, alpha[sl], beta, alpha0[sl], beta0, z)
            out[sl] = width * np.sum(wt * vals * gaussmap.norm_pdf(z), axis=1)
        return out

    def _mixed_quadrature(self, x_rest):
        """Scan ``[-8, 8]`` for sign changes of ``A - K`` and integrate each active piece."""
        la, l, alpha, beta, alpha0, beta0 = self._split(x_rest)
        w = self.inner.weights
        K = self.inner.strike
        grid = np.linspace(-SCAN_HALF_WIDTH, SCAN_HALF_WIDTH, 321)
        out = np.zeros(la.shape[0])
        for i in range(la.shape[0]):
            def gap(z):
                return np.exp(la[i] + np.multiply.outer(z, l)) @ w - K

            vals = gap(grid)
            edges = [-SCAN_HALF_WIDTH - TAIL]
            for a, b, va, vb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
                if (va >= 0) != (vb >= 0):
                    for _ in range(80):
                        mid = 0.5 * (a + b)
                        if (gap(np.array([mid]))[0] >= 0) == (va >= 0):
                            a = mid
                        else:
                            b = mid
                    edges.append(0.5 * (a + b))
            edges.append(SCAN_HALF_WIDTH + TAIL)
            total = 0.0
            for lo, hi in zip(edges[:-1], edges[1:]):
                probe = lo + 0.5 * (hi - lo)
                if gap(np.array([probe]))[0] < 0:
                    continue
                t, wt = _gl_panels(self.q, hi - lo)
                z = (lo + (hi - lo) * t)[None, :]
                f = self._smooth_along(
                    la[i : i + 1], l, alpha[i : i + 1], beta, alpha0[i : i + 1], beta0, z
                )
                total += (hi - lo) * np.sum(wt * f[0] * gaussmap.norm_pdf(z[0]))
            out[i] = total
        return out


def preintegrate(
    inner: KinkIntegrand,
    column: int = 0,
    rule: str = "closed-form",
    q: int = 64,
    allow_quad_fallback: bool = False,
) -> PreintegratedIntegrand:
    """Wrap ``inner`` so column ``column`` is integrated out against N(0, 1).

    An all-nonpositive column is negated first (``x -> -x`` leaves the
    Gaussian law unchanged).  A mixed-sign column raises
    :class:`MonotonicityError` unless ``allow_quad_fallback``, in which case
    the segmented quadrature rule is used.
    """
    if rule not in ("closed-form", "quadrature"):
        raise ValueError(f"unknown rule {rule!r}")
    col = inner.loading[inner.weights > 0, column]
    try:
        sign = _check_signs(col)
    except MonotonicityError:
        if not allow_quad_fallback:
            raise
        log.info("mixed-sign pre-integration column; using segmented quadrature")
        return PreintegratedIntegrand(inner, column, "quadrature", q, False, True)
    flipped = sign < 0 and np.any(col < 0)
    if flipped:
        flip = np.ones(inner.dim)
        flip[column] = -1.0
        inner = inner.rotated(np.diag(flip))
    return PreintegratedIntegrand(inner, column, rule, q, bool(flipped), False)


def preintegrate_callable(f, Theta, q: int = 64):
    """Gauss-Hermite pre-integration of an arbitrary smooth integrand along ``Theta[:, 0]``.

    Used when an integrand has no kink closed form.  Returns a function of
    ``d - 1`` inputs that feed ``Theta[:, 1:]``.
    """
    log.info("integrand has no closed form; pre-integrating with %d-node Gauss-Hermite", q)
    Theta = np.asarray(Theta, dtype=float)
    rule = gaussmap.gauss_hermite(q)
    theta, psi = Theta[:, 0], Theta[:, 1:]

    def g(x_rest):
        x_rest = np.atleast_2d(np.asarray(x_rest, dtype=float))
        base = x_rest @ psi.T
        pts = base[:, None, :] + rule.nodes[None, :, None] * theta
        vals = np.asarray(f(pts.reshape(-1, theta.size)), dtype=float).reshape(base.shape[0], -1)
        return vals @ rule.weights

    return g


def assemble_qmc_integrand(p):
    """Function of uniforms ``u`` in (0,1)^(d-1) feeding the non-integrated inputs in order."""

    def integrand(u):
        return p(gaussmap.norm_inv_cdf(u))

    return integrand


def preintegrate_call(factor, params, z_rest, rule: str = "closed-form"):
    """Conditional expected Asian call payoff given ``z_rest``, integrating input 0 of ``factor``."""
    from .finance import asian_integrands

    p = preintegrate(asian_integrands(params, factor)["payoff"], 0, rule)
    return p(z_rest)


def preintegrate_linear_kink(factor, params, z_rest, greek: str, rule: str = "closed-form"):
    """Conditional expectation of an Asian Greek integrand given ``z_rest``."""
    from .finance import asian_integrands

    p = preintegrate(asian_integrands(params, factor)[greek.lower()], 0, rule)
    return p(z_rest)
