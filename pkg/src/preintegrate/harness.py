"""Experiment driver: estimation methods, ground truths, RMSE sweeps and timing."""

from __future__ import annotations

import csv
import functools
import hashlib
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import block_diag

from . import activesub, finance, preint
from .errors import MonotonicityError
from .gaussmap import GaussianSampler

MC = "mc"
RQMC = "rqmc"
PREINT = "preint"
PREINT_DIMRED = "preint-dimred"
AS_PREINT = "as-preint"
METHODS = (MC, RQMC, PREINT, PREINT_DIMRED, AS_PREINT)

REPORT_COLUMNS = ("integrand", "method", "construction", "m", "n", "replicate", "estimate", "seconds")
SUMMARY_COLUMNS = ("integrand", "method", "construction", "m", "n", "rmse", "stderr", "slope")

_BASKET_ALIASES = {
    "standard": "basket-ordinary-standard",
    "pca": "basket-ordinary-pca",
    "ordinary-standard": "basket-ordinary-standard",
    "ordinary-pca": "basket-ordinary-pca",
    "full-standard": "basket-full-standard",
    "full-pca": "basket-full-pca",
}


@dataclass(frozen=True)
class Problem:
    """An option integrand together with its market parameters."""

    params: finance.MarketParams | finance.BasketParams
    integrand: str = "payoff"

    def __post_init__(self):
        name = self.integrand.lower()
        if self.is_basket:
            if name not in ("payoff", "basket"):
                raise ValueError("basket problems only support the payoff integrand")
            name = "basket"
        elif name not in finance.ASIAN_INTEGRANDS + ("geometric",):
            raise ValueError(f"unknown integrand {self.integrand!r}")
        object.__setattr__(self, "integrand", name)

    @property
    def is_basket(self) -> bool:
        return isinstance(self.params, finance.BasketParams)

    @property
    def dim(self) -> int:
        return 2 * self.params.d if self.is_basket else self.params.d

    def construction_kind(self, construction: str) -> str:
        if self.is_basket:
            if construction in finance.BASKET_KINDS:
                return construction
            if construction in _BASKET_ALIASES:
                return _BASKET_ALIASES[construction]
        elif construction in ("standard", "pca"):
            return construction
        raise ValueError(f"construction {construction!r} does not apply to this problem")

    def factor(self, construction: str) -> finance.FactorMatrix:
        return _factor(self.params, self.construction_kind(construction))

    def build(self, construction: str) -> preint.KinkIntegrand:
        fac = self.factor(construction)
        if self.is_basket:
            return finance.basket_integrand(self.params, fac)
        if self.integrand == "geometric":
            return finance.geometric_integrand(self.params, fac)
        return finance.asian_integrands(self.params, fac)[self.integrand]

    def key(self) -> dict:
        return {"integrand": self.integrand, "params": asdict(self.params)}


@functools.lru_cache(maxsize=32)
def _factor(params, kind: str) -> finance.FactorMatrix:
    if kind == "standard":
        return finance.standard_factor(params.d, params.T)
    if kind == "pca":
        return finance.pca_factor(params.d, params.T)
    return finance.basket_factors(params, kind)


@dataclass(frozen=True)
class MethodSpec:
    kind: str
    construction: str = "standard"
    M: int = 128
    eps: float = 1e-6
    centered: bool = False
    completion: str = activesub.EIGVEC_COMPLEMENT
    allow_quad_fallback: bool = False
    rule: str = "closed-form"

    def __post_init__(self):
        if self.kind not in METHODS:
            raise ValueError(f"unknown method {self.kind!r}; choose from {METHODS}")


@dataclass
class RunInfo:
    estimate: float
    seconds: float
    c_seconds: float = 0.0
    extra: dict = field(default_factory=dict)


def replicate_seeds(master_seed: int, method: str, m: int, replicate: int):
    """Independent ``(integration, gradient)`` seeds for one cell of an experiment."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(METHODS.index(method), m, replicate))
    a, b = ss.generate_state(2, dtype=np.uint64)
    return int(a), int(b)


def _check_n(n: int):
    m = int(n).bit_length() - 1
    if n < 1 or 2**m != n:
        raise ValueError(f"n must be a power of two, got {n}")
    return m


def _preintegrated(ms: MethodSpec, inner, column=0):
    try:
        return preint.preintegrate(inner, column, ms.rule, allow_quad_fallback=ms.allow_quad_fallback)
    except MonotonicityError as exc:
        raise MonotonicityError(f"{ms.kind} with {ms.construction} construction: {exc}") from exc


def run_detailed(ms: MethodSpec, problem: Problem, n: int, seed: int, c_seed: int | None = None) -> RunInfo:
    """One estimate of the problem's expectation with method ``ms`` and timing breakdown."""
    _check_n(n)
    c_seed = seed + 1 if c_seed is None else c_seed
    t0 = time.perf_counter()
    f = problem.build(ms.construction)
    D = f.dim
    rqmc = GaussianSampler("rqmc")
    c_time = 0.0
    extra = {}
    if ms.kind == MC:
        est = float(np.mean(f(GaussianSampler("mc").sample(n, D, seed))))
    elif ms.kind == RQMC:
        est = float(np.mean(f(rqmc.sample(n, D, seed))))
    else:
        if ms.kind == PREINT:
            p = _preintegrated(ms, f)
        elif ms.kind == PREINT_DIMRED:
            p0 = _preintegrated(ms, f)
            t1 = time.perf_counter()
            V, spectrum = activesub.gpca_dimred(p0, D - 1, ms.M, c_seed, rqmc, ms.eps)
            c_time = time.perf_counter() - t1
            p = preint.PreintegratedIntegrand(
                p0.inner.rotated(block_diag(1.0, V)), 0, p0.rule, p0.q, p0.sign_fixed, p0.mixed
            )
            extra["spectrum"] = spectrum
        else:
            t1 = time.perf_counter()
            C = activesub.estimate_C(f, D, ms.M, c_seed, rqmc, ms.centered, ms.eps)
            rot = activesub.rotation_from_C(C, ms.completion, ms.centered)
            c_time = time.perf_counter() - t1
            p = _preintegrated(ms, f.rotated(rot.Theta))
            extra["rotation"] = rot
        u = rqmc.uniform(n, D - 1, seed)
        est = float(np.mean(preint.assemble_qmc_integrand(p)(u)))
        extra["sign_fixed"] = p.sign_fixed
    return RunInfo(est, time.perf_counter() - t0, c_time, extra)


def run_method(ms: MethodSpec, problem: Problem, n: int, seed: int) -> float:
    return run_detailed(ms, problem, n, seed).estimate


@dataclass(frozen=True)
class Truth:
    value: float
    stderr: float
    n: int
    reps: int
    construction: str
    method: str
    seed: int


def default_cache_dir() -> Path:
    return Path(os.environ.get("PREINTEGRATE_CACHE", Path.home() / ".cache" / "preintegrate"))


def ground_truth(
    problem: Problem,
    construction: str = "pca",
    n: int = 2**17,
    reps: int = 30,
    seed: int = 20190101,
    method: str = PREINT_DIMRED,
    cache_dir=None,
    use_cache: bool = True,
) -> Truth:
    """Mean of ``reps`` independent high-accuracy estimates, cached on disk."""
    ms = MethodSpec(method, construction)
    key = {
        "problem": problem.key(),
        "construction": construction,
        "method": method,
        "n": n,
        "reps": reps,
        "seed": seed,
    }
    digest = hashlib.sha256(json.dumps(key, sort_keys=True).encode()).hexdigest()[:24]
    path = Path(cache_dir or default_cache_dir()) / f"truth-{digest}.json"
    if use_cache and path.is_file():
        data = json.loads(path.read_text())
        return Truth(**data)
    est = []
    for r in range(reps):
        s, cs = replicate_seeds(seed, method, _check_n(n), r)
        est.append(run_detailed(ms, problem, n, s, cs).estimate)
    est = np.array(est)
    truth = Truth(
        float(est.mean()), float(est.std(ddof=1) / math.sqrt(reps)), n, reps, construction, method, seed
    )
    if use_cache:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(asdict(truth)))
    return truth


def fit_slope(m_values, rmse_values) -> float:
    """Least-squares slope of ``log2 rmse`` against ``m = log2 n``."""
    m = np.asarray(m_values, dtype=float)
    y = np.log2(np.asarray(rmse_values, dtype=float))
    return float(np.polyfit(m, y, 1)[0])


def rmse_with_stderr(estimates, truth: float):
    sq = (np.asarray(estimates, dtype=float) - truth) ** 2
    mse = sq.mean()
    rmse = math.sqrt(mse)
    se_mse = sq.std(ddof=1) / math.sqrt(sq.size)
    return rmse, (se_mse / (2.0 * rmse) if rmse > 0 else 0.0)


@dataclass
class ExperimentReport:
    rows: list
    summary: list
    truth: float

    def write(self, path, summary_path=None):
        _write_csv(path, REPORT_COLUMNS, self.rows)
        if summary_path is None:
            p = Path(path)
            summary_path = p.with_name(p.stem + "-summary" + p.suffix)
        _write_csv(summary_path, SUMMARY_COLUMNS, self.summary)
        return summary_path

    def cell(self, method: str, construction: str, m: int) -> dict:
        for row in self.summary:
            if row["method"] == method and row["construction"] == construction and row["m"] == m:
                return row
        raise KeyError((method, construction, m))


def _write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        w.writeheader()
        for row in rows:
            w.writerow(row)


def rmse_sweep(
    problem: Problem,
    methods,
    m_range,
    reps: int = 50,
    master_seed: int = 0,
    truth: float | None = None,
    workers: int = 1,
) -> ExperimentReport:
    """Replicated estimates for every (method, m) cell, with RMSE and fitted slopes."""
    if truth is None:
        truth = ground_truth(problem).value
    methods = [MethodSpec(m) if isinstance(m, str) else m for m in methods]
    m_range = list(m_range)
    jobs = [(ms, m, r) for ms in methods for m in m_range for r in range(reps)]

    def work(job):
        ms, m, r = job
        s, cs = replicate_seeds(master_seed, ms.kind, m, r)
        info = run_detailed(ms, problem, 2**m, s, cs)
        return {
            "integrand": problem.integrand,
            "method": ms.kind,
            "construction": ms.construction,
            "m": m,
            "n": 2**m,
            "replicate": r,
            "estimate": info.estimate,
            "seconds": info.seconds,
        }

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(work, jobs))
    else:
        rows = [work(j) for j in jobs]
    summary = []
    for ms in methods:
        cells = []
        for m in m_range:
            est = [
                row["estimate"]
                for row in rows
                if row["method"] == ms.kind and row["construction"] == ms.construction and row["m"] == m
            ]
            rmse, se = rmse_with_stderr(est, truth)
            cells.append({
                "integrand": problem.integrand,
                "method": ms.kind,
                "construction": ms.construction,
                "m": m,
                "n": 2**m,
                "rmse": rmse,
                "stderr": se,
            })
        slope = fit_slope(m_range, [c["rmse"] for c in cells]) if len(m_range) > 1 else float("nan")
        for c in cells:
            c["slope"] = slope
        summary.extend(cells)
    return ExperimentReport(rows, summary, truth)


TIMING_COLUMNS = ("integrand", "method", "construction", "n", "seconds", "c_seconds", "reps")


def timing_run(problems, methods, n: int = 2**15, reps: int = 10, master_seed: int = 0):
    """Mean wall-clock seconds per (integrand, method, construction).

    ``c_seconds`` is the part spent estimating the gradient covariance
    (``C`` for the active-subspace method, the pre-integrated one for the
    dimension-reduction method).
    """
    methods = [MethodSpec(m) if isinstance(m, str) else m for m in methods]
    m = _check_n(n)
    out = []
    for problem in problems:
        for ms in methods:
            secs, csecs = [], []
            for r in range(reps):
                s, cs = replicate_seeds(master_seed, ms.kind, m, r)
                info = run_detailed(ms, problem, n, s, cs)
                secs.append(info.seconds)
                csecs.append(info.c_seconds)
            out.append({
                "integrand": problem.integrand,
                "method": ms.kind,
                "construction": ms.construction,
                "n": n,
                "seconds": float(np.mean(secs)),
                "c_seconds": float(np.mean(csecs)),
                "reps": reps,
            })
    return out


def write_timing(path, rows):
    _write_csv(path, TIMING_COLUMNS, rows)
