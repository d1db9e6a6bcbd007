"""Seeded Monte Carlo experiments verifying the multivariate CLTs.

For a model inside the theorem hypotheses, the normalized time averages U_T
and V_T converge in law to N_k(0, Lambda). Experiments simulate n_paths
independent bundles, evaluate the chosen functional, and compare the sample
moments with the quadrature targets.

Reproducibility contract: path m is always generated from the counter-based
stream keyed by (master_seed, m), and every sample lands in slot m of the
result array, so the report is bit-identical for a fixed config no matter
how many workers computed it or in which order chunks finished.

Standard errors for covariance entries come from a leave-one-out jackknife
over paths rather than fourth-moment normal theory, which would presume the
very normality under test.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import kstest

from .asymptotics import (
    EtaVector,
    ModelSpec,
    eta,
    lambda_matrix,
    validate_hypotheses,
)
from .errors import TooFewSamples, ValidationError
from .fgn import SimGrid
from .kernels import check_admissibility
from .volterra import functional_U, functional_V, sigma_profile, simulate_paths

__all__ = [
    "ExperimentConfig",
    "MCReport",
    "run_clt_experiment",
    "compare_covariance",
    "normality_diagnostics",
    "report_to_dict",
    "OUT_OF_SCOPE_STAMP",
    "QUANTILE_LEVELS",
]

QUANTILE_LEVELS = (0.01, 0.05, 0.25, 0.50, 0.75, 0.95, 0.99)
OUT_OF_SCOPE_STAMP = "OUT OF THEOREM SCOPE"
_IN_SCOPE_STAMP = "within_hypotheses"
_ADMISSIBILITY_TOL = 1e-6


@dataclass(frozen=True)
class ExperimentConfig:
    """One fully specified CLT experiment."""

    model: ModelSpec
    functional: str
    T: float
    dt: float
    n_paths: int
    master_seed: int
    workers: int = 1

    def __post_init__(self):
        if self.functional not in ("U", "V"):
            raise ValidationError(f"functional must be 'U' or 'V', got {self.functional!r}")
        T = float(self.T)
        dt = float(self.dt)
        if not (T > 0 and dt > 0 and math.isfinite(T) and math.isfinite(dt)):
            raise ValidationError(f"need finite positive T and dt, got T={T}, dt={dt}")
        steps = T / dt
        n_steps = round(steps)
        if n_steps < 1 or abs(steps - n_steps) > 1e-9 * max(1.0, n_steps):
            raise ValidationError(f"T/dt = {steps} must be a positive integer")
        if int(self.n_paths) != self.n_paths or self.n_paths < 2:
            raise ValidationError(f"n_paths must be an integer >= 2, got {self.n_paths}")
        if int(self.workers) != self.workers or self.workers < 1:
            raise ValidationError(f"workers must be a positive integer, got {self.workers}")
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "dt", dt)
        object.__setattr__(self, "n_paths", int(self.n_paths))
        object.__setattr__(self, "master_seed", int(self.master_seed))
        object.__setattr__(self, "workers", int(self.workers))

    @property
    def grid(self) -> SimGrid:
        return SimGrid(dt=self.dt, n_steps=round(self.T / self.dt))


@dataclass(frozen=True)
class MCReport:
    """Aggregated experiment outcome.

    Entries that need a theorem-scope target (target_lambda, z_scores, KS)
    are NaN for out-of-scope runs; scope records which case this is.
    runtime_seconds and the raw samples live on the object but are excluded
    from the serialized report, which must be bit-identical across reruns.
    """

    functional: str
    empirical_mean: np.ndarray
    empirical_cov: np.ndarray
    target_lambda: np.ndarray
    z_scores: np.ndarray
    jackknife_se: np.ndarray
    ks_statistics: np.ndarray
    ks_pvalues: np.ndarray
    quantiles: np.ndarray
    seed: int
    n_paths: int
    horizon: float
    dt: float
    scope: str
    runtime_seconds: float
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        cov = np.asarray(self.empirical_cov, dtype=np.float64)
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
            raise ValidationError("empirical covariance must be symmetric")
        eig = np.linalg.eigvalsh(0.5 * (cov + cov.T))
        if eig.min() < -1e-10 * max(np.trace(cov), 1e-300):
            raise ValidationError(f"empirical covariance not PSD: {eig}")

    @property
    def k(self) -> int:
        return self.empirical_mean.shape[0]


def _require_admissible(model: ModelSpec, functional: str) -> None:
    """The theorem hypotheses, checked hard: ranks, Hurst range, kernel
    integrability conditions, and positive limit variance."""
    validate_hypotheses(model)
    for i, spec in enumerate(model.kernels):
        rep = check_admissibility(spec, model.h.h, model.expansions[i].rank,
                                  _ADMISSIBILITY_TOL)
        failed = [name for name, ok in (
            ("absolute integrability", rep.condition_integrable),
            ("power integrability", rep.condition_breuer),
            ("positive limit variance", rep.eta_positive),
            ("weighted integrability", rep.condition_dol2),
        ) if not ok]
        if failed:
            raise ValidationError(
                f"kernel {i} fails admissibility: {', '.join(failed)}"
            )
    del functional  # both functionals share the standing hypotheses


def _chunk_samples(model: ModelSpec, functional: str, dt: float, n_steps: int,
                   master_seed: int, normalizer, start: int, stop: int):
    grid = SimGrid(dt=dt, n_steps=n_steps)
    out = np.empty((stop - start, model.k))
    for idx in range(start, stop):
        bundle = simulate_paths(model.kernels, grid, model.h, master_seed,
                                path_index=idx)
        if functional == "U":
            fs = functional_U(bundle, model, sigma=normalizer)
        else:
            fs = functional_V(bundle, model, etas=normalizer)
        out[idx - start] = fs.values
    return start, out


def _jackknife_se(samples: np.ndarray) -> np.ndarray:
    """SE of each covariance entry by leave-one-out over paths.

    Uses the exact update S_(m) = S - n/(n-1) d_m d_m^T for the centered
    scatter matrix, so no O(n^2) recomputation is needed.
    """
    n, k = samples.shape
    if n < 3:
        return np.full((k, k), np.nan)
    d = samples - samples.mean(axis=0)
    scatter = d.T @ d
    outer = np.einsum("mi,mj->mij", d, d)
    loo = (scatter[None, :, :] - (n / (n - 1.0)) * outer) / (n - 2.0)
    return np.sqrt((n - 1.0) / n * ((loo - loo.mean(axis=0)) ** 2).sum(axis=0))


def run_clt_experiment(cfg: ExperimentConfig, force: bool = False) -> MCReport:
    """Simulate, evaluate the functional on every path, aggregate.

    Models outside the theorem hypotheses are refused unless force=True,
    in which case the run proceeds without targets and the report is
    stamped out of scope.
    """
    t_start = time.perf_counter()
    model = cfg.model
    scope = _IN_SCOPE_STAMP
    try:
        _require_admissible(model, cfg.functional)
    except ValidationError:
        if not force:
            raise
        scope = OUT_OF_SCOPE_STAMP

    k = model.k
    in_scope = scope == _IN_SCOPE_STAMP
    if in_scope:
        # jackknife SEs are O(Lambda / sqrt(n_paths)); certifying the target
        # to 1e-4 keeps it 2-3 orders below any comparison it will feed
        target = lambda_matrix(model, tol=1e-4).entries
    else:
        target = np.full((k, k), np.nan)

    grid = cfg.grid
    if cfg.functional == "U":
        normalizer = np.vstack([
            sigma_profile(spec, grid, model.h) for spec in model.kernels
        ])
    else:
        normalizer = eta(model)

    n = cfg.n_paths
    samples = np.empty((n, k))
    chunk = max(1, -(-n // cfg.workers))
    ranges = [(s, min(s + chunk, n)) for s in range(0, n, chunk)]
    if cfg.workers == 1:
        results = [
            _chunk_samples(model, cfg.functional, cfg.dt, grid.n_steps,
                           cfg.master_seed, normalizer, lo, hi)
            for lo, hi in ranges
        ]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [
                pool.submit(_chunk_samples, model, cfg.functional, cfg.dt,
                            grid.n_steps, cfg.master_seed, normalizer, lo, hi)
                for lo, hi in ranges
            ]
            results = [f.result() for f in futures]
    for start, block in results:
        samples[start : start + block.shape[0]] = block

    mean = samples.mean(axis=0)
    d = samples - mean
    cov = (d.T @ d) / (n - 1.0)
    se = _jackknife_se(samples)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (cov - target) / se

    ks_stat = np.full(k, np.nan)
    ks_p = np.full(k, np.nan)
    if in_scope:
        for i in range(k):
            sd = math.sqrt(max(target[i, i], 0.0))
            if sd > 0:
                res = kstest(samples[:, i], "norm", args=(0.0, sd), mode="asymp")
                ks_stat[i] = res.statistic
                ks_p[i] = res.pvalue

    quant = np.quantile(samples, QUANTILE_LEVELS, axis=0).T

    return MCReport(
        functional=cfg.functional,
        empirical_mean=mean,
        empirical_cov=cov,
        target_lambda=target,
        z_scores=z,
        jackknife_se=se,
        ks_statistics=ks_stat,
        ks_pvalues=ks_p,
        quantiles=quant,
        seed=cfg.master_seed,
        n_paths=n,
        horizon=cfg.T,
        dt=cfg.dt,
        scope=scope,
        runtime_seconds=time.perf_counter() - t_start,
        samples=samples,
    )


def compare_covariance(report: MCReport, tol_sigmas: float):
    """(all entries within tol_sigmas jackknife SEs, per-entry verdicts)."""
    if not (tol_sigmas > 0):
        raise ValidationError(f"tol_sigmas must be positive, got {tol_sigmas}")
    z = np.asarray(report.z_scores, dtype=np.float64)
    verdicts = np.abs(z) <= tol_sigmas
    return bool(np.all(verdicts)), verdicts


def normality_diagnostics(samples: np.ndarray, variances) -> list:
    """Marginal KS tests against N(0, variances[i]); list of (stat, pvalue)."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim == 1:
        samples = samples[:, None]
    if samples.shape[0] < 100:
        raise TooFewSamples(
            f"normality diagnostics need >= 100 samples, got {samples.shape[0]}"
        )
    var = np.atleast_1d(np.asarray(variances, dtype=np.float64))
    if var.shape[0] != samples.shape[1]:
        raise ValidationError(
            f"{var.shape[0]} variances for {samples.shape[1]} components"
        )
    if np.any(var <= 0):
        raise ValidationError("variances must be positive")
    out = []
    for i in range(samples.shape[1]):
        res = kstest(samples[:, i], "norm", args=(0.0, math.sqrt(var[i])),
                     mode="asymp")
        out.append((float(res.statistic), float(res.pvalue)))
    return out


def report_to_dict(report: MCReport) -> dict:
    """JSON-ready view of the report.

    Excludes runtime (timing is not reproducible, and serialized reports
    must be bit-identical across reruns and worker counts) and the raw
    samples (exported separately as CSV).
    """

    def num(x):
        x = float(x)
        return x if math.isfinite(x) else None  # NaN is not valid JSON

    def grid2(a):
        return [[num(x) for x in row] for row in np.asarray(a)]

    def vec(a):
        return [num(x) for x in np.asarray(a)]

    return {
        "schema_version": 1,
        "functional": report.functional,
        "scope": report.scope,
        "seed": report.seed,
        "n_paths": report.n_paths,
        "horizon": report.horizon,
        "dt": report.dt,
        "empirical_mean": vec(report.empirical_mean),
        "empirical_cov": grid2(report.empirical_cov),
        "target_lambda": grid2(report.target_lambda),
        "z_scores": grid2(report.z_scores),
        "jackknife_se": grid2(report.jackknife_se),
        "ks_statistics": vec(report.ks_statistics),
        "ks_pvalues": vec(report.ks_pvalues),
        "quantile_levels": list(QUANTILE_LEVELS),
        "quantiles": grid2(report.quantiles),
    }
