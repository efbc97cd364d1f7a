"""Nonparametric bootstrap confidence intervals.

The resampling unit is the subject: each replicate draws n rows with
replacement, refits both nuisance models on the replicate, and
recomputes the requested statistics.  Replicates are seeded from
independent spawned streams of one root seed, so results are
reproducible and independent of evaluation order.  Replicates that fail
(separation on a resample, infeasible rule, ...) are dropped and
counted; more than 1% dropped warns, more than 10% raises.

Intervals are percentile by default; ``interval="normal"`` uses the
point estimate plus/minus a normal quantile times the replicate
standard deviation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import CausalRulesError, EstimationError, ValidationError
from .estimators import (
    EstimateReport,
    NuisanceSpec,
    Rule,
    estimate_psi,
    estimate_suite,
    relative_risk_plugin,
    tmle_relative_risk,
)
from .ingest import Dataset

INTERVAL_METHODS = ("percentile", "normal")


@dataclass(frozen=True)
class BootstrapConfig:
    """Bootstrap settings: replicate count, seed, interval type, level."""

    replicates: int = 1000
    seed: int = 0
    interval: str = "percentile"
    level: float = 0.95

    def __post_init__(self):
        if self.replicates < 1:
            raise ValidationError("bootstrap replicates must be >= 1")
        if self.interval not in INTERVAL_METHODS:
            raise ValidationError(
                f"interval must be one of {INTERVAL_METHODS}, got {self.interval!r}"
            )
        if not 0.0 < self.level < 1.0:
            raise ValidationError("confidence level must lie in (0, 1)")


@dataclass(frozen=True)
class IntervalEstimate:
    """A point estimate with a bootstrap confidence interval."""

    point: float
    lower: float
    upper: float
    level: float
    method: str
    b_effective: int
    n_failed: int
    point_within: bool

    def to_dict(self) -> dict:
        return {
            "point": self.point,
            "lower": self.lower,
            "upper": self.upper,
            "level": self.level,
            "method": self.method,
            "b_effective": self.b_effective,
            "n_failed": self.n_failed,
            "point_within": self.point_within,
        }


def seeded_resample(n: int, rng: np.random.Generator) -> np.ndarray:
    """n row indices drawn uniformly with replacement."""
    if n < 1:
        raise ValidationError("cannot resample an empty dataset")
    return rng.integers(0, n, size=n)


def replicate_streams(seed: int, replicates: int) -> list[np.random.Generator]:
    """One independent generator per replicate, spawned from a root seed."""
    root = np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in root.spawn(replicates)]


def interval_from_replicates(
    values: np.ndarray,
    point: float,
    level: float = 0.95,
    method: str = "percentile",
) -> IntervalEstimate:
    """Build an interval from finite replicate values of one statistic."""
    values = np.asarray(values, dtype=float)
    finite = values[np.isfinite(values)]
    n_failed = int(values.size - finite.size)
    if finite.size == 0:
        raise EstimationError("no successful bootstrap replicates")
    if method == "percentile":
        tail = (1.0 - level) / 2.0
        lower, upper = np.quantile(finite, [tail, 1.0 - tail])
    elif method == "normal":
        z = float(norm.ppf(1.0 - (1.0 - level) / 2.0))
        sd = float(finite.std(ddof=1)) if finite.size > 1 else 0.0
        lower, upper = point - z * sd, point + z * sd
    else:
        raise ValidationError(f"interval must be one of {INTERVAL_METHODS}, got {method!r}")
    return IntervalEstimate(
        point=float(point),
        lower=float(lower),
        upper=float(upper),
        level=level,
        method=method,
        b_effective=int(finite.size),
        n_failed=n_failed,
        point_within=bool(lower <= point <= upper),
    )


def _check_failures(n_failed: int, replicates: int) -> None:
    if n_failed > 0.10 * replicates:
        raise EstimationError(
            f"{n_failed} of {replicates} bootstrap replicates failed (> 10%)"
        )
    if n_failed > 0.01 * replicates:
        warnings.warn(
            f"{n_failed} of {replicates} bootstrap replicates failed and were dropped",
            stacklevel=3,
        )


def bootstrap_statistics(
    dataset: Dataset,
    stat_fn,
    config: BootstrapConfig,
    n_stats: int,
) -> np.ndarray:
    """(replicates, n_stats) matrix of replicate statistics.

    ``stat_fn(dataset) -> array`` is applied to each resampled dataset.
    A replicate that raises a package error yields a NaN row; per-cell
    NaNs from ``stat_fn`` are kept as-is.  Failure accounting uses the
    all-NaN rows.
    """
    out = np.full((config.replicates, n_stats), np.nan)
    for b, rng in enumerate(replicate_streams(config.seed, config.replicates)):
        idx = seeded_resample(dataset.n, rng)
        resampled = dataset.take(idx)
        try:
            values = np.asarray(stat_fn(resampled), dtype=float)
            if values.shape != (n_stats,):
                raise ValidationError("stat_fn returned the wrong number of statistics")
            out[b] = values
        except CausalRulesError:
            pass
    n_failed = int(np.isnan(out).all(axis=1).sum())
    _check_failures(n_failed, config.replicates)
    return out


def bootstrap_ci(
    dataset: Dataset,
    spec: NuisanceSpec,
    rule: Rule,
    estimator: str,
    config: BootstrapConfig | None = None,
    parameter: str = "psi",
    *,
    truncate_weights: bool = True,
    rules_from_truncated_g: bool = False,
    itt_covariate: str = "delta",
) -> IntervalEstimate:
    """Bootstrap interval for one estimator under one rule.

    ``parameter="psi"`` targets the counterfactual mean of ``rule``;
    ``parameter="rr"`` targets the relative risk of ``rule.target``
    against target 0 in the same family.  Nuisance models are refit on
    every replicate from ``spec``; models a cell does not need are not
    fit (G-computation under a static rule never fits g).
    """
    if config is None:
        config = BootstrapConfig()
    if parameter not in ("psi", "rr"):
        raise ValidationError("parameter must be 'psi' or 'rr'")

    need_g = estimator != "gcomp" or (rule.family != "static" and rule.alpha > 0.0)
    need_q = estimator != "iptw"

    def compute(ds: Dataset) -> np.ndarray:
        g_model = spec.fit_g(ds) if need_g else None
        q_model = spec.fit_q(ds) if need_q else None
        if parameter == "psi":
            est = estimate_psi(
                estimator, ds, g_model, q_model, rule,
                truncate_weights=truncate_weights,
                rules_from_truncated_g=rules_from_truncated_g,
            )
            return np.array([est.psi])
        if estimator == "tmle":
            rr = tmle_relative_risk(
                ds, g_model, q_model, rule.family, rule.target,
                alpha=rule.alpha, empty_set_policy=rule.empty_set_policy,
                truncate_weights=truncate_weights,
                rules_from_truncated_g=rules_from_truncated_g,
                itt_covariate=itt_covariate,
            )
            return np.array([rr.theta])
        den_rule = Rule(
            family=rule.family, target=0, alpha=rule.alpha,
            empty_set_policy=rule.empty_set_policy,
        )
        num = estimate_psi(
            estimator, ds, g_model, q_model, rule,
            truncate_weights=truncate_weights,
            rules_from_truncated_g=rules_from_truncated_g,
        )
        den = estimate_psi(
            estimator, ds, g_model, q_model, den_rule,
            truncate_weights=truncate_weights,
            rules_from_truncated_g=rules_from_truncated_g,
        )
        return np.array([relative_risk_plugin(num, den).theta])

    point = float(compute(dataset)[0])
    reps = bootstrap_statistics(dataset, compute, config, n_stats=1)
    return interval_from_replicates(reps[:, 0], point, config.level, config.interval)


def attach_bootstrap_intervals(
    report: EstimateReport,
    dataset: Dataset,
    spec: NuisanceSpec,
    config: BootstrapConfig,
    *,
    empty_set_policy: str = "error",
    truncate_weights: bool | dict = True,
    rules_from_truncated_g: bool = False,
    itt_covariate: str = "delta",
) -> EstimateReport:
    """Attach psi and relative-risk intervals to every cell of a report.

    One resample and one nuisance refit serve the whole grid per
    replicate, so the intervals across cells are computed from the same
    replicate datasets (and cells that coincide, such as static versus
    realistic at alpha 0, get identical intervals).
    """
    labels: list[tuple[str, int, str, str]] = []
    for cell in report.cells:
        if cell.psi is not None:
            labels.append((cell.family, cell.target, cell.estimator, "psi"))
        if cell.rr is not None:
            labels.append((cell.family, cell.target, cell.estimator, "rr"))
    if not labels:
        return report
    index = {lab: j for j, lab in enumerate(labels)}

    def compute(ds: Dataset) -> np.ndarray:
        g_model = spec.fit_g(ds)
        q_model = spec.fit_q(ds)
        rep = estimate_suite(
            ds, g_model, q_model,
            families=report.families, targets=report.targets,
            estimators=report.estimators, alpha=report.alpha,
            empty_set_policy=empty_set_policy,
            truncate_weights=truncate_weights,
            rules_from_truncated_g=rules_from_truncated_g,
            itt_covariate=itt_covariate,
        )
        values = np.full(len(labels), np.nan)
        for cell in rep.cells:
            j = index.get((cell.family, cell.target, cell.estimator, "psi"))
            if j is not None and cell.psi is not None:
                values[j] = cell.psi.psi
            j = index.get((cell.family, cell.target, cell.estimator, "rr"))
            if j is not None and cell.rr is not None:
                values[j] = cell.rr.theta
        return values

    reps = bootstrap_statistics(dataset, compute, config, n_stats=len(labels))
    for cell in report.cells:
        if cell.psi is not None:
            j = index[(cell.family, cell.target, cell.estimator, "psi")]
            cell.psi_interval = interval_from_replicates(
                reps[:, j], cell.psi.psi, config.level, config.interval
            )
        if cell.rr is not None:
            j = index[(cell.family, cell.target, cell.estimator, "rr")]
            cell.rr_interval = interval_from_replicates(
                reps[:, j], cell.rr.theta, config.level, config.interval
            )
    report.metadata["bootstrap"] = {
        "replicates": config.replicates,
        "seed": config.seed,
        "interval": config.interval,
        "level": config.level,
    }
    return report
