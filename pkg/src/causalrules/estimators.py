"""Counterfactual mean and relative-risk estimators for treatment rules.

Four estimators of the rule-specific counterfactual outcome probability
``psi = E[Y_{d}]`` are provided:

* ``gcomp``   — G-computation: average the outcome regression at the
  assigned levels (for ITT rules, the observed outcome is kept on rows
  where the target is infeasible).
* ``iptw``    — inverse-probability-of-treatment weighting: average
  ``I(A = d) Y / g(A | W)`` (ITT rows with an infeasible target
  contribute their observed outcome with weight one).
* ``driptw``  — the doubly robust augmented IPTW estimator.
* ``tmle_mean`` — targeted substitution: a one-parameter logistic
  fluctuation of the outcome regression along the inverse-weight
  "clever covariate", then G-computation with the updated fit.  The
  returned estimate solves the doubly robust estimating equation, and
  the residual of that equation is recorded in the diagnostics.

``tmle_relative_risk`` targets the ratio ``theta = psi_a / psi_0``
directly with an iterated fluctuation whose covariate contrasts the two
rules; the plug-in numerator and denominator are refreshed at every
step and the iteration stops once the step size and the estimating
equation residual are both negligible.

``estimate_suite`` runs the full grid of rule families, target levels,
and estimators and collects the results in a tabular report.

Weight denominators use the truncated treatment probabilities by
default; feasibility sets use the raw ones (see ``rules``).  Both
choices can be overridden per call.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np
from scipy.special import expit

from .errors import (
    CausalRulesError,
    ConvergenceError,
    EstimationError,
    ValidationError,
)
from .glm import (
    OutcomeDesign,
    OutcomeModel,
    TreatmentModel,
    fit_fluctuation,
    fit_outcome_model,
    fit_treatment_model,
    select_covariates,
)
from .ingest import Dataset
from .rules import Rule, membership_matrix, itt_assignments, realistic_assignments

if TYPE_CHECKING:  # pragma: no cover
    from .inference import IntervalEstimate

ESTIMATORS = ("gcomp", "iptw", "driptw", "tmle")

# Below this, a denominator psi_0 is considered degenerate for ratios.
MIN_PSI_DENOMINATOR = 1e-10


# ---------------------------------------------------------------------------
# Nuisance model specification


@dataclass(frozen=True)
class NuisanceSpec:
    """How to fit the nuisance models g(a|W) and Q(a,W) on a dataset.

    ``None`` covariate lists mean "all dataset covariates"; empty tuples
    give intercept-only models.  ``q_interactions`` lists
    (covariate, level) product terms added to the outcome design.
    """

    g_covariates: tuple[str, ...] | None = None
    q_covariates: tuple[str, ...] | None = None
    q_interactions: tuple[tuple[str, int], ...] = ()
    alpha_trunc: float = 0.05

    def fit_g(self, dataset: Dataset) -> TreatmentModel:
        return fit_treatment_model(
            dataset, alpha_trunc=self.alpha_trunc, covariate_names=self.g_covariates
        )

    def fit_q(self, dataset: Dataset) -> OutcomeModel:
        names = dataset.covariate_names if self.q_covariates is None else tuple(self.q_covariates)
        design = OutcomeDesign(
            covariate_names=names,
            n_treatment_levels=dataset.n_treatment_levels,
            interactions=tuple(self.q_interactions),
        )
        return fit_outcome_model(dataset, design)


# ---------------------------------------------------------------------------
# Shared per-rule context


@dataclass(frozen=True)
class _RuleContext:
    rule: Rule
    assigned: np.ndarray  # (n,) assigned levels
    member: np.ndarray  # (n, K) feasibility (all True for static / alpha=0)
    member_target: np.ndarray  # (n,) feasibility of the rule target
    probs_w: np.ndarray | None  # weight-scale probabilities (truncated by default)
    g_obs: np.ndarray | None  # probs_w at the observed level
    w_for_q: np.ndarray | None  # covariate columns in outcome-model order


def _build_context(
    dataset: Dataset,
    rule: Rule,
    g_model: TreatmentModel | None,
    q_model: OutcomeModel | None,
    need_weights: bool,
    truncate_weights: bool,
    rules_from_truncated_g: bool,
) -> _RuleContext:
    k = dataset.n_treatment_levels
    if rule.target >= k:
        raise ValidationError(f"rule target {rule.target} outside 0..{k - 1}")
    need_g_rules = rule.family != "static" and rule.alpha > 0.0
    raw = trunc = None
    if g_model is not None and (need_g_rules or need_weights):
        w_g = select_covariates(dataset, g_model.covariate_names)
        raw = g_model.predict_raw(w_g)
        trunc = np.maximum(raw, g_model.alpha_trunc)
    if need_g_rules and raw is None:
        raise ValidationError(f"{rule.family} rules with alpha > 0 need a fitted treatment model")
    if need_weights and raw is None:
        raise ValidationError("this estimator needs a fitted treatment model")

    if need_g_rules:
        member = membership_matrix(trunc if rules_from_truncated_g else raw, rule.alpha)
    else:
        member = np.ones((dataset.n, k), dtype=bool)
    if rule.family in ("static", "realistic"):
        assigned = realistic_assignments(member, rule.target, rule.empty_set_policy)
    else:
        assigned = itt_assignments(member, rule.target, dataset.a)

    probs_w = g_obs = None
    if need_weights:
        probs_w = trunc if truncate_weights else raw
        g_obs = probs_w[np.arange(dataset.n), dataset.a]
    w_for_q = None
    if q_model is not None:
        w_for_q = select_covariates(dataset, q_model.design.covariate_names)
    return _RuleContext(
        rule=rule,
        assigned=assigned,
        member=member,
        member_target=member[:, rule.target],
        probs_w=probs_w,
        g_obs=g_obs,
        w_for_q=w_for_q,
    )


def _check_matched_denominators(g_obs: np.ndarray, matched: np.ndarray) -> None:
    if np.any(g_obs[matched] <= 0.0):
        raise EstimationError(
            "zero treatment probability on a matched row; cannot weight by 1/g "
            "(only possible with truncation disabled)"
        )


def _weight_summary(weights: np.ndarray) -> tuple[int, float | None, float | None, float | None]:
    nz = weights[weights > 0]
    if nz.size == 0:
        return 0, None, None, None
    return int(nz.size), float(nz.min()), float(nz.max()), float(nz.mean())


# ---------------------------------------------------------------------------
# Result containers


@dataclass(frozen=True)
class EstimateDiagnostics:
    """Bookkeeping attached to a point estimate."""

    n: int
    epsilon: float | None = None
    score_residual: float | None = None
    n_weighted: int | None = None
    weight_min: float | None = None
    weight_max: float | None = None
    weight_mean: float | None = None

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "epsilon": self.epsilon,
            "score_residual": self.score_residual,
            "n_weighted": self.n_weighted,
            "weight_min": self.weight_min,
            "weight_max": self.weight_max,
            "weight_mean": self.weight_mean,
        }


@dataclass(frozen=True)
class CounterfactualEstimate:
    """Point estimate of psi = E[Y_d] for one rule and one estimator."""

    estimator: str
    rule: Rule
    psi: float
    diagnostics: EstimateDiagnostics

    def to_dict(self) -> dict:
        return {
            "estimator": self.estimator,
            "family": self.rule.family,
            "target": self.rule.target,
            "alpha": self.rule.alpha,
            "psi": self.psi,
            "diagnostics": self.diagnostics.to_dict(),
        }


@dataclass(frozen=True)
class RelativeRiskEstimate:
    """Estimate of theta = psi_target / psi_0 for one rule family."""

    estimator: str
    family: str
    target: int
    alpha: float
    theta: float
    psi_numerator: float
    psi_denominator: float
    iterations: int = 0
    converged: bool = True
    score_residual: float | None = None
    epsilons: tuple[float, ...] = ()

    def to_dict(self) -> dict:
        return {
            "estimator": self.estimator,
            "family": self.family,
            "target": self.target,
            "alpha": self.alpha,
            "theta": self.theta,
            "psi_numerator": self.psi_numerator,
            "psi_denominator": self.psi_denominator,
            "iterations": self.iterations,
            "converged": self.converged,
            "score_residual": self.score_residual,
            "epsilons": list(self.epsilons),
        }


# ---------------------------------------------------------------------------
# The four counterfactual-mean estimators


def gcomp(
    dataset: Dataset,
    q_model: OutcomeModel,
    rule: Rule,
    g_model: TreatmentModel | None = None,
    *,
    rules_from_truncated_g: bool = False,
) -> CounterfactualEstimate:
    """G-computation: average the outcome regression at the assigned levels.

    ``g_model`` is only needed to build feasibility sets (realistic or
    ITT rules with ``alpha > 0``); static rules never touch it.  For ITT
    rules, rows where the target is infeasible keep their observed
    outcome.
    """
    ctx = _build_context(
        dataset, rule, g_model, q_model,
        need_weights=False, truncate_weights=True,
        rules_from_truncated_g=rules_from_truncated_g,
    )
    if rule.family == "itt":
        q_target = q_model.predict(rule.target, ctx.w_for_q)
        values = np.where(ctx.member_target, q_target, dataset.y.astype(float))
    else:
        values = q_model.predict(ctx.assigned, ctx.w_for_q)
    psi = float(values.mean())
    return CounterfactualEstimate(
        estimator="gcomp",
        rule=rule,
        psi=psi,
        diagnostics=EstimateDiagnostics(n=dataset.n),
    )


def iptw(
    dataset: Dataset,
    g_model: TreatmentModel,
    rule: Rule,
    *,
    truncate_weights: bool = True,
    rules_from_truncated_g: bool = False,
) -> CounterfactualEstimate:
    """IPTW: average ``I(A = d) Y / g(A | W)`` over the sample.

    For ITT rules, rows where the target is infeasible contribute their
    observed outcome with weight one.
    """
    ctx = _build_context(
        dataset, rule, g_model, None,
        need_weights=True, truncate_weights=truncate_weights,
        rules_from_truncated_g=rules_from_truncated_g,
    )
    y = dataset.y.astype(float)
    if rule.family == "itt":
        matched = ctx.member_target & (dataset.a == rule.target)
        _check_matched_denominators(ctx.g_obs, matched)
        weights = np.where(ctx.member_target, 0.0, 1.0)
        weights[matched] = 1.0 / ctx.g_obs[matched]
        values = weights * y
    else:
        matched = dataset.a == ctx.assigned
        _check_matched_denominators(ctx.g_obs, matched)
        weights = np.zeros(dataset.n)
        weights[matched] = 1.0 / ctx.g_obs[matched]
        values = weights * y
    psi = float(values.mean())
    n_w, w_min, w_max, w_mean = _weight_summary(weights)
    return CounterfactualEstimate(
        estimator="iptw",
        rule=rule,
        psi=psi,
        diagnostics=EstimateDiagnostics(
            n=dataset.n, n_weighted=n_w,
            weight_min=w_min, weight_max=w_max, weight_mean=w_mean,
        ),
    )


def driptw(
    dataset: Dataset,
    g_model: TreatmentModel,
    q_model: OutcomeModel,
    rule: Rule,
    *,
    truncate_weights: bool = True,
    rules_from_truncated_g: bool = False,
) -> CounterfactualEstimate:
    """Doubly robust augmented IPTW.

    Adds the weighted outcome-regression residual to the G-computation
    term; consistent when either nuisance model is correct.
    """
    ctx = _build_context(
        dataset, rule, g_model, q_model,
        need_weights=True, truncate_weights=truncate_weights,
        rules_from_truncated_g=rules_from_truncated_g,
    )
    y = dataset.y.astype(float)
    q_obs = q_model.predict(dataset.a, ctx.w_for_q)
    if rule.family == "itt":
        matched = ctx.member_target & (dataset.a == rule.target)
        _check_matched_denominators(ctx.g_obs, matched)
        weights = np.zeros(dataset.n)
        weights[matched] = 1.0 / ctx.g_obs[matched]
        q_target = q_model.predict(rule.target, ctx.w_for_q)
        values = np.where(
            ctx.member_target, weights * (y - q_obs) + q_target, y
        )
    else:
        matched = dataset.a == ctx.assigned
        _check_matched_denominators(ctx.g_obs, matched)
        weights = np.zeros(dataset.n)
        weights[matched] = 1.0 / ctx.g_obs[matched]
        q_assigned = q_model.predict(ctx.assigned, ctx.w_for_q)
        values = weights * (y - q_obs) + q_assigned
    psi = float(values.mean())
    n_w, w_min, w_max, w_mean = _weight_summary(weights)
    return CounterfactualEstimate(
        estimator="driptw",
        rule=rule,
        psi=psi,
        diagnostics=EstimateDiagnostics(
            n=dataset.n, n_weighted=n_w,
            weight_min=w_min, weight_max=w_max, weight_mean=w_mean,
        ),
    )


def tmle_mean(
    dataset: Dataset,
    g_model: TreatmentModel,
    q_model: OutcomeModel,
    rule: Rule,
    *,
    truncate_weights: bool = True,
    rules_from_truncated_g: bool = False,
) -> CounterfactualEstimate:
    """Targeted substitution estimator of psi = E[Y_d].

    Fits the one-parameter logistic fluctuation of the outcome
    regression along the clever covariate ``I(A = d)/g(A|W)`` (for ITT
    rules, weight one on rows with an infeasible target), then averages
    the updated regression at the assigned levels.  The recorded
    ``score_residual`` is the sample mean of the efficient influence
    curve at the returned estimate, which the fluctuation drives to
    numerical zero.
    """
    ctx = _build_context(
        dataset, rule, g_model, q_model,
        need_weights=True, truncate_weights=truncate_weights,
        rules_from_truncated_g=rules_from_truncated_g,
    )
    y = dataset.y.astype(float)
    m_obs = q_model.linear_predictor(dataset.a, ctx.w_for_q)
    if rule.family == "itt":
        matched = ctx.member_target & (dataset.a == rule.target)
        _check_matched_denominators(ctx.g_obs, matched)
        h_obs = np.where(ctx.member_target, 0.0, 1.0)
        h_obs[matched] = 1.0 / ctx.g_obs[matched]
    else:
        matched = dataset.a == ctx.assigned
        _check_matched_denominators(ctx.g_obs, matched)
        h_obs = np.zeros(dataset.n)
        h_obs[matched] = 1.0 / ctx.g_obs[matched]
    fluct = fit_fluctuation(y, h_obs, m_obs)
    eps = fluct.epsilon
    q1_obs = expit(m_obs + eps * h_obs)
    if rule.family == "itt":
        g_target = ctx.probs_w[:, rule.target]
        if np.any(g_target[ctx.member_target] <= 0.0):
            raise EstimationError("zero treatment probability at the target level")
        m_target = q_model.linear_predictor(rule.target, ctx.w_for_q)
        with np.errstate(divide="ignore"):
            h_target = np.where(ctx.member_target, 1.0 / g_target, 0.0)
        q1_target = expit(m_target + eps * h_target)
        values = np.where(ctx.member_target, q1_target, q1_obs)
        psi = float(values.mean())
        eic = np.where(
            ctx.member_target,
            np.where(matched, h_obs, 0.0) * (y - q1_obs) + q1_target,
            y,
        )
        residual = float(eic.mean() - psi)
    else:
        g_assigned = ctx.probs_w[np.arange(dataset.n), ctx.assigned]
        if np.any(g_assigned <= 0.0):
            raise EstimationError("zero treatment probability at an assigned level")
        m_assigned = q_model.linear_predictor(ctx.assigned, ctx.w_for_q)
        q1_assigned = expit(m_assigned + eps / g_assigned)
        psi = float(q1_assigned.mean())
        residual = float(np.mean(h_obs * (y - q1_obs) + q1_assigned) - psi)
    n_w, w_min, w_max, w_mean = _weight_summary(h_obs)
    return CounterfactualEstimate(
        estimator="tmle",
        rule=rule,
        psi=psi,
        diagnostics=EstimateDiagnostics(
            n=dataset.n,
            epsilon=eps,
            score_residual=residual,
            n_weighted=n_w,
            weight_min=w_min,
            weight_max=w_max,
            weight_mean=w_mean,
        ),
    )


_PSI_ESTIMATORS = {
    "gcomp": lambda ds, g, q, rule, tw, rtg: gcomp(
        ds, q, rule, g, rules_from_truncated_g=rtg
    ),
    "iptw": lambda ds, g, q, rule, tw, rtg: iptw(
        ds, g, rule, truncate_weights=tw, rules_from_truncated_g=rtg
    ),
    "driptw": lambda ds, g, q, rule, tw, rtg: driptw(
        ds, g, q, rule, truncate_weights=tw, rules_from_truncated_g=rtg
    ),
    "tmle": lambda ds, g, q, rule, tw, rtg: tmle_mean(
        ds, g, q, rule, truncate_weights=tw, rules_from_truncated_g=rtg
    ),
}


def estimate_psi(
    estimator: str,
    dataset: Dataset,
    g_model: TreatmentModel | None,
    q_model: OutcomeModel | None,
    rule: Rule,
    *,
    truncate_weights: bool = True,
    rules_from_truncated_g: bool = False,
) -> CounterfactualEstimate:
    """Dispatch to one of the four counterfactual-mean estimators by name."""
    if estimator not in _PSI_ESTIMATORS:
        raise ValidationError(f"unknown estimator {estimator!r}; expected one of {ESTIMATORS}")
    if estimator != "iptw" and q_model is None:
        raise ValidationError(f"{estimator} needs a fitted outcome model")
    if estimator != "gcomp" and g_model is None:
        raise ValidationError(f"{estimator} needs a fitted treatment model")
    return _PSI_ESTIMATORS[estimator](
        dataset, g_model, q_model, rule, truncate_weights, rules_from_truncated_g
    )


# ---------------------------------------------------------------------------
# Relative risks


def relative_risk_plugin(
    numerator: CounterfactualEstimate, denominator: CounterfactualEstimate
) -> RelativeRiskEstimate:
    """theta = psi_target / psi_0 from two point estimates of the same estimator."""
    if numerator.estimator != denominator.estimator:
        raise ValidationError("relative risk requires a common estimator")
    if numerator.rule.family != denominator.rule.family:
        raise ValidationError("relative risk requires a common rule family")
    if denominator.rule.target != 0:
        raise ValidationError("the relative-risk denominator is the target-0 rule")
    if abs(denominator.psi) < MIN_PSI_DENOMINATOR:
        raise EstimationError(
            f"denominator psi_0 = {denominator.psi:.3e} is numerically zero"
        )
    return RelativeRiskEstimate(
        estimator=numerator.estimator,
        family=numerator.rule.family,
        target=numerator.rule.target,
        alpha=numerator.rule.alpha,
        theta=numerator.psi / denominator.psi,
        psi_numerator=numerator.psi,
        psi_denominator=denominator.psi,
    )


def _itt_base_covariate(
    member_vec: np.ndarray, eval_a: np.ndarray, g_eval: np.ndarray, level: int
) -> np.ndarray:
    """ITT clever-covariate piece I(level infeasible) + I(feasible) I(A=level)/g."""
    match = member_vec & (eval_a == level)
    _check_matched_denominators(g_eval, match)
    out = np.where(member_vec, 0.0, 1.0)
    out[match] = 1.0 / g_eval[match]
    return out


def tmle_relative_risk(
    dataset: Dataset,
    g_model: TreatmentModel,
    q_model: OutcomeModel,
    family: str,
    target: int,
    *,
    alpha: float = 0.05,
    empty_set_policy: str = "error",
    eps_tol: float = 1e-6,
    residual_tol: float = 1e-8,
    max_iter: int = 50,
    truncate_weights: bool = True,
    rules_from_truncated_g: bool = False,
    itt_covariate: str = "delta",
) -> RelativeRiskEstimate:
    """Targeted estimator of theta = psi_target / psi_0 within one rule family.

    Iterates a one-parameter fluctuation whose covariate contrasts the
    target rule against the target-0 rule, scaled by the running
    plug-in estimates (which are refreshed every step).  Stops when the
    last step satisfied ``|epsilon| < eps_tol`` and the mean of the
    ratio-scale estimating function is within ``residual_tol``; raises
    :class:`ConvergenceError` with the epsilon trace otherwise.

    For ITT rules two covariates are available: ``itt_covariate="delta"``
    (default) contrasts the two ITT clever covariates, while
    ``"appendix"`` uses the variant that splits rows on feasibility of
    the target and contrasts realistic-rule indicators on the rest.
    """
    if target == 0:
        raise ValidationError("relative-risk target must differ from the reference level 0")
    if itt_covariate not in ("delta", "appendix"):
        raise ValidationError("itt_covariate must be 'delta' or 'appendix'")
    rule_num = Rule(family=family, target=target, alpha=alpha, empty_set_policy=empty_set_policy)
    rule_den = Rule(family=family, target=0, alpha=alpha, empty_set_policy=empty_set_policy)
    ctx_num = _build_context(
        dataset, rule_num, g_model, q_model,
        need_weights=True, truncate_weights=truncate_weights,
        rules_from_truncated_g=rules_from_truncated_g,
    )
    ctx_den = _build_context(
        dataset, rule_den, g_model, q_model,
        need_weights=True, truncate_weights=truncate_weights,
        rules_from_truncated_g=rules_from_truncated_g,
    )
    y = dataset.y.astype(float)
    n = dataset.n
    rows = np.arange(n)
    probs_w = ctx_num.probs_w
    g_obs = ctx_num.g_obs
    w_q = ctx_num.w_for_q
    m_obs = q_model.linear_predictor(dataset.a, w_q)
    m_num = q_model.linear_predictor(ctx_num.assigned, w_q)
    m_den = q_model.linear_predictor(ctx_den.assigned, w_q)
    g_num = probs_w[rows, ctx_num.assigned]
    g_den = probs_w[rows, ctx_den.assigned]
    if np.any(g_num <= 0.0) or np.any(g_den <= 0.0):
        raise EstimationError("zero treatment probability at an assigned level")

    if family in ("static", "realistic"):
        ind_num = (dataset.a == ctx_num.assigned).astype(float)
        ind_den = (dataset.a == ctx_den.assigned).astype(float)
        collide = (ctx_num.assigned == ctx_den.assigned).astype(float)
        _check_matched_denominators(g_obs, ind_num > 0)
        _check_matched_denominators(g_obs, ind_den > 0)

        def covariates(theta: float, psi_den: float):
            h_obs = (ind_num - theta * ind_den) / (g_obs * psi_den)
            h_num = (1.0 - theta * collide) / (g_num * psi_den)
            h_den = (collide - theta) / (g_den * psi_den)
            return h_obs, h_num, h_den

    else:
        member = ctx_num.member
        member_num = member[:, target]
        member_den = member[:, 0]
        ha_obs = _itt_base_covariate(member_num, dataset.a, g_obs, target)
        h0_obs = _itt_base_covariate(member_den, dataset.a, g_obs, 0)
        ha_num = _itt_base_covariate(member_num, ctx_num.assigned, g_num, target)
        h0_num = _itt_base_covariate(member_den, ctx_num.assigned, g_num, 0)
        ha_den = _itt_base_covariate(member_num, ctx_den.assigned, g_den, target)
        h0_den = _itt_base_covariate(member_den, ctx_den.assigned, g_den, 0)
        if itt_covariate == "appendix":
            d_real_num = realistic_assignments(member, target, empty_set_policy)
            d_real_den = realistic_assignments(member, 0, empty_set_policy)

            def _appendix(eval_a, g_eval, theta, psi_num, psi_den):
                realistic_part = (
                    (eval_a == d_real_num).astype(float)
                    - theta * (eval_a == d_real_den).astype(float)
                ) / (g_eval * psi_den)
                const_part = 1.0 / psi_den - psi_num / psi_den**2
                return np.where(member_num, const_part, realistic_part)

            def covariates(theta: float, psi_den: float, psi_num: float):
                h_obs = _appendix(dataset.a, g_obs, theta, psi_num, psi_den)
                h_num = _appendix(ctx_num.assigned, g_num, theta, psi_num, psi_den)
                h_den = _appendix(ctx_den.assigned, g_den, theta, psi_num, psi_den)
                return h_obs, h_num, h_den

        else:

            def covariates(theta: float, psi_den: float):
                h_obs = (ha_obs - theta * h0_obs) / psi_den
                h_num = (ha_num - theta * h0_num) / psi_den
                h_den = (ha_den - theta * h0_den) / psi_den
                return h_obs, h_num, h_den

    def plugins():
        psi_num = float(np.mean(expit(m_num)))
        psi_den = float(np.mean(expit(m_den)))
        if psi_den < MIN_PSI_DENOMINATOR:
            raise EstimationError(
                f"denominator psi_0 = {psi_den:.3e} is numerically zero"
            )
        return psi_num, psi_den

    def current_covariates(theta, psi_den, psi_num):
        if family == "itt" and itt_covariate == "appendix":
            return covariates(theta, psi_den, psi_num)
        return covariates(theta, psi_den)

    epsilons: list[float] = []
    converged = False
    residual = np.inf
    psi_num, psi_den = plugins()
    theta = psi_num / psi_den
    for _ in range(max_iter):
        h_obs, h_num, h_den = current_covariates(theta, psi_den, psi_num)
        fluct = fit_fluctuation(y, h_obs, m_obs)
        eps = fluct.epsilon
        epsilons.append(eps)
        m_obs = m_obs + eps * h_obs
        m_num = m_num + eps * h_num
        m_den = m_den + eps * h_den
        psi_num, psi_den = plugins()
        theta = psi_num / psi_den
        h_obs, _, _ = current_covariates(theta, psi_den, psi_num)
        residual = float(np.mean(h_obs * (y - expit(m_obs))))
        if abs(eps) < eps_tol and abs(residual) <= residual_tol:
            converged = True
            break
    if not converged:
        raise ConvergenceError(
            f"relative-risk targeting did not converge in {max_iter} iterations "
            f"(last epsilon {epsilons[-1]:.3e}, residual {residual:.3e})",
            trace=epsilons,
        )
    return RelativeRiskEstimate(
        estimator="tmle",
        family=family,
        target=target,
        alpha=alpha,
        theta=theta,
        psi_numerator=psi_num,
        psi_denominator=psi_den,
        iterations=len(epsilons),
        converged=True,
        score_residual=residual,
        epsilons=tuple(epsilons),
    )


# ---------------------------------------------------------------------------
# The full estimation grid


@dataclass
class SuiteCell:
    """One (family, target, estimator) cell of the estimation grid."""

    family: str
    target: int
    estimator: str
    psi: CounterfactualEstimate | None = None
    psi_error: str | None = None
    rr: RelativeRiskEstimate | None = None
    rr_error: str | None = None
    psi_interval: "IntervalEstimate | None" = None
    rr_interval: "IntervalEstimate | None" = None

    def to_dict(self) -> dict:
        d: dict = {
            "family": self.family,
            "target": self.target,
            "estimator": self.estimator,
            "psi": self.psi.to_dict() if self.psi else None,
            "psi_error": self.psi_error,
            "rr": self.rr.to_dict() if self.rr else None,
            "rr_error": self.rr_error,
        }
        d["psi_interval"] = self.psi_interval.to_dict() if self.psi_interval else None
        d["rr_interval"] = self.rr_interval.to_dict() if self.rr_interval else None
        return d


@dataclass
class EstimateReport:
    """Results of the full rule-family x target x estimator grid."""

    cells: list[SuiteCell]
    families: tuple[str, ...]
    targets: tuple[int, ...]
    estimators: tuple[str, ...]
    alpha: float
    metadata: dict = field(default_factory=dict)

    def cell(self, family: str, target: int, estimator: str) -> SuiteCell:
        for c in self.cells:
            if (c.family, c.target, c.estimator) == (family, target, estimator):
                return c
        raise KeyError((family, target, estimator))

    def to_dict(self) -> dict:
        return {
            "families": list(self.families),
            "targets": list(self.targets),
            "estimators": list(self.estimators),
            "alpha": self.alpha,
            "metadata": self.metadata,
            "cells": [c.to_dict() for c in self.cells],
        }

    def rr_table(self) -> tuple[list[str], list[list[str]]]:
        """Relative-risk table: one row per (family, target >= 1), one
        column per estimator, cells formatted ``est (lo, hi)``."""
        header = ["family", "target"] + [ESTIMATOR_LABELS.get(e, e) for e in self.estimators]
        rows = []
        for family in self.families:
            for target in self.targets:
                if target == 0:
                    continue
                row = [family, str(target)]
                for est in self.estimators:
                    cell = self.cell(family, target, est)
                    row.append(_format_rr_cell(cell))
                rows.append(row)
        return header, rows


ESTIMATOR_LABELS = {
    "gcomp": "G-comp",
    "iptw": "IPTW",
    "driptw": "DR-IPTW",
    "tmle": "TMLE",
}


def _format_rr_cell(cell: SuiteCell) -> str:
    if cell.rr is None:
        return "" if cell.rr_error is None else f"error: {cell.rr_error}"
    text = f"{cell.rr.theta:.2f}"
    if cell.rr_interval is not None:
        text += f" ({cell.rr_interval.lower:.2f}, {cell.rr_interval.upper:.2f})"
    return text


def estimate_suite(
    dataset: Dataset,
    g_model: TreatmentModel | None,
    q_model: OutcomeModel | None,
    *,
    families: tuple[str, ...] = ("static", "realistic", "itt"),
    targets: tuple[int, ...] | None = None,
    estimators: tuple[str, ...] = ESTIMATORS,
    alpha: float = 0.05,
    empty_set_policy: str = "error",
    truncate_weights: bool | dict = True,
    rules_from_truncated_g: bool = False,
    itt_covariate: str = "delta",
    rr_max_iter: int = 50,
) -> EstimateReport:
    """Estimate psi for every (family, target, estimator) cell plus the
    relative risk of each target against target 0 within the family.

    TMLE relative risks are targeted directly with
    :func:`tmle_relative_risk`; the other estimators use the plug-in
    ratio.  Per-cell failures are recorded as messages instead of
    aborting the grid.  ``truncate_weights`` may be a bool or a mapping
    from estimator name to bool.
    """
    if targets is None:
        targets = tuple(range(1, dataset.n_treatment_levels))
    for est in estimators:
        if est not in ESTIMATORS:
            raise ValidationError(f"unknown estimator {est!r}; expected one of {ESTIMATORS}")
    if isinstance(truncate_weights, dict):
        trunc_for = {e: bool(truncate_weights.get(e, True)) for e in ESTIMATORS}
    else:
        trunc_for = {e: bool(truncate_weights) for e in ESTIMATORS}

    cells: list[SuiteCell] = []
    for family in families:
        for est in estimators:
            psi_by_target: dict[int, CounterfactualEstimate | None] = {}
            err_by_target: dict[int, str | None] = {}
            grid_targets = sorted(set(targets) | {0})
            for target in grid_targets:
                rule = Rule(
                    family=family, target=target, alpha=alpha,
                    empty_set_policy=empty_set_policy,
                )
                try:
                    est_obj = estimate_psi(
                        est, dataset, g_model, q_model, rule,
                        truncate_weights=trunc_for[est],
                        rules_from_truncated_g=rules_from_truncated_g,
                    )
                    psi_by_target[target] = est_obj
                    err_by_target[target] = None
                except CausalRulesError as exc:
                    psi_by_target[target] = None
                    err_by_target[target] = f"{type(exc).__name__}: {exc}"
            for target in targets:
                cell = SuiteCell(
                    family=family, target=target, estimator=est,
                    psi=psi_by_target[target], psi_error=err_by_target[target],
                )
                if target != 0:
                    try:
                        if est == "tmle":
                            cell.rr = tmle_relative_risk(
                                dataset, g_model, q_model, family, target,
                                alpha=alpha, empty_set_policy=empty_set_policy,
                                truncate_weights=trunc_for[est],
                                rules_from_truncated_g=rules_from_truncated_g,
                                itt_covariate=itt_covariate,
                                max_iter=rr_max_iter,
                            )
                        else:
                            num = psi_by_target[target]
                            den = psi_by_target[0]
                            if num is None:
                                raise EstimationError(
                                    f"numerator failed: {err_by_target[target]}"
                                )
                            if den is None:
                                raise EstimationError(
                                    f"denominator failed: {err_by_target[0]}"
                                )
                            cell.rr = relative_risk_plugin(num, den)
                    except CausalRulesError as exc:
                        cell.rr_error = f"{type(exc).__name__}: {exc}"
                cells.append(cell)
    metadata = {"n": dataset.n, "alpha": alpha}
    if g_model is not None:
        w_g = select_covariates(dataset, g_model.covariate_names)
        raw = g_model.predict_raw(w_g)
        metadata.update(
            {
                "alpha_trunc": g_model.alpha_trunc,
                "g_converged": g_model.info.converged,
                "g_structural_zeros": [[l, f] for l, f in g_model.structural_zeros],
                "g_truncated_cells": int(np.count_nonzero(raw < g_model.alpha_trunc)),
            }
        )
    if q_model is not None:
        metadata["q_converged"] = q_model.info.converged
    return EstimateReport(
        cells=cells,
        families=tuple(families),
        targets=tuple(targets),
        estimators=tuple(estimators),
        alpha=alpha,
        metadata=metadata,
    )
