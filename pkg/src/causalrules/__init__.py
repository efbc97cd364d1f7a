"""Counterfactual risk estimation for categorical treatments under
static, realistic, and intention-to-treat rules."""

from .errors import (
    CausalRulesError,
    ConvergenceError,
    EstimationError,
    FitError,
    RuleInfeasibleError,
    SeparationError,
    SingularInformationError,
    ValidationError,
)
from .ingest import DEFAULT_COVARIATES, Dataset, categorize_met, load_csv, write_csv
from .glm import (
    FitInfo,
    FluctuationFit,
    LogisticFit,
    OutcomeDesign,
    OutcomeModel,
    TreatmentModel,
    fit_fluctuation,
    fit_logistic,
    fit_multinomial,
    fit_outcome_model,
    fit_treatment_model,
    load_models,
    predict_Q,
    predict_g,
    save_models,
)
from .rules import (
    PositivityReport,
    RealisticSet,
    Rule,
    assign_itt,
    assign_realistic,
    itt_assignments,
    membership_matrix,
    positivity_report,
    realistic_assignments,
    realistic_set,
    rule_assignment_table,
    rule_assignments,
)
from .estimators import (
    CounterfactualEstimate,
    EstimateReport,
    NuisanceSpec,
    RelativeRiskEstimate,
    driptw,
    estimate_psi,
    estimate_suite,
    gcomp,
    iptw,
    relative_risk_plugin,
    tmle_mean,
    tmle_relative_risk,
)
from .inference import (
    BootstrapConfig,
    IntervalEstimate,
    attach_bootstrap_intervals,
    bootstrap_ci,
    bootstrap_statistics,
    interval_from_replicates,
    seeded_resample,
)
from .diagnostics import (
    AlphaSweepResult,
    BiasReport,
    GeneratingDistribution,
    alpha_sweep,
    eta_bias_diagnostic,
    generate,
    true_psi,
    true_relative_risk,
)
from .dgps import (
    DGP_REGISTRY,
    cohort_dgp,
    interaction_dgp,
    make_outcome_model,
    make_treatment_model,
    no_violation_dgp,
    null_effect_dgp,
    structural_zero_dgp,
)

__version__ = "0.1.0"

__all__ = [
    "AlphaSweepResult",
    "BiasReport",
    "BootstrapConfig",
    "CausalRulesError",
    "ConvergenceError",
    "CounterfactualEstimate",
    "DEFAULT_COVARIATES",
    "DGP_REGISTRY",
    "Dataset",
    "EstimateReport",
    "EstimationError",
    "FitError",
    "FitInfo",
    "FluctuationFit",
    "GeneratingDistribution",
    "IntervalEstimate",
    "LogisticFit",
    "NuisanceSpec",
    "OutcomeDesign",
    "OutcomeModel",
    "PositivityReport",
    "RealisticSet",
    "RelativeRiskEstimate",
    "Rule",
    "RuleInfeasibleError",
    "SeparationError",
    "SingularInformationError",
    "TreatmentModel",
    "ValidationError",
    "alpha_sweep",
    "assign_itt",
    "assign_realistic",
    "attach_bootstrap_intervals",
    "bootstrap_ci",
    "bootstrap_statistics",
    "categorize_met",
    "cohort_dgp",
    "driptw",
    "estimate_psi",
    "estimate_suite",
    "eta_bias_diagnostic",
    "fit_fluctuation",
    "fit_logistic",
    "fit_multinomial",
    "fit_outcome_model",
    "fit_treatment_model",
    "gcomp",
    "generate",
    "interaction_dgp",
    "interval_from_replicates",
    "iptw",
    "itt_assignments",
    "load_csv",
    "load_models",
    "make_outcome_model",
    "make_treatment_model",
    "membership_matrix",
    "no_violation_dgp",
    "null_effect_dgp",
    "positivity_report",
    "predict_Q",
    "predict_g",
    "realistic_assignments",
    "realistic_set",
    "relative_risk_plugin",
    "rule_assignment_table",
    "rule_assignments",
    "save_models",
    "seeded_resample",
    "structural_zero_dgp",
    "tmle_mean",
    "tmle_relative_risk",
    "true_psi",
    "true_relative_risk",
    "write_csv",
]
