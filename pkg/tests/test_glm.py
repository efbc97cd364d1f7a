import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar
from scipy.special import expit, logit

from causalrules import (
    ConvergenceError,
    OutcomeDesign,
    SeparationError,
    ValidationError,
    fit_fluctuation,
    fit_logistic,
    fit_multinomial,
    fit_outcome_model,
    fit_treatment_model,
    load_models,
    save_models,
)
from causalrules.glm import INTERCEPT_NAME, select_covariates


# ---------------------------------------------------------------------------
# Binary logistic


def test_logistic_saturated_closed_form():
    """Saturated two-cell fit: the MLE matches the empirical logits.

    x=0 cell has P(Y=1)=1/4 and x=1 has 3/4, so the intercept is
    logit(1/4) = -log 3 and the slope is logit(3/4) - logit(1/4) = 2 log 3.
    """
    x = np.repeat([0.0, 1.0], 4)
    y = np.array([1, 0, 0, 0, 1, 1, 1, 0], dtype=float)
    X = np.column_stack([np.ones(8), x])
    fit = fit_logistic(X, y)
    assert fit.info.converged
    np.testing.assert_allclose(fit.coef, [-math.log(3.0), 2.0 * math.log(3.0)],
                               atol=1e-8)


def test_logistic_matches_true_coefficients_at_large_n():
    rng = np.random.default_rng(4)
    n = 50_000
    beta = np.array([-0.4, 0.9, -0.7])
    X = np.column_stack([np.ones(n), rng.integers(0, 2, n), rng.integers(0, 2, n)])
    y = (rng.random(n) < expit(X @ beta)).astype(float)
    fit = fit_logistic(X, y)
    # Wald SEs from the inverse information at the fit.
    p = expit(X @ fit.coef)
    info = (X * (p * (1 - p))[:, None]).T @ X
    se = np.sqrt(np.diag(np.linalg.inv(info)))
    assert np.all(np.abs(fit.coef - beta) < 3.0 * se)


def test_logistic_offset_shifts_intercept():
    rng = np.random.default_rng(5)
    X = np.column_stack([np.ones(400), rng.integers(0, 2, 400)])
    y = (rng.random(400) < expit(-0.2 + 0.5 * X[:, 1])).astype(float)
    base = fit_logistic(X, y)
    shifted = fit_logistic(X, y, offset=np.full(400, 1.5))
    np.testing.assert_allclose(shifted.coef[0], base.coef[0] - 1.5, atol=1e-6)
    np.testing.assert_allclose(shifted.coef[1], base.coef[1], atol=1e-6)


def test_logistic_separation_names_feature():
    x = np.repeat([0.0, 1.0], 10)
    X = np.column_stack([np.ones(20), x])
    with pytest.raises(SeparationError) as err:
        fit_logistic(X, x.copy(), feature_names=("(intercept)", "EXPOSED"))
    assert err.value.feature == "EXPOSED"


def test_logistic_input_validation():
    with pytest.raises(ValidationError):
        fit_logistic(np.ones((4, 1)), np.zeros(3))
    with pytest.raises(ValidationError):
        fit_logistic(np.ones(4), np.zeros(4))
    with pytest.raises(ValidationError):
        fit_logistic(np.ones((4, 1)), np.zeros(4), offset=np.zeros(2))


def test_logistic_iteration_budget():
    rng = np.random.default_rng(6)
    X = np.column_stack([np.ones(60), rng.integers(0, 2, 60)])
    y = rng.integers(0, 2, 60).astype(float)
    with pytest.raises(ConvergenceError):
        fit_logistic(X, y, max_iter=1, accept_tol=1e-12)


# ---------------------------------------------------------------------------
# Fluctuation


def _fluct_case(seed, n=120):
    rng = np.random.default_rng(seed)
    offset = rng.normal(0.0, 0.8, n)
    h = rng.normal(0.0, 1.0, n) / np.maximum(rng.random(n), 0.1)
    y = (rng.random(n) < expit(offset + 0.3 * h)).astype(float)
    return y, h, offset


def test_fluctuation_matches_scalar_optimizer():
    """Cross-check the Newton epsilon against direct 1-d likelihood search."""
    for seed in range(6):
        y, h, offset = _fluct_case(seed)
        fit = fit_fluctuation(y, h, offset)

        def nll(eps):
            eta = offset + eps * h
            return -(y * np.log(expit(eta)) + (1 - y) * np.log(expit(-eta))).sum()

        ref = minimize_scalar(nll, bounds=(-3.0, 3.0), method="bounded",
                              options={"xatol": 1e-12})
        assert abs(fit.epsilon - ref.x) < 1e-6


def test_fluctuation_zero_covariate_gives_zero_epsilon():
    y = np.array([0.0, 1.0, 1.0, 0.0])
    fit = fit_fluctuation(y, np.zeros(4), np.full(4, 0.3))
    assert fit.epsilon == 0.0
    assert fit.info.converged


def test_fluctuation_solves_score_to_tolerance():
    for seed in (11, 12, 13):
        y, h, offset = _fluct_case(seed, n=700)
        fit = fit_fluctuation(y, h, offset)
        score = h @ (y - expit(offset + fit.epsilon * h))
        assert abs(score) / y.size <= 1e-8


# ---------------------------------------------------------------------------
# Multinomial treatment model


def test_multinomial_intercept_only_matches_frequencies():
    a = np.repeat([0, 1, 2], [10, 10, 20])
    w = np.zeros((40, 0))
    model = fit_multinomial(w, a, 3)
    probs = model.predict_raw(np.zeros((1, 0)))
    np.testing.assert_allclose(probs[0], [0.25, 0.25, 0.50], atol=1e-9)
    # Against level 0, the intercepts are the log frequency ratios.
    np.testing.assert_allclose(model.coef[:, 0], [0.0, math.log(2.0)], atol=1e-8)


def test_multinomial_two_levels_equals_logistic():
    rng = np.random.default_rng(7)
    w = rng.integers(0, 2, size=(300, 2)).astype(float)
    a = (rng.random(300) < expit(-0.3 + 0.8 * w[:, 0] - 0.5 * w[:, 1])).astype(int)
    model = fit_multinomial(w, a, 2, covariate_names=("x1", "x2"))
    X = np.column_stack([np.ones(300), w])
    ref = fit_logistic(X, a.astype(float))
    np.testing.assert_allclose(model.coef[0], ref.coef, atol=1e-8)


def test_multinomial_rows_sum_to_one(models_nv, data_nv):
    g_model, _ = models_nv
    probs = g_model.predict_raw(data_nv.w)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)
    assert probs.min() >= 0.0


def test_truncation_floors_without_renormalizing():
    a = np.repeat([0, 1, 2], [2, 49, 49])
    model = fit_multinomial(np.zeros((100, 0)), a, 3, alpha_trunc=0.05)
    raw = model.predict_raw(np.zeros((1, 0)))
    trunc = model.predict(np.zeros((1, 0)))
    np.testing.assert_allclose(raw[0], [0.02, 0.49, 0.49], atol=1e-9)
    np.testing.assert_allclose(trunc[0], [0.05, 0.49, 0.49], atol=1e-9)
    assert trunc[0].sum() > 1.0  # floored, not renormalized


def test_structural_zero_pinned_to_exact_zero():
    rng = np.random.default_rng(8)
    n = 600
    frail = rng.integers(0, 2, n)
    a = np.where(
        frail == 1,
        rng.integers(0, 2, n),          # level 2 never occurs for frail rows
        rng.integers(0, 3, n),
    )
    model = fit_multinomial(
        frail[:, None].astype(float), a, 3, covariate_names=("FRAIL",)
    )
    assert (2, "FRAIL") in model.structural_zeros
    probs = model.predict_raw(np.array([[1.0], [0.0]]))
    assert probs[0, 2] == 0.0
    assert probs[1, 2] > 0.0
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)
    assert model.coef[1, 1] == -np.inf
    assert model.info.converged


def test_absent_level_pins_intercept():
    a = np.repeat([0, 1], [30, 30])  # level 2 never observed at all
    model = fit_multinomial(np.zeros((60, 0)), a, 3)
    assert (2, INTERCEPT_NAME) in model.structural_zeros
    probs = model.predict_raw(np.zeros((1, 0)))
    assert probs[0, 2] == 0.0
    np.testing.assert_allclose(probs[0, :2], [0.5, 0.5], atol=1e-9)


def test_multinomial_separation_names_level_and_feature():
    # A three-valued dose column perfectly predicts the level, so the
    # slope diverges.  Margin-cell pinning only applies to binary
    # columns, so this must surface as separation, not a structural zero.
    dose = np.repeat([0.0, 1.0, 2.0], 10)
    a = (dose >= 1.0).astype(int)
    with pytest.raises(SeparationError) as err:
        fit_multinomial(dose[:, None], a, 2, covariate_names=("DOSE",))
    assert err.value.level == 1
    assert err.value.feature == "DOSE"


# ---------------------------------------------------------------------------
# Outcome design and model


def test_outcome_design_columns():
    design = OutcomeDesign(("V", "U"), n_treatment_levels=3, interactions=(("V", 2),))
    assert design.column_names == (
        INTERCEPT_NAME, "V", "U", "A=1", "A=2", "V:A=2"
    )
    row = design.matrix(2, np.array([[1.0, 0.0]]))
    np.testing.assert_allclose(row, [[1, 1, 0, 0, 1, 1]])
    row = design.matrix(np.array([1]), np.array([[1.0, 1.0]]))
    np.testing.assert_allclose(row, [[1, 1, 1, 1, 0, 0]])


def test_outcome_design_validates_interactions():
    with pytest.raises(ValidationError):
        OutcomeDesign(("V",), 3, interactions=(("U", 1),))
    with pytest.raises(ValidationError):
        OutcomeDesign(("V",), 3, interactions=(("V", 0),))


def test_outcome_model_recovers_probabilities(gen_nv, data_nv):
    from causalrules import generate

    big = generate(gen_nv, 50_000, seed=21)
    q_model = fit_outcome_model(big)
    w_support = gen_nv.w_support.astype(float)
    for a in range(6):
        np.testing.assert_allclose(
            q_model.predict(a, w_support),
            gen_nv.q_model.predict(a, w_support),
            atol=0.02,
        )


def test_treatment_model_recovers_probabilities(gen_nv):
    from causalrules import generate

    big = generate(gen_nv, 50_000, seed=22)
    g_model = fit_treatment_model(big)
    got = g_model.predict_raw(gen_nv.w_support.astype(float))
    want = gen_nv.support_g_raw()
    np.testing.assert_allclose(got, want, atol=0.015)


def test_select_covariates_reorders_by_name(data_nv):
    sub = select_covariates(data_nv, ("U", "V"))
    np.testing.assert_array_equal(sub[:, 0], data_nv.w[:, 1])
    np.testing.assert_array_equal(sub[:, 1], data_nv.w[:, 0])
    with pytest.raises(ValidationError, match="MISSING"):
        select_covariates(data_nv, ("MISSING",))


def test_model_bundle_round_trip(tmp_path, models_nv, data_nv):
    g_model, q_model = models_nv
    path = tmp_path / "models.json"
    save_models(path, g_model, q_model, meta={"n": data_nv.n})
    g2, q2, meta = load_models(path)
    assert meta["n"] == data_nv.n
    np.testing.assert_allclose(
        g2.predict_raw(data_nv.w), g_model.predict_raw(data_nv.w), atol=1e-12
    )
    np.testing.assert_allclose(
        q2.predict(data_nv.a, data_nv.w), q_model.predict(data_nv.a, data_nv.w),
        atol=1e-12,
    )
    assert g2.structural_zeros == g_model.structural_zeros


def test_structural_zero_survives_serialization(tmp_path):
    rng = np.random.default_rng(9)
    n = 400
    frail = rng.integers(0, 2, n)
    a = np.where(frail == 1, rng.integers(0, 2, n), rng.integers(0, 3, n))
    model = fit_multinomial(frail[:, None].astype(float), a, 3,
                            covariate_names=("FRAIL",))
    d = model.to_dict()
    assert d["coef"][1][1] is None  # -inf serialized as null
    from causalrules.glm import TreatmentModel

    back = TreatmentModel.from_dict(d)
    probs = back.predict_raw(np.array([[1.0]]))
    assert probs[0, 2] == 0.0


def test_intercept_only_treatment_model(data_nv):
    model = fit_treatment_model(data_nv, covariate_names=())
    probs = model.predict_raw(np.zeros((1, 0)))
    freq = data_nv.level_counts() / data_nv.n
    np.testing.assert_allclose(probs[0], freq, atol=1e-8)
