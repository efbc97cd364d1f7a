import numpy as np
import pytest

from causalrules import (
    GeneratingDistribution,
    Rule,
    ValidationError,
    alpha_sweep,
    eta_bias_diagnostic,
    generate,
    make_outcome_model,
    make_treatment_model,
    true_psi,
    true_relative_risk,
)
from causalrules.diagnostics import bernoulli_block_support, bernoulli_support


@pytest.fixture(scope="module")
def tiny_gen():
    # One binary covariate Z with P(Z=1) = 0.25 and three treatment levels.
    # raw g: Z=0 -> (0.25, 0.25, 0.50), Z=1 -> (0.40, 0.40, 0.20)
    # Q:     Z=0 -> (1/2, 2/3, 1/3),   Z=1 -> (3/4, 6/7, 3/5)
    return GeneratingDistribution(
        w_support=np.array([[0], [1]], dtype=np.int8),
        w_probs=np.array([0.75, 0.25]),
        covariate_names=("Z",),
        g_model=make_treatment_model(("Z",), [[0.0, 0.0], [np.log(2), -np.log(4)]]),
        q_model=make_outcome_model(("Z",), 3, [0.0, np.log(3), np.log(2), -np.log(2)]),
    )


def test_support_probabilities(tiny_gen):
    np.testing.assert_allclose(
        tiny_gen.support_g_raw(), [[0.25, 0.25, 0.5], [0.4, 0.4, 0.2]], atol=1e-12
    )
    np.testing.assert_allclose(
        tiny_gen.support_q(),
        [[0.5, 2 / 3, 1 / 3], [0.75, 6 / 7, 0.6]],
        atol=1e-12,
    )


def test_true_psi_hand_mixture(tiny_gen):
    static2 = true_psi(tiny_gen, Rule(family="static", target=2))
    assert static2 == pytest.approx(0.75 * (1 / 3) + 0.25 * 0.6, abs=1e-12)

    # At alpha 0.25, Z=1 cannot reach level 2 (g = 0.20) and falls back to 1.
    real2 = true_psi(tiny_gen, Rule(family="realistic", target=2, alpha=0.25))
    assert real2 == pytest.approx(0.75 * (1 / 3) + 0.25 * (6 / 7), abs=1e-12)

    # Under the intention-to-treat rule those subjects keep their observed
    # treatment, contributing the g-weighted average of Q.
    itt2 = true_psi(tiny_gen, Rule(family="itt", target=2, alpha=0.25))
    q_bar = 0.4 * 0.75 + 0.4 * (6 / 7) + 0.2 * 0.6
    assert itt2 == pytest.approx(0.75 * (1 / 3) + 0.25 * q_bar, abs=1e-12)

    theta = true_relative_risk(tiny_gen, "realistic", 2, alpha=0.25)
    psi0 = 0.75 * 0.5 + 0.25 * 0.75
    assert theta == pytest.approx(real2 / psi0, abs=1e-12)

    with pytest.raises(ValidationError):
        true_psi(tiny_gen, Rule(family="static", target=3))


def test_true_psi_member_override(tiny_gen):
    member = np.array([[True, True, False], [True, True, False]])
    forced = true_psi(
        tiny_gen, Rule(family="realistic", target=2, alpha=0.25), member=member
    )
    assert forced == pytest.approx(0.75 * (2 / 3) + 0.25 * (6 / 7), abs=1e-12)


def test_generate_matches_analytic_margins(gen_nv):
    n = 60_000
    ds = generate(gen_nv, n, seed=4)
    g = gen_nv.support_g_raw()
    q = gen_nv.support_q()
    for j, row in enumerate(gen_nv.w_support):
        freq = np.mean(np.all(ds.w == row, axis=1))
        p = gen_nv.w_probs[j]
        assert abs(freq - p) < 4 * np.sqrt(p * (1 - p) / n)
    pa = gen_nv.w_probs @ g
    for a in range(6):
        freq = np.mean(ds.a == a)
        assert abs(freq - pa[a]) < 4 * np.sqrt(pa[a] * (1 - pa[a]) / n)
    ey = float(gen_nv.w_probs @ (g * q).sum(axis=1))
    assert abs(ds.y.mean() - ey) < 4 * np.sqrt(ey * (1 - ey) / n)


def test_generate_is_seed_reproducible(gen_nv):
    assert generate(gen_nv, 100, seed=7) == generate(gen_nv, 100, seed=7)
    with pytest.raises(ValidationError):
        generate(gen_nv, 0)


def test_from_dataset_uses_empirical_support(data_nv, models_nv):
    g_model, q_model = models_nv
    gen = GeneratingDistribution.from_dataset(data_nv, g_model, q_model)
    assert gen.source_n == data_nv.n
    np.testing.assert_allclose(gen.w_probs, 1.0 / data_nv.n)
    psi = true_psi(gen, Rule(family="static", target=1))
    assert psi == pytest.approx(q_model.predict(1, data_nv.w).mean(), abs=1e-12)


def test_eta_bias_known_g_is_unbiased(gen_nv):
    report = eta_bias_diagnostic(
        gen_nv, estimator="iptw", replicates=400, n_sim=800, seed=3,
        refit_g=False, truncate_weights=False,
    )
    assert report.families == ("static", "realistic", "itt")
    assert report.targets == tuple(range(6))
    assert len(report.entries) == 18
    for e in report.entries:
        assert e.n_effective == 400
        se = e.sd_estimate / np.sqrt(e.n_effective)
        assert abs(e.bias) < 4 * se
        expected = true_psi(
            gen_nv, Rule(family=e.family, target=e.target, alpha=0.05)
        )
        assert e.truth == pytest.approx(expected, abs=1e-12)
        if e.family == "static":
            assert e.drift is None
        else:
            # feasibility sets from the true mechanism match the estimand
            assert abs(e.drift) < 1e-12


def test_eta_bias_requires_n_sim(gen_nv):
    with pytest.raises(ValidationError, match="n_sim"):
        eta_bias_diagnostic(gen_nv, replicates=2)


def test_bias_report_table_and_dict(gen_nv):
    report = eta_bias_diagnostic(
        gen_nv, estimator="gcomp", families=("static", "realistic"),
        targets=(0, 2, 5), replicates=30, n_sim=400, seed=1,
    )
    header, rows = report.bias_table()
    assert header == ["target", "Static", "Realistic"]
    assert [r[0] for r in rows] == ["0", "2", "5"]
    assert all(cell.endswith("%") for row in rows for cell in row[1:])
    d = report.to_dict()
    assert d["estimator"] == "gcomp"
    assert len(d["entries"]) == 6
    assert report.entry("realistic", 2).drift is not None
    assert report.entry("static", 2).drift is None
    with pytest.raises(KeyError):
        report.entry("itt", 0)


def test_alpha_sweep_threshold_logic(gen_nv):
    with pytest.raises(ValidationError, match="ascending"):
        alpha_sweep(gen_nv, [0.1, 0.05], replicates=2, n_sim=50)
    with pytest.raises(ValidationError):
        alpha_sweep(gen_nv, [])
    sweep = alpha_sweep(
        gen_nv, [0.0, 0.05], estimator="iptw", refit_g=False,
        replicates=60, n_sim=400, seed=2, threshold_pct=50.0,
    )
    assert sweep.alphas == (0.0, 0.05)
    assert len(sweep.max_abs_bias_pct) == 2
    assert len(sweep.reports) == 2
    assert sweep.smallest_passing_alpha == 0.0
    d = sweep.to_dict()
    assert d["threshold_pct"] == 50.0

    strict = alpha_sweep(
        gen_nv, [0.05], estimator="iptw", refit_g=False,
        replicates=30, n_sim=300, seed=2, threshold_pct=1e-12,
    )
    assert strict.smallest_passing_alpha is None


def test_bernoulli_support_probabilities():
    support, probs, names = bernoulli_support(("A", "B"), (0.5, 0.25))
    assert names == ("A", "B")
    assert support.shape == (4, 2)
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)
    lookup = {tuple(r): p for r, p in zip(support.tolist(), probs)}
    assert lookup[(0, 0)] == pytest.approx(0.375)
    assert lookup[(1, 1)] == pytest.approx(0.125)
    with pytest.raises(ValidationError):
        bernoulli_support(("A",), (0.5, 0.25))


def test_bernoulli_block_support_one_hot():
    support, probs, names = bernoulli_block_support(
        [
            (("X1", "X2"), [((0, 0), 0.2), ((1, 0), 0.5), ((0, 1), 0.3)]),
            (("Z",), [((0,), 0.6), ((1,), 0.4)]),
        ]
    )
    assert names == ("X1", "X2", "Z")
    assert support.shape == (6, 3)
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)
    lookup = {tuple(r): p for r, p in zip(support.tolist(), probs)}
    assert lookup[(1, 0, 1)] == pytest.approx(0.2)
    with pytest.raises(ValidationError, match="sum"):
        bernoulli_block_support([(("X",), [((0,), 0.5), ((1,), 0.4)])])
    with pytest.raises(ValidationError, match="width"):
        bernoulli_block_support([(("X",), [((0, 1), 0.5), ((1,), 0.5)])])


def test_generating_distribution_validation():
    g = make_treatment_model(("Z",), [[0.0, 0.0]])
    q = make_outcome_model(("Z",), 2, [0.0, 0.0, 0.0])
    support = np.array([[0], [1]], dtype=np.int8)
    with pytest.raises(ValidationError, match="probability"):
        GeneratingDistribution(support, np.array([0.6, 0.6]), ("Z",), g, q)
    with pytest.raises(ValidationError, match="length"):
        GeneratingDistribution(support, np.array([1.0]), ("Z",), g, q)
    with pytest.raises(ValidationError, match="covariate_names"):
        GeneratingDistribution(support, np.array([0.5, 0.5]), ("Z", "Y"), g, q)


def test_model_covariates_must_live_on_support():
    g = make_treatment_model(("MISSING",), [[0.0, 0.0]])
    q = make_outcome_model(("Z",), 2, [0.0, 0.0, 0.0])
    gen = GeneratingDistribution(
        np.array([[0], [1]], dtype=np.int8), np.array([0.5, 0.5]), ("Z",), g, q
    )
    with pytest.raises(ValidationError, match="MISSING"):
        gen.support_g_raw()
