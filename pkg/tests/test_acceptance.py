"""End-to-end acceptance checks.

Each test prints one ``ACCEPTANCE <n> <name>: PASS/FAIL`` line (visible
with ``pytest -s``) and asserts the property it names.  The checks
re-derive every quantity they compare against — estimating functions
are rebuilt with plain numpy loops, truths come from support
enumeration, standard errors from plug-in influence functions — so a
regression in the library cannot hide behind its own bookkeeping.
"""

import json

import numpy as np
import pytest
from scipy.special import expit

from causalrules import (
    BootstrapConfig,
    DGP_REGISTRY,
    Dataset,
    NuisanceSpec,
    Rule,
    bootstrap_ci,
    estimate_psi,
    eta_bias_diagnostic,
    generate,
    make_outcome_model,
    make_treatment_model,
    tmle_mean,
    tmle_relative_risk,
    true_psi,
)
from causalrules.cli import main

FAMILIES = ("static", "realistic", "itt")
ESTIMATORS = ("gcomp", "iptw", "driptw", "tmle")


def _verdict(num: int, name: str, problems: list) -> None:
    print(f"ACCEPTANCE {num} {name}: {'FAIL' if problems else 'PASS'}")
    assert not problems, f"criterion {num} ({name}):\n" + "\n".join(map(str, problems))


def _cols(ds: Dataset, names) -> np.ndarray:
    idx = [ds.covariate_names.index(c) for c in names]
    return ds.w[:, idx] if idx else np.zeros((ds.n, 0), dtype=ds.w.dtype)


def _rule_parts(ds, g_model, rule, truncate_weights=True):
    """Feasibility sets, assignments, and weight-scale probabilities,
    rebuilt independently of the library's rule module."""
    raw = g_model.predict_raw(_cols(ds, g_model.covariate_names))
    probs_w = np.maximum(raw, g_model.alpha_trunc) if truncate_weights else raw
    if rule.family == "static" or rule.alpha == 0.0:
        member = np.ones_like(raw, dtype=bool)
    else:
        member = raw >= rule.alpha
    assigned = None
    if rule.family in ("static", "realistic"):
        assigned = np.empty(ds.n, dtype=int)
        for i in range(ds.n):
            feasible = [a for a in range(rule.target + 1) if member[i, a]]
            if not feasible:
                raise AssertionError(f"empty realistic set at row {i}")
            assigned[i] = max(feasible)
    return raw, probs_w, member, assigned


def _dr_at_q1(ds, g_model, q_model, rule, eps):
    """psi and the DR estimating-function mean, both at the updated
    regression Q1 = expit(m + eps h), from the reported epsilon alone."""
    rows = np.arange(ds.n)
    y = ds.y.astype(float)
    _, probs_w, member, assigned = _rule_parts(ds, g_model, rule)
    w_q = _cols(ds, q_model.design.covariate_names)
    m_obs = q_model.linear_predictor(ds.a, w_q)
    if rule.family in ("static", "realistic"):
        h_obs = np.where(ds.a == assigned, 1.0 / probs_w[rows, ds.a], 0.0)
        q1_obs = expit(m_obs + eps * h_obs)
        q1_assigned = expit(
            q_model.linear_predictor(assigned, w_q) + eps / probs_w[rows, assigned]
        )
        psi = float(q1_assigned.mean())
        dr = float(np.mean(h_obs * (y - q1_obs) + q1_assigned))
    else:
        member_t = member[:, rule.target]
        matched = member_t & (ds.a == rule.target)
        h_obs = np.where(member_t, 0.0, 1.0)
        h_obs[matched] = 1.0 / probs_w[rows, ds.a][matched]
        q1_obs = expit(m_obs + eps * h_obs)
        h_t = np.where(member_t, 1.0 / probs_w[:, rule.target], 0.0)
        q1_t = expit(q_model.linear_predictor(rule.target, w_q) + eps * h_t)
        psi = float(np.where(member_t, q1_t, q1_obs).mean())
        core = np.where(matched, h_obs, 0.0) * (y - q1_obs) + q1_t
        dr = float(np.where(member_t, core, y).mean())
    return psi, dr


def _plug_in_se(est_name, ds, g_model, q_model, rule):
    """Influence-function standard error; the DR function is used for
    the substitution estimators (conservative when Q is correct)."""
    rows = np.arange(ds.n)
    y = ds.y.astype(float)
    _, probs_w, member, assigned = _rule_parts(ds, g_model, rule)
    w_q = _cols(ds, q_model.design.covariate_names)
    if rule.family in ("static", "realistic"):
        h = np.where(ds.a == assigned, 1.0 / probs_w[rows, ds.a], 0.0)
        if est_name == "iptw":
            f = h * y
        else:
            f = h * (y - q_model.predict(ds.a, w_q)) + q_model.predict(assigned, w_q)
    else:
        member_t = member[:, rule.target]
        matched = member_t & (ds.a == rule.target)
        h = np.where(member_t, 0.0, 1.0)
        h[matched] = 1.0 / probs_w[rows, ds.a][matched]
        if est_name == "iptw":
            f = np.where(member_t, h * y, y)
        else:
            aug = np.where(matched, h, 0.0) * (y - q_model.predict(ds.a, w_q))
            f = np.where(member_t, aug + q_model.predict(rule.target, w_q), y)
    return float(f.std(ddof=1) / np.sqrt(ds.n))


def _fit(ds, spec=None):
    spec = spec or NuisanceSpec()
    return spec.fit_g(ds), spec.fit_q(ds)


def test_criterion_01_tmle_score_equation():
    problems = []
    for name, factory in DGP_REGISTRY.items():
        gen = factory()
        ds = generate(gen, 1200, seed=101)
        g_model, q_model = _fit(ds)
        for family in FAMILIES:
            for target in range(gen.n_treatment_levels):
                rule = Rule(family=family, target=target, alpha=0.05)
                est = tmle_mean(ds, g_model, q_model, rule)
                psi, dr = _dr_at_q1(ds, g_model, q_model, rule, est.diagnostics.epsilon)
                residual = abs(dr - psi)
                if residual > 1e-8:
                    problems.append(f"{name} {family} {target}: residual {residual:.3e}")
                if abs(psi - est.psi) > 1e-12:
                    problems.append(f"{name} {family} {target}: psi mismatch")
    _verdict(1, "tmle-score-equation", problems)


def test_criterion_02_tmle_equals_dr_at_updated_q():
    problems = []
    rng = np.random.default_rng(20)
    names = ("no_violation", "interaction", "null_effect", "structural_zero")
    for trial in range(12):
        gen = DGP_REGISTRY[names[trial % 4]]()
        n = int(rng.integers(60, 201))
        ds = generate(gen, n, seed=int(rng.integers(1 << 30)))
        g_model, q_model = _fit(ds)
        rule = Rule(
            family=FAMILIES[trial % 3], target=int(rng.integers(0, 6)), alpha=0.05
        )
        est = tmle_mean(ds, g_model, q_model, rule)
        _, dr = _dr_at_q1(ds, g_model, q_model, rule, est.diagnostics.epsilon)
        if abs(est.psi - dr) > 1e-12:
            problems.append(
                f"trial {trial} (n={n}, {rule.family} {rule.target}): "
                f"|tmle - dr| = {abs(est.psi - dr):.3e}"
            )
    _verdict(2, "tmle-equals-dr-at-updated-q", problems)


def test_criterion_03_alpha_zero_reduces_to_static():
    problems = []
    for name, factory in DGP_REGISTRY.items():
        gen = factory()
        ds = generate(gen, 800, seed=7)
        g_model, q_model = _fit(ds)
        for est_name in ESTIMATORS:
            for target in range(gen.n_treatment_levels):
                psis = {}
                for family in ("static", "realistic"):
                    rule = Rule(family=family, target=target, alpha=0.0)
                    psis[family] = estimate_psi(est_name, ds, g_model, q_model, rule).psi
                if psis["static"] != psis["realistic"]:
                    problems.append(f"{name} {est_name} {target}: {psis}")
    _verdict(3, "alpha-zero-reduces-to-static", problems)


def test_criterion_04_hand_dataset_oracles():
    # Five rows, three levels, g = (1/4, 1/2, 1/4) and Q = (0.2, 0.6, 0.8)
    # on every row, so each estimator reduces to short rational sums.
    ds = Dataset(
        w=np.array([[0], [1], [0], [1], [1]], dtype=np.int8),
        a=np.array([0, 1, 2, 1, 0]),
        y=np.array([1, 0, 1, 1, 0]),
        covariate_names=("x",),
        n_treatment_levels=3,
    )
    g_model = make_treatment_model(("x",), [[np.log(2), 0.0], [0.0, 0.0]])
    q_model = make_outcome_model(
        ("x",), 3, [np.log(0.25), 0.0, np.log(6.0), np.log(16.0)]
    )
    g_cell = {0: 0.25, 1: 0.5, 2: 0.25}
    q_cell = {0: 0.2, 1: 0.6, 2: 0.8}

    def assigned_level(row, rule):
        feasible = [a for a in range(3) if g_cell[a] >= rule.alpha]
        if rule.family == "static" or rule.alpha == 0.0:
            feasible = [0, 1, 2]
        if rule.family == "itt":
            return rule.target if rule.target in feasible else int(ds.a[row])
        options = [a for a in feasible if a <= rule.target]
        return max(options)

    def oracle(est_name, rule):
        total = 0.0
        for i in range(5):
            d = assigned_level(i, rule)
            infeasible_itt = rule.family == "itt" and g_cell[rule.target] < rule.alpha
            if est_name == "gcomp":
                total += float(ds.y[i]) if infeasible_itt else q_cell[d]
            elif est_name == "iptw":
                if infeasible_itt:
                    total += float(ds.y[i])
                elif ds.a[i] == d:
                    total += ds.y[i] / g_cell[d]
            else:  # driptw
                if infeasible_itt:
                    total += float(ds.y[i])
                else:
                    w = 1.0 / g_cell[d] if ds.a[i] == d else 0.0
                    total += w * (ds.y[i] - q_cell[ds.a[i]]) + q_cell[d]
        return total / 5.0

    rules = [
        Rule(family="static", target=2),
        Rule(family="static", target=1),
        Rule(family="realistic", target=2, alpha=0.3),   # level 2 infeasible
        Rule(family="itt", target=2, alpha=0.3),         # everyone keeps A
        Rule(family="itt", target=2, alpha=0.2),         # everyone switches
        Rule(family="realistic", target=1, alpha=0.2),
    ]
    problems = []
    for rule in rules:
        for est_name in ("gcomp", "iptw", "driptw"):
            got = estimate_psi(est_name, ds, g_model, q_model, rule).psi
            want = oracle(est_name, rule)
            if abs(got - want) > 1e-12:
                problems.append(
                    f"{est_name} {rule.family} t={rule.target} a={rule.alpha}: "
                    f"{got!r} != {want!r}"
                )
    _verdict(4, "hand-dataset-oracles", problems)


def test_criterion_05_consistency_sweep():
    gen = DGP_REGISTRY["no_violation"]()
    ds = generate(gen, 50_000, seed=11)
    g_model, q_model = _fit(ds)
    problems = []
    for family in FAMILIES:
        for target in range(6):
            rule = Rule(family=family, target=target, alpha=0.05)
            truth = true_psi(gen, rule)
            for est_name in ESTIMATORS:
                est = estimate_psi(est_name, ds, g_model, q_model, rule)
                se = _plug_in_se(est_name, ds, g_model, q_model, rule)
                z = abs(est.psi - truth) / se
                if z > 3.0:
                    problems.append(f"{family} {target} {est_name}: z = {z:.2f}")
    _verdict(5, "consistency-sweep", problems)


def test_criterion_06_double_robustness():
    gen = DGP_REGISTRY["interaction"]()
    ds = generate(gen, 50_000, seed=17)
    correct_q = NuisanceSpec(q_interactions=tuple(("V", l) for l in range(1, 6)))
    arms = {
        # (g model, Q model): which estimators must stay within 3 SEs,
        # and which must land outside on at least one cell.
        "misspecified-Q": (
            NuisanceSpec().fit_g(ds), NuisanceSpec().fit_q(ds),
            ("driptw", "tmle"), "gcomp",
        ),
        "misspecified-g": (
            NuisanceSpec(g_covariates=()).fit_g(ds), correct_q.fit_q(ds),
            ("gcomp", "driptw", "tmle"), "iptw",
        ),
    }
    problems = []
    for arm, (g_model, q_model, robust, fragile) in arms.items():
        z_cells = {e: [] for e in ESTIMATORS}
        for family in FAMILIES:
            for target in range(6):
                rule = Rule(family=family, target=target, alpha=0.05)
                truth = true_psi(gen, rule)
                for est_name in ESTIMATORS:
                    est = estimate_psi(est_name, ds, g_model, q_model, rule)
                    se = _plug_in_se(est_name, ds, g_model, q_model, rule)
                    z_cells[est_name].append(abs(est.psi - truth) / se)
        for est_name in robust:
            worst = max(z_cells[est_name])
            if worst > 3.0:
                problems.append(f"{arm}: {est_name} drifted (worst z = {worst:.2f})")
        if max(z_cells[fragile]) <= 3.0:
            problems.append(f"{arm}: {fragile} failed to fail (worst z <= 3)")
    _verdict(6, "double-robustness", problems)


def test_criterion_07_eta_bias_pattern():
    gen = DGP_REGISTRY["structural_zero"]()
    report = eta_bias_diagnostic(
        gen, estimator="iptw", replicates=500, n_sim=2000, seed=29
    )
    problems = []
    static5 = report.entry("static", 5).bias_pct
    if not (static5 < 0 and abs(static5) > 10.0):
        problems.append(f"static target-5 bias {static5:+.2f}% (want < -10%)")
    for family in ("realistic", "itt"):
        pct = report.entry(family, 5).bias_pct
        if abs(pct) > 2.0:
            problems.append(f"{family} target-5 bias {pct:+.2f}% (want within 2%)")
    if report.n_failed_replicates:
        problems.append(f"{report.n_failed_replicates} replicates failed")
    _verdict(7, "eta-bias-pattern", problems)


def test_criterion_08_rr_tmle():
    problems = []
    for name, factory in DGP_REGISTRY.items():
        gen = factory()
        ds = generate(gen, 1500, seed=31)
        g_model, q_model = _fit(ds)
        for family in FAMILIES:
            for target in (1, 3, 5):
                try:
                    rr = tmle_relative_risk(ds, g_model, q_model, family, target)
                except Exception as exc:  # noqa: BLE001 - report, don't crash
                    problems.append(f"{name} {family} {target}: {exc}")
                    continue
                if not rr.converged or rr.iterations > 50:
                    problems.append(f"{name} {family} {target}: not converged")
                if abs(rr.epsilons[-1]) >= 1e-6:
                    problems.append(f"{name} {family} {target}: eps {rr.epsilons[-1]:.1e}")
                if abs(rr.score_residual) > 1e-8:
                    problems.append(f"{name} {family} {target}: residual {rr.score_residual:.1e}")

    # theta = 1 recovery on the null-effect system
    gen = DGP_REGISTRY["null_effect"]()
    thetas = {family: [] for family in FAMILIES}
    for child in np.random.SeedSequence(404).spawn(25):
        ds = generate(gen, 2000, np.random.default_rng(child))
        g_model, q_model = _fit(ds)
        for family in FAMILIES:
            thetas[family].append(
                tmle_relative_risk(ds, g_model, q_model, family, 3).theta
            )
    for family, values in thetas.items():
        values = np.asarray(values)
        se = values.std(ddof=1) / np.sqrt(values.size)
        z = abs(values.mean() - 1.0) / se
        if z > 3.0:
            problems.append(f"null {family}: mean theta {values.mean():.4f} (z = {z:.2f})")
    _verdict(8, "rr-tmle", problems)


def test_criterion_09_bootstrap_coverage():
    gen = DGP_REGISTRY["no_violation"]()
    rule = Rule(family="static", target=2)
    truth = true_psi(gen, rule)
    spec = NuisanceSpec()
    covered = 0
    runs = 200
    for i, child in enumerate(np.random.SeedSequence(47).spawn(runs)):
        ds = generate(gen, 1000, np.random.default_rng(child))
        ci = bootstrap_ci(
            ds, spec, rule, "gcomp", BootstrapConfig(replicates=200, seed=47 + i)
        )
        covered += int(ci.lower <= truth <= ci.upper)
    coverage = covered / runs
    problems = []
    if not 0.90 <= coverage <= 1.00:
        problems.append(f"coverage {coverage:.3f} outside [0.90, 1.00]")
    _verdict(9, "bootstrap-coverage", problems)


def test_criterion_10_byte_identical_outputs(tmp_path):
    data_csv = tmp_path / "data.csv"
    assert main(["simulate", "--dgp", "no_violation", "--n", "500", "--seed", "9",
                 "--output", str(data_csv)]) == 0
    config = tmp_path / "cfg.json"
    config.write_text(json.dumps({
        "input": str(data_csv),
        "families": ["static", "itt"],
        "targets": [1, 2],
        "estimators": ["gcomp", "tmle"],
        "seed": 5,
        "bootstrap": {"replicates": 15},
    }))
    outputs = {"estimate": [], "diagnose": []}
    for run in ("a", "b"):
        est_dir = tmp_path / f"est_{run}"
        assert main(["estimate", "--config", str(config),
                     "--output-dir", str(est_dir)]) == 0
        outputs["estimate"].append(est_dir)
        diag_dir = tmp_path / f"diag_{run}"
        assert main(["diagnose", "--dgp", "structural_zero", "--replicates", "12",
                     "--n-sim", "300", "--seed", "2", "--alpha-sweep", "0.0,0.05",
                     "--output-dir", str(diag_dir)]) == 0
        outputs["diagnose"].append(diag_dir)
    problems = []
    for command, (first, second) in outputs.items():
        names = sorted(p.name for p in first.iterdir())
        if names != sorted(p.name for p in second.iterdir()):
            problems.append(f"{command}: file sets differ")
            continue
        for name in names:
            if (first / name).read_bytes() != (second / name).read_bytes():
                problems.append(f"{command}: {name} differs between runs")
    _verdict(10, "byte-identical-outputs", problems)
