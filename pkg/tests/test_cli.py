import json

import pytest

from causalrules.cli import main


@pytest.fixture(scope="module")
def sim_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "synthetic.csv"
    rc = main(["simulate", "--dgp", "no_violation", "--n", "600", "--seed", "3",
               "--output", str(path)])
    assert rc == 0
    return path


def test_version_and_usage_exit_codes(capsys):
    assert main(["--version"]) == 0
    assert "causal-rules 0.1.0" in capsys.readouterr().out
    assert main([]) == 1
    assert main(["frobnicate"]) == 1
    assert main(["estimate"]) == 1
    assert "input CSV is required" in capsys.readouterr().err


def test_estimate_writes_the_three_files(tmp_path, sim_csv, capsys):
    outdir = tmp_path / "out"
    rc = main([
        "estimate", "--input", str(sim_csv), "--output-dir", str(outdir),
        "--families", "static,realistic,itt", "--targets", "0,2",
        "--estimators", "gcomp,iptw,driptw,tmle",
    ])
    assert rc == 0
    report = json.loads((outdir / "estimates.json").read_text())
    assert report["families"] == ["static", "realistic", "itt"]
    assert report["targets"] == [0, 2]
    assert len(report["cells"]) == 24
    assert all(c["psi_error"] is None for c in report["cells"])

    table = (outdir / "estimates_table.csv").read_text().splitlines()
    assert table[0] == "family,target,G-comp,IPTW,DR-IPTW,TMLE"
    assert len(table) == 4  # header + one target-2 row per family

    meta = json.loads((outdir / "run_metadata.json").read_text())
    assert meta["command"] == "estimate"
    assert meta["n"] == 600
    assert meta["settings"]["alpha"] == 0.05
    assert "output_dir" not in meta["settings"]
    assert "wrote estimates.json" in capsys.readouterr().out


def test_estimate_bootstrap_flag(tmp_path, sim_csv):
    outdir = tmp_path / "boot"
    rc = main([
        "estimate", "--input", str(sim_csv), "--output-dir", str(outdir),
        "--families", "static", "--targets", "0,1",
        "--estimators", "gcomp", "--bootstrap-replicates", "10", "--seed", "7",
    ])
    assert rc == 0
    report = json.loads((outdir / "estimates.json").read_text())
    for cell in report["cells"]:
        assert cell["psi_interval"]["b_effective"] == 10
    meta = json.loads((outdir / "run_metadata.json").read_text())
    assert meta["settings"]["bootstrap"] == {
        "replicates": 10, "seed": 7, "interval": "percentile", "level": 0.95,
    }


def test_estimate_outputs_are_byte_identical(tmp_path, sim_csv):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({
        "input": str(sim_csv),
        "families": ["static", "itt"],
        "targets": [1, 2],
        "estimators": ["gcomp", "iptw"],
        "seed": 4,
        "bootstrap": {"replicates": 12},
    }))
    dirs = [tmp_path / "run_a", tmp_path / "run_b"]
    for d in dirs:
        rc = main(["estimate", "--config", str(config), "--output-dir", str(d)])
        assert rc == 0
    for name in ("estimates.json", "estimates_table.csv", "run_metadata.json"):
        a = (dirs[0] / name).read_bytes()
        b = (dirs[1] / name).read_bytes()
        assert a == b, f"{name} differs between identical runs"


def test_flags_override_config(tmp_path, sim_csv):
    config = tmp_path / "base.json"
    config.write_text(json.dumps({
        "input": str(sim_csv), "alpha": 0.05, "targets": [1, 2],
        "estimators": ["gcomp"],
    }))
    outdir = tmp_path / "over"
    rc = main(["estimate", "--config", str(config), "--output-dir", str(outdir),
               "--alpha", "0.1", "--targets", "2"])
    assert rc == 0
    meta = json.loads((outdir / "run_metadata.json").read_text())
    assert meta["settings"]["alpha"] == 0.1
    assert meta["settings"]["targets"] == [2]


def test_config_validation(tmp_path, sim_csv, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"input": str(sim_csv), "frobnicate": 1}))
    assert main(["estimate", "--config", str(bad), "--output-dir", str(tmp_path / "x")]) == 1
    assert "unknown config field" in capsys.readouterr().err

    bad.write_text(json.dumps({"input": str(sim_csv), "alpha": "big"}))
    assert main(["estimate", "--config", str(bad), "--output-dir", str(tmp_path / "x")]) == 1
    assert "alpha" in capsys.readouterr().err

    bad.write_text("{(")
    assert main(["estimate", "--config", str(bad), "--output-dir", str(tmp_path / "x")]) == 1
    assert main(["estimate", "--config", str(tmp_path / "missing.json"),
                 "--output-dir", str(tmp_path / "x")]) == 1


def test_estimate_missing_csv_is_a_data_error(tmp_path):
    rc = main(["estimate", "--input", str(tmp_path / "none.csv"),
               "--output-dir", str(tmp_path / "o")])
    assert rc == 2


def test_diagnose_dgp_mode(tmp_path, capsys):
    outdir = tmp_path / "diag"
    rc = main([
        "diagnose", "--dgp", "no_violation", "--estimator", "gcomp",
        "--families", "static", "--replicates", "8", "--n-sim", "150",
        "--alpha-sweep", "0.0,0.05", "--output-dir", str(outdir),
    ])
    assert rc == 0
    bias = json.loads((outdir / "eta_bias.json").read_text())
    assert bias["source"] == {"kind": "dgp", "name": "no_violation"}
    assert bias["replicates"] == 8
    assert (outdir / "eta_bias.csv").exists()
    assert json.loads((outdir / "positivity.json").read_text())["source"]["kind"] == "dgp"
    sweep = json.loads((outdir / "alpha_sweep.json").read_text())
    assert sweep["alphas"] == [0.0, 0.05]
    assert "alpha sweep" in capsys.readouterr().out


def test_diagnose_data_mode(tmp_path, sim_csv):
    outdir = tmp_path / "diagdata"
    rc = main([
        "diagnose", "--input", str(sim_csv), "--replicates", "6",
        "--targets", "0,1", "--output-dir", str(outdir),
    ])
    assert rc == 0
    bias = json.loads((outdir / "eta_bias.json").read_text())
    assert bias["source"]["kind"] == "data"
    assert bias["n_sim"] == 600  # defaults to the input size


def test_diagnose_source_validation(tmp_path, sim_csv, capsys):
    out = str(tmp_path / "d")
    assert main(["diagnose", "--output-dir", out]) == 1
    assert main(["diagnose", "--dgp", "no_violation", "--input", str(sim_csv),
                 "--output-dir", out]) == 1
    rc = main(["diagnose", "--dgp", "no_violation", "--output-dir", out])
    assert rc == 1
    assert "n_sim" in capsys.readouterr().err
    assert main(["diagnose", "--dgp", "bogus", "--n-sim", "50",
                 "--output-dir", out]) == 1


def test_simulate_validation(tmp_path):
    out = str(tmp_path / "sim.csv")
    assert main(["simulate", "--n", "10", "--output", out]) == 1
    assert main(["simulate", "--dgp", "bogus", "--n", "10", "--output", out]) == 1
    assert main(["simulate", "--dgp", "no_violation", "--n", "0", "--output", out]) == 1
    rc = main(["simulate", "--dgp", "no_violation", "--n", "10",
               "--output", str(tmp_path / "nodir" / "sim.csv")])
    assert rc == 2  # unwritable path is a data error, not a usage error


def test_fit_then_simulate_from_models(tmp_path, sim_csv, capsys):
    bundle = tmp_path / "models.json"
    rc = main(["fit", "--input", str(sim_csv), "--output", str(bundle)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "structural zeros: none" in out
    assert json.loads(bundle.read_text())["meta"]["n"] == 600

    resim = tmp_path / "resim.csv"
    rc = main(["simulate", "--models", str(bundle), "--input", str(sim_csv),
               "--n", "40", "--seed", "1", "--output", str(resim)])
    assert rc == 0
    assert len(resim.read_text().splitlines()) == 41

    assert main(["simulate", "--models", str(bundle), "--n", "5",
                 "--output", str(tmp_path / "x.csv")]) == 1  # needs --input


def test_fit_interaction_parsing(tmp_path, sim_csv):
    bundle = tmp_path / "with_int.json"
    rc = main(["fit", "--input", str(sim_csv), "--output", str(bundle),
               "--q-interactions", "V:2"])
    assert rc == 0
    assert main(["fit", "--input", str(sim_csv), "--output", str(bundle),
                 "--q-interactions", "V"]) == 1
    assert main(["fit", "--input", str(sim_csv), "--output", str(bundle),
                 "--q-interactions", "V:x"]) == 1


def test_categorize(tmp_path, capsys):
    assert main(["categorize", "0", "35.5", "61"]) == 0
    assert capsys.readouterr().out == "0,0\n35.5,3\n61,5\n"

    scores = tmp_path / "scores.txt"
    scores.write_text("10\n20.5\n")
    dest = tmp_path / "levels.csv"
    assert main(["categorize", "--input", str(scores), "--output", str(dest)]) == 0
    assert dest.read_text() == "10,1\n20.5,3\n"

    assert main(["categorize"]) == 1
    assert main(["categorize", "abc"]) == 1
    assert main(["categorize", "-5"]) == 2
