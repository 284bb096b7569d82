"""Command line flows: artifacts, exit codes, determinism, config handling."""

import json
import subprocess
import sys

import pytest

from tauberkit.cli import (
    RunConfig,
    expression_sequence,
    parse_sequence_spec,
    parse_weight_spec,
)


def run_cli(*args, cwd):
    return subprocess.run(
        [sys.executable, "-m", "tauberkit", *args],
        cwd=cwd,
        capture_output=True,
        text=True,
        timeout=300,
    )


def test_classify_writes_variation_report(tmp_path):
    res = run_cli(
        "classify-weights", "--weights", "ones", "--horizon", "4096", "--out", "w",
        cwd=tmp_path,
    )
    assert res.returncode == 0, res.stderr
    assert "RegularlyVarying" in res.stdout
    doc = json.loads((tmp_path / "w" / "variation.json").read_text())
    assert set(doc) == {
        "alpha_hat", "fit_residual", "horizon", "horizon_requested", "horizon_used",
        "kind", "lemma23_tail", "name", "note", "samples", "tol",
    }
    assert doc["kind"] == "RegularlyVarying"
    assert doc["name"] == "ones"


def test_classify_exits_three_when_inconclusive(tmp_path):
    res = run_cli(
        "classify-weights", "--weights", "wobble", "--horizon", "4096", cwd=tmp_path
    )
    assert res.returncode == 3
    doc = json.loads((tmp_path / "variation.json").read_text())
    assert doc["kind"] == "Inconclusive"


def test_transform_exports_the_sigma_grid(tmp_path):
    res = run_cli(
        "transform", "--sequence", "constant", "--horizon", "64", "--out", "t",
        cwd=tmp_path,
    )
    assert res.returncode == 0, res.stderr
    lines = (tmp_path / "t" / "sigma.csv").read_text().splitlines()
    assert lines[0] == "m,n,value_re,value_im"
    assert len(lines) == 1 + 65 * 65


def test_transform_accepts_grid_expressions(tmp_path):
    res = run_cli(
        "transform", "--sequence", "1/(m+1)+sin(n)/(n+1)", "--horizon", "64",
        cwd=tmp_path,
    )
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "sigma.csv").exists()


def test_analyze_exits_five_on_rapidly_varying_weights(tmp_path):
    res = run_cli(
        "analyze", "--sequence", "additive_convergent", "--weights-p", "geometric",
        "--theorem", "T41", "--horizon", "128", cwd=tmp_path,
    )
    assert res.returncode == 5, res.stderr
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["weight_class_p"]["kind"] == "RapidlyVarying"


def test_analyze_reports_a_positive_verdict(tmp_path):
    res = run_cli(
        "analyze", "--sequence", "separable_convergent", "--theorem", "T41",
        "--out", "a", cwd=tmp_path,
    )
    assert res.returncode == 0, res.stderr
    doc = json.loads((tmp_path / "a" / "report.json").read_text())
    assert doc["verdict"] == "ConsistentPositive"
    assert doc["theorem"] == "T41"
    profiles = (tmp_path / "a" / "profiles.csv").read_text().splitlines()
    assert profiles[0] == "functional,lambda,kappa,horizon,tail_stat"
    assert len(profiles) > 1


def test_analyze_exits_four_when_limits_disagree(tmp_path):
    res = run_cli(
        "analyze", "--sequence", "additive_convergent", "--theorem", "T42",
        "--horizon", "2048", "--eps-dec", "0.1", "--eps-agree", "0.01",
        "--class-horizon", "4096", cwd=tmp_path,
    )
    assert res.returncode == 4, res.stderr
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["verdict"] == "Inconsistent"


def test_verify_lemma_is_deterministic(tmp_path):
    for sub in ("r1", "r2"):
        res = run_cli(
            "verify-lemma", "--seed", "7", "--count", "40", "--out", sub, cwd=tmp_path
        )
        assert res.returncode == 0, res.stderr
        assert "max relative residual" in res.stdout
    first = (tmp_path / "r1" / "lemma_residuals.csv").read_bytes()
    second = (tmp_path / "r2" / "lemma_residuals.csv").read_bytes()
    assert first == second
    header = first.decode().splitlines()[0]
    assert header == "m,n,mu,eta,direction,residual"


def test_verify_lemma_single_split(tmp_path):
    res = run_cli(
        "verify-lemma", "--sequence", "alternating", "--m", "2", "--n", "2",
        "--mu", "5", "--eta", "4", cwd=tmp_path,
    )
    assert res.returncode == 0, res.stderr
    lines = (tmp_path / "lemma_residuals.csv").read_text().splitlines()
    assert len(lines) == 2
    assert lines[1].startswith("2,2,5,4,forward,")


def test_verify_lemma_rejects_bad_splits(tmp_path):
    res = run_cli(
        "verify-lemma", "--sequence", "constant", "--m", "5", "--n", "5",
        "--mu", "3", "--eta", "7", cwd=tmp_path,
    )
    assert res.returncode == 2
    assert "mu > m" in res.stderr


def test_sweep_exports_functional_samples(tmp_path):
    res = run_cli(
        "sweep", "--sequence", "alternating", "--functional", "so_both",
        "--horizon", "64", cwd=tmp_path,
    )
    assert res.returncode == 0, res.stderr
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert lines[0] == "functional,lambda,kappa,horizon,m,n,value"
    assert len(lines) > 1
    values = {line.rsplit(",", 1)[1] for line in lines[1:]}
    # full swing once the window spans both parities; the tightest
    # (1.05, 1.05) windows hold a single same-parity cell, giving 0
    assert values == {"0", "2"}


def test_sweep_accepts_a_kappa_ladder(tmp_path):
    res = run_cli(
        "sweep", "--sequence", "constant", "--functional", "sd_both",
        "--lambdas", "2.0,1.5", "--kappas", "1.5,1.1", "--horizon", "64",
        cwd=tmp_path,
    )
    assert res.returncode == 0, res.stderr
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert any(line.split(",")[1:3] == ["2", "1.5"] for line in lines[1:])


def test_small_horizon_exits_two(tmp_path):
    res = run_cli("transform", "--sequence", "constant", "--horizon", "10", cwd=tmp_path)
    assert res.returncode == 2
    assert "horizon" in res.stderr


def test_unknown_config_key_exits_two(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"horizon": 128, "no_such_knob": 1}))
    res = run_cli("transform", "--config", "cfg.json", cwd=tmp_path)
    assert res.returncode == 2


def test_malformed_config_exits_two(tmp_path):
    (tmp_path / "bad.json").write_text("{not json")
    res = run_cli("transform", "--config", "bad.json", cwd=tmp_path)
    assert res.returncode == 2


def test_flags_override_config_files(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"sequence": "constant", "horizon": 128}))
    res = run_cli("transform", "--config", "cfg.json", "--horizon", "64", cwd=tmp_path)
    assert res.returncode == 0, res.stderr
    lines = (tmp_path / "sigma.csv").read_text().splitlines()
    assert len(lines) == 1 + 65 * 65


def test_unknown_sequence_name_exits_two(tmp_path):
    res = run_cli("transform", "--sequence", "mystery", cwd=tmp_path)
    assert res.returncode == 2
    assert "unknown sequence" in res.stderr


# ---------------------------------------------------------------------------
# Spec parsing used by the commands
# ---------------------------------------------------------------------------


def test_sequence_spec_accepts_corpus_names_and_expressions():
    # corpus factories bake their parameters into the name
    assert parse_sequence_spec("constant").name == "constant(c=1)"
    expr = parse_sequence_spec("1/(m+1)")
    assert expr.name == "1/(m+1)"
    import tauberkit as tk

    assert tk.eval_grid(expr, 3, 0).values[3, 0] == pytest.approx(0.25)


def test_sequence_spec_rejects_bare_unknown_words():
    with pytest.raises(ValueError, match="unknown sequence"):
        parse_sequence_spec("mystery")


def test_weight_spec_passes_parameters():
    p = parse_weight_spec("geometric:r=1.5")
    assert p.prefix(1) == pytest.approx(2.5)
    with pytest.raises(ValueError, match="unknown weight"):
        parse_weight_spec("mystery")


def test_expression_parser_rejects_garbage():
    with pytest.raises(ValueError):
        expression_sequence("1 +* 2")
    with pytest.raises(ValueError, match="unknown name"):
        expression_sequence("q/(m+1)")


def test_run_config_validates_ladders():
    with pytest.raises(ValueError):
        RunConfig(lambda_ladder=(1.5, 2.0)).validate()  # must decrease
    with pytest.raises(ValueError):
        RunConfig(lambda_ladder=(2.0, 1.0)).validate()  # entries must exceed 1
    with pytest.raises(ValueError):
        RunConfig(kappa_ladder=(2.0,)).validate()  # must pair with lambdas
    RunConfig().validate()
