"""End-to-end tests of the command-line surface, run in process through
``main``."""

from __future__ import annotations

import json

import pytest

from bsplan.cli import main
from bsplan.model import Plan
from bsplan.risk import bayes_risk

TINY_CONFIG = """\
[priors]
alpha_1 = 2.0
beta_1 = 1.0
l_1 = 5.0

[costs]
C_s = 0.6
v_s = 0.3
C_t = 0.8
C_a = 0.1
C_r = 9.0

[loss]
a_0 = 1
a_1 = 2
a_1_1 = 1.5

[search]
n_max = 3
grid_points = 7
"""


@pytest.fixture()
def tiny_config(tmp_path):
    path = tmp_path / "tiny.ini"
    path.write_text(TINY_CONFIG)
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestConfigParsing:
    def test_missing_file(self, capsys):
        code, _, err = run(capsys, "evaluate", "--config", "/nope.ini", "--n", "2", "--r", "1", "--m", "0")
        assert code == 2
        assert "error:" in err

    def test_missing_section(self, capsys, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[priors]\nalpha_1 = 2\nbeta_1 = 1\nl_1 = 5\n")
        code, _, err = run(capsys, "evaluate", "--config", str(path), "--n", "2", "--r", "1", "--m", "0")
        assert code == 2
        assert "costs" in err

    def test_gapped_indices_rejected(self, capsys, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text(TINY_CONFIG.replace("alpha_1", "alpha_2"))
        code, _, err = run(capsys, "evaluate", "--config", str(path), "--n", "2", "--r", "1", "--m", "0")
        assert code == 2


class TestEvaluate:
    def test_json_matches_library(self, capsys, tiny_config):
        code, out, _ = run(
            capsys, "evaluate", "--config", tiny_config,
            "--n", "3", "--r", "2", "--m", "1", "--tau1", "0.4", "--json",
        )
        assert code == 0
        payload = json.loads(out)
        from bsplan.cli import _load_config

        cfg = _load_config(tiny_config)
        ev = bayes_risk(Plan(3, 2, 1, 0.4), cfg.priors, cfg.loss, cfg.costs)
        assert payload["risk"] == ev.risk  # full-precision round trip
        assert payload["plan"] == {"n": 3, "r": 2, "m": 1, "tau1": 0.4}

    def test_invalid_plan(self, capsys, tiny_config):
        code, _, err = run(
            capsys, "evaluate", "--config", tiny_config, "--n", "2", "--r", "3", "--m", "0"
        )
        assert code == 2


class TestOptimize:
    def test_single_mode_json(self, capsys, tiny_config):
        code, out, _ = run(capsys, "optimize", "--config", tiny_config, "--mode", "cbsp", "--json")
        assert code == 0
        payload = json.loads(out)
        assert payload["mode"] == "cbsp"
        assert payload["best"]["plan"]["m"] == 0

    def test_compare_consistent_and_deterministic(self, capsys, tiny_config):
        code1, out1, _ = run(capsys, "optimize", "--config", tiny_config, "--compare", "--json")
        code2, out2, _ = run(capsys, "optimize", "--config", tiny_config, "--compare", "--json")
        assert code1 == code2 == 0
        assert out1 == out2
        payload = json.loads(out1)
        assert payload["aabsp"]["risk"] <= payload["acbsp"]["risk"] + 1e-9
        assert payload["aabsp"]["risk"] <= payload["cbsp"]["risk"] + 1e-9

    def test_n_max_flag_caps_search(self, capsys, tiny_config):
        code, out, _ = run(
            capsys, "optimize", "--config", tiny_config, "--n-max", "1", "--json"
        )
        assert code == 0
        assert json.loads(out)["best"]["plan"]["n"] <= 1


class TestDecide:
    def test_matches_simulated_run(self, capsys, tiny_config, tmp_path):
        out_dir = tmp_path / "sims"
        code, out, _ = run(
            capsys, "simulate", "--config", tiny_config,
            "--n", "4", "--r", "3", "--m", "2", "--tau1", "0.5",
            "--lam", "1.1", "--phi", "2.5", "--reps", "2", "--seed", "7",
            "--out", str(out_dir), "--json",
        )
        assert code == 0
        sim = json.loads(out)
        code, out, _ = run(
            capsys, "decide", "--config", tiny_config, "--data", str(out_dir / "rep_001.csv"),
            "--n", "4", "--r", "3", "--m", "2", "--tau1", "0.5", "--json",
        )
        assert code == 0
        dec = json.loads(out)
        rep = sim["replications"][0]
        assert dec["e"] == pytest.approx(rep["e"], rel=1e-12)
        assert dec["decision"] == rep["decision"]
        assert dec["w1"] == pytest.approx(rep["w1"], rel=1e-12)

    def test_malformed_row_reports_line(self, capsys, tiny_config, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("time,cause\n0.5,1\noops,1\n")
        code, _, err = run(
            capsys, "decide", "--config", tiny_config, "--data", str(path),
            "--n", "3", "--r", "2", "--m", "1", "--tau1", "0.5",
        )
        assert code == 2
        assert "line 3" in err

    def test_empty_file_rejected(self, capsys, tiny_config, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("time,cause\n")
        code, _, err = run(
            capsys, "decide", "--config", tiny_config, "--data", str(path),
            "--n", "3", "--r", "2", "--m", "1", "--tau1", "0.5",
        )
        assert code == 2
        assert "no data rows" in err


class TestFit:
    def test_solar_dataset(self, capsys, solar_csv):
        code, out, _ = run(
            capsys, "fit", "--data", str(solar_csv), "--n", "35", "--n-risks", "2",
            "--tau1", "5", "--tau2", "6", "--json",
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["lam"][0] == pytest.approx(0.0222, abs=5e-4)
        assert payload["lam"][1] == pytest.approx(0.0960, abs=5e-4)
        assert payload["phi"][0] == pytest.approx(55.10, rel=5e-3)
        assert payload["phi"][1] == pytest.approx(6.358, rel=5e-3)

    def test_curve_output(self, capsys, solar_csv):
        code, out, _ = run(
            capsys, "fit", "--data", str(solar_csv), "--n", "35", "--n-risks", "2",
            "--tau1", "5", "--tau2", "6", "--curve", "0,1,2", "--json",
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["curve"]["reliability"][0] == pytest.approx(1.0)
        assert len(payload["curve"]["reliability"]) == 3

    def test_missing_cause_column(self, capsys, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("time\n0.5\n")
        code, _, err = run(
            capsys, "fit", "--data", str(path), "--n", "3", "--n-risks", "1", "--tau1", "1"
        )
        assert code == 2
        assert "cause" in err


class TestSimulate:
    def test_deterministic_outputs(self, capsys, tiny_config, tmp_path):
        args = [
            "simulate", "--config", tiny_config,
            "--n", "4", "--r", "3", "--m", "2", "--tau1", "0.5",
            "--lam", "1.1", "--phi", "2.5", "--reps", "3", "--seed", "11", "--json",
        ]
        _, out1, _ = run(capsys, *args)
        _, out2, _ = run(capsys, *args)
        assert out1 == out2

    def test_never_accelerated_plan_never_changes_stress(self, capsys, tiny_config):
        code, out, _ = run(
            capsys, "simulate", "--config", tiny_config,
            "--n", "4", "--r", "3", "--m", "0", "--tau1", "0",
            "--lam", "1.1", "--phi", "2.5", "--reps", "5", "--json",
        )
        assert code == 0
        payload = json.loads(out)
        assert all(not rep["stress_changed"] for rep in payload["replications"])


class TestMcRisk:
    def test_analytic_verdict(self, capsys, tiny_config):
        code, out, _ = run(
            capsys, "mc-risk", "--config", tiny_config,
            "--n", "3", "--r", "2", "--m", "1", "--tau1", "0.4",
            "--reps", "20000", "--seed", "3", "--analytic", "--json",
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["verdict"] == "PASS"
        assert payload["abs_difference"] <= payload["three_se"]

    def test_rejects_tiny_reps(self, capsys, tiny_config):
        code, _, err = run(
            capsys, "mc-risk", "--config", tiny_config,
            "--n", "3", "--r", "2", "--m", "1", "--reps", "10",
        )
        assert code == 2
