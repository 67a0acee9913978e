import csv
import json
from pathlib import Path

import numpy as np
import pytest

from decarb.cli import emit_csv, run
from conftest import NASH_FIXTURE, TWO_FIRM_FIXTURE

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def write_config(tmp_path: Path, payload: dict, name: str = "config.json") -> str:
    path = tmp_path / name
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


def read_rows(path: Path) -> list[list[str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


class TestEmitCsv:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        data = np.concatenate([
            rng.standard_normal((5, 3)) * 10.0 ** rng.integers(-8, 8, (5, 3)),
            [[0.0, -0.0, 1e-300]],
        ])
        path = tmp_path / "data.csv"
        emit_csv(data, ("a", "b", "c"), path)
        rows = read_rows(path)
        assert rows[0] == ["a", "b", "c"]
        back = np.array([[float(v) for v in row] for row in rows[1:]])
        assert np.array_equal(back, data)

    def test_empty_trajectory_writes_header_only(self, tmp_path):
        path = tmp_path / "empty.csv"
        emit_csv(np.zeros((0, 2)), ("t", "x"), path)
        assert path.read_text(encoding="utf-8") == "t,x\n"

    def test_column_mismatch(self, tmp_path):
        with pytest.raises(ValueError):
            emit_csv(np.zeros((2, 2)), ("a",), tmp_path / "bad.csv")


class TestScenarios:
    def test_nash_outputs_and_determinism(self, tmp_path):
        cfg = str(CONFIG_DIR / "fig2_nash.json")
        out1, out2 = tmp_path / "run1", tmp_path / "run2"
        assert run(["nash", "--config", cfg, "--out", str(out1)]) == 0
        assert run(["nash", "--config", cfg, "--out", str(out2)]) == 0
        rows = read_rows(out1 / "nash_coeffs.csv")
        assert rows[0] == ["t", "A", "B", "C", "D", "E", "F",
                           "At", "Bt", "Ct", "Dt", "Et", "Ft"]
        assert len(rows) == 1002  # header + 1001 nodes
        assert (out1 / "nash_coeffs.csv").read_bytes() == (out2 / "nash_coeffs.csv").read_bytes()
        assert (out1 / "summary.json").read_bytes() == (out2 / "summary.json").read_bytes()

    def test_two_firm_and_single_firm(self, tmp_path):
        for name in ("two_firm", "single_firm"):
            out = tmp_path / name
            scenario = name.replace("_", "-")
            assert run([scenario, "--config", str(CONFIG_DIR / f"{name}.json"),
                        "--out", str(out)]) == 0
            rows = read_rows(out / "riccati_coeffs.csv")
            assert rows[0] == ["t", "A11", "A12", "A22", "B1", "B2", "C"]
            assert len(rows) == 1002
            summary = json.loads((out / "summary.json").read_text())
            assert summary["scenario"] == scenario
            assert "value_at_origin" in summary

    def test_best_response_runs_from_checked_in_configs(self, tmp_path):
        outs = []
        for tag in ("0", "05", "1"):
            out = tmp_path / f"br{tag}"
            cfg = str(CONFIG_DIR / f"fig1_best_response_a2_{tag}.json")
            assert run(["best-response", "--config", cfg, "--out", str(out)]) == 0
            outs.append(read_rows(out / "best_response_coeffs.csv"))
        # quadratic coefficients agree across opponents, slopes do not
        for rows in outs:
            assert rows[0] == ["t", "A", "B", "C", "D", "E", "F"]
        a_cols = [[r[1] for r in rows[1:]] for rows in outs]
        d_cols = [[r[4] for r in rows[1:]] for rows in outs]
        assert a_cols[0] == a_cols[1] == a_cols[2]
        assert d_cols[0] != d_cols[2]

    def test_verify_scenario_nash(self, tmp_path):
        out = tmp_path / "verify"
        cfg = write_config(tmp_path, {
            "model": NASH_FIXTURE,
            "numerics": {"n_nodes": 16001},
        })
        assert run(["verify", "--config", cfg, "--out", str(out)]) == 0
        residuals = json.loads((out / "residuals.json").read_text())
        assert {r["label"] for r in residuals["reports"]} == {"nash_hjb_firm1", "nash_hjb_firm2"}
        assert all(r["max_residual"] <= 1e-6 for r in residuals["reports"])
        assert residuals["ode_max_residual"] <= 1e-6

    def test_verify_scenario_principal(self, tmp_path):
        out = tmp_path / "verify_p"
        cfg = write_config(tmp_path, {"model": TWO_FIRM_FIXTURE})
        assert run(["verify", "--config", cfg, "--out", str(out)]) == 0
        residuals = json.loads((out / "residuals.json").read_text())
        assert residuals["reports"][0]["label"] == "principal_hjb"
        assert residuals["reports"][0]["max_residual"] <= 1e-6

    def test_simulate_scenario_principal(self, tmp_path):
        out = tmp_path / "sim"
        cfg = write_config(tmp_path, {
            "model": TWO_FIRM_FIXTURE,
            "numerics": {"n_nodes": 501, "n_paths": 2000, "dt": 0.004, "seed": 11},
        })
        assert run(["simulate", "--config", cfg, "--out", str(out)]) == 0
        summary = json.loads((out / "summary.json").read_text())
        labels = [e["label"] for e in summary["estimates"]]
        assert labels == ["principal", "firm1", "firm2"]
        est = summary["estimates"][0]
        assert abs(est["mean"] - summary["targets"]["principal"]) <= 4.0 * est["std_err"]

    def test_simulate_scenario_nash_with_deviation(self, tmp_path):
        out = tmp_path / "simnash"
        cfg = write_config(tmp_path, {
            "model": NASH_FIXTURE,
            "numerics": {"n_nodes": 1001, "n_paths": 1000, "dt": 0.004, "seed": 12},
            "deviation": {"firm": 1, "scale": 1.1},
        })
        assert run(["simulate", "--config", cfg, "--out", str(out)]) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["deviation"] == {"firm": 1, "scale": 1.1}
        assert {e["label"] for e in summary["estimates"]} == {"firm1", "firm2"}

    def test_simulate_dump_paths(self, tmp_path):
        out = tmp_path / "dump"
        cfg = write_config(tmp_path, {
            "model": NASH_FIXTURE,
            "numerics": {"n_nodes": 501, "n_paths": 100, "dt": 0.004, "seed": 13,
                         "dump_paths": True},
        })
        assert run(["simulate", "--config", cfg, "--out", str(out)]) == 0
        rows = read_rows(out / "paths.csv")
        assert rows[0] == ["path", "firm1", "firm2"]
        assert len(rows) == 101
        summary = json.loads((out / "summary.json").read_text())
        assert "paths.csv" in summary["outputs"]
        assert summary["estimates"][0]["dt"] == 0.004

    def test_seed_override_changes_estimates(self, tmp_path):
        cfg = write_config(tmp_path, {
            "model": NASH_FIXTURE,
            "numerics": {"n_nodes": 501, "n_paths": 500, "dt": 0.004, "seed": 1},
        })
        out1, out2 = tmp_path / "s1", tmp_path / "s2"
        assert run(["simulate", "--config", cfg, "--out", str(out1)]) == 0
        assert run(["simulate", "--config", cfg, "--out", str(out2), "--seed", "99"]) == 0
        s1 = json.loads((out1 / "summary.json").read_text())
        s2 = json.loads((out2 / "summary.json").read_text())
        assert s1["estimates"][0]["seed"] == 1 and s2["estimates"][0]["seed"] == 99
        assert s1["estimates"][0]["mean"] != s2["estimates"][0]["mean"]

    def test_literal_signs_flag(self, tmp_path):
        out = tmp_path / "lit"
        cfg = str(CONFIG_DIR / "single_firm.json")
        assert run(["single-firm", "--config", cfg, "--out", str(out),
                    "--literal-signs"]) == 0
        base_out = tmp_path / "base"
        assert run(["single-firm", "--config", cfg, "--out", str(base_out)]) == 0
        lit = json.loads((out / "summary.json").read_text())
        base = json.loads((base_out / "summary.json").read_text())
        assert lit["value_at_origin"] != base["value_at_origin"]


class TestErrorPaths:
    def test_validation_error_names_field(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"model": dict(NASH_FIXTURE, gamma1=-1.0)})
        assert run(["nash", "--config", cfg, "--out", str(tmp_path)]) == 1
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "OutOfRange"
        assert err["field"] == "gamma1"
        assert err["exit_code"] == 1

    def test_scenario_kind_mismatch(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"model": TWO_FIRM_FIXTURE})
        assert run(["nash", "--config", cfg, "--out", str(tmp_path)]) == 1
        assert json.loads(capsys.readouterr().err)["error"] == "ConfigMismatch"

    def test_blow_up_exit_code(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"model": dict(NASH_FIXTURE, horizon=1.5)})
        assert run(["nash", "--config", cfg, "--out", str(tmp_path)]) == 2
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "BlowUp" and err["exit_code"] == 2

    def test_missing_config_file(self, tmp_path, capsys):
        assert run(["nash", "--config", str(tmp_path / "nope.json"),
                    "--out", str(tmp_path)]) == 1

    def test_malformed_json(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        assert run(["nash", "--config", str(path), "--out", str(tmp_path)]) == 1

    def test_missing_model_section(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"numerics": {}})
        assert run(["nash", "--config", cfg, "--out", str(tmp_path)]) == 1
        assert json.loads(capsys.readouterr().err)["error"] == "MissingField"

    def test_best_response_needs_opponent(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"model": NASH_FIXTURE})
        assert run(["best-response", "--config", cfg, "--out", str(tmp_path)]) == 1
        assert json.loads(capsys.readouterr().err)["field"] == "opponent"
