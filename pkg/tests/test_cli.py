import json
import os

import pytest

from pecacc.cli import EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_OK, main
from pecacc.config import Config, ConfigError, dumps, load_config

SMALL_GRID = {"synthesis": {"grid": {"lo": -1.0, "hi": 1.0, "coarse_step": 0.25, "final_step": 0.025}}}


def _config(tmp_path, doc):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    return str(path)


def test_config_round_trip():
    cfg = Config()
    again = Config.from_dict(json.loads(dumps(cfg.to_dict())))
    assert again == cfg


def test_config_rejects_unknown_and_invalid(tmp_path):
    with pytest.raises(ConfigError, match="unknown"):
        Config.from_dict({"bogus": 1})
    with pytest.raises(ConfigError, match="unknown"):
        Config.from_dict({"scenario": {"speed": 3}})
    with pytest.raises(ConfigError):
        Config.from_dict({"gains": {"h_s": 0.0}})
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="valid JSON"):
        load_config(str(bad))


def test_synth_writes_reports_and_is_deterministic(tmp_path):
    out = tmp_path / "a"
    cfg = _config(tmp_path, SMALL_GRID)
    assert main(["synth", "--config", cfg, "--objective", "gamma", "--out", str(out)]) == EXIT_OK
    rep = json.loads((out / "synth_report.json").read_text())
    assert rep["feasible"] and rep["objective"] == "GammaOnly"
    assert abs(rep["f23_star"] + 0.6) <= 0.05
    assert (out / "grid_curve.csv").read_text().startswith("f23,feasible,gamma,trace,objective,status\n")
    # rerun from the effective configuration
    out2 = tmp_path / "b"
    eff = str(out / "effective_config.json")
    assert main(["synth", "--config", eff, "--out", str(out2)]) == EXIT_OK
    assert (out2 / "synth_report.json").read_text() == (out / "synth_report.json").read_text()


def test_synth_zero_width_box_note(tmp_path):
    nominal = Config().to_dict()["vehicle"]["nominal"]
    doc = dict(SMALL_GRID, vehicle={"lower": nominal, "upper": nominal})
    out = tmp_path / "z"
    assert main(["synth", "--config", _config(tmp_path, doc), "--out", str(out)]) == EXIT_OK
    rep = json.loads((out / "synth_report.json").read_text())
    assert rep["note"] == "single-vertex polytope" and rep["num_vertices"] == 1


def test_synth_infeasible_grid_exit_code(tmp_path):
    doc = {"synthesis": {"grid": {"lo": 50.0, "hi": 60.0, "coarse_step": 5.0, "final_step": 5.0}}}
    out = tmp_path / "inf"
    assert main(["synth", "--config", _config(tmp_path, doc), "--out", str(out)]) == EXIT_INFEASIBLE
    assert json.loads((out / "synth_report.json").read_text())["feasible"] is False


def test_certify_exit_codes(tmp_path):
    assert main(["certify", "--f23", "0", "--out", str(tmp_path / "c0")]) == EXIT_OK
    rep = json.loads((tmp_path / "c0" / "certify_report.json").read_text())
    assert rep["passed"] and rep["gamma_min"] > 0
    assert main(["certify", "--f23", "1000", "--out", str(tmp_path / "c1")]) == EXIT_INFEASIBLE


def test_config_error_exit_code(tmp_path):
    cfg = _config(tmp_path, {"gains": {"h_s": -1.0}})
    assert main(["certify", "--config", cfg, "--out", str(tmp_path / "e")]) == EXIT_CONFIG
    assert main(["simulate", "--realization", "1,2", "--out", str(tmp_path / "e2")]) == EXIT_CONFIG


def test_simulate_outputs_and_no_plots(tmp_path):
    doc = {"scenario": {"T_s": 24.0, "dt_s": 0.002, "sample_s": 0.02}}
    cfg = _config(tmp_path, doc)
    out = tmp_path / "s"
    assert main(["simulate", "--config", cfg, "--f23", "0.3", "--out", str(out)]) == EXIT_OK
    assert (out / "v2.svg").read_text().startswith("<svg")
    rep = json.loads((out / "simulate_report.json").read_text())
    assert rep["velocity_rmse_mps"] > 0 and rep["realization"][2] == 0.3
    header = (out / "trajectory.csv").read_text().splitlines()[0]
    assert header == "t,v1,a1,d,eps2,v2,a2,xi2,u1,u_eng"
    out2 = tmp_path / "s2"
    assert main(["simulate", "--config", cfg, "--no-plots", "--delay", "0.2", "--out", str(out2)]) == EXIT_OK
    assert not any(f.endswith(".svg") for f in os.listdir(out2))
    assert json.loads((out2 / "simulate_report.json").read_text())["delay_s"] == 0.2


def test_version(capsys):
    with pytest.raises(SystemExit):
        main(["--version"])
    assert "0.1.0" in capsys.readouterr().out
