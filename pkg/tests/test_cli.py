import filecmp
import json
import os
import shutil
import sys

import pandas as pd
import pytest

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import cli
from shared import config as config_module
from shared.data_io import read_ili_csv, read_panel_csv
from shared.data_model import PanelSource
from shared.evaluation import METRICS

SYNTHETIC = {"n_lags": 4, "n_terms": 6, "informative_terms": 2, "n_weeks": 90, "revision_lags": 2, "revision_sd": 0.1}


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    for name in config_module.ENV_KEYS.values():
        monkeypatch.delenv(name, raising=False)
    config_module.get_settings(reload=True)
    yield
    config_module.get_settings(reload=True)


@pytest.fixture
def simulated(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps(SYNTHETIC), encoding="utf-8")
    out = tmp_path / "sim"
    assert cli.main(["simulate", "--spec", str(spec), "--seed", "3", "--out", str(out)]) == 0
    return out


def _run_config(tmp_path, sim, **inputs):
    payload = {
        "inputs": {
            "ili": str(sim / "ili.csv"),
            "vintages": str(sim / "vintages.csv"),
            "panel": str(sim / "panel.csv"),
            "panel_source": "scaled",
            **inputs,
        },
        "model": {"n_lags": 4, "window": 30, "cv_folds": 3, "grid_points": 5, "grid_points_2d": 3},
        "bootstrap": {"mean_block_length": 5, "replicates": 200},
        "seed": 3,
    }
    path = tmp_path / "run.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


def test_simulate_writes_readable_files(simulated):
    for name in ("ili.csv", "vintages.csv", "panel.csv", "truth.json", "config.json"):
        assert (simulated / name).is_file()
    assert len(read_ili_csv(str(simulated / "ili.csv"))) == 90
    assert read_panel_csv(str(simulated / "panel.csv"), PanelSource.SCALED).n_terms == 6
    truth = json.loads((simulated / "truth.json").read_text(encoding="utf-8"))
    assert truth["seed"] == 3
    assert truth["nonzero_lags"] == [1, 2, 4]
    generated = json.loads((simulated / "config.json").read_text(encoding="utf-8"))
    assert generated["model"]["n_lags"] == 4


def test_simulate_refuses_existing_output(tmp_path, simulated, capsys):
    spec = str(tmp_path / "spec.json")
    assert cli.main(["simulate", "--spec", spec, "--seed", "1", "--out", str(simulated)]) == 2
    assert "already exists" in capsys.readouterr().err


def test_evaluate_is_deterministic(tmp_path, simulated):
    config = _run_config(tmp_path, simulated)
    first, second = tmp_path / "eval1", tmp_path / "eval2"
    assert cli.main(["evaluate", "--config", config, "--out", str(first)]) == 0
    assert cli.main(["evaluate", "--config", config, "--out", str(second)]) == 0

    names = ["estimates.csv", "metrics.csv", "efficiency.csv", "coefficients.csv", "penalties.csv", "run_meta.json"]
    match, mismatch, errors = filecmp.cmpfiles(first, second, names, shallow=False)
    assert mismatch == [] and errors == []
    assert filecmp.cmp(first / "errors" / "argo.csv", second / "errors" / "argo.csv", shallow=False)

    metrics = pd.read_csv(first / "metrics.csv")
    methods = {"argo", "naive", "ar3", "exo_only"}
    assert set(metrics["method"]) == methods
    assert set(metrics["period"]) == {"all"}
    assert len(metrics) == len(METRICS) * len(methods)
    efficiency = pd.read_csv(first / "efficiency.csv")
    assert set(efficiency["method"]) == methods - {"argo"}
    meta = json.loads((first / "run_meta.json").read_text(encoding="utf-8"))
    assert meta["config"]["seed"] == 3
    assert meta["config"]["model"]["window"] == 30


def test_evaluate_missing_input_exits_with_config_error(tmp_path, simulated, capsys):
    config = _run_config(tmp_path, simulated, ili=str(tmp_path / "nowhere.csv"))
    assert cli.main(["evaluate", "--config", config, "--out", str(tmp_path / "eval")]) == 2
    assert "nowhere.csv" in capsys.readouterr().err
    assert not (tmp_path / "eval").exists()


def test_bootstrap_ci_from_error_files(tmp_path, simulated, capsys):
    config = _run_config(tmp_path, simulated)
    out = tmp_path / "eval"
    assert cli.main(["evaluate", "--config", config, "--out", str(out)]) == 0
    capsys.readouterr()
    argv = [
        "bootstrap-ci",
        "--errors1", str(out / "errors" / "argo.csv"),
        "--errors2", str(out / "errors" / "naive.csv"),
        "--seed", "1",
        "--replicates", "50",
        "--block-length", "4",
    ]
    assert cli.main(argv) == 0
    estimate = json.loads(capsys.readouterr().out)
    assert estimate["replicates"] == 50
    assert estimate["mean_block_length"] == 4.0
    assert estimate["ci_low"] <= estimate["ci_high"]


def test_bootstrap_ci_needs_a_seed(tmp_path, capsys):
    errors = tmp_path / "e.csv"
    errors.write_text("error\n0.1\n-0.2\n0.3\n", encoding="utf-8")
    assert cli.main(["bootstrap-ci", "--errors1", str(errors), "--errors2", str(errors)]) == 2


def test_fit_week_reports_a_valid_fit(tmp_path, simulated, capsys):
    config = _run_config(tmp_path, simulated)
    label = read_ili_csv(str(simulated / "ili.csv")).weeks[60].label
    assert cli.main(["fit-week", "--config", config, "--week", label]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["week"] == label
    assert report["kkt"]["ok"]
    assert 0 < report["nowcast_percent"] < 100
    assert list(report["coefficients"])[:4] == ["lag_1", "lag_2", "lag_3", "lag_4"]
    assert len(report["coefficients"]) == 10


def test_fit_week_writes_output_directory(tmp_path, simulated):
    config = _run_config(tmp_path, simulated)
    label = read_ili_csv(str(simulated / "ili.csv")).weeks[50].label
    out = tmp_path / "fit"
    assert cli.main(["fit-week", "--config", config, "--week", label, "--out", str(out)]) == 0
    table = pd.read_csv(out / "cv_table.csv")
    assert len(table) == 5
    assert table["selected"].sum() == 1


def test_multiversion_identical_panels_have_no_spread(tmp_path, simulated):
    versions = tmp_path / "versions"
    versions.mkdir()
    for name in ("v1.csv", "v2.csv"):
        shutil.copy(simulated / "panel.csv", versions / name)
    config = _run_config(tmp_path, simulated)
    out = tmp_path / "multi"
    assert cli.main(["multiversion", "--config", config, "--panels", str(versions / "*.csv"), "--out", str(out)]) == 0
    summary = pd.read_csv(out / "multiversion.csv")
    assert (summary["std"] == 0).all()
    assert (summary["versions"] == 2).all()
    meta = json.loads((out / "run_meta.json").read_text(encoding="utf-8"))
    assert len(meta["versions"]) == 2


def test_multiversion_autoregressive_rows_ignore_the_panel(tmp_path, simulated):
    versions = tmp_path / "versions"
    versions.mkdir()
    panel = pd.read_csv(simulated / "panel.csv")
    panel.to_csv(versions / "v1.csv", index=False)
    terms = panel.columns[3:]
    panel[terms] = panel[terms] * 0.9
    panel.to_csv(versions / "v2.csv", index=False)
    config = _run_config(tmp_path, simulated)
    out = tmp_path / "multi"
    assert cli.main(["multiversion", "--config", config, "--panels", str(versions / "*.csv"), "--out", str(out)]) == 0
    summary = pd.read_csv(out / "multiversion.csv")
    for method in ("ar3", "naive"):
        assert (summary.loc[summary["method"] == method, "std"] == 0).all()
