import json
import os
import sys

import pytest

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from shared import config as config_module
from shared.config import cli_overrides, load_config
from shared.errors import ConfigError
from shared.models import VintageMode
from shared.solver import Regime


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    for name in config_module.ENV_KEYS.values():
        monkeypatch.delenv(name, raising=False)
    config_module.get_settings(reload=True)
    yield
    config_module.get_settings(reload=True)


def _config(tmp_path, payload):
    (tmp_path / "ili.csv").write_text("year,week,end_date,wili\n2009,40,2009-10-10,1.0\n", encoding="utf-8")
    path = tmp_path / "config.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


def test_defaults_and_relative_paths(tmp_path):
    config = load_config(_config(tmp_path, {"inputs": {"ili": "ili.csv"}, "seed": 5}))
    assert config.ili_path == str(tmp_path / "ili.csv")
    assert config.seed == 5
    assert config.model.n_lags == 52
    assert config.model.window == 104
    assert config.model.regime is Regime.SAME_L1
    assert config.model.grid.folds == 10
    assert config.vintage_mode is VintageMode.FINALIZED
    assert config.bootstrap.replicates == 10000
    assert config.to_metadata()["seed"] == 5


def test_seed_is_required(tmp_path):
    with pytest.raises(ConfigError):
        load_config(_config(tmp_path, {"inputs": {"ili": "ili.csv"}}))


def test_precedence_of_layers(tmp_path, monkeypatch):
    path = _config(tmp_path, {"inputs": {"ili": "ili.csv"}, "seed": 1, "threads": 2})
    monkeypatch.setenv("ARGO_SEED", "2")
    config_module.get_settings(reload=True)
    assert load_config(path).seed == 2
    assert load_config(path).threads == 2
    assert load_config(path, {"seed": 3, "threads": None}).seed == 3


def test_missing_input_names_the_path(tmp_path):
    path = _config(tmp_path, {"inputs": {"ili": "ili.csv", "panel": "missing.csv"}, "seed": 1})
    with pytest.raises(ConfigError) as excinfo:
        load_config(path)
    assert "missing.csv" in str(excinfo.value)
    assert excinfo.value.exit_code == 2


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "nope.json"))


@pytest.mark.parametrize(
    "model",
    [{"regime": "lasso"}, {"n_lags": 10, "window": 5}, {"cv_folds": 1}, {"delta": -1}, {"benchmark_scale": "log"}],
)
def test_invalid_model_settings(tmp_path, model):
    with pytest.raises(ConfigError):
        load_config(_config(tmp_path, {"inputs": {"ili": "ili.csv"}, "seed": 1, "model": model}))


def test_overrides_from_flags(tmp_path):
    class Args:
        seed = 11
        threads = 3
        out = str(tmp_path / "out")
        vintage_mode = "as-published"
        regime = "enet"

    config = load_config(_config(tmp_path, {"inputs": {"ili": "ili.csv"}, "seed": 1}), cli_overrides(Args()))
    assert config.seed == 11
    assert config.threads == 3
    assert config.model.threads == 3
    assert config.output_dir == Args.out
    assert config.vintage_mode is VintageMode.AS_PUBLISHED
    assert config.model.regime is Regime.SAME_ELASTIC_NET


def test_periods_are_validated(tmp_path):
    payload = {"inputs": {"ili": "ili.csv"}, "seed": 1, "evaluation": {"periods": [{"name": "p", "start": "2010-20", "end": "2010-10"}]}}
    with pytest.raises(ConfigError):
        load_config(_config(tmp_path, payload))
