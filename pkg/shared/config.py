import json
import os
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

from dotenv import load_dotenv

from shared.benchmarks import BenchmarkScale
from shared.cross_validation import GridConfig
from shared.data_model import EpiWeek, PanelSource
from shared.errors import ConfigError, DataError
from shared.models import ModelSpec, VintageMode
from shared.solver import Regime
from shared.transforms import TransformParams

ENV_KEYS = {
    "seed": "ARGO_SEED",
    "threads": "ARGO_THREADS",
    "log_level": "ARGO_LOG_LEVEL",
    "output_dir": "ARGO_OUTPUT_DIR",
}

_settings = None


def get_settings(reload: bool = False) -> Dict[str, str]:
    """ARGO_* settings from the environment, after loading `.env` once per process."""
    global _settings
    if _settings is None or reload:
        load_dotenv()
        _settings = {key: os.environ[name] for key, name in ENV_KEYS.items() if os.environ.get(name)}
    return _settings


@dataclass(frozen=True)
class PeriodSpec:
    name: str
    start: str
    end: str

    def __post_init__(self):
        try:
            start = EpiWeek.parse_label(self.start)
            end = EpiWeek.parse_label(self.end)
        except DataError as e:
            raise ConfigError(f"period {self.name}: {e}") from e
        if end < start:
            raise ConfigError(f"period {self.name} ends before it starts")


@dataclass(frozen=True)
class BootstrapSettings:
    mean_block_length: float = 52.0
    replicates: int = 10000
    level: float = 0.95


@dataclass(frozen=True)
class RunConfig:
    ili_path: str
    seed: int
    model: ModelSpec = field(default_factory=ModelSpec)
    vintage_path: Optional[str] = None
    panel_path: Optional[str] = None
    panel_source: PanelSource = PanelSource.TRENDS
    switch_panel_path: Optional[str] = None
    switch_panel_source: PanelSource = PanelSource.TRENDS
    gft_path: Optional[str] = None
    benchmark_scale: BenchmarkScale = BenchmarkScale.PERCENT
    vintage_mode: VintageMode = VintageMode.FINALIZED
    start: Optional[str] = None
    end: Optional[str] = None
    periods: Tuple[PeriodSpec, ...] = ()
    extra_regimes: Tuple[Regime, ...] = ()
    bootstrap: BootstrapSettings = field(default_factory=BootstrapSettings)
    threads: int = 1
    output_dir: Optional[str] = None
    log_level: str = "INFO"

    def to_metadata(self) -> Dict[str, Any]:
        """Every knob with its resolved value."""
        model = self.model
        return {
            "inputs": {
                "ili": self.ili_path,
                "vintages": self.vintage_path,
                "panel": self.panel_path,
                "panel_source": self.panel_source.value,
                "panel_switch": self.switch_panel_path,
                "panel_switch_source": self.switch_panel_source.value if self.switch_panel_path else None,
                "gft": self.gft_path,
            },
            "model": {
                "n_lags": model.n_lags,
                "window": model.window,
                "regime": model.regime.value,
                "delta": model.transform.delta,
                "cv_folds": model.grid.folds,
                "cv_shuffle": model.grid.shuffle,
                "grid_points": model.grid.points,
                "grid_points_2d": model.grid.points_2d,
                "grid_decades": model.grid.decades,
                "ridge_max": model.grid.ridge_max,
                "benchmark_scale": self.benchmark_scale.value,
            },
            "evaluation": {
                "start": self.start,
                "end": self.end,
                "periods": [vars(p) for p in self.periods],
                "extra_regimes": [r.value for r in self.extra_regimes],
            },
            "bootstrap": vars(self.bootstrap),
            "vintage_mode": self.vintage_mode.value,
            "seed": self.seed,
            "threads": self.threads,
            "seeding": {
                "cv_folds": "SeedSequence([seed, year, week])",
                "bootstrap_replicate": "SeedSequence(seed, spawn_key=(replicate,))",
            },
        }


def _read_json(path: str) -> Dict[str, Any]:
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, encoding="utf-8") as f:
            payload = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: malformed JSON: {e}") from e
    if not isinstance(payload, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return payload


def _input_path(value: Optional[str], base: str, what: str) -> Optional[str]:
    if value is None:
        return None
    path = value if os.path.isabs(value) else os.path.normpath(os.path.join(base, value))
    if not os.path.isfile(path):
        raise ConfigError(f"{what} file not found: {path}")
    return path


def _section(payload: Dict[str, Any], name: str) -> Dict[str, Any]:
    section = payload.get(name, {})
    if not isinstance(section, dict):
        raise ConfigError(f"config section {name!r} must be an object")
    return section


def load_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Resolve the run configuration.

    Precedence, highest first: `overrides` (command-line flags), ARGO_* environment
    variables, the JSON file at `path`, built-in defaults. Relative input paths are
    taken relative to the config file.

    Raises:
        ConfigError: for missing files, malformed values or a missing seed.
    """
    payload = _read_json(path) if path else {}
    base = os.path.dirname(os.path.abspath(path)) if path else os.getcwd()
    layered: Dict[str, Any] = {k: payload.get(k) for k in ("seed", "threads", "output_dir", "log_level", "vintage_mode")}
    layered.update(get_settings())
    layered.update({k: v for k, v in (overrides or {}).items() if v is not None})

    inputs = _section(payload, "inputs")
    model = dict(_section(payload, "model"))
    if layered.get("regime") is not None:
        model["regime"] = layered["regime"]
    evaluation = _section(payload, "evaluation")
    bootstrap = _section(payload, "bootstrap")

    if layered.get("seed") is None:
        raise ConfigError("a seed is required (--seed, ARGO_SEED or 'seed' in the config file)")
    if "ili" not in inputs:
        raise ConfigError("inputs.ili is required")

    try:
        seed = int(layered["seed"])
        threads = int(layered.get("threads") or 1)
        if not 0 <= seed < 2 ** 64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed}")
        grid = GridConfig(
            folds=int(model.get("cv_folds", 10)),
            points=int(model.get("grid_points", 30)),
            points_2d=int(model.get("grid_points_2d", 15)),
            decades=float(model.get("grid_decades", 4.0)),
            ridge_max=float(model.get("ridge_max", 1e3)),
            shuffle=bool(model.get("cv_shuffle", True)),
        )
        spec = ModelSpec(
            n_lags=int(model.get("n_lags", 52)),
            window=int(model.get("window", 104)),
            regime=Regime(model.get("regime", Regime.SAME_L1.value)),
            transform=TransformParams(delta=float(model.get("delta", 0.5))),
            grid=grid,
            global_seed=seed,
            threads=threads,
        )
        switch = inputs.get("panel_switch") or {}
        if switch and not isinstance(switch, dict):
            raise ConfigError("inputs.panel_switch must be an object with 'path' and 'source'")
        return RunConfig(
            ili_path=_input_path(inputs["ili"], base, "ILI"),
            seed=seed,
            model=spec,
            vintage_path=_input_path(inputs.get("vintages"), base, "vintage"),
            panel_path=_input_path(inputs.get("panel"), base, "panel"),
            panel_source=PanelSource(inputs.get("panel_source", PanelSource.TRENDS.value)),
            switch_panel_path=_input_path(switch.get("path"), base, "switch panel"),
            switch_panel_source=PanelSource(switch.get("source", PanelSource.TRENDS.value)),
            gft_path=_input_path(inputs.get("gft"), base, "GFT"),
            benchmark_scale=BenchmarkScale(model.get("benchmark_scale", BenchmarkScale.PERCENT.value)),
            vintage_mode=VintageMode(layered.get("vintage_mode") or VintageMode.FINALIZED.value),
            start=evaluation.get("start"),
            end=evaluation.get("end"),
            periods=tuple(PeriodSpec(**p) for p in evaluation.get("periods", [])),
            extra_regimes=tuple(Regime(r) for r in evaluation.get("extra_regimes", [])),
            bootstrap=BootstrapSettings(
                mean_block_length=float(bootstrap.get("mean_block_length", 52.0)),
                replicates=int(bootstrap.get("replicates", 10000)),
                level=float(bootstrap.get("level", 0.95)),
            ),
            threads=threads,
            output_dir=layered.get("output_dir"),
            log_level=str(layered.get("log_level") or "INFO"),
        )
    except ConfigError:
        raise
    except (DataError, ValueError, TypeError) as e:
        raise ConfigError(f"invalid configuration: {e}") from e


def cli_overrides(args) -> Dict[str, Any]:
    """Flag values from an argparse namespace, for the top layer of load_config."""
    return {
        "seed": getattr(args, "seed", None),
        "threads": getattr(args, "threads", None),
        "output_dir": getattr(args, "out", None),
        "vintage_mode": getattr(args, "vintage_mode", None),
        "regime": getattr(args, "regime", None),
    }
