import os
import shutil
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import scipy
import structlog

from shared.benchmarks import AR_ORDER, run_benchmark
from shared.bootstrap import EfficiencyEstimate, stationary_bootstrap_ci
from shared.config import RunConfig
from shared.data_io import (
    read_gft_csv,
    read_ili_csv,
    read_panel_csv,
    read_vintage_csv,
    write_json,
    write_report,
)
from shared.data_model import EpiWeek, SearchPanel, VintageSeries, WeeklySeries, align
from shared.errors import ConfigError, InsufficientDataError
from shared.evaluation import ALL_PERIODS, MetricTable, Period, build_metric_table, preset_periods
from shared.models import (
    NowcastDataset,
    coefficient_trajectory,
    exo_only_spec,
    run_retrospective,
    selected_penalties,
)

logger = structlog.get_logger()

VERSION = "0.1.0"
PRIMARY_METHOD = "argo"


@dataclass(frozen=True)
class EvaluationResult:
    first: EpiWeek
    last: EpiWeek
    target: WeeklySeries
    estimates: Dict[str, WeeklySeries]
    metrics: MetricTable
    efficiencies: Dict[str, EfficiencyEstimate]
    coefficients: pd.DataFrame
    penalties: pd.DataFrame
    metadata: dict


def load_dataset(config: RunConfig, panel: Optional[SearchPanel] = None) -> NowcastDataset:
    """Read every input the config names; `panel` replaces the configured panel when given."""
    finalized = read_ili_csv(config.ili_path)
    vintages = read_vintage_csv(config.vintage_path, finalized) if config.vintage_path else VintageSeries((), finalized)
    if panel is None and config.panel_path:
        panel = read_panel_csv(config.panel_path, config.panel_source)
        if config.switch_panel_path:
            panel = panel.concat(read_panel_csv(config.switch_panel_path, config.switch_panel_source))
    gft = read_gft_csv(config.gft_path) if config.gft_path else None
    return NowcastDataset(vintages, panel, gft)


def resolve_week(label: str, series: WeeklySeries) -> EpiWeek:
    year, week = EpiWeek.parse_label(label)
    found = series.find_week(year, week)
    if found is None:
        raise ConfigError(f"week {label} is not in the ILI series ({series.start} to {series.end})")
    return found


def evaluation_range(config: RunConfig, dataset: NowcastDataset) -> Tuple[EpiWeek, EpiWeek]:
    """
    Weeks to nowcast. Defaults to everything after the longest warm-up any method
    needs, up to the last week all inputs cover.
    """
    finalized = dataset.finalized
    warm_up = max(config.model.span, config.model.window + AR_ORDER)
    if len(finalized) <= warm_up:
        raise InsufficientDataError(f"ILI series has {len(finalized)} weeks; at least {warm_up + 1} are needed")
    first = resolve_week(config.start, finalized) if config.start else finalized.weeks[warm_up]
    last = resolve_week(config.end, finalized) if config.end else finalized.end
    if dataset.panel is not None:
        earliest = dataset.panel.start.ordinal + config.model.window
        if not config.start and first.ordinal < earliest:
            first = finalized.slice_ordinals(earliest, earliest).start
        panel_last = dataset.panel.end
        if panel_last.ordinal < last.ordinal:
            last = finalized.window(first, panel_last).end
    if last < first:
        raise ConfigError(f"evaluation range is empty ({first} to {last})")
    return first, last


def evaluation_periods(config: RunConfig, first: EpiWeek, last: EpiWeek, finalized: WeeklySeries) -> List[Period]:
    if config.periods:
        candidates = [
            Period(p.name, resolve_week(p.start, finalized), resolve_week(p.end, finalized)) for p in config.periods
        ]
    else:
        candidates = preset_periods()
    periods = []
    for period in candidates:
        if period.end.ordinal < first.ordinal or period.start.ordinal > last.ordinal:
            logger.info("Skipping period outside the evaluated range", period=period.name)
            continue
        periods.append(period)
    periods.append(Period(ALL_PERIODS, first, last))
    return periods


def _errors(estimate: WeeklySeries, target: WeeklySeries) -> np.ndarray:
    est, tgt = align(estimate, target)
    return est.values - tgt.values


def run_evaluation(config: RunConfig, panel: Optional[SearchPanel] = None, with_bootstrap: bool = True) -> EvaluationResult:
    """
    Retrospective comparison of ARGO against every benchmark the inputs allow.

    Shared by the evaluate and multiversion commands.
    """
    dataset = load_dataset(config, panel)
    first, last = evaluation_range(config, dataset)
    spec = config.model
    mode = config.vintage_mode
    logger.info("Running evaluation", first=str(first), last=str(last), vintage_mode=mode.value)

    argo = run_retrospective(dataset, first, last, spec, mode, method=PRIMARY_METHOD)
    estimates: Dict[str, WeeklySeries] = {PRIMARY_METHOD: argo.to_weekly_series()}
    for regime in config.extra_regimes:
        name = f"argo_{regime.value.replace('-', '_')}"
        series = run_retrospective(dataset, first, last, replace(spec, regime=regime), mode, method=name)
        estimates[name] = series.to_weekly_series()

    window = spec.window
    estimates["naive"] = run_benchmark("naive", dataset, first, last, window, config.benchmark_scale, mode)
    estimates["ar3"] = run_benchmark("ar3", dataset, first, last, window, config.benchmark_scale, mode)
    if dataset.gft is not None:
        estimates["gft_ar3"] = run_benchmark("gft_ar3", dataset, first, last, window, config.benchmark_scale, mode)
        estimates["gft"] = run_benchmark("gft", dataset, first, last)
    if dataset.panel is not None:
        exo = run_retrospective(dataset, first, last, exo_only_spec(spec), mode, method="exo_only")
        estimates["exo_only"] = exo.to_weekly_series()

    target = dataset.finalized.window(first, last)
    periods = evaluation_periods(config, first, last, dataset.finalized)
    metrics = build_metric_table(estimates, target, periods)

    efficiencies: Dict[str, EfficiencyEstimate] = {}
    if with_bootstrap:
        argo_errors = _errors(estimates[PRIMARY_METHOD], target)
        for name, series in estimates.items():
            if name == PRIMARY_METHOD:
                continue
            efficiencies[name] = stationary_bootstrap_ci(
                argo_errors,
                _errors(series, target),
                mean_block_length=config.bootstrap.mean_block_length,
                replicates=config.bootstrap.replicates,
                level=config.bootstrap.level,
                seed=config.seed,
                threads=config.threads,
            )

    metadata = {
        "version": VERSION,
        "libraries": {"numpy": np.__version__, "scipy": scipy.__version__, "pandas": pd.__version__},
        "config": config.to_metadata(),
        "evaluated": {"first": str(first), "last": str(last), "weeks": len(target)},
        "periods": [{"name": p.name, "start": str(p.start), "end": str(p.end)} for p in periods],
        "methods": list(estimates),
        "panel": None
        if dataset.panel is None
        else {
            "terms": dataset.panel.n_terms,
            "segments": [{"from": str(s.first_week), "source": s.source.value} for s in dataset.panel.provenance],
        },
        "filled_weeks": {
            str(r.week): [str(w) for w in r.filled_weeks] for r in argo.records if r.filled_weeks
        },
    }
    return EvaluationResult(
        first=first,
        last=last,
        target=target,
        estimates=estimates,
        metrics=metrics,
        efficiencies=efficiencies,
        coefficients=coefficient_trajectory(argo),
        penalties=selected_penalties(argo),
        metadata=metadata,
    )


def estimates_frame(result: EvaluationResult) -> pd.DataFrame:
    weeks = result.target.weeks
    frame = pd.DataFrame(
        {
            "year": [w.year for w in weeks],
            "week": [w.week for w in weeks],
            "end_date": [w.end_date.isoformat() for w in weeks],
            "target": result.target.values,
        }
    )
    for name, series in result.estimates.items():
        frame[name] = [series.value_at(w) for w in weeks]
    return frame


def efficiency_frame(efficiencies: Dict[str, EfficiencyEstimate]) -> pd.DataFrame:
    rows = [{"method": name, **estimate.as_dict()} for name, estimate in efficiencies.items()]
    return pd.DataFrame(rows)


@contextmanager
def atomic_output_dir(path: str):
    """
    Yield a scratch directory that is renamed to `path` on success and removed on failure.

    Raises:
        ConfigError: if `path` already exists.
    """
    path = os.path.abspath(path)
    if os.path.exists(path):
        raise ConfigError(f"output directory already exists: {path}")
    parent = os.path.dirname(path)
    os.makedirs(parent, exist_ok=True)
    scratch = tempfile.mkdtemp(prefix=f".{os.path.basename(path)}.", dir=parent)
    try:
        yield scratch
        os.rename(scratch, path)
    except BaseException:
        shutil.rmtree(scratch, ignore_errors=True)
        raise


def write_evaluation(result: EvaluationResult, out_dir: str):
    """estimates.csv, metrics.csv, efficiency.csv, coefficients.csv, penalties.csv, errors/ and run_meta.json."""
    with atomic_output_dir(out_dir) as scratch:
        estimates = estimates_frame(result)
        write_report(estimates, os.path.join(scratch, "estimates.csv"), digits=None)
        write_report(result.metrics.frame, os.path.join(scratch, "metrics.csv"))
        write_report(efficiency_frame(result.efficiencies), os.path.join(scratch, "efficiency.csv"))
        write_report(result.coefficients, os.path.join(scratch, "coefficients.csv"))
        write_report(result.penalties, os.path.join(scratch, "penalties.csv"))
        os.makedirs(os.path.join(scratch, "errors"))
        for name in result.estimates:
            errors = estimates[["year", "week", "end_date"]].copy()
            errors["error"] = estimates[name] - estimates["target"]
            write_report(errors.dropna(), os.path.join(scratch, "errors", f"{name}.csv"), digits=None)
        write_json(result.metadata, os.path.join(scratch, "run_meta.json"))
    logger.info("Wrote evaluation outputs", out=out_dir, methods=list(result.estimates))
