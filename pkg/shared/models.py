"""
Weekly ARGO nowcasts: build the training window, select penalties, fit, predict.

Each target week t is handled independently and only sees data published before t
(or the finalized series, when running in finalized mode) plus search data up to
and including t.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import date
from enum import Enum
from typing import Optional, Tuple

import numpy as np
import pandas as pd
import structlog

from shared.cross_validation import CvTable, GridConfig, cross_validate
from shared.data_model import EpiWeek, SearchPanel, Unit, VintageSeries, WeeklySeries, as_of
from shared.errors import ConfigError, DataError, DimensionMismatchError, InsufficientDataError
from shared.solver import DesignMatrix, FitResult, Group, Regime, fit
from shared.transforms import TransformParams, inverse_logit, log_search, percent_to_logit

logger = structlog.get_logger()


class VintageMode(str, Enum):
    FINALIZED = "finalized"
    AS_PUBLISHED = "as-published"


@dataclass(frozen=True)
class ModelSpec:
    n_lags: int = 52
    window: int = 104
    regime: Regime = Regime.SAME_L1
    transform: TransformParams = field(default_factory=TransformParams)
    grid: GridConfig = field(default_factory=GridConfig)
    global_seed: int = 0
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "regime", Regime(self.regime))
        if self.n_lags < 0:
            raise ConfigError(f"n_lags must be non-negative, got {self.n_lags}")
        if self.window <= self.n_lags:
            raise ConfigError(f"window ({self.window}) must exceed n_lags ({self.n_lags})")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")

    @property
    def span(self) -> int:
        """Weeks of ILI history a single fit reads."""
        return self.window + self.n_lags


@dataclass(frozen=True)
class NowcastDataset:
    vintages: VintageSeries
    panel: Optional[SearchPanel] = None
    gft: Optional[WeeklySeries] = None

    @property
    def finalized(self) -> WeeklySeries:
        return self.vintages.finalized


@dataclass(frozen=True)
class WeekFit:
    week: EpiWeek
    fit: FitResult
    cv_table: CvTable


@dataclass(frozen=True)
class NowcastRecord:
    week: EpiWeek
    estimate: float
    fit: FitResult
    cv_table: CvTable
    filled_weeks: Tuple[EpiWeek, ...] = ()

    @property
    def percent(self) -> float:
        return 100.0 * self.estimate

    @property
    def active_terms(self) -> Tuple[str, ...]:
        return tuple(
            name
            for name, group, coef in zip(self.fit.column_names, self.fit.groups, self.fit.coefficients)
            if group is Group.EXO and coef != 0
        )


@dataclass(frozen=True)
class NowcastSeries:
    method: str
    records: Tuple[NowcastRecord, ...]
    vintage_mode: VintageMode

    @property
    def weeks(self) -> Tuple[EpiWeek, ...]:
        return tuple(r.week for r in self.records)

    @property
    def estimates(self) -> np.ndarray:
        return np.array([r.estimate for r in self.records])

    def to_weekly_series(self) -> WeeklySeries:
        """Estimates on the percent scale, the unit every benchmark reports in."""
        return WeeklySeries(self.records[0].week, 100.0 * self.estimates, Unit.PERCENT, self.method)


def week_seed(global_seed: int, week: EpiWeek) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(global_seed), week.year, week.week])


def _week_at(series: WeeklySeries, ordinal: int) -> Optional[EpiWeek]:
    index = ordinal - series.start.ordinal
    if 0 <= index < len(series):
        return series.weeks[index]
    return None


def _saturday(ordinal: int) -> str:
    return date.fromordinal(ordinal * 7 + 6).isoformat()


def assemble_history(
    dataset: NowcastDataset, t: EpiWeek, span: int, vintage_mode: VintageMode
) -> Tuple[WeeklySeries, Tuple[EpiWeek, ...]]:
    """
    Percent ILI for the `span` weeks before t, as it was available at t.

    In as-published mode a week missing from the revision archive takes its
    finalized value; those weeks are reported back. A week that is in the archive
    but had no publication by t is never read from the finalized series. An empty
    archive makes both modes read the finalized series.

    Raises:
        InsufficientDataError: if some week had not been published by t, or is in
            neither source.
    """
    finalized = dataset.finalized
    vintages = dataset.vintages
    first = t.ordinal - span
    as_published = VintageMode(vintage_mode) is VintageMode.AS_PUBLISHED and vintages.has_revisions
    source = as_of(vintages, t) if as_published else finalized.before(t)

    values = np.full(span, np.nan)
    if len(source):
        lo = max(first, source.start.ordinal)
        hi = min(t.ordinal - 1, source.start.ordinal + len(source) - 1)
        if hi >= lo:
            values[lo - first:hi - first + 1] = source.values[lo - source.start.ordinal:hi - source.start.ordinal + 1]

    start = _week_at(finalized, first) or t.shift(-span)

    for offset in np.flatnonzero(np.isnan(values)):
        week_ordinal = first + int(offset)
        if as_published and vintages.has_records_for(week_ordinal):
            raise InsufficientDataError(
                f"no value for the week ending {_saturday(week_ordinal)} had been published by {t}"
            )
        fallback = finalized.slice_ordinals(week_ordinal, week_ordinal)
        if len(fallback) == 0 or np.isnan(fallback.values[0]):
            raise InsufficientDataError(
                f"insufficient warm-up for {t}: no ILI value for the week ending {_saturday(week_ordinal)}"
            )
        values[offset] = fallback.values[0]

    history = WeeklySeries(start, values, Unit.PERCENT, finalized.name)
    filled: Tuple[EpiWeek, ...] = ()
    if as_published:
        filled = tuple(w for w in history.weeks if not vintages.has_records_for(w.ordinal))
    if filled:
        logger.info(
            "Filled lag window from finalized series",
            week=str(t),
            filled=[str(w) for w in filled],
        )
    return history, filled


def build_training_design(
    y_history: WeeklySeries, panel: Optional[SearchPanel], t: EpiWeek, spec: ModelSpec
) -> DesignMatrix:
    """
    Training rows for target week t.

    Rows are the `window` weeks s = t-window, ..., t-1. Columns are the logit ILI
    lags y_{s-1}, ..., y_{s-N} followed by the log search terms at s, in panel order.

    Args:
        y_history: Logit ILI covering at least t-window-N .. t-1.
        panel: Raw search panel, or None for a purely autoregressive model.
        t: Target week.
        spec: Lag order, window and transform settings.
    """
    n_lags, window = spec.n_lags, spec.window
    if n_lags == 0 and (panel is None or panel.n_terms == 0):
        raise DataError("a model with no lags needs at least one search term")

    first_needed = t.ordinal - window - n_lags
    offset = first_needed - y_history.start.ordinal
    if offset < 0 or y_history.start.ordinal + len(y_history) - 1 < t.ordinal - 1:
        raise InsufficientDataError(f"ILI history does not cover the {window + n_lags} weeks before {t}")
    y = y_history.values[offset:offset + window + n_lags]
    if np.any(np.isnan(y)):
        raise InsufficientDataError(f"ILI history before {t} has missing weeks")

    rows_at = n_lags + np.arange(window)
    response = y[rows_at]
    lags = y[rows_at[:, None] - np.arange(1, n_lags + 1)[None, :]]
    blocks = [lags]
    groups = [Group.LAG] * n_lags
    names = [f"lag_{j}" for j in range(1, n_lags + 1)]

    if panel is not None and panel.n_terms:
        terms = panel.slice_ordinals(t.ordinal - window, t.ordinal - 1)
        if len(terms) != window:
            raise InsufficientDataError(f"search panel does not cover the {window} weeks before {t}")
        blocks.append(log_search(terms.rows, spec.transform))
        groups += [Group.EXO] * panel.n_terms
        names += list(panel.terms)

    return DesignMatrix(np.hstack(blocks), response, tuple(groups), tuple(names))


def fit_week(
    y_history: WeeklySeries,
    panel: Optional[SearchPanel],
    t: EpiWeek,
    spec: ModelSpec,
    threads: int = 1,
) -> WeekFit:
    """Select penalties by cross-validation on the window before t, then refit on all of it."""
    design = build_training_design(y_history, panel, t, spec)
    penalty, table = cross_validate(design, spec.regime, spec.grid, week_seed(spec.global_seed, t), threads)
    return WeekFit(t, fit(design, penalty), table)


def nowcast(result: FitResult, y_lags, x_t) -> float:
    """
    Point estimate of the ILI proportion at t.

    Args:
        result: Fitted model.
        y_lags: Logit ILI (y_{t-1}, ..., y_{t-N}).
        x_t: Log search values at t, in panel order.

    Raises:
        DimensionMismatchError: if the lengths do not match the fitted model.
    """
    y_lags = np.atleast_1d(np.asarray(y_lags, dtype=float))
    x_t = np.atleast_1d(np.asarray(x_t, dtype=float))
    lag_coefs = result.coefficients_of(Group.LAG)
    exo_coefs = result.coefficients_of(Group.EXO)
    if y_lags.shape != lag_coefs.shape or x_t.shape != exo_coefs.shape:
        raise DimensionMismatchError(
            f"model expects {lag_coefs.size} lags and {exo_coefs.size} terms, "
            f"got {y_lags.size} and {x_t.size}"
        )
    return inverse_logit(result.intercept + float(lag_coefs @ y_lags) + float(exo_coefs @ x_t))


def nowcast_week(
    dataset: NowcastDataset, t: EpiWeek, spec: ModelSpec, vintage_mode: VintageMode, threads: int = 1
) -> NowcastRecord:
    history, filled = assemble_history(dataset, t, spec.span, vintage_mode)
    y_logit = history.with_values(percent_to_logit(history.values, spec.transform), Unit.FREE)
    week_fit = fit_week(y_logit, dataset.panel, t, spec, threads)

    y_lags = y_logit.values[::-1][:spec.n_lags]
    if dataset.panel is not None and dataset.panel.n_terms:
        x_t = log_search(dataset.panel.row_at(t), spec.transform)
    else:
        x_t = np.empty(0)
    estimate = nowcast(week_fit.fit, y_lags, x_t)
    return NowcastRecord(t, estimate, week_fit.fit, week_fit.cv_table, filled)


def target_weeks(dataset: NowcastDataset, first: EpiWeek, last: EpiWeek) -> Tuple[EpiWeek, ...]:
    weeks = dataset.finalized.window(first, last).weeks
    if not weeks:
        raise InsufficientDataError(f"no finalized ILI weeks between {first} and {last}")
    return weeks


def run_retrospective(
    dataset: NowcastDataset,
    first: EpiWeek,
    last: EpiWeek,
    spec: ModelSpec,
    vintage_mode: VintageMode = VintageMode.FINALIZED,
    method: str = "argo",
) -> NowcastSeries:
    """
    Nowcast every finalized week from `first` to `last` inclusive.

    Weeks are fitted concurrently on `spec.threads` workers; results come back in week
    order and do not depend on the thread count.
    """
    weeks = target_weeks(dataset, first, last)
    vintage_mode = VintageMode(vintage_mode)
    logger.info(
        "Starting retrospective run",
        method=method,
        first=str(weeks[0]),
        last=str(weeks[-1]),
        regime=spec.regime.value,
        vintage_mode=vintage_mode.value,
    )

    def one(t: EpiWeek) -> NowcastRecord:
        return nowcast_week(dataset, t, spec, vintage_mode)

    if spec.threads > 1:
        with ThreadPoolExecutor(max_workers=spec.threads) as pool:
            records = list(pool.map(one, weeks))
    else:
        records = [one(t) for t in weeks]
    return NowcastSeries(method, tuple(records), vintage_mode)


def exo_only_spec(spec: ModelSpec) -> ModelSpec:
    return replace(spec, n_lags=0)


def coefficient_trajectory(series: NowcastSeries) -> pd.DataFrame:
    """One row per target week: the fitted intercept and coefficients, plus the active count."""
    rows = []
    for record in series.records:
        row = {
            "year": record.week.year,
            "week": record.week.week,
            "end_date": record.week.end_date.isoformat(),
            "intercept": record.fit.intercept,
        }
        row.update(zip(record.fit.column_names, record.fit.coefficients))
        row["active_count"] = int(np.count_nonzero(record.fit.coefficients))
        rows.append(row)
    return pd.DataFrame(rows)


def selected_penalties(series: NowcastSeries) -> pd.DataFrame:
    rows = []
    for record in series.records:
        row = {"year": record.week.year, "week": record.week.week}
        row.update(record.fit.spec.as_dict())
        row["cv_error"] = record.cv_table.best.mean_error
        rows.append(row)
    return pd.DataFrame(rows)
