"""
Accuracy metrics, evaluation periods and the method-by-period comparison table.
"""
import re
from dataclasses import dataclass
from datetime import date
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import structlog

from shared.data_model import EpiWeek, WeeklySeries, align
from shared.errors import DataError, DomainError, EmptyIntersectionError, InsufficientDataError

logger = structlog.get_logger()

ERROR_METRICS = ("rmse", "mae", "mape")
CORRELATION_METRICS = ("corr", "corr_increment")
METRICS = ERROR_METRICS + CORRELATION_METRICS
ALL_PERIODS = "all"


@dataclass(frozen=True)
class Period:
    name: str
    start: EpiWeek
    end: EpiWeek

    def __post_init__(self):
        if self.end < self.start:
            raise DataError(f"period {self.name} ends ({self.end}) before it starts ({self.start})")

    def contains(self, week: EpiWeek) -> bool:
        return self.start.ordinal <= week.ordinal <= self.end.ordinal


# (name, start, end) as (year, week, end date)
PERIOD_PRESETS: Tuple[Tuple[str, Tuple[int, int, date], Tuple[int, int, date]], ...] = (
    ("whole", (2009, 13, date(2009, 4, 4)), (2015, 28, date(2015, 7, 18))),
    ("H1N1", (2009, 13, date(2009, 4, 4)), (2009, 52, date(2010, 1, 2))),
    ("2010-11", (2010, 40, date(2010, 10, 9)), (2011, 20, date(2011, 5, 21))),
    ("2011-12", (2011, 40, date(2011, 10, 8)), (2012, 20, date(2012, 5, 19))),
    ("2012-13", (2012, 40, date(2012, 10, 6)), (2013, 20, date(2013, 5, 18))),
    ("2013-14", (2013, 40, date(2013, 10, 5)), (2014, 20, date(2014, 5, 17))),
    ("2014-15", (2014, 40, date(2014, 10, 4)), (2015, 20, date(2015, 5, 23))),
)


def preset_periods() -> List[Period]:
    return [Period(name, EpiWeek(*start), EpiWeek(*end)) for name, start, end in PERIOD_PRESETS]


Values = Union[np.ndarray, Sequence[float], WeeklySeries]


def _pair(estimates: Values, targets: Values, period: Optional[Period], minimum: int) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(estimates, WeeklySeries) and isinstance(targets, WeeklySeries):
        try:
            est, tgt = align(estimates, targets)
        except EmptyIntersectionError as e:
            raise InsufficientDataError("estimates and targets share no week") from e
        e, t = est.values, tgt.values
        if period is not None:
            mask = np.array([period.contains(w) for w in est.weeks], dtype=bool)
            e, t = e[mask], t[mask]
    else:
        if period is not None:
            raise DataError("a period can only be applied to weekly series")
        e = np.asarray(estimates, dtype=float)
        t = np.asarray(targets, dtype=float)
        if e.shape != t.shape:
            raise DataError(f"estimates and targets differ in length: {e.shape} vs {t.shape}")
    if e.shape[0] < minimum:
        where = f" in period {period.name}" if period is not None else ""
        raise InsufficientDataError(f"need at least {minimum} paired weeks{where}, got {e.shape[0]}")
    return e, t


def rmse(estimates: Values, targets: Values, period: Optional[Period] = None) -> float:
    e, t = _pair(estimates, targets, period, 2)
    return float(np.sqrt(np.mean((e - t) ** 2)))


def mae(estimates: Values, targets: Values, period: Optional[Period] = None) -> float:
    e, t = _pair(estimates, targets, period, 2)
    return float(np.mean(np.abs(e - t)))


def mape(estimates: Values, targets: Values, period: Optional[Period] = None) -> float:
    e, t = _pair(estimates, targets, period, 2)
    if np.any(t == 0):
        raise DomainError("MAPE is undefined when a target is zero")
    return float(np.mean(np.abs(e - t) / np.abs(t)))


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    denominator = np.sqrt((a @ a) * (b @ b))
    if denominator == 0:
        raise DomainError("correlation is undefined for a constant series")
    return float((a @ b) / denominator)


def correlation(estimates: Values, targets: Values, period: Optional[Period] = None) -> float:
    e, t = _pair(estimates, targets, period, 3)
    return _pearson(e, t)


def correlation_of_increment(estimates: Values, targets: Values, period: Optional[Period] = None) -> float:
    """Correlation of week-on-week changes within the period."""
    e, t = _pair(estimates, targets, period, 3)
    return _pearson(np.diff(e), np.diff(t))


METRIC_FUNCTIONS = {
    "rmse": rmse,
    "mae": mae,
    "mape": mape,
    "corr": correlation,
    "corr_increment": correlation_of_increment,
}


def relative_efficiency(errors1, errors2) -> float:
    """MSE of errors2 over MSE of errors1; above 1 means the first method is more accurate."""
    e1 = np.asarray(errors1, dtype=float)
    e2 = np.asarray(errors2, dtype=float)
    if e1.shape != e2.shape or e1.size == 0:
        raise DataError("error series must be non-empty and of equal length")
    mse1 = np.mean(e1 ** 2)
    if mse1 == 0:
        raise DomainError("relative efficiency is undefined when the first method is exact")
    return float(np.mean(e2 ** 2) / mse1)


def _format(value: float, digits: int) -> str:
    return "NA" if not np.isfinite(value) else f"{value:.{digits}f}"


def format_entry(value: float, naive_absolute: Optional[float] = None, digits: int = 3) -> str:
    """
    One table cell: "0.608" for a relative or correlation value, "1.000 (0.348)" for the
    naive row where the absolute error is shown in parentheses.
    """
    text = _format(value, digits)
    if naive_absolute is not None:
        text += f" ({_format(naive_absolute, digits)})"
    return text


_ENTRY = re.compile(r"^\s*(NA|-?[0-9.]+(?:[eE][-+]?[0-9]+)?)(?:\s+\((NA|-?[0-9.]+(?:[eE][-+]?[0-9]+)?)\))?\s*$")


def parse_entry(text: str) -> Tuple[float, Optional[float]]:
    match = _ENTRY.match(text)
    if not match:
        raise DataError(f"malformed table entry {text!r}")
    to_float = lambda s: float("nan") if s == "NA" else float(s)
    value = to_float(match.group(1))
    absolute = to_float(match.group(2)) if match.group(2) is not None else None
    return value, absolute


@dataclass(frozen=True)
class MetricTable:
    """
    Long-format comparison table with columns period, metric, method, value,
    absolute and best.

    `value` is relative to the naive method for the error metrics and the raw
    correlation otherwise.
    """

    frame: pd.DataFrame
    methods: Tuple[str, ...]
    periods: Tuple[str, ...]

    def value(self, method: str, period: str, metric: str) -> float:
        row = self._row(method, period, metric)
        return float(row["value"])

    def is_best(self, method: str, period: str, metric: str) -> bool:
        return bool(self._row(method, period, metric)["best"])

    def _row(self, method: str, period: str, metric: str) -> pd.Series:
        f = self.frame
        hit = f[(f["method"] == method) & (f["period"] == period) & (f["metric"] == metric)]
        if hit.empty:
            raise KeyError((method, period, metric))
        return hit.iloc[0]

    def cell(self, method: str, period: str, metric: str, naive_method: str = "naive") -> str:
        row = self._row(method, period, metric)
        absolute = row["absolute"] if method == naive_method and metric in ERROR_METRICS else None
        return format_entry(float(row["value"]), absolute)

    def to_wide(self, naive_method: str = "naive") -> pd.DataFrame:
        """Formatted cells, one row per (metric, method) and one column per period."""
        records = []
        for metric in METRICS:
            for method in self.methods:
                record = {"metric": metric, "method": method}
                for period in self.periods:
                    try:
                        record[period] = self.cell(method, period, metric, naive_method)
                    except KeyError:
                        record[period] = "NA"
                records.append(record)
        return pd.DataFrame(records, columns=["metric", "method", *self.periods])


def build_metric_table(
    methods: Dict[str, WeeklySeries],
    target: WeeklySeries,
    periods: Iterable[Period],
    naive_method: str = "naive",
) -> MetricTable:
    """
    Score every method in every period against the target series.

    Periods with fewer than three scored weeks for the naive method are skipped.

    Raises:
        DataError: if the naive method is missing.
    """
    if naive_method not in methods:
        raise DataError(f"metric table needs the {naive_method!r} method as a baseline")

    rows = []
    period_names = []
    for period in periods:
        try:
            _pair(methods[naive_method], target, period, 3)
        except InsufficientDataError:
            logger.info("Skipping evaluation period without enough weeks", period=period.name)
            continue
        period_names.append(period.name)
        naive_scores = {m: METRIC_FUNCTIONS[m](methods[naive_method], target, period) for m in ERROR_METRICS}
        block = []
        for name, series in methods.items():
            for metric in METRICS:
                absolute = METRIC_FUNCTIONS[metric](series, target, period)
                value = absolute / naive_scores[metric] if metric in ERROR_METRICS else absolute
                block.append({"period": period.name, "metric": metric, "method": name, "value": value, "absolute": absolute})
        frame = pd.DataFrame(block)
        frame["best"] = False
        for metric in METRICS:
            mask = frame["metric"] == metric
            scores = frame.loc[mask, "value"]
            target_score = scores.min() if metric in ERROR_METRICS else scores.max()
            frame.loc[mask, "best"] = scores == target_score
        rows.append(frame)

    if not rows:
        raise InsufficientDataError("no evaluation period has enough weeks")
    frame = pd.concat(rows, ignore_index=True)
    frame["best"] = frame["best"].astype(bool)
    return MetricTable(frame, tuple(methods), tuple(period_names))
