"""
Reference nowcasters the ARGO estimates are compared against.

All benchmark estimates are on the percent scale. The autoregressive ones are fitted
by ordinary least squares on a rolling window, on the percent scale by default.
"""
from enum import Enum
from typing import Optional

import numpy as np
import structlog
from scipy.linalg import solve

from shared.data_model import EpiWeek, Unit, WeeklySeries
from shared.errors import InsufficientDataError, SingularDesignError
from shared.models import (
    ModelSpec,
    NowcastDataset,
    NowcastSeries,
    VintageMode,
    assemble_history,
    exo_only_spec,
    run_retrospective,
    target_weeks,
)
from shared.transforms import logit, logit_to_percent, percent_to_logit

logger = structlog.get_logger()

AR_ORDER = 3
RIDGE_FALLBACK = 1e-8
PERCENT_FLOOR = 1e-6
PERCENT_CEILING = 100.0 - 1e-6


class BenchmarkScale(str, Enum):
    PERCENT = "percent"
    LOGIT = "logit"


def least_squares(X, y) -> np.ndarray:
    """
    Ordinary least squares coefficients.

    Raises:
        SingularDesignError: if X does not have full column rank.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise SingularDesignError(f"design of shape {X.shape} is rank deficient")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return coef


def _fit_linear(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    try:
        return least_squares(X, y)
    except SingularDesignError as e:
        logger.warning("Singular benchmark design, using ridge fallback", ridge=RIDGE_FALLBACK, error=str(e))
        gram = X.T @ X + RIDGE_FALLBACK * np.eye(X.shape[1])
        return solve(gram, X.T @ y, assume_a="pos")


def _clamp(percent: float) -> float:
    return float(np.clip(percent, PERCENT_FLOOR, PERCENT_CEILING))


def _trailing(history: WeeklySeries, t: EpiWeek, count: int) -> np.ndarray:
    values = history.slice_ordinals(t.ordinal - count, t.ordinal - 1).values
    if values.shape[0] != count or np.any(np.isnan(values)):
        raise InsufficientDataError(f"need {count} weeks of ILI history before {t}")
    return values


def benchmark_naive(history: WeeklySeries, t: EpiWeek) -> float:
    """Last week's value carried forward."""
    return float(_trailing(history, t, 1)[0])


def _autoregression(
    y: np.ndarray, window: int, extra: Optional[np.ndarray] = None, extra_now: Optional[float] = None
) -> float:
    """
    y holds window + AR_ORDER consecutive values ending at t-1; `extra` holds an
    optional regressor over the window and `extra_now` its value at t.
    """
    rows_at = AR_ORDER + np.arange(window)
    lags = y[rows_at[:, None] - np.arange(1, AR_ORDER + 1)[None, :]]
    columns = [np.ones(window), lags]
    predictor = [1.0, *y[::-1][:AR_ORDER]]
    if extra is not None:
        columns.append(extra[:, None])
        predictor.append(extra_now)
    coef = _fit_linear(np.column_stack(columns), y[rows_at])
    return float(np.asarray(predictor) @ coef)


def benchmark_ar3(
    history: WeeklySeries, t: EpiWeek, window: int = 104, scale: BenchmarkScale = BenchmarkScale.PERCENT
) -> float:
    """AR(3) with intercept fitted on the `window` weeks before t."""
    y = _trailing(history, t, window + AR_ORDER)
    if BenchmarkScale(scale) is BenchmarkScale.LOGIT:
        return _clamp(logit_to_percent(_autoregression(percent_to_logit(y), window)))
    return _clamp(_autoregression(y, window))


def benchmark_gft_ar3(
    history: WeeklySeries,
    gft: WeeklySeries,
    t: EpiWeek,
    window: int = 104,
    scale: BenchmarkScale = BenchmarkScale.PERCENT,
) -> float:
    """AR(3) plus the Google Flu Trends estimate of the same week as a regressor."""
    y = _trailing(history, t, window + AR_ORDER)
    g = gft.slice_ordinals(t.ordinal - window, t.ordinal).values
    if g.shape[0] != window + 1 or np.any(np.isnan(g)):
        raise InsufficientDataError(f"GFT series does not cover the {window} weeks before {t} and {t} itself")
    if BenchmarkScale(scale) is BenchmarkScale.LOGIT:
        g = logit(g / 100.0)
        return _clamp(logit_to_percent(_autoregression(percent_to_logit(y), window, g[:-1], g[-1])))
    return _clamp(_autoregression(y, window, g[:-1], g[-1]))


def benchmark_exo_only(
    dataset: NowcastDataset,
    first: EpiWeek,
    last: EpiWeek,
    spec: ModelSpec,
    vintage_mode: VintageMode = VintageMode.FINALIZED,
) -> NowcastSeries:
    """ARGO with the lag group removed, searching only on the exogenous terms."""
    return run_retrospective(dataset, first, last, exo_only_spec(spec), vintage_mode, method="exo_only")


def run_benchmark(
    method: str,
    dataset: NowcastDataset,
    first: EpiWeek,
    last: EpiWeek,
    window: int = 104,
    scale: BenchmarkScale = BenchmarkScale.PERCENT,
    vintage_mode: VintageMode = VintageMode.FINALIZED,
) -> WeeklySeries:
    """
    Rolling estimates of one of `naive`, `ar3`, `gft_ar3` or `gft` over first..last.

    History for each week is assembled exactly as for ARGO, so the same vintage rules
    apply. `gft` is the published Flu Trends estimate itself.
    """
    weeks = target_weeks(dataset, first, last)
    if method in ("gft", "gft_ar3") and dataset.gft is None:
        raise InsufficientDataError(f"benchmark {method} needs a GFT series")

    if method == "gft":
        values = [dataset.gft.value_at(t) for t in weeks]
        if np.any(np.isnan(values)):
            raise InsufficientDataError("GFT series does not cover the evaluation weeks")
        return WeeklySeries(weeks[0], values, Unit.FREE, method)

    span = 1 if method == "naive" else window + AR_ORDER
    estimates = []
    for t in weeks:
        history, _ = assemble_history(dataset, t, span, vintage_mode)
        if method == "naive":
            estimates.append(benchmark_naive(history, t))
        elif method == "ar3":
            estimates.append(benchmark_ar3(history, t, window, scale))
        elif method == "gft_ar3":
            estimates.append(benchmark_gft_ar3(history, dataset.gft, t, window, scale))
        else:
            raise ValueError(f"unknown benchmark {method!r}")
    return WeeklySeries(weeks[0], estimates, Unit.PERCENT, method)
