from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import expit

from shared.errors import DataError, DomainError

ArrayOrFloat = Union[float, np.ndarray]

_SMALLEST = np.nextafter(0.0, 1.0)
_LARGEST = np.nextafter(1.0, 0.0)


@dataclass(frozen=True)
class TransformParams:
    """delta is added to search frequencies before the log; percent values are divided by percent_divisor before the logit."""

    delta: float = 0.5
    percent_divisor: float = 100.0

    def __post_init__(self):
        if not self.delta > 0:
            raise DomainError(f"delta must be positive, got {self.delta}")


def logit(p: ArrayOrFloat) -> ArrayOrFloat:
    p_arr = np.asarray(p, dtype=float)
    if np.any(~(p_arr > 0)) or np.any(~(p_arr < 1)):
        raise DomainError("logit is defined on the open interval (0, 1)")
    result = np.log(p_arr) - np.log1p(-p_arr)
    return float(result) if result.ndim == 0 else result


def inverse_logit(y: ArrayOrFloat) -> ArrayOrFloat:
    # expit evaluates exp(-|y|) on the safe branch, so y = 750 does not overflow;
    # the clip keeps saturated values strictly inside (0, 1)
    result = np.clip(expit(np.asarray(y, dtype=float)), _SMALLEST, _LARGEST)
    return float(result) if np.ndim(result) == 0 else result


def percent_to_logit(values: ArrayOrFloat, params: TransformParams = TransformParams()) -> ArrayOrFloat:
    return logit(np.asarray(values, dtype=float) / params.percent_divisor)


def logit_to_percent(values: ArrayOrFloat, params: TransformParams = TransformParams()) -> ArrayOrFloat:
    return inverse_logit(values) * params.percent_divisor


def log_search(x: ArrayOrFloat, params: TransformParams = TransformParams()) -> ArrayOrFloat:
    x_arr = np.asarray(x, dtype=float)
    if np.any(~(x_arr >= 0)):
        raise DomainError("search frequencies must be non-negative")
    result = np.log(x_arr + params.delta)
    return float(result) if result.ndim == 0 else result


def rescale_correlate(column) -> np.ndarray:
    """
    Map a standardized Correlate column affinely onto [0, 100].

    The column minimum goes to 0 and the maximum to 100, over the whole span given.

    Raises:
        DataError: if the column has fewer than two distinct values.
    """
    values = np.asarray(column, dtype=float)
    lo, hi = np.min(values), np.max(values)
    if not hi > lo:
        raise DataError("cannot rescale a degenerate column (max equals min)")
    scaled = (values - lo) * (100.0 / (hi - lo))
    # pin the endpoints so that a second pass is an exact identity
    scaled[values == lo] = 0.0
    scaled[values == hi] = 100.0
    return scaled
