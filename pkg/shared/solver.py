"""
Grouped elastic-net regression by cyclic coordinate descent.

Columns belong to one of two groups, the autoregressive lags and the exogenous
search terms, and each group carries its own L1 and L2 weights. Columns are
standardized inside the training window; the solver minimizes

    (1/2n) ||y_c - Z b||^2 + sum_j lambda_g(j) |b_j| + (eta_g(j) / 2) b_j^2

on the standardized problem and maps the result back to the original column
scale. The intercept is never penalized.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
import structlog

from shared.errors import ConvergenceError, DataError, DomainError

logger = structlog.get_logger()

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 100000
KKT_TOL = 1e-6


class Group(str, Enum):
    LAG = "lag"
    EXO = "exo"


class Regime(str, Enum):
    SAME_L1 = "same-l1"
    SEPARATE_L1 = "sep-l1"
    SAME_L2 = "same-l2"
    SEPARATE_L2 = "sep-l2"
    SAME_ELASTIC_NET = "enet"


def _frozen(values, ndim: int) -> np.ndarray:
    array = np.array(values, dtype=float, copy=True)
    if array.ndim != ndim:
        raise DataError(f"expected a {ndim}-dimensional array, got shape {array.shape}")
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class DesignMatrix:
    rows: np.ndarray
    response: np.ndarray
    groups: Tuple[Group, ...]
    column_names: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "rows", _frozen(self.rows, 2))
        object.__setattr__(self, "response", _frozen(self.response, 1))
        object.__setattr__(self, "groups", tuple(Group(g) for g in self.groups))
        n, p = self.rows.shape
        if n < 1 or p < 1:
            raise DataError(f"design needs at least one row and one column, got {n}x{p}")
        if self.response.shape[0] != n:
            raise DataError("response length does not match the number of rows")
        if len(self.groups) != p:
            raise DataError("every column must be assigned to exactly one group")
        if not self.column_names:
            object.__setattr__(self, "column_names", tuple(f"x{j}" for j in range(p)))
        elif len(self.column_names) != p:
            raise DataError("column_names length does not match the number of columns")

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def p(self) -> int:
        return self.rows.shape[1]

    def group_mask(self, group: Group) -> np.ndarray:
        return np.array([g is group for g in self.groups], dtype=bool)

    def subset(self, row_index) -> "DesignMatrix":
        return DesignMatrix(self.rows[row_index], self.response[row_index], self.groups, self.column_names)

    def select_columns(self, column_index: Sequence[int]) -> "DesignMatrix":
        column_index = list(column_index)
        return DesignMatrix(
            self.rows[:, column_index],
            self.response,
            tuple(self.groups[j] for j in column_index),
            tuple(self.column_names[j] for j in column_index),
        )


@dataclass(frozen=True)
class PenaltySpec:
    """
    One of the five hyper-parameter specifications, with its resolved values.

    lambda_* are L1 weights and eta_* are L2 weights, for the lag group and the
    exogenous group respectively.
    """

    regime: Regime
    lambda_lag: float = 0.0
    lambda_exo: float = 0.0
    eta_lag: float = 0.0
    eta_exo: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "regime", Regime(self.regime))
        values = (self.lambda_lag, self.lambda_exo, self.eta_lag, self.eta_exo)
        if any(not np.isfinite(v) or v < 0 for v in values):
            raise DomainError(f"penalty weights must be finite and non-negative, got {values}")
        regime = self.regime
        if regime in (Regime.SAME_L1, Regime.SEPARATE_L1) and (self.eta_lag or self.eta_exo):
            raise DomainError(f"{regime.value} requires zero L2 weights")
        if regime in (Regime.SAME_L2, Regime.SEPARATE_L2) and (self.lambda_lag or self.lambda_exo):
            raise DomainError(f"{regime.value} requires zero L1 weights")
        if regime in (Regime.SAME_L1, Regime.SAME_ELASTIC_NET) and self.lambda_lag != self.lambda_exo:
            raise DomainError(f"{regime.value} requires equal L1 weights on both groups")
        if regime in (Regime.SAME_L2, Regime.SAME_ELASTIC_NET) and self.eta_lag != self.eta_exo:
            raise DomainError(f"{regime.value} requires equal L2 weights on both groups")

    @classmethod
    def same_l1(cls, lam: float) -> "PenaltySpec":
        return cls(Regime.SAME_L1, lam, lam, 0.0, 0.0)

    @classmethod
    def separate_l1(cls, lam_lag: float, lam_exo: float) -> "PenaltySpec":
        return cls(Regime.SEPARATE_L1, lam_lag, lam_exo, 0.0, 0.0)

    @classmethod
    def same_l2(cls, eta: float) -> "PenaltySpec":
        return cls(Regime.SAME_L2, 0.0, 0.0, eta, eta)

    @classmethod
    def separate_l2(cls, eta_lag: float, eta_exo: float) -> "PenaltySpec":
        return cls(Regime.SEPARATE_L2, 0.0, 0.0, eta_lag, eta_exo)

    @classmethod
    def elastic_net(cls, lam: float, eta: float) -> "PenaltySpec":
        return cls(Regime.SAME_ELASTIC_NET, lam, lam, eta, eta)

    @classmethod
    def unpenalized(cls) -> "PenaltySpec":
        return cls.same_l1(0.0)

    def column_weights(self, groups: Sequence[Group]) -> Tuple[np.ndarray, np.ndarray]:
        lag = np.array([g is Group.LAG for g in groups], dtype=bool)
        l1 = np.where(lag, self.lambda_lag, self.lambda_exo)
        l2 = np.where(lag, self.eta_lag, self.eta_exo)
        return l1, l2

    def as_dict(self) -> dict:
        return {
            "regime": self.regime.value,
            "lambda_lag": self.lambda_lag,
            "lambda_exo": self.lambda_exo,
            "eta_lag": self.eta_lag,
            "eta_exo": self.eta_exo,
        }


@dataclass(frozen=True)
class Standardization:
    center: np.ndarray
    scale: np.ndarray
    constant: np.ndarray
    response_mean: float


@dataclass(frozen=True)
class FitResult:
    intercept: float
    coefficients: np.ndarray
    objective_value: float
    active_set_size: int
    standardization: Standardization
    spec: PenaltySpec
    groups: Tuple[Group, ...]
    column_names: Tuple[str, ...]
    n_iter: int = 0
    standardized_coefficients: np.ndarray = field(default=None, repr=False)

    def coefficients_of(self, group: Group) -> np.ndarray:
        mask = np.array([g is group for g in self.groups], dtype=bool)
        return self.coefficients[mask]

    def predict(self, rows) -> np.ndarray:
        return self.intercept + np.asarray(rows, dtype=float) @ self.coefficients


def standardize(design: DesignMatrix) -> Tuple[np.ndarray, np.ndarray, Standardization]:
    """
    Center and scale columns to unit (population) standard deviation.

    Constant columns are left as zero columns and flagged; they always get a zero
    coefficient.
    """
    X = design.rows
    y = design.response
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DomainError("design matrix and response must be finite")
    center = X.mean(axis=0)
    scale = X.std(axis=0)
    constant = scale <= 1e-12 * np.maximum(np.abs(center), 1.0)
    safe_scale = np.where(constant, 1.0, scale)
    Z = (X - center) / safe_scale
    Z[:, constant] = 0.0
    y_mean = float(y.mean())
    record = Standardization(center, np.where(constant, 0.0, scale), constant, y_mean)
    return np.asfortranarray(Z), y - y_mean, record


def _soft_threshold(value: float, threshold: float) -> float:
    if value > threshold:
        return value - threshold
    if value < -threshold:
        return value + threshold
    return 0.0


def _standardized_objective(Z, yc, b, l1, l2) -> float:
    n = Z.shape[0]
    r = yc - Z @ b
    return float(0.5 * (r @ r) / n + np.sum(l1 * np.abs(b)) + 0.5 * np.sum(l2 * b * b))


def _coordinate_descent(
    Z: np.ndarray,
    yc: np.ndarray,
    l1: np.ndarray,
    l2: np.ndarray,
    usable: np.ndarray,
    start: np.ndarray,
    tol: float,
    max_iter: int,
    check_descent: bool,
) -> Tuple[np.ndarray, int]:
    n = Z.shape[0]
    b = start.copy()
    columns = [Z[:, j] for j in range(Z.shape[1])]
    denominators = 1.0 + l2
    all_columns = np.flatnonzero(usable)
    cycles = 0
    previous = _standardized_objective(Z, yc, b, l1, l2) if check_descent else None

    def sweep(indices, r):
        largest_change = 0.0
        for j in indices:
            z = columns[j]
            old = b[j]
            rho = float(z @ r) / n + old
            new = _soft_threshold(rho, l1[j]) / denominators[j]
            if new != old:
                r -= (new - old) * z
                b[j] = new
                largest_change = max(largest_change, abs(new - old))
        return largest_change

    def audit():
        nonlocal previous
        if not check_descent:
            return
        current = _standardized_objective(Z, yc, b, l1, l2)
        if current > previous + 1e-12 * max(1.0, abs(previous)):
            raise ConvergenceError(f"objective increased from {previous!r} to {current!r} in cycle {cycles}")
        previous = current

    def converged(change: float) -> bool:
        return change <= tol * max(float(np.max(np.abs(b), initial=0.0)), np.finfo(float).tiny)

    while True:
        # fresh residual each full pass keeps round-off from accumulating
        r = yc - Z @ b
        change = sweep(all_columns, r)
        cycles += 1
        audit()
        if converged(change):
            return b, cycles
        while True:
            active = np.flatnonzero((b != 0) & usable)
            change = sweep(active, r)
            cycles += 1
            audit()
            if converged(change):
                break
            if cycles >= max_iter:
                break
        if cycles >= max_iter:
            raise ConvergenceError(f"coordinate descent did not converge within {max_iter} cycles")


def fit_path(
    design: DesignMatrix,
    specs: Sequence[PenaltySpec],
    *,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    warm_start: Optional[np.ndarray] = None,
    check_descent: bool = False,
) -> List[FitResult]:
    """
    Fit a sequence of penalty settings on one design, warm-starting each from the last.

    The design is standardized once. Results are in the order of `specs`.
    """
    Z, yc, record = standardize(design)
    usable = ~record.constant
    b = np.zeros(design.p) if warm_start is None else np.asarray(warm_start, dtype=float).copy()
    b[~usable] = 0.0
    results = []
    for spec in specs:
        l1, l2 = spec.column_weights(design.groups)
        b, cycles = _coordinate_descent(Z, yc, l1, l2, usable, b, tol, max_iter, check_descent)
        results.append(_package(design, spec, record, b.copy(), Z, yc, l1, l2, cycles))
    return results


def fit(
    design: DesignMatrix,
    spec: PenaltySpec,
    *,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    warm_start: Optional[np.ndarray] = None,
    check_descent: bool = False,
) -> FitResult:
    """
    Minimize the penalized least-squares objective for one penalty setting.

    Args:
        design: Training rows, response and column groups.
        spec: Resolved penalty weights.
        tol: Convergence threshold on the largest coefficient change relative to the
            largest coefficient.
        max_iter: Cap on coordinate-descent cycles.
        warm_start: Optional starting point in standardized coordinates.
        check_descent: Evaluate the objective after every cycle and fail if it rises.

    Returns:
        FitResult with coefficients on the original column scale.

    Raises:
        DomainError: if the design or response contains non-finite values.
        ConvergenceError: if the cycle cap is reached.
    """
    return fit_path(
        design, [spec], tol=tol, max_iter=max_iter, warm_start=warm_start, check_descent=check_descent
    )[0]


def _package(design, spec, record, b, Z, yc, l1, l2, cycles) -> FitResult:
    coefficients = np.zeros(design.p)
    usable = ~record.constant
    coefficients[usable] = b[usable] / record.scale[usable]
    intercept = record.response_mean - float(record.center @ coefficients)
    coefficients.setflags(write=False)
    b.setflags(write=False)
    return FitResult(
        intercept=intercept,
        coefficients=coefficients,
        objective_value=_standardized_objective(Z, yc, b, l1, l2),
        active_set_size=int(np.count_nonzero(b)),
        standardization=record,
        spec=spec,
        groups=design.groups,
        column_names=design.column_names,
        n_iter=cycles,
        standardized_coefficients=b,
    )


def objective(design: DesignMatrix, spec: PenaltySpec, intercept: float, coefficients) -> float:
    """Penalized objective at original-scale parameters, penalties on the standardized scale."""
    coefficients = np.asarray(coefficients, dtype=float)
    scale = design.rows.std(axis=0)
    center = design.rows.mean(axis=0)
    constant = scale <= 1e-12 * np.maximum(np.abs(center), 1.0)
    b = np.where(constant, 0.0, coefficients * scale)
    l1, l2 = spec.column_weights(design.groups)
    residual = design.response - intercept - design.rows @ coefficients
    n = design.n
    return float(0.5 * (residual @ residual) / n + np.sum(l1 * np.abs(b)) + 0.5 * np.sum(l2 * b * b))


def lambda_max(design: DesignMatrix, group: Optional[Group] = None) -> float:
    """
    Smallest common L1 weight at which every coefficient (of `group`, or all columns) is zero.
    """
    Z, yc, _ = standardize(design)
    scores = np.abs(Z.T @ yc) / design.n
    if group is not None:
        scores = scores[design.group_mask(group)]
    return float(np.max(scores, initial=0.0))


@dataclass(frozen=True)
class KktReport:
    ok: bool
    max_violation: float
    violating_columns: Tuple[int, ...]


def check_kkt(design: DesignMatrix, result: FitResult, tol: float = KKT_TOL) -> KktReport:
    """
    Verify subgradient optimality of a fit without re-solving.

    Recomputes the standardization from the design, so it does not trust anything
    cached on the result except its coefficients, intercept and penalty.
    """
    Z, yc, record = standardize(design)
    b = np.where(record.constant, 0.0, result.coefficients * record.scale)
    l1, l2 = result.spec.column_weights(design.groups)
    r = yc - Z @ b
    gradient = Z.T @ r / design.n - l2 * b
    slack = tol * max(1.0, float(np.std(design.response)))
    violation = np.zeros(design.p)
    zero = b == 0
    violation[zero] = np.maximum(np.abs(gradient[zero]) - l1[zero] * (1 + tol) - slack, 0.0)
    nonzero = ~zero
    violation[nonzero] = np.maximum(np.abs(gradient[nonzero] - l1[nonzero] * np.sign(b[nonzero])) - slack, 0.0)
    # constant columns carry no information and are pinned at zero
    violation[record.constant] = 0.0
    intercept_gap = abs(result.intercept - (record.response_mean - float(record.center @ result.coefficients)))
    bad = tuple(int(j) for j in np.flatnonzero(violation > 0))
    worst = float(max(np.max(violation, initial=0.0), intercept_gap if intercept_gap > slack else 0.0))
    return KktReport(ok=not bad and intercept_gap <= slack, max_violation=worst, violating_columns=bad)
