"""
K-fold selection of penalty weights over a log-spaced grid.

Grid points are enumerated strongest penalty first and each fold walks the grid in
that order with warm starts. The selected point is the first one with the smallest
mean held-out error, so ties go to the stronger penalty.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np
import pandas as pd
import structlog

from shared.errors import ConfigError, InsufficientDataError
from shared.solver import DesignMatrix, PenaltySpec, Regime, fit_path, lambda_max

logger = structlog.get_logger()


@dataclass(frozen=True)
class GridConfig:
    folds: int = 10
    points: int = 30
    points_2d: int = 15
    decades: float = 4.0
    ridge_max: float = 1e3
    shuffle: bool = True

    def __post_init__(self):
        if self.folds < 2:
            raise ConfigError(f"cross-validation needs at least 2 folds, got {self.folds}")
        if self.points < 2 or self.points_2d < 2:
            raise ConfigError("grids need at least 2 points per axis")
        if not self.decades > 0 or not self.ridge_max > 0:
            raise ConfigError("grid decades and ridge_max must be positive")


@dataclass(frozen=True)
class CvPoint:
    spec: PenaltySpec
    index: Tuple[int, ...]
    mean_error: float
    standard_error: float


@dataclass(frozen=True)
class CvTable:
    regime: Regime
    points: Tuple[CvPoint, ...]
    fold_errors: np.ndarray
    best_position: int

    @property
    def best(self) -> CvPoint:
        return self.points[self.best_position]

    @property
    def threshold(self) -> float:
        return self.best.mean_error + self.best.standard_error

    def one_se_flags(self) -> np.ndarray:
        return np.array([p.mean_error <= self.threshold for p in self.points], dtype=bool)

    def within_one_se(self, predicate: Callable[[PenaltySpec], bool]) -> bool:
        """Whether some grid point satisfying `predicate` is within one standard error of the best."""
        errors = [p.mean_error for p in self.points if predicate(p.spec)]
        return bool(errors) and min(errors) <= self.threshold

    def to_frame(self) -> pd.DataFrame:
        flags = self.one_se_flags()
        rows = []
        for position, point in enumerate(self.points):
            row = point.spec.as_dict()
            row.update(
                position=position,
                mean_error=point.mean_error,
                standard_error=point.standard_error,
                selected=position == self.best_position,
                within_one_se=bool(flags[position]),
            )
            rows.append(row)
        return pd.DataFrame(rows)


def _log_axis(top: float, count: int, decades: float) -> np.ndarray:
    return top * 10.0 ** (-decades * np.arange(count) / (count - 1))


def _by_strength(shape: Tuple[int, int]) -> List[Tuple[int, int]]:
    cells = [(i, k) for i in range(shape[0]) for k in range(shape[1])]
    return sorted(cells, key=lambda c: (c[0] + c[1], c[0], c[1]))


def penalty_grid(design: DesignMatrix, regime: Regime, grid: GridConfig = GridConfig()) -> List[Tuple[Tuple[int, ...], PenaltySpec]]:
    """
    Candidate penalty settings in strongest-first order.

    L1 axes start at lambda_max of the full design and L2 axes at `ridge_max`, each
    descending `decades` orders of magnitude. The elastic-net L2 axis ends with 0.
    """
    regime = Regime(regime)
    if regime is Regime.SAME_L1:
        lams = _log_axis(lambda_max(design), grid.points, grid.decades)
        return [((i,), PenaltySpec.same_l1(lam)) for i, lam in enumerate(lams)]
    if regime is Regime.SAME_L2:
        etas = _log_axis(grid.ridge_max, grid.points, grid.decades)
        return [((i,), PenaltySpec.same_l2(eta)) for i, eta in enumerate(etas)]

    m = grid.points_2d
    if regime is Regime.SEPARATE_L1:
        lams = _log_axis(lambda_max(design), m, grid.decades)
        return [((i, k), PenaltySpec.separate_l1(lams[i], lams[k])) for i, k in _by_strength((m, m))]
    if regime is Regime.SEPARATE_L2:
        etas = _log_axis(grid.ridge_max, m, grid.decades)
        return [((i, k), PenaltySpec.separate_l2(etas[i], etas[k])) for i, k in _by_strength((m, m))]
    lams = _log_axis(lambda_max(design), m, grid.decades)
    etas = np.append(_log_axis(grid.ridge_max, m - 1, grid.decades), 0.0)
    return [((i, k), PenaltySpec.elastic_net(lams[i], etas[k])) for i, k in _by_strength((m, m))]


def fold_assignment(n: int, folds: int, rng_seed, shuffle: bool = True) -> np.ndarray:
    order = np.random.default_rng(rng_seed).permutation(n) if shuffle else np.arange(n)
    assignment = np.empty(n, dtype=np.int64)
    assignment[order] = np.arange(n) % folds
    return assignment


def _fold_errors(design: DesignMatrix, specs: Sequence[PenaltySpec], test: np.ndarray) -> np.ndarray:
    train = design.subset(~test)
    held_out = design.subset(test)
    fits = fit_path(train, specs)
    return np.array([np.mean((held_out.response - f.predict(held_out.rows)) ** 2) for f in fits])


def cross_validate(
    design: DesignMatrix,
    regime: Regime,
    grid: GridConfig = GridConfig(),
    rng_seed=0,
    threads: int = 1,
) -> Tuple[PenaltySpec, CvTable]:
    """
    Pick penalty weights by K-fold cross-validation on mean squared prediction error.

    Args:
        design: Training window.
        regime: Which penalty family to search.
        grid: Grid and fold settings.
        rng_seed: Seed (int or SeedSequence) for the fold shuffle.
        threads: Folds are fitted concurrently when greater than 1; the result does not
            depend on it.

    Returns:
        The selected PenaltySpec and the full table of fold errors.

    Raises:
        InsufficientDataError: if there are fewer than two rows per fold.
    """
    if design.n < 2 * grid.folds:
        raise InsufficientDataError(
            f"{grid.folds}-fold cross-validation needs at least {2 * grid.folds} rows, got {design.n}"
        )
    candidates = penalty_grid(design, regime, grid)
    specs = [spec for _, spec in candidates]
    assignment = fold_assignment(design.n, grid.folds, rng_seed, grid.shuffle)
    masks = [assignment == f for f in range(grid.folds)]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_fold = list(pool.map(lambda m: _fold_errors(design, specs, m), masks))
    else:
        per_fold = [_fold_errors(design, specs, m) for m in masks]

    fold_errors = np.column_stack(per_fold)
    means = fold_errors.mean(axis=1)
    errors = fold_errors.std(axis=1, ddof=1) / np.sqrt(grid.folds)

    best_position = 0
    for position in range(1, len(specs)):
        if means[position] < means[best_position]:
            best_position = position

    points = tuple(
        CvPoint(spec, index, float(means[p]), float(errors[p]))
        for p, (index, spec) in enumerate(candidates)
    )
    fold_errors.setflags(write=False)
    table = CvTable(Regime(regime), points, fold_errors, best_position)
    logger.debug(
        "Cross-validation selection",
        mean_error=table.best.mean_error,
        **table.best.spec.as_dict(),
    )
    return table.best.spec, table
