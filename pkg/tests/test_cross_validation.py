import os
import sys

import numpy as np
import pytest

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from shared.cross_validation import GridConfig, cross_validate, fold_assignment, penalty_grid
from shared.errors import ConfigError, InsufficientDataError
from shared.solver import DesignMatrix, Group, Regime, lambda_max
from tests.oracles import exhaustive_cv_errors, random_design

SMALL_GRID = GridConfig(folds=5, points=10, points_2d=4)


@pytest.mark.parametrize(
    "kwargs", [dict(folds=1), dict(points=1), dict(points_2d=1), dict(decades=0.0), dict(ridge_max=-1.0)]
)
def test_grid_config_validation(kwargs):
    with pytest.raises(ConfigError):
        GridConfig(**kwargs)


def test_one_dimensional_grids_descend_from_the_top():
    design = random_design(np.random.default_rng(1), 40, 2, 3)
    lasso = penalty_grid(design, Regime.SAME_L1, SMALL_GRID)
    lams = [spec.lambda_lag for _, spec in lasso]
    assert len(lams) == SMALL_GRID.points
    assert lams[0] == pytest.approx(lambda_max(design))
    assert lams[-1] == pytest.approx(lambda_max(design) * 1e-4)
    assert all(a > b for a, b in zip(lams, lams[1:]))
    ridge = penalty_grid(design, Regime.SAME_L2, SMALL_GRID)
    assert ridge[0][1].eta_lag == pytest.approx(SMALL_GRID.ridge_max)


def test_two_dimensional_grids_are_strongest_first():
    design = random_design(np.random.default_rng(1), 40, 2, 3)
    grid = penalty_grid(design, Regime.SEPARATE_L1, SMALL_GRID)
    indices = [index for index, _ in grid]
    assert len(grid) == SMALL_GRID.points_2d ** 2
    assert indices[0] == (0, 0)
    assert indices[-1] == (3, 3)
    assert [sum(i) for i in indices] == sorted(sum(i) for i in indices)
    enet = penalty_grid(design, Regime.SAME_ELASTIC_NET, SMALL_GRID)
    etas = sorted({spec.eta_lag for _, spec in enet}, reverse=True)
    assert etas[-1] == 0.0
    assert len(etas) == SMALL_GRID.points_2d


def test_fold_assignment_is_balanced_and_seeded():
    a = fold_assignment(23, 5, 42)
    assert sorted(np.bincount(a)) == [4, 4, 5, 5, 5]
    assert np.array_equal(a, fold_assignment(23, 5, 42))
    assert not np.array_equal(a, fold_assignment(23, 5, 43))
    assert list(fold_assignment(7, 3, 0, shuffle=False)) == [0, 1, 2, 0, 1, 2, 0]


def test_too_few_rows_for_folds():
    design = random_design(np.random.default_rng(0), 9, 1, 1)
    with pytest.raises(InsufficientDataError):
        cross_validate(design, Regime.SAME_L1, SMALL_GRID, 0)


def test_selection_matches_exhaustive_search():
    rng = np.random.default_rng(21)
    design = random_design(rng, 40, 2, 4, noise=1.0)
    spec, table = cross_validate(design, Regime.SAME_L1, SMALL_GRID, 5)
    specs = [p.spec for p in table.points]
    reference = exhaustive_cv_errors(design, specs, fold_assignment(design.n, SMALL_GRID.folds, 5))
    assert np.allclose([p.mean_error for p in table.points], reference, rtol=1e-6)
    assert abs(int(np.argmin(reference)) - table.best_position) <= 1
    assert spec == table.best.spec


def test_pure_noise_prefers_heavy_shrinkage():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((40, 5))
    design = DesignMatrix(X, rng.standard_normal(40), (Group.LAG,) * 2 + (Group.EXO,) * 3)
    _, table = cross_validate(design, Regime.SAME_L1, SMALL_GRID, 3)
    specs = [p.spec for p in table.points]
    reference = exhaustive_cv_errors(design, specs, fold_assignment(design.n, SMALL_GRID.folds, 3))
    assert abs(int(np.argmin(reference)) - table.best_position) <= 1


def test_noiseless_response_selects_the_weakest_penalty():
    rng = np.random.default_rng(12)
    X = rng.standard_normal((40, 5))
    design = DesignMatrix(X, X @ np.array([1.0, -2.0, 0.5, 0.0, 3.0]), (Group.LAG,) * 2 + (Group.EXO,) * 3)
    _, table = cross_validate(design, Regime.SAME_L1, SMALL_GRID, 0)
    assert table.best_position >= SMALL_GRID.points - 2


def test_ties_go_to_the_stronger_penalty():
    rows = np.tile([[2.0, 5.0]], (20, 1))
    design = DesignMatrix(rows, np.random.default_rng(0).normal(size=20), (Group.LAG, Group.EXO))
    _, table = cross_validate(design, Regime.SAME_L1, SMALL_GRID, 0)
    errors = [p.mean_error for p in table.points]
    assert all(e == errors[0] for e in errors)
    assert table.best_position == 0


def test_cross_validation_is_deterministic_across_threads():
    design = random_design(np.random.default_rng(4), 50, 3, 6)
    spec1, table1 = cross_validate(design, Regime.SEPARATE_L1, SMALL_GRID, 9, threads=1)
    spec2, table2 = cross_validate(design, Regime.SEPARATE_L1, SMALL_GRID, 9, threads=3)
    assert spec1 == spec2
    assert np.array_equal(table1.fold_errors, table2.fold_errors)


def test_cv_table_frame_and_one_se():
    design = random_design(np.random.default_rng(8), 40, 2, 4)
    _, table = cross_validate(design, Regime.SAME_L2, SMALL_GRID, 1)
    frame = table.to_frame()
    assert len(frame) == SMALL_GRID.points
    assert frame["selected"].sum() == 1
    assert frame.loc[frame["selected"], "within_one_se"].all()
    assert table.within_one_se(lambda spec: spec == table.best.spec)
    assert not table.within_one_se(lambda spec: False)
