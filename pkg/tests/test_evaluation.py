import math
import os
import sys

import numpy as np
import pytest

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from shared.data_model import Unit, WeeklySeries
from shared.errors import DataError, DomainError, InsufficientDataError
from shared.evaluation import (
    ALL_PERIODS,
    METRICS,
    Period,
    build_metric_table,
    correlation,
    correlation_of_increment,
    format_entry,
    mae,
    mape,
    parse_entry,
    preset_periods,
    relative_efficiency,
    rmse,
)
from tests.oracles import START, percent_series


def test_perfect_estimates():
    targets = np.array([1.0, 3.0, 2.0, 5.0])
    assert rmse(targets, targets) == 0.0
    assert mae(targets, targets) == 0.0
    assert mape(targets, targets) == 0.0
    assert correlation(targets, targets) == pytest.approx(1.0, abs=1e-15)


def test_constant_offset():
    targets = np.array([1.0, 3.0, 2.0, 5.0])
    assert rmse(targets + 1, targets) == pytest.approx(1.0, abs=1e-15)
    assert mae(targets + 1, targets) == pytest.approx(1.0, abs=1e-15)
    assert correlation(targets + 1, targets) == pytest.approx(1.0, abs=1e-15)


def test_hand_computed_metrics():
    assert rmse([3.0, 3.0], [2.0, 4.0]) == 1.0
    assert mae([3.0, 3.0], [2.0, 4.0]) == 1.0
    assert mape([3.0, 3.0], [2.0, 4.0]) == 0.375


def test_mape_zero_target():
    with pytest.raises(DomainError):
        mape([1.0, 2.0], [0.0, 2.0])


def test_correlation_of_increment():
    targets = np.array([1.0, 2.0, 4.0, 7.0])
    assert correlation_of_increment(targets, targets) == pytest.approx(1.0, abs=1e-15)
    assert correlation_of_increment([0.0, 3.0, 4.0, 7.0], targets) == pytest.approx(0.0, abs=1e-15)
    assert correlation_of_increment(-targets, targets) == pytest.approx(-1.0, abs=1e-15)


def test_metrics_on_weekly_series_respect_periods():
    targets = percent_series(np.arange(1.0, 11.0))
    estimates = percent_series(np.arange(1.0, 11.0) + np.r_[np.zeros(5), np.ones(5)])
    early = Period("early", START, START.shift(4))
    late = Period("late", START.shift(5), START.shift(9))
    assert rmse(estimates, targets, early) == 0.0
    assert rmse(estimates, targets, late) == 1.0
    with pytest.raises(DataError):
        rmse(estimates.values, targets.values, early)


def test_short_period_is_insufficient():
    series = percent_series([1.0, 2.0, 3.0])
    with pytest.raises(InsufficientDataError):
        correlation_of_increment(series, series, Period("p", START, START.shift(1)))


def test_relative_efficiency():
    e = np.array([0.3, -0.2, 0.5])
    assert relative_efficiency(e, e) == 1.0
    assert relative_efficiency([0.1, -0.1], [0.2, -0.2]) == pytest.approx(4.0, rel=1e-15)
    assert relative_efficiency(e, 3.0 * e) == pytest.approx(9.0, rel=1e-14)
    other = np.array([0.1, 0.4, -0.3])
    product = relative_efficiency(e, other) * relative_efficiency(other, e)
    assert product == pytest.approx(1.0, abs=4 * np.finfo(float).eps)
    with pytest.raises(DomainError):
        relative_efficiency([0.0, 0.0], [1.0, 1.0])


def test_format_and_parse_entries():
    assert format_entry(0.608) == "0.608"
    assert format_entry(1.0, 0.348) == "1.000 (0.348)"
    assert parse_entry("0.608") == (0.608, None)
    assert parse_entry("1.000 (0.348)") == (1.0, 0.348)
    value, absolute = parse_entry("NA")
    assert math.isnan(value) and absolute is None
    with pytest.raises(DataError):
        parse_entry("zero point six")


def test_preset_periods():
    periods = {p.name: p for p in preset_periods()}
    assert set(periods) == {"whole", "H1N1", "2010-11", "2011-12", "2012-13", "2013-14", "2014-15"}
    assert periods["2012-13"].start.label == "2012-40"
    assert periods["2012-13"].end.label == "2013-20"
    for period in periods.values():
        assert period.start.end_date.weekday() == 5
        assert period.end.end_date.weekday() == 5


def _methods():
    rng = np.random.default_rng(0)
    target = percent_series(2.0 + np.sin(np.arange(30) / 3.0))
    noise = rng.standard_normal(30)
    good = target.with_values(target.values + 0.01 * noise)
    naive = WeeklySeries(target.start.shift(1), target.values[:-1], Unit.PERCENT, "naive")
    return target, {"naive": naive, "argo": good}


def test_naive_only_table_is_all_ones():
    target, methods = _methods()
    periods = [Period(ALL_PERIODS, START, START.shift(29))]
    table = build_metric_table({"naive": methods["naive"]}, target, periods)
    for metric in ("rmse", "mae", "mape"):
        assert table.value("naive", ALL_PERIODS, metric) == 1.0
    assert table.cell("naive", ALL_PERIODS, "rmse").startswith("1.000 (")


def test_dominant_method_is_best_everywhere():
    target, methods = _methods()
    periods = [Period("first", START, START.shift(14)), Period(ALL_PERIODS, START, START.shift(29))]
    table = build_metric_table(methods, target, periods)
    assert len(table.frame) == len(METRICS) * 2 * 2
    for period in ("first", ALL_PERIODS):
        for metric in METRICS:
            assert table.is_best("argo", period, metric)
            assert not table.is_best("naive", period, metric)
    wide = table.to_wide()
    assert list(wide.columns) == ["metric", "method", "first", ALL_PERIODS]
    assert len(wide) == len(METRICS) * 2


def test_periods_without_enough_weeks_are_skipped():
    target, methods = _methods()
    periods = [Period("tiny", START.shift(1), START.shift(2)), Period(ALL_PERIODS, START, START.shift(29))]
    table = build_metric_table(methods, target, periods)
    assert table.periods == (ALL_PERIODS,)


def test_table_needs_naive_baseline():
    target, methods = _methods()
    with pytest.raises(DataError):
        build_metric_table({"argo": methods["argo"]}, target, [Period(ALL_PERIODS, START, START.shift(29))])


def test_error_metrics_are_symmetric_and_mape_is_not():
    a = np.array([1.0, 2.0, 4.0, 8.0])
    b = np.array([2.0, 2.5, 3.0, 10.0])
    assert rmse(a, b) == rmse(b, a)
    assert mae(a, b) == mae(b, a)
    assert mape(a, b) != pytest.approx(mape(b, a), rel=1e-6)


def test_metrics_need_enough_points():
    with pytest.raises(InsufficientDataError):
        rmse([1.0], [2.0])
    with pytest.raises(InsufficientDataError):
        mae([1.0], [2.0])
    with pytest.raises(InsufficientDataError):
        mape([1.0], [2.0])
    with pytest.raises(InsufficientDataError):
        correlation([1.0, 2.0], [2.0, 5.0])
    assert correlation([1.0, 2.0, 4.0], [2.0, 4.0, 8.0]) == pytest.approx(1.0, abs=1e-15)
