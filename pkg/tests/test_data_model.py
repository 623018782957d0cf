import os
import sys
from datetime import date

import numpy as np
import pytest

# Add the project root to sys.path to enable module imports
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from shared.data_model import (
    EpiWeek,
    PanelSource,
    RevisionRecord,
    SearchPanel,
    Unit,
    VintageSeries,
    WeeklySeries,
    align,
    as_of,
    week_range,
)
from shared.errors import DataError, DuplicateError, EmptyIntersectionError, RangeError
from tests.oracles import START, percent_series


def test_week_53_rolls_into_week_1():
    last_of_2014 = EpiWeek(2014, 53, date(2015, 1, 3))
    first = last_of_2014.successor()
    assert (first.year, first.week, first.end_date) == (2015, 1, date(2015, 1, 10))
    back = first.predecessor()
    assert (back.year, back.week) == (2014, 53)


def test_week_52_rolls_into_week_1_in_short_years():
    week = EpiWeek(2015, 52, date(2016, 1, 2))
    assert (week.successor().year, week.successor().week) == (2016, 1)
    assert week.successor().predecessor() == week


def test_ordinal_counts_weeks():
    assert START.shift(10).ordinal - START.ordinal == 10
    assert START.shift(-3).shift(3) == START


def test_label_round_trip():
    assert START.label == "2009-40"
    assert EpiWeek.parse_label("2009-40") == (2009, 40)
    with pytest.raises(DataError):
        EpiWeek.parse_label("2009/40")


def test_week_number_is_range_checked():
    with pytest.raises(RangeError):
        EpiWeek(2010, 54, date(2010, 1, 2))


def test_percent_series_rejects_out_of_range():
    with pytest.raises(RangeError):
        percent_series([1.0, 100.0])


def test_series_window_and_value_at():
    series = percent_series(np.arange(1.0, 11.0))
    middle = series.window(START.shift(2), START.shift(4))
    assert list(middle.values) == [3.0, 4.0, 5.0]
    assert middle.start == START.shift(2)
    assert np.isnan(series.value_at(START.shift(20)))
    assert len(series.before(START.shift(3))) == 3


def test_series_values_are_read_only():
    series = percent_series([1.0, 2.0])
    with pytest.raises(ValueError):
        series.values[0] = 5.0


def _triangle(finalized_values, records):
    weeks = week_range(START, len(finalized_values))
    finalized = percent_series(finalized_values)
    return weeks, VintageSeries(tuple(RevisionRecord(weeks[i], weeks[j], v) for i, j, v in records), finalized)


def test_as_of_returns_only_visible_revision():
    weeks, triangle = _triangle([1.5] * 5, [(0, 1, 1.0), (0, 2, 1.2)])
    assert as_of(triangle, weeks[1]).value_at(weeks[0]) == 1.0
    assert len(as_of(triangle, weeks[1])) == 1


def test_as_of_latest_visible_revision_wins():
    weeks, triangle = _triangle([1.5] * 5, [(0, 1, 1.0), (0, 2, 1.2)])
    view = as_of(triangle, weeks[2])
    assert view.value_at(weeks[0]) == 1.2
    # week 1 has no records and falls back to the finalized value
    assert view.value_at(weeks[1]) == 1.5


def test_as_of_never_leaks_later_publications():
    weeks, triangle = _triangle([9.9] * 6, [(0, 1, 1.0), (0, 2, 1.1), (0, 5, 9.9)])
    view = as_of(triangle, weeks[4])
    assert view.value_at(weeks[0]) == 1.1
    assert 9.9 not in view.window(weeks[0], weeks[0]).values


def test_as_of_week_with_unpublished_records_is_missing():
    weeks, triangle = _triangle([2.0] * 6, [(3, 5, 2.5)])
    view = as_of(triangle, weeks[4])
    assert np.isnan(view.value_at(weeks[3]))
    assert view.value_at(weeks[2]) == 2.0


def test_as_of_without_records_truncates_finalized():
    finalized = percent_series([1.0, 2.0, 3.0, 4.0])
    view = as_of(VintageSeries((), finalized), START.shift(2))
    assert list(view.values) == [1.0, 2.0]


def test_vintage_rejects_same_week_publication():
    with pytest.raises(DataError):
        VintageSeries((RevisionRecord(START, START, 1.0),), percent_series([1.0]))


def test_vintage_rejects_duplicates():
    record = RevisionRecord(START, START.shift(1), 1.0)
    with pytest.raises(DuplicateError):
        VintageSeries((record, record), percent_series([1.0]))


def _panel(start, count, terms=("a", "b"), source=PanelSource.SCALED):
    rows = np.tile(np.arange(count, dtype=float)[:, None], (1, len(terms)))
    return SearchPanel(start, terms, rows, source)


def test_align_restricts_to_common_weeks():
    series = WeeklySeries(START, np.arange(10.0), Unit.FREE)
    panel = _panel(START.shift(4), 11)
    s, p = align(series, panel)
    assert s.start == p.start == START.shift(4)
    assert s.end == p.end == START.shift(9)


def test_align_identical_ranges_unchanged():
    series = WeeklySeries(START, np.arange(5.0), Unit.FREE)
    (same,) = align(series)
    assert np.array_equal(same.values, series.values)


def test_align_disjoint_ranges_fail():
    a = WeeklySeries(START, np.arange(3.0), Unit.FREE)
    b = WeeklySeries(START.shift(10), np.arange(3.0), Unit.FREE)
    with pytest.raises(EmptyIntersectionError):
        align(a, b)


def test_panel_concat_records_switch_week():
    early = _panel(START, 10, source=PanelSource.CORRELATE)
    late = _panel(START.shift(6), 8, source=PanelSource.TRENDS)
    joined = early.concat(late)
    assert len(joined) == 14
    assert joined.switch_weeks == (START.shift(6),)
    assert joined.provenance[0].source is PanelSource.CORRELATE
    assert joined.source is PanelSource.TRENDS
    window = joined.slice_ordinals(START.shift(7).ordinal, START.shift(9).ordinal)
    assert len(window.provenance) == 1


def test_panel_concat_rejects_term_mismatch():
    with pytest.raises(DataError):
        _panel(START, 5).concat(_panel(START.shift(3), 5, terms=("a", "c")))


def test_panel_rejects_out_of_range_trends():
    with pytest.raises(RangeError):
        SearchPanel(START, ("a",), [[101.0]], PanelSource.TRENDS)
