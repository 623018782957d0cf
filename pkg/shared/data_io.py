"""
CSV readers and writers for ILI, search panel, revision and GFT files.

All input files are UTF-8 with a header row, '.' as the decimal separator and no
thousands separators. Errors name the file and the 1-based line number.
"""
import json
import math
from datetime import date
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import structlog

from shared.data_model import (
    EpiWeek,
    PanelSource,
    RevisionRecord,
    SearchPanel,
    Unit,
    VintageSeries,
    WeeklySeries,
    week_range,
)
from shared.errors import DataError, DuplicateError, GapError, ParseError, RangeError
from shared.transforms import rescale_correlate

logger = structlog.get_logger()

WEEK_COLUMNS = ("year", "week", "end_date")
ILI_HEADER = WEEK_COLUMNS + ("wili",)
GFT_HEADER = WEEK_COLUMNS + ("gft",)
VINTAGE_HEADER = ("target_year", "target_week", "pub_year", "pub_week", "wili")
# publication weeks may run past the end of the finalized series
CALENDAR_MARGIN = 104


def _read_rows(path: str) -> List[List[str]]:
    try:
        frame = pd.read_csv(
            path, header=None, dtype=str, keep_default_na=False, encoding="utf-8", skip_blank_lines=True
        )
    except FileNotFoundError as e:
        raise ParseError("file not found", path=str(path)) from e
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise ParseError(f"unreadable CSV: {e}", path=str(path)) from e
    return frame.fillna("").values.tolist()


def _check_header(rows: List[List[str]], expected: Sequence[str], path: str, prefix_only: bool = False) -> List[str]:
    if not rows:
        raise ParseError("empty file", line=1, path=path)
    header = [h.strip() for h in rows[0]]
    got = header[: len(expected)] if prefix_only else header
    if got != list(expected):
        raise ParseError(f"expected header {','.join(expected)}, got {','.join(header)}", line=1, path=path)
    return header


def _int(text: str, line: int, path: str, what: str) -> int:
    try:
        return int(text.strip())
    except ValueError as e:
        raise ParseError(f"invalid {what} {text!r}", line=line, path=path) from e


def _float(text: str, line: int, path: str, what: str) -> float:
    try:
        value = float(text.strip())
    except ValueError as e:
        raise ParseError(f"invalid {what} {text!r}", line=line, path=path) from e
    if not math.isfinite(value):
        raise ParseError(f"non-finite {what} {text!r}", line=line, path=path)
    return value


def _week(year: str, week: str, end_date: str, line: int, path: str) -> EpiWeek:
    try:
        end = date.fromisoformat(end_date.strip())
    except ValueError as e:
        raise ParseError(f"invalid end_date {end_date!r}", line=line, path=path) from e
    if end.weekday() != 5:
        raise ParseError(f"end_date {end.isoformat()} is not a Saturday", line=line, path=path)
    try:
        return EpiWeek(_int(year, line, path, "year"), _int(week, line, path, "week"), end)
    except RangeError as e:
        raise ParseError(str(e), line=line, path=path) from e


def _read_weekly(path: str, header: Sequence[str], prefix_only: bool = False):
    """Weeks and the remaining text cells of a file keyed by year,week,end_date."""
    path = str(path)
    rows = _read_rows(path)
    columns = _check_header(rows, header, path, prefix_only)
    weeks: List[EpiWeek] = []
    cells: List[Tuple[int, List[str]]] = []
    for i, row in enumerate(rows[1:]):
        line = i + 2
        if len(row) != len(columns):
            raise ParseError(f"expected {len(columns)} fields, got {len(row)}", line=line, path=path)
        week = _week(row[0], row[1], row[2], line, path)
        if weeks:
            expected = weeks[-1].successor()
            if week.ordinal > expected.ordinal:
                raise GapError(expected, path=path)
            if week.ordinal <= weeks[-1].ordinal:
                raise ParseError(f"week {week} does not follow {weeks[-1]}", line=line, path=path)
            if (week.year, week.week) != (expected.year, expected.week):
                raise ParseError(f"week ending {week.end_date} should be labelled {expected}", line=line, path=path)
        weeks.append(week)
        cells.append((line, row[3:]))
    if not weeks:
        raise ParseError("no data rows", line=2, path=path)
    return columns, weeks, cells


def read_ili_csv(path: str) -> WeeklySeries:
    """Read `year,week,end_date,wili`; wILI is a percentage in (0, 100)."""
    path = str(path)
    _, weeks, cells = _read_weekly(path, ILI_HEADER)
    values = []
    for line, (text,) in cells:
        value = _float(text, line, path, "wili")
        if not 0 < value < 100:
            raise RangeError(f"{path}:{line}: wili {value!r} outside (0, 100)")
        values.append(value)
    return WeeklySeries(weeks[0], values, Unit.PERCENT, "wili")


def read_gft_csv(path: str) -> WeeklySeries:
    """Read `year,week,end_date,gft`; GFT estimates are non-negative percentages."""
    path = str(path)
    _, weeks, cells = _read_weekly(path, GFT_HEADER)
    values = []
    for line, (text,) in cells:
        value = _float(text, line, path, "gft")
        if value < 0:
            raise RangeError(f"{path}:{line}: gft {value!r} is negative")
        values.append(value)
    return WeeklySeries(weeks[0], values, Unit.FREE, "gft")


def read_panel_csv(path: str, source: PanelSource = PanelSource.TRENDS) -> SearchPanel:
    """
    Read `year,week,end_date,<term_1>,...,<term_K>`.

    Trends values must be integers in [0, 100] and scaled values reals in [0, 100].
    Correlate values are standardized reals and are rescaled per column onto
    [0, 100] over the whole file.
    """
    path = str(path)
    source = PanelSource(source)
    columns, weeks, cells = _read_weekly(path, WEEK_COLUMNS, prefix_only=True)
    terms = columns[3:]
    if not terms:
        raise ParseError("panel has no term columns", line=1, path=path)
    seen = set()
    for term in terms:
        if term in seen:
            raise DuplicateError(f"{path}:1: duplicate term {term!r}")
        seen.add(term)

    rows = np.empty((len(weeks), len(terms)))
    for r, (line, texts) in enumerate(cells):
        for c, text in enumerate(texts):
            value = _float(text, line, path, f"value for {terms[c]}")
            if source is not PanelSource.CORRELATE and not 0 <= value <= 100:
                raise RangeError(f"{path}:{line}: {terms[c]} value {value!r} outside [0, 100]")
            if source is PanelSource.TRENDS and not value.is_integer():
                raise RangeError(f"{path}:{line}: {terms[c]} value {value!r} is not an integer")
            rows[r, c] = value

    if source is PanelSource.CORRELATE:
        for c, term in enumerate(terms):
            try:
                rows[:, c] = rescale_correlate(rows[:, c])
            except DataError as e:
                raise DataError(f"{path}: column {term!r}: {e}") from e
    return SearchPanel(weeks[0], tuple(terms), rows, source)


def _calendar(finalized: WeeklySeries) -> Dict[Tuple[int, int], EpiWeek]:
    weeks = week_range(finalized.start, len(finalized) + CALENDAR_MARGIN)
    return {(w.year, w.week): w for w in weeks}


def read_vintage_csv(path: str, finalized: WeeklySeries) -> VintageSeries:
    """
    Read `target_year,target_week,pub_year,pub_week,wili`.

    Week labels are resolved against the finalized series' calendar, which is
    extended past its end so late publications can be placed.
    """
    path = str(path)
    rows = _read_rows(path)
    _check_header(rows, VINTAGE_HEADER, path)
    calendar = _calendar(finalized)
    records = []
    seen = {}
    for i, row in enumerate(rows[1:]):
        line = i + 2
        if len(row) != len(VINTAGE_HEADER):
            raise ParseError(f"expected {len(VINTAGE_HEADER)} fields, got {len(row)}", line=line, path=path)
        target_key = (_int(row[0], line, path, "target_year"), _int(row[1], line, path, "target_week"))
        pub_key = (_int(row[2], line, path, "pub_year"), _int(row[3], line, path, "pub_week"))
        target = calendar.get(target_key)
        published = calendar.get(pub_key)
        if target is None or published is None:
            missing = target_key if target is None else pub_key
            raise ParseError(f"week {missing[0]}-{missing[1]:02d} is outside the ILI calendar", line=line, path=path)
        if published.ordinal < target.ordinal + 1:
            raise DataError(f"{path}:{line}: {target} published at {published} breaks the one-week delay")
        if (target_key, pub_key) in seen:
            raise DuplicateError(
                f"{path}:{line}: duplicate record for {target} published at {published} "
                f"(first on line {seen[(target_key, pub_key)]})"
            )
        seen[(target_key, pub_key)] = line
        value = _float(row[4], line, path, "wili")
        if not 0 < value < 100:
            raise RangeError(f"{path}:{line}: wili {value!r} outside (0, 100)")
        records.append(RevisionRecord(target, published, value))
    return VintageSeries(tuple(records), finalized)


def read_errors_csv(path: str) -> np.ndarray:
    """Read a single `error` column, as written by the evaluate command."""
    path = str(path)
    rows = _read_rows(path)
    if not rows:
        raise ParseError("empty file", line=1, path=path)
    header = [h.strip() for h in rows[0]]
    if "error" not in header:
        raise ParseError("missing 'error' column", line=1, path=path)
    column = header.index("error")
    values = [_float(row[column], i + 2, path, "error") for i, row in enumerate(rows[1:])]
    if not values:
        raise ParseError("no data rows", line=2, path=path)
    return np.asarray(values)


def full_precision(value: float) -> str:
    """Shortest text that reads back as the same double."""
    return repr(float(value))


def _week_cells(week: EpiWeek) -> List[str]:
    return [str(week.year), str(week.week), week.end_date.isoformat()]


def _write_rows(path: str, header: Sequence[str], rows: List[List[str]]):
    frame = pd.DataFrame(rows, columns=list(header))
    frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")


def write_ili_csv(series: WeeklySeries, path: str):
    rows = [_week_cells(w) + [full_precision(v)] for w, v in zip(series.weeks, series.values)]
    _write_rows(path, ILI_HEADER, rows)


def write_gft_csv(series: WeeklySeries, path: str):
    rows = [_week_cells(w) + [full_precision(v)] for w, v in zip(series.weeks, series.values)]
    _write_rows(path, GFT_HEADER, rows)


def write_panel_csv(panel: SearchPanel, path: str):
    rows = [_week_cells(w) + [full_precision(v) for v in row] for w, row in zip(panel.weeks, panel.rows)]
    _write_rows(path, WEEK_COLUMNS + panel.terms, rows)


def write_vintage_csv(vintages: VintageSeries, path: str):
    rows = [
        [
            str(r.target_week.year),
            str(r.target_week.week),
            str(r.publication_week.year),
            str(r.publication_week.week),
            full_precision(r.value),
        ]
        for r in vintages.records
    ]
    _write_rows(path, VINTAGE_HEADER, rows)


def write_report(frame: pd.DataFrame, path: str, digits: Optional[int] = 6):
    """Numeric report tables, rounded to `digits` significant digits, or at full precision when None."""
    float_format = f"%.{digits}g" if digits else None
    frame.to_csv(path, index=False, float_format=float_format, lineterminator="\n", encoding="utf-8")


def write_json(payload: dict, path: str):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
