from dataclasses import dataclass, field
from datetime import date, timedelta
from enum import Enum
from functools import cached_property
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog

from shared.errors import (
    DataError,
    DuplicateError,
    EmptyIntersectionError,
    RangeError,
)

logger = structlog.get_logger()


@dataclass(frozen=True, order=True)
class EpiWeek:
    """
    An MMWR week as carried by the input files.

    Ordering is by (year, week); end_date is the Saturday closing the week.
    """

    year: int
    week: int
    end_date: date = field(compare=False)

    def __post_init__(self):
        if not 1 <= self.week <= 53:
            raise RangeError(f"week {self.week} outside 1..53")

    @property
    def ordinal(self) -> int:
        # End dates are all Saturdays, so this is an exact running week count
        return self.end_date.toordinal() // 7

    def successor(self) -> "EpiWeek":
        end = self.end_date + timedelta(days=7)
        wednesday = end - timedelta(days=3)
        if wednesday.year == self.year:
            return EpiWeek(self.year, self.week + 1, end)
        return EpiWeek(wednesday.year, 1, end)

    def predecessor(self) -> "EpiWeek":
        end = self.end_date - timedelta(days=7)
        wednesday = end - timedelta(days=3)
        if wednesday.year == self.year:
            return EpiWeek(self.year, self.week - 1, end)
        return EpiWeek(wednesday.year, (wednesday.timetuple().tm_yday - 1) // 7 + 1, end)

    def shift(self, weeks: int) -> "EpiWeek":
        current = self
        step = EpiWeek.successor if weeks >= 0 else EpiWeek.predecessor
        for _ in range(abs(weeks)):
            current = step(current)
        return current

    @property
    def label(self) -> str:
        return f"{self.year}-{self.week:02d}"

    def __str__(self) -> str:
        return self.label

    @staticmethod
    def parse_label(text: str) -> Tuple[int, int]:
        """Parse a `YYYY-WW` label into (year, week)."""
        try:
            year_text, week_text = text.strip().split("-")
            return int(year_text), int(week_text)
        except ValueError as e:
            raise DataError(f"malformed week label {text!r}, expected YYYY-WW") from e


def week_range(start: EpiWeek, count: int) -> Tuple[EpiWeek, ...]:
    weeks = []
    current = start
    for _ in range(count):
        weeks.append(current)
        current = current.successor()
    return tuple(weeks)


class Unit(str, Enum):
    PERCENT = "percent"
    PROPORTION = "proportion"
    FREE = "free"


def _frozen(values) -> np.ndarray:
    array = np.array(values, dtype=float, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class WeeklySeries:
    """
    Consecutive weekly values starting at `start`.

    Weeks with no data inside the span are held as NaN; they are only produced by
    as-of views and never by the readers.
    """

    start: EpiWeek
    values: np.ndarray
    unit: Unit = Unit.FREE
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        if self.values.ndim != 1:
            raise DataError("weekly series values must be one-dimensional")
        present = self.values[~np.isnan(self.values)]
        if self.unit is Unit.PROPORTION and np.any((present <= 0) | (present >= 1)):
            raise RangeError(f"proportion series {self.name!r} has values outside (0, 1)")
        if self.unit is Unit.PERCENT and np.any((present <= 0) | (present >= 100)):
            raise RangeError(f"percent series {self.name!r} has values outside (0, 100)")

    def __len__(self) -> int:
        return self.values.shape[0]

    @cached_property
    def weeks(self) -> Tuple[EpiWeek, ...]:
        return week_range(self.start, len(self))

    @property
    def end(self) -> EpiWeek:
        return self.weeks[-1]

    def index_of(self, week: EpiWeek) -> Optional[int]:
        offset = week.ordinal - self.start.ordinal
        if 0 <= offset < len(self):
            return offset
        return None

    def value_at(self, week: EpiWeek) -> float:
        index = self.index_of(week)
        if index is None:
            return float("nan")
        return float(self.values[index])

    def slice_ordinals(self, first: int, last: int) -> "WeeklySeries":
        lo = max(first - self.start.ordinal, 0)
        hi = min(last - self.start.ordinal, len(self) - 1)
        if hi < lo:
            return WeeklySeries(self.start.shift(lo), np.empty(0), self.unit, self.name)
        return WeeklySeries(self.weeks[lo], self.values[lo:hi + 1], self.unit, self.name)

    def window(self, first: EpiWeek, last: EpiWeek) -> "WeeklySeries":
        return self.slice_ordinals(first.ordinal, last.ordinal)

    def before(self, week: EpiWeek) -> "WeeklySeries":
        """Everything strictly earlier than `week`."""
        return self.slice_ordinals(self.start.ordinal, week.ordinal - 1)

    def with_values(self, values, unit: Optional[Unit] = None) -> "WeeklySeries":
        return WeeklySeries(self.start, values, unit or self.unit, self.name)

    def find_week(self, year: int, week: int) -> Optional[EpiWeek]:
        for candidate in self.weeks:
            if candidate.year == year and candidate.week == week:
                return candidate
        return None


class PanelSource(str, Enum):
    CORRELATE = "correlate"
    TRENDS = "trends"
    SCALED = "scaled"


@dataclass(frozen=True)
class PanelSegment:
    first_week: EpiWeek
    source: PanelSource


@dataclass(frozen=True)
class SearchPanel:
    """
    Weekly search frequencies for K terms.

    `provenance` lists where each data source begins; a single-source panel has one
    segment starting at `start`.
    """

    start: EpiWeek
    terms: Tuple[str, ...]
    rows: np.ndarray
    source: PanelSource
    provenance: Tuple[PanelSegment, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        rows = _frozen(self.rows)
        if rows.ndim == 1 and rows.size == 0:
            rows = _frozen(np.empty((0, len(self.terms))))
        object.__setattr__(self, "rows", rows)
        if not self.provenance:
            object.__setattr__(self, "provenance", (PanelSegment(self.start, self.source),))
        if rows.ndim != 2 or rows.shape[1] != len(self.terms):
            raise DataError(f"panel rows must have exactly {len(self.terms)} entries")
        if len(set(self.terms)) != len(self.terms):
            raise DuplicateError("duplicate term names in search panel")
        if not np.all(np.isfinite(rows)):
            raise RangeError("search panel contains non-finite values")
        for segment, block in self._segment_blocks():
            if segment.source is not PanelSource.CORRELATE and np.any((block < 0) | (block > 100)):
                raise RangeError(f"{segment.source.value} panel values must lie in [0, 100]")

    def _segment_blocks(self):
        bounds = [seg.first_week.ordinal - self.start.ordinal for seg in self.provenance] + [len(self)]
        for segment, lo, hi in zip(self.provenance, bounds[:-1], bounds[1:]):
            yield segment, self.rows[max(lo, 0):max(hi, 0)]

    def __len__(self) -> int:
        return self.rows.shape[0]

    @property
    def n_terms(self) -> int:
        return len(self.terms)

    @cached_property
    def weeks(self) -> Tuple[EpiWeek, ...]:
        return week_range(self.start, len(self))

    @property
    def end(self) -> EpiWeek:
        return self.weeks[-1]

    @property
    def switch_weeks(self) -> Tuple[EpiWeek, ...]:
        return tuple(seg.first_week for seg in self.provenance[1:])

    def index_of(self, week: EpiWeek) -> Optional[int]:
        offset = week.ordinal - self.start.ordinal
        if 0 <= offset < len(self):
            return offset
        return None

    def row_at(self, week: EpiWeek) -> np.ndarray:
        index = self.index_of(week)
        if index is None:
            raise DataError(f"search panel has no row for week {week}")
        return self.rows[index]

    def slice_ordinals(self, first: int, last: int) -> "SearchPanel":
        lo = max(first - self.start.ordinal, 0)
        hi = min(last - self.start.ordinal, len(self) - 1)
        if hi < lo:
            raise EmptyIntersectionError("panel window is empty")
        start = self.weeks[lo]
        segments = []
        for segment in self.provenance:
            if segment.first_week.ordinal <= start.ordinal:
                segments = [PanelSegment(start, segment.source)]
            elif segment.first_week.ordinal <= self.weeks[hi].ordinal:
                segments.append(segment)
        return SearchPanel(start, self.terms, self.rows[lo:hi + 1], segments[-1].source, tuple(segments))

    def window(self, first: EpiWeek, last: EpiWeek) -> "SearchPanel":
        return self.slice_ordinals(first.ordinal, last.ordinal)

    def with_rows(self, rows) -> "SearchPanel":
        return SearchPanel(self.start, self.terms, rows, self.source, self.provenance)

    def concat(self, later: "SearchPanel") -> "SearchPanel":
        """
        Continue this panel with `later` from `later.start` onwards.

        Rows of this panel from `later.start` on are replaced. The switch week is kept
        in the provenance.
        """
        if later.terms != self.terms:
            raise DataError("panels to concatenate must carry the same terms in the same order")
        if later.start.ordinal > self.end.ordinal + 1:
            raise DataError(f"gap between panels: {self.end} then {later.start}")
        if later.start.ordinal <= self.start.ordinal:
            return later
        keep = later.start.ordinal - self.start.ordinal
        rows = np.vstack([self.rows[:keep], later.rows])
        segments = tuple(seg for seg in self.provenance if seg.first_week.ordinal < later.start.ordinal)
        segments = segments + later.provenance
        logger.info("Search panel source switch", week=str(later.start), source=later.source.value)
        return SearchPanel(self.start, self.terms, rows, later.source, segments)


@dataclass(frozen=True)
class RevisionRecord:
    target_week: EpiWeek
    publication_week: EpiWeek
    value: float


@dataclass(frozen=True)
class VintageSeries:
    """
    The revision triangle: value of each target week as published at each later week,
    plus the finalized series.
    """

    records: Tuple[RevisionRecord, ...]
    finalized: WeeklySeries

    def __post_init__(self):
        records = tuple(sorted(self.records, key=lambda r: (r.target_week.ordinal, r.publication_week.ordinal)))
        object.__setattr__(self, "records", records)
        seen = set()
        for record in records:
            if record.publication_week.ordinal < record.target_week.ordinal + 1:
                raise DataError(
                    f"record for {record.target_week} published at {record.publication_week} "
                    "violates the one-week reporting delay"
                )
            key = (record.target_week.ordinal, record.publication_week.ordinal)
            if key in seen:
                raise DuplicateError(f"duplicate record for {record.target_week} published at {record.publication_week}")
            seen.add(key)
            if not np.isfinite(record.value):
                raise RangeError(f"non-finite revision value for {record.target_week}")

        object.__setattr__(self, "_targets", np.array([r.target_week.ordinal for r in records], dtype=np.int64))
        object.__setattr__(self, "_published", np.array([r.publication_week.ordinal for r in records], dtype=np.int64))
        object.__setattr__(self, "_values", np.array([r.value for r in records], dtype=float))
        weeks: Dict[int, EpiWeek] = {w.ordinal: w for w in self.finalized.weeks}
        for record in records:
            weeks.setdefault(record.target_week.ordinal, record.target_week)
        object.__setattr__(self, "_weeks", weeks)

    @property
    def has_revisions(self) -> bool:
        return len(self.records) > 0

    def has_records_for(self, week_ordinal: int) -> bool:
        """Whether the archive holds any publication of the week with this ordinal."""
        return bool(np.any(self._targets == week_ordinal))

    def as_of(self, j: EpiWeek) -> WeeklySeries:
        return as_of(self, j)


def as_of(v: VintageSeries, j: EpiWeek) -> WeeklySeries:
    """
    What was knowable at week `j`.

    For each target week up to the week before `j`, take the latest value published at
    or before `j`. Target weeks with no revision record at all fall back to the
    finalized value. Weeks that have records, none of them published yet, are NaN.
    """
    last = j.ordinal - 1
    finalized = v.finalized
    known = [o for o in v._weeks if o <= last]
    if not known:
        return WeeklySeries(finalized.start, np.empty(0), finalized.unit, finalized.name)
    first = min(known)
    values = np.full(last - first + 1, np.nan)

    fin_lo = max(finalized.start.ordinal, first)
    fin_hi = min(finalized.start.ordinal + len(finalized) - 1, last)
    if fin_hi >= fin_lo:
        src = slice(fin_lo - finalized.start.ordinal, fin_hi - finalized.start.ordinal + 1)
        values[fin_lo - first:fin_hi - first + 1] = finalized.values[src]

    in_range = v._targets <= last
    # Any week with records is decided by its records alone
    values[np.unique(v._targets[in_range]) - first] = np.nan
    visible = in_range & (v._published <= j.ordinal)
    targets = v._targets[visible]
    if targets.size:
        # records are sorted by (target, publication); the last row per target wins
        is_last = np.r_[targets[1:] != targets[:-1], True]
        values[targets[is_last] - first] = v._values[visible][is_last]

    present = np.flatnonzero(~np.isnan(values))
    if present.size == 0:
        return WeeklySeries(v._weeks[first], np.empty(0), finalized.unit, finalized.name)
    lo, hi = present[0], present[-1]
    start = v._weeks.get(first + lo) or v._weeks[first].shift(int(lo))
    return WeeklySeries(start, values[lo:hi + 1], finalized.unit, finalized.name)


Aligned = Union[WeeklySeries, SearchPanel]


def align(*items: Aligned) -> Tuple[Aligned, ...]:
    """
    Restrict series and panels to their common weeks.

    Raises:
        EmptyIntersectionError: if the inputs share no week.
    """
    if not items:
        return ()
    for item in items:
        if len(item) == 0:
            raise EmptyIntersectionError("cannot align an empty series")
    first = max(item.start.ordinal for item in items)
    last = min(item.start.ordinal + len(item) - 1 for item in items)
    if first > last:
        raise EmptyIntersectionError("inputs share no common week")
    return tuple(item.slice_ordinals(first, last) for item in items)
