"""Parse raw vehicle-count records and aggregate them into location-by-hour matrices.

The input is a delimited text table with one row per count observation
(location, coordinates, clock hour, vehicle count). Records are summed
per (location, hour bin) into a dense count matrix, which is then
min-max normalized per hour-bin column before factorization.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyInputError,
    MissingColumnError,
    MixedPeriodsError,
)


@dataclass(frozen=True)
class ColumnMapping:
    """Maps the required column roles to header names in the input table.

    Defaults match the Department for Transport (GB) raw-count headers.
    """

    location_id: str = "count_point_id"
    latitude: str = "latitude"
    longitude: str = "longitude"
    hour: str = "hour"
    count: str = "all_motor_vehicles"
    delimiter: str = ","

    def required(self) -> tuple[str, ...]:
        return (self.location_id, self.latitude, self.longitude, self.hour, self.count)


@dataclass(frozen=True)
class HourWindow:
    """Inclusive range of clock-hour bins, default 07:00 through 18:00 starts."""

    start: int = 7
    end: int = 18

    def __post_init__(self) -> None:
        if not (0 <= self.start <= self.end <= 23):
            raise ValueError(f"invalid hour window {self.start}..{self.end}")

    def hours(self) -> list[int]:
        return list(range(self.start, self.end + 1))

    def __contains__(self, hour: int) -> bool:
        return self.start <= hour <= self.end


@dataclass(frozen=True)
class TrafficRecord:
    """One count observation: a location saw `count` vehicles during clock hour `hour`."""

    location_id: str
    latitude: float
    longitude: float
    hour: int
    count: int
    period_label: str


@dataclass
class RejectionSummary:
    """Per-reason tally of input rows that were skipped rather than parsed."""

    total: int = 0
    by_reason: dict[str, int] = field(default_factory=dict)
    samples: list[tuple[int, str]] = field(default_factory=list)

    _MAX_SAMPLES = 10

    def add(self, line_no: int, reason: str) -> None:
        self.total += 1
        self.by_reason[reason] = self.by_reason.get(reason, 0) + 1
        if len(self.samples) < self._MAX_SAMPLES:
            self.samples.append((line_no, reason))

    def describe(self) -> str:
        if self.total == 0:
            return "0 rows rejected"
        parts = ", ".join(f"{reason}: {n}" for reason, n in sorted(self.by_reason.items()))
        return f"{self.total} rows rejected ({parts})"


@dataclass
class ParseResult:
    records: list[TrafficRecord]
    rejections: RejectionSummary


@dataclass
class CountMatrix:
    """Dense nonnegative location-by-hour matrix of summed vehicle counts.

    Rows are sorted by location id, columns by hour-bin start. `locations`
    carries (id, latitude, longitude) per row for geo-tagged exports.
    """

    values: np.ndarray
    locations: list[tuple[str, float, float]]
    hours: list[int]
    period_label: str

    @property
    def row_labels(self) -> list[str]:
        return [loc_id for loc_id, _, _ in self.locations]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def total(self) -> float:
        return float(self.values.sum())


@dataclass
class NormalizedMatrix:
    """Min-max normalized view of a CountMatrix, entries in [0, 1].

    `scaling_params` stores the (min, max) used per column so the
    normalization can be inverted.
    """

    values: np.ndarray
    scaling_params: list[tuple[float, float]]
    source: CountMatrix

    def denormalize(self) -> np.ndarray:
        out = np.empty_like(self.values)
        for j, (lo, hi) in enumerate(self.scaling_params):
            out[:, j] = self.values[:, j] * (hi - lo) + lo
        return out


def parse_records(
    stream: io.TextIOBase | str,
    schema: ColumnMapping | None = None,
    period_label: str = "",
) -> ParseResult:
    """Parse a delimited text table into traffic records.

    Rows with missing fields, non-numeric values, negative counts, hours
    outside 0..23, or out-of-range coordinates are skipped and tallied in
    the returned rejection summary; they never abort the parse.

    Raises MissingColumnError if the header lacks a mapped column and
    EmptyInputError if no data rows are present.
    """
    schema = schema or ColumnMapping()
    if isinstance(stream, str):
        stream = io.StringIO(stream)

    reader = csv.DictReader(stream, delimiter=schema.delimiter)
    header = reader.fieldnames
    if header is None:
        raise EmptyInputError("input has no header row")
    for name in schema.required():
        if name not in header:
            raise MissingColumnError(f"column {name!r} not found in header {header}")

    def as_int(raw: str) -> int:
        # Accept "120" and "120.0" but not a truncatable "120.7".
        v = float(raw)
        if not v.is_integer():
            raise ValueError(raw)
        return int(v)

    records: list[TrafficRecord] = []
    rejections = RejectionSummary()
    n_rows = 0
    for line_no, row in enumerate(reader, start=2):
        n_rows += 1
        try:
            loc = str(row[schema.location_id]).strip()
            lat = float(row[schema.latitude])
            lon = float(row[schema.longitude])
            count = as_int(row[schema.count])
        except (TypeError, ValueError, KeyError):
            rejections.add(line_no, "malformed")
            continue
        if not loc:
            rejections.add(line_no, "malformed")
            continue
        if count < 0:
            rejections.add(line_no, "negative count")
            continue
        try:
            hour = as_int(row[schema.hour])
            if not (0 <= hour <= 23):
                raise ValueError(row[schema.hour])
        except (TypeError, ValueError, KeyError):
            rejections.add(line_no, "unmappable hour")
            continue
        if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
            rejections.add(line_no, "coordinates out of range")
            continue
        records.append(TrafficRecord(loc, lat, lon, hour, count, period_label))

    if n_rows == 0:
        raise EmptyInputError("input has a header but no data rows")
    return ParseResult(records, rejections)


def build_matrix(records: list[TrafficRecord], window: HourWindow | None = None) -> CountMatrix:
    """Sum records into a location-by-hour count matrix over the given window.

    Entry (i, j) is the cumulative count for location i at hour bin j;
    (location, hour) cells with no record are 0. The result is independent
    of the input record order.
    """
    window = window or HourWindow()
    in_window = [r for r in records if r.hour in window]
    if not in_window:
        raise EmptyInputError("no records inside the hour window")

    periods = {r.period_label for r in in_window}
    if len(periods) > 1:
        raise MixedPeriodsError(f"records span multiple periods: {sorted(periods)}")

    # Sorting first makes aggregation and coordinate selection independent
    # of input order.
    in_window.sort(key=lambda r: (r.location_id, r.hour, r.count, r.latitude, r.longitude))

    hours = window.hours()
    col_of = {h: j for j, h in enumerate(hours)}
    locations: list[tuple[str, float, float]] = []
    row_of: dict[str, int] = {}
    for r in in_window:
        if r.location_id not in row_of:
            row_of[r.location_id] = len(locations)
            locations.append((r.location_id, r.latitude, r.longitude))

    values = np.zeros((len(locations), len(hours)))
    for r in in_window:
        values[row_of[r.location_id], col_of[r.hour]] += r.count

    return CountMatrix(values, locations, hours, period_label=periods.pop())


def minmax_normalize(m: CountMatrix) -> NormalizedMatrix:
    """Rescale each hour-bin column of a count matrix into [0, 1].

    Column c maps via (x - min_c) / (max_c - min_c); constant columns map
    to all zeros so no mass is invented.
    """
    if m.values.size == 0:
        raise EmptyInputError("cannot normalize an empty matrix")

    values = np.empty_like(m.values, dtype=float)
    params: list[tuple[float, float]] = []
    for j in range(m.values.shape[1]):
        col = m.values[:, j]
        lo, hi = float(col.min()), float(col.max())
        if hi > lo:
            values[:, j] = (col - lo) / (hi - lo)
        else:
            values[:, j] = 0.0
        params.append((lo, hi))
    return NormalizedMatrix(values, params, source=m)
