"""Canonical domain types shared by every other module.

The central object is :class:`DailySeries`: a dense grid of one slot per
calendar day between ``start`` and ``end`` inclusive. A slot is either a
finite float or ``None`` (missing). Sentinel codes such as ``-9999`` exist
only at file boundaries; in memory a missing day is always ``None``.

Series are immutable. Corrections never touch version 1; they derive a new
version that records its parent and the method used (:class:`CorrectionRecord`).
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from datetime import date, timedelta
from typing import Iterator, Mapping, Optional, Sequence

from .errors import InvalidRange, OutOfRange, ValidationError


# A missing day is stored as None; every other value must be finite.
MISSING = None


class Aggregation(str, enum.Enum):
    SUM = "sum"
    MEAN = "mean"


class Variable(str, enum.Enum):
    PRECIPITATION = "precipitation"
    DISCHARGE = "discharge"
    TEMPERATURE = "temperature"
    EVAPORATION = "evaporation"

    @property
    def unit(self) -> str:
        return _UNITS[self]

    @property
    def aggregation(self) -> Aggregation:
        # Fluxes accumulate; states average.
        if self in (Variable.PRECIPITATION, Variable.EVAPORATION):
            return Aggregation.SUM
        return Aggregation.MEAN


_UNITS = {
    Variable.PRECIPITATION: "mm/day",
    Variable.DISCHARGE: "m3/s",
    Variable.TEMPERATURE: "degC",
    Variable.EVAPORATION: "mm/day",
}


class StationKind(str, enum.Enum):
    GAUGING = "gauging"
    CLIMATE = "climate"
    RAINFALL = "rainfall"


class QualityFlag(str, enum.Enum):
    RAW = "raw"
    FILLED = "filled"
    REMOVED_OUTLIER = "removed-outlier"
    SUSPECT = "suspect"


# Compact per-slot encoding used in stored payloads.
_FLAG_TO_CHAR = {
    QualityFlag.RAW: "r",
    QualityFlag.FILLED: "f",
    QualityFlag.REMOVED_OUTLIER: "o",
    QualityFlag.SUSPECT: "s",
}
_CHAR_TO_FLAG = {c: f for f, c in _FLAG_TO_CHAR.items()}


class CorrectionMethod(str, enum.Enum):
    REGRESSION_1 = "regression-1"
    REGRESSION_MULTI = "regression-multi"
    IDW = "idw"
    NORMAL_RATIO = "normal-ratio"
    TEMPORAL_LINEAR = "temporal-linear"
    EXTERNAL = "external"
    OUTLIER_REMOVAL = "outlier-removal"


@dataclass(frozen=True)
class CorrectionRecord:
    """Provenance of a corrected series version."""

    method: CorrectionMethod
    parameters: Mapping[str, object]
    source_station_ids: tuple[str, ...] = ()
    created_at: str = ""
    created_by: str = ""

    def __post_init__(self):
        if self.method is not CorrectionMethod.EXTERNAL and not self.parameters:
            raise ValidationError(f"method {self.method.value} requires parameters")

    def to_json(self) -> str:
        """Canonical serialization; byte-stable for identical records."""
        return json.dumps(
            {
                "method": self.method.value,
                "parameters": dict(self.parameters),
                "sourceStationIds": list(self.source_station_ids),
                "createdAt": self.created_at,
                "createdBy": self.created_by,
            },
            sort_keys=True,
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, raw: str) -> "CorrectionRecord":
        obj = json.loads(raw)
        return cls(
            method=CorrectionMethod(obj["method"]),
            parameters=obj["parameters"],
            source_station_ids=tuple(obj["sourceStationIds"]),
            created_at=obj["createdAt"],
            created_by=obj["createdBy"],
        )


def day_count(start: date, end: date) -> int:
    """Number of calendar days in [start, end] inclusive."""
    if start > end:
        raise InvalidRange(f"start {start} after end {end}")
    return (end - start).days + 1


def make_daily_grid(start: date, end: date) -> list[date]:
    """Every calendar day in [start, end] inclusive, ascending."""
    n = day_count(start, end)
    return [start + timedelta(days=i) for i in range(n)]


@dataclass(frozen=True)
class DailySeries:
    """Dense daily sequence of values with per-slot quality flags.

    ``values[i]`` belongs to the day ``start + i``. Construction does not
    validate; use :func:`validate_series` to obtain violations as data.
    """

    id: str
    station_id: str
    variable: Variable
    start: date
    end: date
    values: tuple
    flags: tuple
    version: int = 1
    parent_version: Optional[int] = None
    method_record: Optional[CorrectionRecord] = None

    def __len__(self) -> int:
        return len(self.values)

    @property
    def span_days(self) -> int:
        return day_count(self.start, self.end)

    def index_of(self, d: date) -> int:
        """Slot index of day ``d``; raises OutOfRange outside [start, end]."""
        if d < self.start or d > self.end:
            raise OutOfRange(f"{d} outside [{self.start}, {self.end}]")
        return (d - self.start).days

    def date_at(self, index: int) -> date:
        if not 0 <= index < len(self.values):
            raise OutOfRange(f"slot {index} outside [0, {len(self.values)})")
        return self.start + timedelta(days=index)

    def iter_days(self) -> Iterator[tuple[date, object, QualityFlag]]:
        d = self.start
        one = timedelta(days=1)
        for v, f in zip(self.values, self.flags):
            yield d, v, f
            d += one

    def value_on(self, d: date):
        return self.values[self.index_of(d)]


def index_of(series: DailySeries, d: date) -> int:
    return series.index_of(d)


def validate_series(s: DailySeries) -> list[str]:
    """Check every DailySeries invariant; returns violation codes (empty = ok)."""
    problems: list[str] = []
    try:
        expected = day_count(s.start, s.end)
    except InvalidRange:
        return ["inverted-range"]
    if len(s.values) != expected:
        problems.append("length-mismatch")
    if len(s.flags) != len(s.values):
        problems.append("flags-length-mismatch")
    for v, f in zip(s.values, s.flags):
        if v is not None and not (isinstance(v, (int, float)) and math.isfinite(v)):
            problems.append("non-finite-value")
            break
    for v, f in zip(s.values, s.flags):
        if f is QualityFlag.FILLED and v is None:
            problems.append("flag-inconsistency")
            break
        if f is QualityFlag.REMOVED_OUTLIER and v is not None:
            problems.append("flag-inconsistency")
            break
    if s.version < 1:
        problems.append("bad-version")
    if s.version == 1 and (s.parent_version is not None or s.method_record is not None):
        problems.append("version-1-with-lineage")
    if s.version > 1 and (s.parent_version is None or s.method_record is None):
        problems.append("missing-lineage")
    return problems


def derive_version(parent: DailySeries, values: Sequence, flags: Sequence,
                   record: CorrectionRecord) -> DailySeries:
    """New immutable version on top of ``parent``; the parent stays untouched."""
    return replace(
        parent,
        values=tuple(values),
        flags=tuple(flags),
        version=parent.version + 1,
        parent_version=parent.version,
        method_record=record,
    )


def series_to_payload(s: DailySeries) -> bytes:
    """Canonical byte serialization of one series version.

    Stable across processes: sorted keys, compact separators, flags packed
    into a single character string.
    """
    obj = {
        "id": s.id,
        "stationId": s.station_id,
        "variable": s.variable.value,
        "start": s.start.isoformat(),
        "end": s.end.isoformat(),
        "values": list(s.values),
        "flags": "".join(_FLAG_TO_CHAR[f] for f in s.flags),
        "version": s.version,
        "parentVersion": s.parent_version,
        "methodRecord": json.loads(s.method_record.to_json()) if s.method_record else None,
    }
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False).encode()


def series_from_payload(raw: bytes) -> DailySeries:
    obj = json.loads(raw)
    record = None
    if obj.get("methodRecord") is not None:
        m = obj["methodRecord"]
        record = CorrectionRecord(
            method=CorrectionMethod(m["method"]),
            parameters=m["parameters"],
            source_station_ids=tuple(m["sourceStationIds"]),
            created_at=m["createdAt"],
            created_by=m["createdBy"],
        )
    return DailySeries(
        id=obj["id"],
        station_id=obj["stationId"],
        variable=Variable(obj["variable"]),
        start=date.fromisoformat(obj["start"]),
        end=date.fromisoformat(obj["end"]),
        values=tuple(obj["values"]),
        flags=tuple(_CHAR_TO_FLAG[c] for c in obj["flags"]),
        version=obj["version"],
        parent_version=obj.get("parentVersion"),
        method_record=record,
    )


@dataclass(frozen=True)
class Station:
    """A measurement site. ``kind`` is fixed at creation."""

    id: str
    external_id: str
    name: str
    kind: StationKind
    lat: float
    lon: float
    elevation: float
    established: int
    operator: str
    catchment_id: Optional[str] = None

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValidationError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise ValidationError(f"longitude {self.lon} outside [-180, 180]")
        if not -500.0 <= self.elevation <= 9000.0:
            raise ValidationError(f"elevation {self.elevation} outside [-500, 9000]")


@dataclass(frozen=True)
class GapReport:
    """Maximal, sorted, non-overlapping missing intervals of one series."""

    series_id: str
    gaps: tuple  # ((first_missing, last_missing), ...)
    total_missing: int
    fraction_available: float

    def to_json_obj(self) -> dict:
        return {
            "seriesId": self.series_id,
            "gaps": [[a.isoformat(), b.isoformat()] for a, b in self.gaps],
            "totalMissing": self.total_missing,
            "fractionAvailable": self.fraction_available,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "GapReport":
        return cls(
            series_id=obj["seriesId"],
            gaps=tuple((date.fromisoformat(a), date.fromisoformat(b))
                       for a, b in obj["gaps"]),
            total_missing=obj["totalMissing"],
            fraction_available=obj["fractionAvailable"],
        )
