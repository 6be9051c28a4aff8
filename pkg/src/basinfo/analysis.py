"""On-demand indicators over daily series.

Everything here is a pure function of immutable series snapshots: simple
statistics, ordinary-least-squares trend, Pearson correlation, availability
comparison, temporal aggregation and gauge-coverage summaries. Missing slots
never contribute to a statistic; an empty sample yields absent results, not
zeros.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import (
    DegenerateInput,
    InsufficientData,
    InsufficientOverlap,
    InvalidRange,
    NoFilledVersion,
    OutOfRange,
)
from .model import (
    Aggregation,
    DailySeries,
    QualityFlag,
    Station,
    Variable,
    day_count,
)

DAYS_PER_YEAR = 365.25


def values_array(s: DailySeries) -> np.ndarray:
    """Series values as float64 with NaN in missing slots."""
    return np.array([np.nan if v is None else v for v in s.values], dtype=np.float64)


def present_mask(s: DailySeries) -> np.ndarray:
    return np.array([v is not None for v in s.values], dtype=bool)


@dataclass(frozen=True)
class SeriesStats:
    sum: Optional[float]
    max: Optional[float]
    mean: Optional[float]
    min: Optional[float]
    present_count: int
    missing_count: int

    def to_json_obj(self) -> dict:
        return {
            "sum": self.sum,
            "max": self.max,
            "mean": self.mean,
            "min": self.min,
            "presentCount": self.present_count,
            "missingCount": self.missing_count,
        }


def _window_slice(s: DailySeries, window: Optional[tuple[date, date]]) -> slice:
    if window is None:
        return slice(0, len(s.values))
    w_start, w_end = window
    if w_start > w_end:
        raise InvalidRange(f"window start {w_start} after end {w_end}")
    if w_start < s.start or w_end > s.end:
        raise OutOfRange(f"window [{w_start}, {w_end}] outside series span")
    return slice(s.index_of(w_start), s.index_of(w_end) + 1)


def basic_stats(s: DailySeries, window: Optional[tuple[date, date]] = None) -> SeriesStats:
    """Sum / max / mean / min over the non-missing slots of the window."""
    sl = _window_slice(s, window)
    chunk = [v for v in s.values[sl] if v is not None]
    total_slots = sl.stop - sl.start
    if not chunk:
        return SeriesStats(None, None, None, None, 0, total_slots)
    total = math.fsum(chunk)
    return SeriesStats(
        sum=total,
        max=max(chunk),
        mean=total / len(chunk),
        min=min(chunk),
        present_count=len(chunk),
        missing_count=total_slots - len(chunk),
    )


@dataclass(frozen=True)
class TrendResult:
    slope_per_year: float
    intercept: float
    slope_per_day: float
    n: int

    def to_json_obj(self) -> dict:
        return {
            "slopePerYear": self.slope_per_year,
            "intercept": self.intercept,
            "slopePerDay": self.slope_per_day,
            "n": self.n,
        }


def linear_trend(s: DailySeries) -> TrendResult:
    """OLS of value against time in days since the series start.

    The yearly slope is the daily slope scaled by the mean Gregorian year
    length (365.25 days).
    """
    vals = values_array(s)
    mask = ~np.isnan(vals)
    n = int(mask.sum())
    if n < 2:
        raise InsufficientData(f"trend needs at least 2 observations, got {n}")
    x = np.nonzero(mask)[0].astype(np.float64)
    y = vals[mask]
    x_mean = x.mean()
    y_mean = y.mean()
    dx = x - x_mean
    var = float(np.dot(dx, dx))
    slope = float(np.dot(dx, y - y_mean)) / var
    intercept = y_mean - slope * x_mean
    return TrendResult(
        slope_per_year=slope * DAYS_PER_YEAR,
        intercept=intercept,
        slope_per_day=slope,
        n=n,
    )


@dataclass(frozen=True)
class CorrelationResult:
    r: float
    n_joint: int

    def to_json_obj(self) -> dict:
        return {"r": self.r, "nJoint": self.n_joint}


def _joint_samples(a: DailySeries, b: DailySeries) -> tuple[np.ndarray, np.ndarray]:
    lo = max(a.start, b.start)
    hi = min(a.end, b.end)
    if lo > hi:
        return np.empty(0), np.empty(0)
    va = values_array(a)[a.index_of(lo):a.index_of(hi) + 1]
    vb = values_array(b)[b.index_of(lo):b.index_of(hi) + 1]
    joint = ~np.isnan(va) & ~np.isnan(vb)
    return va[joint], vb[joint]


def correlate(a: DailySeries, b: DailySeries) -> CorrelationResult:
    """Pearson correlation over the days where both series have data."""
    xa, xb = _joint_samples(a, b)
    n = len(xa)
    if n < 3:
        raise InsufficientOverlap(f"only {n} joint observations, need 3")
    da = xa - xa.mean()
    db = xb - xb.mean()
    var_a = float(np.dot(da, da))
    var_b = float(np.dot(db, db))
    if var_a == 0.0 or var_b == 0.0:
        raise DegenerateInput("zero variance in joint sample")
    r = float(np.dot(da, db)) / math.sqrt(var_a * var_b)
    # Guard against rounding pushing |r| past 1.
    r = max(-1.0, min(1.0, r))
    return CorrelationResult(r=r, n_joint=n)


@dataclass(frozen=True)
class AvailabilitySegment:
    start: date
    end: date


@dataclass(frozen=True)
class SeriesAvailability:
    series_id: str
    fraction_available: float
    gaps: tuple  # (AvailabilitySegment, ...) clipped to the period

    def to_json_obj(self) -> dict:
        return {
            "seriesId": self.series_id,
            "fractionAvailable": self.fraction_available,
            "gaps": [[g.start.isoformat(), g.end.isoformat()] for g in self.gaps],
        }


def availability(series: Sequence[DailySeries], period: tuple[date, date]) -> list[SeriesAvailability]:
    """Per-series availability over a period.

    Days outside a series' span count as missing, so a series with no
    overlap reports fraction 0 and one gap covering the whole period.
    """
    p_start, p_end = period
    if p_start > p_end:
        raise InvalidRange(f"period start {p_start} after end {p_end}")
    if not series:
        raise InvalidRange("at least one series required")
    n = day_count(p_start, p_end)
    results = []
    for s in series:
        present = np.zeros(n, dtype=bool)
        lo = max(p_start, s.start)
        hi = min(p_end, s.end)
        if lo <= hi:
            src = present_mask(s)[s.index_of(lo):s.index_of(hi) + 1]
            offset = (lo - p_start).days
            present[offset:offset + len(src)] = src
        gaps = []
        run_start = None
        for i, ok in enumerate(present):
            if not ok and run_start is None:
                run_start = i
            elif ok and run_start is not None:
                gaps.append(AvailabilitySegment(p_start + timedelta(days=run_start),
                                                p_start + timedelta(days=i - 1)))
                run_start = None
        if run_start is not None:
            gaps.append(AvailabilitySegment(p_start + timedelta(days=run_start),
                                            p_start + timedelta(days=n - 1)))
        results.append(SeriesAvailability(
            series_id=s.id,
            fraction_available=float(present.sum()) / n,
            gaps=tuple(gaps),
        ))
    return results


def overlap_period(series: Sequence[DailySeries], min_fraction: float) -> Optional[tuple[date, date]]:
    """Longest contiguous range where every series stays available enough.

    Candidate ranges live inside the intersection of all spans; a range
    qualifies when each series has ``present >= min_fraction * length`` over
    it. Ties resolve to the earliest start. Returns None when the spans do
    not intersect or nothing qualifies. Worst case is quadratic in the
    intersection length, but starts are pruned to gap boundaries.
    """
    if len(series) < 2:
        raise InsufficientData("overlap needs at least two series")
    if not 0.0 <= min_fraction <= 1.0:
        raise InvalidRange("min fraction must lie in [0, 1]")
    lo = max(s.start for s in series)
    hi = min(s.end for s in series)
    if lo > hi:
        return None
    n = (hi - lo).days + 1
    masks = np.zeros((len(series), n), dtype=bool)
    for k, s in enumerate(series):
        masks[k] = present_mask(s)[s.index_of(lo):s.index_of(hi) + 1]
    prefix = np.cumsum(masks, axis=1, dtype=np.int64)
    lengths = np.arange(1, n + 1, dtype=np.float64)
    need = min_fraction * lengths  # shared rounding with the brute-force predicate
    all_present = masks.all(axis=0)
    # A better range never starts right after a day everyone observed.
    candidates = [a for a in range(n) if a == 0 or not all_present[a - 1]]
    best_len = 0
    best: Optional[tuple[int, int]] = None
    for a in candidates:
        if n - a <= best_len:
            break
        base = prefix[:, a - 1][:, None] if a > 0 else 0
        pres = prefix[:, a:] - base
        feasible = (pres >= need[:n - a]).all(axis=0)
        idx = np.nonzero(feasible)[0]
        if idx.size:
            length = int(idx[-1]) + 1
            if length > best_len:
                best_len = length
                best = (a, a + length - 1)
    if best is None:
        return None
    return (lo + timedelta(days=best[0]), lo + timedelta(days=best[1]))


class AggregationStep(str, enum.Enum):
    MONTHLY = "monthly"
    YEARLY = "yearly"
    HYDRO_YEAR = "hydro-year"


class GapPolicy(str, enum.Enum):
    STRICT = "strict"
    TOLERANT = "tolerant"
    USE_FILLED = "use-filled"


@dataclass(frozen=True)
class AggregationPolicy:
    step: AggregationStep
    gap_policy: GapPolicy = GapPolicy.STRICT
    max_missing_fraction: float = 0.0
    hydro_start_month: int = 4

    def __post_init__(self):
        if not 0.0 <= self.max_missing_fraction <= 1.0:
            raise InvalidRange("max missing fraction must lie in [0, 1]")
        if not 1 <= self.hydro_start_month <= 12:
            raise InvalidRange("hydro start month must lie in 1..12")


@dataclass(frozen=True)
class AggregateRow:
    label: str
    value: Optional[float]
    missing_fraction: float

    def to_json_obj(self) -> dict:
        return {
            "label": self.label,
            "value": self.value,
            "missingFraction": self.missing_fraction,
        }


def _month_periods(start: date, end: date):
    y, m = start.year, start.month
    while (y, m) <= (end.year, end.month):
        first = date(y, m, 1)
        if m == 12:
            nxt = date(y + 1, 1, 1)
        else:
            nxt = date(y, m + 1, 1)
        yield f"{y:04d}-{m:02d}", first, nxt - timedelta(days=1)
        y, m = nxt.year, nxt.month


def _year_periods(start: date, end: date):
    for y in range(start.year, end.year + 1):
        yield f"{y:04d}", date(y, 1, 1), date(y, 12, 31)


def _hydro_periods(start: date, end: date, month: int):
    def hydro_year(d: date) -> int:
        return d.year if d.month >= month else d.year - 1

    if month == 1:
        for y in range(start.year, end.year + 1):
            yield f"{y:04d}", date(y, 1, 1), date(y, 12, 31)
        return
    for y in range(hydro_year(start), hydro_year(end) + 1):
        yield f"{y:04d}", date(y, month, 1), date(y + 1, month, 1) - timedelta(days=1)


def aggregate(s: DailySeries, policy: AggregationPolicy) -> list[AggregateRow]:
    """Aggregate a daily series to monthly, yearly or hydrological-year rows.

    The value uses the variable's semantic (sum for fluxes, mean for states)
    over observed days. Days not covered by the series count as missing.
    Under the strict policy a single missing day blanks the period; the
    tolerant policy blanks it only past its missing-fraction threshold.
    A series for the ``use-filled`` policy must already be the filled
    version; resolution happens in the storage layer.
    """
    if policy.step is AggregationStep.MONTHLY:
        periods = _month_periods(s.start, s.end)
    elif policy.step is AggregationStep.YEARLY:
        periods = _year_periods(s.start, s.end)
    else:
        periods = _hydro_periods(s.start, s.end, policy.hydro_start_month)

    semantic = s.variable.aggregation
    rows = []
    for label, p_start, p_end in periods:
        total = day_count(p_start, p_end)
        lo = max(p_start, s.start)
        hi = min(p_end, s.end)
        chunk = [v for v in s.values[s.index_of(lo):s.index_of(hi) + 1]
                 if v is not None] if lo <= hi else []
        missing = total - len(chunk)
        fraction = missing / total
        if policy.gap_policy is GapPolicy.TOLERANT:
            blank = fraction > policy.max_missing_fraction
        else:
            blank = missing > 0
        value: Optional[float] = None
        if not blank and chunk:
            total_value = math.fsum(chunk)
            value = total_value if semantic is Aggregation.SUM else total_value / len(chunk)
        rows.append(AggregateRow(label=label, value=value, missing_fraction=fraction))
    return rows


def pick_aggregation_source(versions: Sequence[DailySeries],
                            policy: AggregationPolicy) -> DailySeries:
    """Version selection for aggregation: latest filled version under use-filled."""
    if policy.gap_policy is not GapPolicy.USE_FILLED:
        return versions[-1]
    for s in reversed(versions):
        if any(f is QualityFlag.FILLED for f in s.flags):
            return s
    raise NoFilledVersion("series has no version with filled slots")


@dataclass(frozen=True)
class StationSpan:
    station_id: str
    station_name: str
    kind: str
    first_observation: Optional[date]
    last_observation: Optional[date]
    active: bool

    def to_json_obj(self) -> dict:
        return {
            "stationId": self.station_id,
            "stationName": self.station_name,
            "kind": self.kind,
            "firstObservation": self.first_observation.isoformat() if self.first_observation else None,
            "lastObservation": self.last_observation.isoformat() if self.last_observation else None,
            "active": self.active,
        }


@dataclass(frozen=True)
class VariableCoverage:
    variable: Variable
    active_station_count: int
    inactive_station_count: int
    earliest_observation: Optional[date]
    latest_observation: Optional[date]
    stations: tuple  # (StationSpan, ...)

    def to_json_obj(self) -> dict:
        return {
            "variable": self.variable.value,
            "activeStationCount": self.active_station_count,
            "inactiveStationCount": self.inactive_station_count,
            "earliestObservation": self.earliest_observation.isoformat() if self.earliest_observation else None,
            "latestObservation": self.latest_observation.isoformat() if self.latest_observation else None,
            "stations": [sp.to_json_obj() for sp in self.stations],
        }


@dataclass(frozen=True)
class CoverageReport:
    catchment_id: str
    reference_date: date
    variables: Mapping  # Variable -> VariableCoverage

    def to_json_obj(self) -> dict:
        return {
            "catchmentId": self.catchment_id,
            "referenceDate": self.reference_date.isoformat(),
            "variables": {v.value: c.to_json_obj() for v, c in self.variables.items()},
        }


ACTIVE_WINDOW_DAYS = 365


def _observation_span(series: Iterable[DailySeries],
                      window: tuple[date, date]) -> tuple[Optional[date], Optional[date], bool]:
    """First/last raw-observation dates across one station's series, plus
    whether any raw observation falls inside the window."""
    first: Optional[date] = None
    last: Optional[date] = None
    in_window = False
    w_lo, w_hi = window
    for s in series:
        vals = values_array(s)
        raw = np.array([f is QualityFlag.RAW for f in s.flags], dtype=bool)
        obs_mask = ~np.isnan(vals) & raw
        obs = np.nonzero(obs_mask)[0]
        if obs.size == 0:
            continue
        lo = s.date_at(int(obs[0]))
        hi = s.date_at(int(obs[-1]))
        first = lo if first is None or lo < first else first
        last = hi if last is None or hi > last else last
        clip_lo = max(w_lo, s.start)
        clip_hi = min(w_hi, s.end)
        if clip_lo <= clip_hi and obs_mask[s.index_of(clip_lo):s.index_of(clip_hi) + 1].any():
            in_window = True
    return first, last, in_window


def coverage_report(catchment_id: str,
                    stations: Sequence[Station],
                    series_by_station: Mapping,
                    today: date) -> CoverageReport:
    """Gauge-coverage summary for one catchment.

    ``series_by_station`` maps station id to the current series versions of
    that station. A station is active for a variable when it has a raw
    observation within the trailing 365 days of ``today``. Filled values are
    estimates, not observations, so they never make a station active.
    """
    window_start = today - timedelta(days=ACTIVE_WINDOW_DAYS - 1)
    variables: dict[Variable, VariableCoverage] = {}
    for var in Variable:
        spans = []
        earliest: Optional[date] = None
        latest: Optional[date] = None
        active_count = 0
        for st in stations:
            var_series = [s for s in series_by_station.get(st.id, []) if s.variable is var]
            if not var_series:
                continue
            first, last, active = _observation_span(var_series, (window_start, today))
            if active:
                active_count += 1
            if first is not None:
                earliest = first if earliest is None or first < earliest else earliest
            if last is not None:
                latest = last if latest is None or last > latest else latest
            spans.append(StationSpan(
                station_id=st.id,
                station_name=st.name,
                kind=st.kind.value,
                first_observation=first,
                last_observation=last,
                active=active,
            ))
        variables[var] = VariableCoverage(
            variable=var,
            active_station_count=active_count,
            inactive_station_count=len(spans) - active_count,
            earliest_observation=earliest,
            latest_observation=latest,
            stations=tuple(spans),
        )
    return CoverageReport(catchment_id=catchment_id, reference_date=today,
                          variables=variables)
