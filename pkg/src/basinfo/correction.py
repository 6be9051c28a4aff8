"""Outlier QC and gap filling.

Fill computations are pure previews over one pinned base version; applying a
preview derives the next immutable version carrying a provenance record.
Nothing here writes storage, and no method ever changes an observed slot.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from datetime import date
from typing import Mapping, Optional, Sequence

import numpy as np

from .analysis import present_mask, values_array
from .errors import (
    DegenerateInput,
    DuplicateDate,
    InsufficientPairs,
    NoNeighbors,
    NonPrecipitation,
    NoOp,
    OutOfRange,
    OverwriteAttempt,
    StalePreview,
    ValidationError,
    VariableMismatch,
    WeakCorrelation,
    ZeroMean,
)
from .ingest import FormatSpec, parse_rows
from .model import (
    CorrectionMethod,
    CorrectionRecord,
    DailySeries,
    QualityFlag,
    Station,
    Variable,
    derive_version,
)

EARTH_RADIUS_KM = 6371.0

# Hard plausibility limits per variable; fluxes cannot be negative.
PHYSICAL_BOUNDS: dict[Variable, tuple[float, float]] = {
    Variable.PRECIPITATION: (0.0, math.inf),
    Variable.EVAPORATION: (0.0, math.inf),
    Variable.DISCHARGE: (0.0, math.inf),
    Variable.TEMPERATURE: (-40.0, 60.0),
}


def clamp_to_bounds(v: float, variable: Variable) -> float:
    lo, hi = PHYSICAL_BOUNDS[variable]
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


@dataclass(frozen=True)
class OutlierRule:
    """Physical bounds plus a robust spread criterion."""

    physical_min: float
    physical_max: float
    zscore_threshold: float = 3.5

    def __post_init__(self):
        if not self.physical_min < self.physical_max:
            raise ValidationError("physical-min must lie below physical-max")
        if not self.zscore_threshold > 0:
            raise ValidationError("zscore-threshold must be positive")

    @classmethod
    def for_variable(cls, variable: Variable, zscore_threshold: float = 3.5) -> "OutlierRule":
        lo, hi = PHYSICAL_BOUNDS[variable]
        return cls(physical_min=lo, physical_max=hi, zscore_threshold=zscore_threshold)


@dataclass(frozen=True)
class OutlierFlag:
    day: date
    value: float
    reason: str  # "physical-bound" | "z-score"

    def to_json_obj(self) -> dict:
        return {"date": self.day.isoformat(), "value": self.value, "reason": self.reason}


def detect_outliers(s: DailySeries, rule: Optional[OutlierRule] = None) -> list[OutlierFlag]:
    """Slots violating physical bounds or the modified z-score criterion.

    The z-score is 0.6745 * |x - median| / MAD over the present values; a
    zero MAD (at least half the values identical) disables that criterion
    for the whole series, leaving only the bounds check.
    """
    if rule is None:
        rule = OutlierRule.for_variable(s.variable)
    present = [(i, v) for i, v in enumerate(s.values) if v is not None]
    flagged: dict[int, OutlierFlag] = {}
    for i, v in present:
        if v < rule.physical_min or v > rule.physical_max:
            flagged[i] = OutlierFlag(s.date_at(i), v, "physical-bound")
    if present:
        vals = np.array([v for _, v in present], dtype=np.float64)
        med = float(np.median(vals))
        mad = float(np.median(np.abs(vals - med)))
        if mad > 0.0:
            for i, v in present:
                if i in flagged:
                    continue
                score = 0.6745 * abs(v - med) / mad
                if score > rule.zscore_threshold:
                    flagged[i] = OutlierFlag(s.date_at(i), v, "z-score")
    return [flagged[i] for i in sorted(flagged)]


def remove_outliers(s: DailySeries, flags: Sequence[OutlierFlag],
                    created_by: str, created_at: str) -> DailySeries:
    """Derive a version with the flagged slots blanked as removed outliers."""
    if not flags:
        raise NoOp("no outlier flags to remove")
    values = list(s.values)
    qflags = list(s.flags)
    seen: set[int] = set()
    for fl in flags:
        i = s.index_of(fl.day)
        if values[i] is None:
            raise ValidationError(f"no observation on {fl.day} to remove")
        if values[i] != fl.value:
            raise ValidationError(f"value mismatch on {fl.day}: series has {values[i]}")
        if i in seen:
            continue
        seen.add(i)
        values[i] = None
        qflags[i] = QualityFlag.REMOVED_OUTLIER
    record = CorrectionRecord(
        method=CorrectionMethod.OUTLIER_REMOVAL,
        parameters={"removedDates": sorted(fl.day.isoformat() for fl in flags)},
        source_station_ids=(),
        created_at=created_at,
        created_by=created_by,
    )
    return derive_version(s, values, qflags, record)


@dataclass(frozen=True)
class FillPreview:
    """Pure fill computation pinned to one base version.

    ``fills`` holds (slot-index, value) pairs sorted by index; all listed
    slots are missing in the base version. Applying against any other
    version raises StalePreview.
    """

    series_id: str
    base_version: int
    method: CorrectionMethod
    parameters: Mapping[str, object]
    source_station_ids: tuple[str, ...]
    fills: tuple[tuple[int, float], ...]

    def to_json_obj(self, s: DailySeries) -> dict:
        return {
            "seriesId": self.series_id,
            "baseVersion": self.base_version,
            "method": self.method.value,
            "parameters": dict(self.parameters),
            "sourceStationIds": list(self.source_station_ids),
            "fills": [[s.date_at(i).isoformat(), v] for i, v in self.fills],
            "fillCount": len(self.fills),
        }


def apply_preview(current: DailySeries, preview: FillPreview,
                  created_by: str, created_at: str) -> DailySeries:
    """Materialize a preview as the next version of ``current``."""
    if preview.series_id != current.id:
        raise ValidationError("preview belongs to a different series")
    if preview.base_version != current.version:
        raise StalePreview(
            f"preview built on version {preview.base_version}, series is at {current.version}")
    if not preview.fills:
        raise NoOp("preview fills nothing")
    values = list(current.values)
    flags = list(current.flags)
    for i, v in preview.fills:
        if values[i] is not None:
            raise StalePreview(f"slot {i} is no longer missing")
        values[i] = v
        flags[i] = QualityFlag.FILLED
    record = CorrectionRecord(
        method=preview.method,
        parameters=preview.parameters,
        source_station_ids=preview.source_station_ids,
        created_at=created_at,
        created_by=created_by,
    )
    return derive_version(current, values, flags, record)


def _aligned(neighbor: DailySeries, target: DailySeries) -> np.ndarray:
    """Neighbor values re-gridded onto the target's day axis (NaN elsewhere)."""
    out = np.full(len(target), np.nan, dtype=np.float64)
    lo = max(target.start, neighbor.start)
    hi = min(target.end, neighbor.end)
    if lo <= hi:
        src = values_array(neighbor)[neighbor.index_of(lo):neighbor.index_of(hi) + 1]
        dst = target.index_of(lo)
        out[dst:dst + len(src)] = src
    return out


def _check_neighbors(target: DailySeries, neighbors: Sequence[DailySeries]) -> None:
    if not neighbors:
        raise NoNeighbors("at least one neighbor series required")
    for n in neighbors:
        if n.variable is not target.variable:
            raise VariableMismatch(
                f"neighbor {n.id} is {n.variable.value}, target is {target.variable.value}")


def fill_regression(target: DailySeries, neighbors: Sequence[DailySeries],
                    min_pairs: int = 30, min_abs_r: float = 0.7) -> FillPreview:
    """Regress the target on one or more neighbor series.

    One neighbor: classic paired OLS, requiring at least ``min_pairs`` joint
    observations and |r| at least ``min_abs_r``. Several neighbors: OLS with
    intercept over days where the target and every neighbor are present, the
    pair count gating on those joint-complete days. Predictions land only on
    target gaps where all regressors have data, clamped to physical bounds.
    """
    _check_neighbors(target, neighbors)
    ty = values_array(target)
    t_present = ~np.isnan(ty)
    xs = np.vstack([_aligned(n, target) for n in neighbors])
    x_present = ~np.isnan(xs)
    all_x = x_present.all(axis=0)
    joint = t_present & all_x
    n_joint = int(joint.sum())
    if n_joint < min_pairs:
        raise InsufficientPairs(f"{n_joint} joint pairs, need {min_pairs}")

    if len(neighbors) == 1:
        x = xs[0][joint]
        y = ty[joint]
        dx = x - x.mean()
        dy = y - y.mean()
        sxx = float(np.dot(dx, dx))
        syy = float(np.dot(dy, dy))
        if sxx == 0.0 or syy == 0.0:
            raise DegenerateInput("zero variance over the joint days")
        sxy = float(np.dot(dx, dy))
        r = sxy / math.sqrt(sxx * syy)
        if abs(r) < min_abs_r:
            raise WeakCorrelation(f"|r| = {abs(r):.4f} below {min_abs_r}")
        slope = sxy / sxx
        intercept = float(y.mean()) - slope * float(x.mean())
        coeffs = [intercept, slope]
        method = CorrectionMethod.REGRESSION_1
    else:
        design = np.column_stack([np.ones(n_joint)] + [xs[k][joint] for k in range(len(neighbors))])
        y = ty[joint]
        beta, *_ = np.linalg.lstsq(design, y, rcond=None)
        resid = y - design @ beta
        sst = float(np.dot(y - y.mean(), y - y.mean()))
        if sst == 0.0:
            raise DegenerateInput("target constant over the joint days")
        r = math.sqrt(max(0.0, 1.0 - float(np.dot(resid, resid)) / sst))
        coeffs = [float(b) for b in beta]
        method = CorrectionMethod.REGRESSION_MULTI

    fill_at = np.nonzero(~t_present & all_x)[0]
    fills = []
    for i in fill_at:
        pred = coeffs[0]
        for k in range(len(neighbors)):
            pred = pred + coeffs[k + 1] * float(xs[k][i])
        fills.append((int(i), clamp_to_bounds(float(pred), target.variable)))
    return FillPreview(
        series_id=target.id,
        base_version=target.version,
        method=method,
        parameters={
            "coefficients": [float(c) for c in coeffs],
            "r": float(r),
            "n": n_joint,
            "minPairs": min_pairs,
            "minAbsR": min_abs_r,
            "neighborSeriesIds": [n.id for n in neighbors],
        },
        source_station_ids=tuple(dict.fromkeys(n.station_id for n in neighbors)),
        fills=tuple(fills),
    )


def haversine_km(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in kilometers on a 6371 km sphere."""
    p1 = math.radians(lat1)
    p2 = math.radians(lat2)
    dp = math.radians(lat2 - lat1)
    dl = math.radians(lon2 - lon1)
    h = math.sin(dp / 2.0) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def fill_idw(target: DailySeries, target_station: Station,
             neighbors: Sequence[tuple[DailySeries, Station]],
             power: float = 2.0) -> FillPreview:
    """Inverse-distance-weighted fill from neighbor stations.

    Weights are distance^(-power), normalized by the largest weight so tiny
    distances cannot overflow; a co-located neighbor (distance 0) supplies
    its value directly. Gap days where no neighbor has data stay missing.
    """
    _check_neighbors(target, [n for n, _ in neighbors])
    if power <= 0:
        raise ValidationError("power must be positive")
    dists = [haversine_km(target_station.lat, target_station.lon, st.lat, st.lon)
             for _, st in neighbors]
    aligned = [_aligned(n, target) for n, _ in neighbors]
    d_pos = [d for d in dists if d > 0.0]
    d_min = min(d_pos) if d_pos else 0.0
    fills = []
    for i, v in enumerate(target.values):
        if v is not None:
            continue
        here = [(k, float(aligned[k][i])) for k in range(len(neighbors))
                if not math.isnan(aligned[k][i])]
        if not here:
            continue
        direct = [val for k, val in here if dists[k] == 0.0]
        if direct:
            pred = direct[0]
        else:
            weights = [(d_min / dists[k]) ** power for k, _ in here]
            num = math.fsum(w * val for w, (_, val) in zip(weights, here))
            den = math.fsum(weights)
            pred = num / den
        fills.append((i, clamp_to_bounds(pred, target.variable)))
    return FillPreview(
        series_id=target.id,
        base_version=target.version,
        method=CorrectionMethod.IDW,
        parameters={
            "power": power,
            "neighborSeriesIds": [n.id for n, _ in neighbors],
            "distancesKm": {n.id: dists[k] for k, (n, _) in enumerate(neighbors)},
        },
        source_station_ids=tuple(dict.fromkeys(st.id for _, st in neighbors)),
        fills=tuple(fills),
    )


def _window_mean(s: DailySeries, window: Optional[tuple[date, date]]) -> Optional[float]:
    vals = values_array(s)
    if window is not None:
        lo = max(window[0], s.start)
        hi = min(window[1], s.end)
        if lo > hi:
            return None
        vals = vals[s.index_of(lo):s.index_of(hi) + 1]
    vals = vals[~np.isnan(vals)]
    if len(vals) == 0:
        return None
    return float(math.fsum(vals) / len(vals))


def fill_normal_ratio(target: DailySeries, neighbors: Sequence[DailySeries],
                      reference_window: Optional[tuple[date, date]] = None) -> FillPreview:
    """Precipitation fill scaling neighbor values by long-term mean ratios.

    Estimate = (m_t / k) * sum(v_i / m_i) over the k neighbors reporting
    that day, where the means come from the reference window (full span
    when omitted). Requires strictly positive means everywhere.
    """
    if target.variable is not Variable.PRECIPITATION:
        raise NonPrecipitation("normal-ratio fill applies to precipitation only")
    _check_neighbors(target, neighbors)
    m_t = _window_mean(target, reference_window)
    if m_t is None or m_t <= 0.0:
        raise ZeroMean(f"target mean is {m_t}, must be positive")
    means = []
    for n in neighbors:
        m = _window_mean(n, reference_window)
        if m is None or m <= 0.0:
            raise ZeroMean(f"neighbor {n.id} mean is {m}, must be positive")
        means.append(m)
    aligned = [_aligned(n, target) for n in neighbors]
    fills = []
    for i, v in enumerate(target.values):
        if v is not None:
            continue
        ratios = [float(aligned[k][i]) / means[k] for k in range(len(neighbors))
                  if not math.isnan(aligned[k][i])]
        if not ratios:
            continue
        pred = (m_t / len(ratios)) * math.fsum(ratios)
        fills.append((i, clamp_to_bounds(pred, target.variable)))
    return FillPreview(
        series_id=target.id,
        base_version=target.version,
        method=CorrectionMethod.NORMAL_RATIO,
        parameters={
            "referenceWindow": [reference_window[0].isoformat(), reference_window[1].isoformat()]
            if reference_window else None,
            "targetMean": m_t,
            "neighborMeans": {n.id: means[k] for k, n in enumerate(neighbors)},
            "neighborSeriesIds": [n.id for n in neighbors],
        },
        source_station_ids=tuple(dict.fromkeys(n.station_id for n in neighbors)),
        fills=tuple(fills),
    )


def fill_temporal_linear(target: DailySeries, max_gap_days: int = 3) -> FillPreview:
    """Linear interpolation across short interior gaps.

    A gap of length L between observed values a and b gets the progression
    a + (b - a) * (j / (L + 1)) for j = 1..L. Gaps touching either end of
    the series are never extrapolated.
    """
    if max_gap_days < 1:
        raise ValidationError("max-gap-days must be at least 1")
    fills = []
    n = len(target.values)
    i = 0
    while i < n:
        if target.values[i] is not None:
            i += 1
            continue
        j = i
        while j < n and target.values[j] is None:
            j += 1
        gap_len = j - i
        interior = i > 0 and j < n
        if interior and gap_len <= max_gap_days:
            a = float(target.values[i - 1])
            b = float(target.values[j])
            for k in range(gap_len):
                v = a + (b - a) * ((k + 1) / (gap_len + 1))
                fills.append((i + k, clamp_to_bounds(v, target.variable)))
        i = j
    return FillPreview(
        series_id=target.id,
        base_version=target.version,
        method=CorrectionMethod.TEMPORAL_LINEAR,
        parameters={"maxGapDays": max_gap_days},
        source_station_ids=(),
        fills=tuple(fills),
    )


def import_external_fill(target: DailySeries, raw: str, spec: FormatSpec,
                         filename: str = "") -> FillPreview:
    """Fill gaps from an externally produced file in a known text format.

    Every dated value must land on a currently missing slot inside the
    series span; rows carrying a missing code contribute nothing. The
    preview records the file checksum for provenance.
    """
    rows = parse_rows(raw, spec)
    by_index: dict[int, float] = {}
    for d, v, lineno in rows:
        if v is None:
            continue
        if d < target.start or d > target.end:
            raise OutOfRange(f"{d} outside series span [{target.start}, {target.end}]")
        i = target.index_of(d)
        if target.values[i] is not None:
            raise OverwriteAttempt(d)
        lo, hi = PHYSICAL_BOUNDS[target.variable]
        if not lo <= v <= hi:
            raise ValidationError(f"value {v} on {d} outside physical bounds [{lo}, {hi}]")
        if i in by_index:
            if by_index[i] != v:
                raise DuplicateDate(d)
            continue
        by_index[i] = v
    checksum = hashlib.sha256(raw.encode("utf-8")).hexdigest()
    return FillPreview(
        series_id=target.id,
        base_version=target.version,
        method=CorrectionMethod.EXTERNAL,
        parameters={"checksum": checksum, "filename": filename},
        source_station_ids=(),
        fills=tuple(sorted(by_index.items())),
    )
