"""Text export of series, raw or aggregated, shared by the CLI and the API.

Each exported block is '#'-commented metadata (station, variable, unit,
version lineage) followed by delimited rows in the caller's format spec, so
an exported raw series parses straight back in with the same spec.
"""

from __future__ import annotations

from typing import Mapping, Optional, Sequence

from .analysis import AggregationPolicy, GapPolicy, aggregate, pick_aggregation_source
from .ingest import FormatSpec, render_series, render_value
from .model import DailySeries
from .store import BasinStore


def resolve_series(store: BasinStore, series_id: str, policy: Optional[AggregationPolicy],
                   version: Optional[int] = None) -> DailySeries:
    """Series version an operation should run on.

    An explicit version always wins; the use-filled gap policy picks the
    newest version containing filled slots; otherwise the current head.
    """
    if version is not None:
        return store.get_series(series_id, version)
    if policy is not None and policy.gap_policy is GapPolicy.USE_FILLED:
        info = store.series_info(series_id)
        versions = [store.get_series(series_id, v) for v in info["versions"]]
        return pick_aggregation_source(versions, policy)
    return store.get_series(series_id)


def _lineage_comments(store: BasinStore, series_id: str) -> list[str]:
    info = store.series_info(series_id)
    lines = []
    for v in info["versions"]:
        s = store.get_series(series_id, v)
        if s.method_record is None:
            lines.append(f"version {v}: raw")
        else:
            rec = s.method_record
            lines.append(f"version {v}: {rec.method.value} "
                         f"by {rec.created_by} at {rec.created_at}")
    return lines


def _block_comments(store: BasinStore, s: DailySeries,
                    policy: Optional[AggregationPolicy]) -> list[str]:
    station = store.get_station(s.station_id)
    comments = [
        f"series: {s.id}",
        f"station: {station.name} ({station.id})",
        f"variable: {s.variable.value} [{s.variable.unit}]",
        f"span: {s.start.isoformat()} to {s.end.isoformat()}",
        f"exported version: {s.version}",
    ]
    comments.extend(_lineage_comments(store, s.id))
    if policy is not None:
        comments.append(f"aggregation: {policy.step.value}, gap policy "
                        f"{policy.gap_policy.value}")
    return comments


def render_aggregated(s: DailySeries, policy: AggregationPolicy, spec: FormatSpec,
                      comments: Sequence[str]) -> str:
    """Aggregated rows in the format spec's delimited shape, labels in the date column."""
    rows = aggregate(s, policy)
    out = ["# " + c for c in comments]
    while len(out) < spec.header_lines:
        out.append("#")
    width = max(spec.date_column, spec.value_column) + 1
    for row in rows:
        fields = [""] * width
        fields[spec.date_column] = row.label
        fields[spec.value_column] = (spec.missing_codes[0] if row.value is None
                                     else render_value(row.value, spec))
        out.append(spec.delimiter.join(fields))
    return "\n".join(out) + "\n"


def build_export(store: BasinStore, series_ids: Sequence[str],
                 spec: Optional[FormatSpec] = None,
                 policy: Optional[AggregationPolicy] = None,
                 versions: Optional[Mapping[str, int]] = None) -> str:
    """One text document with one block per requested series."""
    spec = spec or FormatSpec()
    blocks = []
    for sid in series_ids:
        version = versions.get(sid) if versions else None
        s = resolve_series(store, sid, policy, version)
        comments = _block_comments(store, s, policy)
        if policy is not None:
            blocks.append(render_aggregated(s, policy, spec, comments))
        else:
            blocks.append(render_series(s, spec, comments))
    return "\n".join(blocks)


def policy_from_json(obj: Mapping) -> AggregationPolicy:
    """AggregationPolicy from a JSON body (camelCase keys, defaults applied)."""
    from .analysis import AggregationStep

    step = AggregationStep(obj["step"])
    gap_policy = GapPolicy(obj.get("gapPolicy", "strict"))
    return AggregationPolicy(
        step=step,
        gap_policy=gap_policy,
        max_missing_fraction=float(obj.get("maxMissingFraction", 0.0)),
        hydro_start_month=int(obj.get("hydroStartMonth", 4)),
    )
