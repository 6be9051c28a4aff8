"""HTTP tier: JSON API, session auth, permission enforcement, CSW mount.

Every handler is a thin permission-checked adapter over the core modules.
Reads mask forbidden objects as 404 so object ids cannot be enumerated;
errors share one JSON envelope {code, message, detail}. The browser client
is served statically under /ui when a build directory is present.
"""

from __future__ import annotations

import os
from datetime import date
from pathlib import Path
from typing import Mapping, Optional, Sequence

from fastapi import Body, FastAPI, Query, Request, Response
from fastapi.responses import JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles

from . import analysis, correction
from .analysis import AggregationPolicy
from .catalogue import dispatch_csw
from .errors import (
    BasinError,
    Forbidden,
    NotFound,
    Unauthorized,
    ValidationError,
)
from .export import build_export, policy_from_json, resolve_series
from .geodata import AssetKind, Catchment, Polygon
from .ingest import FormatSpec, parse_series
from .model import DailySeries, Station, StationKind, Variable, _FLAG_TO_CHAR
from .store import ACTIONS, BasinStore, UserCtx

DEFAULT_PORT = 8080


def _parse_iso(raw: str, field: str) -> date:
    try:
        return date.fromisoformat(raw)
    except ValueError:
        raise ValidationError(f"{field} must be an ISO date, got {raw!r}")


def _station_json(st: Station) -> dict:
    return {
        "id": st.id,
        "externalId": st.external_id,
        "name": st.name,
        "kind": st.kind.value,
        "lat": st.lat,
        "lon": st.lon,
        "elevation": st.elevation,
        "established": st.established,
        "operator": st.operator,
        "catchmentId": st.catchment_id,
    }


def _series_slice_json(s: DailySeries, lo: Optional[date], hi: Optional[date]) -> dict:
    a = s.index_of(lo) if lo else 0
    b = s.index_of(hi) if hi else len(s) - 1
    if a > b:
        raise ValidationError("from must not be after to")
    return {
        "seriesId": s.id,
        "version": s.version,
        "start": s.date_at(a).isoformat(),
        "end": s.date_at(b).isoformat(),
        "values": list(s.values[a:b + 1]),
        "flags": "".join(_FLAG_TO_CHAR[f] for f in s.flags[a:b + 1]),
    }


def create_app(data_dir, ui_dir: Optional[str] = None) -> FastAPI:
    app = FastAPI(docs_url=None, redoc_url=None, openapi_url=None)
    store = BasinStore(data_dir)
    app.state.store = store

    @app.exception_handler(BasinError)
    def _basin_error(request: Request, exc: BasinError):
        return JSONResponse(status_code=exc.http_status,
                            content={"code": exc.code, "message": str(exc),
                                     "detail": exc.detail})

    @app.exception_handler(Exception)
    def _internal_error(request: Request, exc: Exception):
        return JSONResponse(status_code=500,
                            content={"code": "internal", "message": str(exc),
                                     "detail": None})

    # -- auth helpers ------------------------------------------------------

    def current_user(request: Request) -> Optional[UserCtx]:
        header = request.headers.get("authorization", "")
        if not header:
            return None
        if not header.lower().startswith("bearer "):
            raise Unauthorized("authorization header must be 'Bearer <token>'")
        user = store.verify_token(header[7:].strip())
        if user is None:
            raise Unauthorized("invalid or expired token")
        return user

    def authorize_read(user: Optional[UserCtx], object_id: str) -> None:
        # Forbidden and nonexistent are indistinguishable on reads.
        if not store.check_permission(user, object_id, "view-metadata"):
            raise NotFound("not found")

    def authorize(user: Optional[UserCtx], object_id: str, action: str) -> None:
        authorize_read(user, object_id)
        if not store.check_permission(user, object_id, action):
            raise Forbidden(f"{action} not permitted")

    def require_admin(user: Optional[UserCtx]) -> UserCtx:
        if user is None:
            raise Unauthorized("authentication required")
        if not user.is_admin:
            raise Forbidden("administrator access required")
        return user

    def require_user(user: Optional[UserCtx]) -> UserCtx:
        if user is None:
            raise Unauthorized("authentication required")
        return user

    def load_series_checked(user: Optional[UserCtx], series_id: str,
                            action: str, version: Optional[int] = None) -> DailySeries:
        authorize(user, series_id, action)
        return store.get_series(series_id, version)

    # -- auth --------------------------------------------------------------

    @app.post("/api/auth/login")
    def login(body: dict = Body(...)):
        token = store.login(str(body.get("username", "")), str(body.get("password", "")))
        user = store.get_user_by_username(str(body.get("username", "")))
        return {"token": token,
                "user": {"id": user.id, "username": user.username,
                         "isAdmin": user.is_admin, "groups": list(user.groups)}}

    @app.post("/api/auth/logout")
    def logout(request: Request):
        header = request.headers.get("authorization", "")
        if header.lower().startswith("bearer "):
            store.revoke_token(header[7:].strip())
        return {"ok": True}

    @app.get("/api/health")
    def health():
        return {"status": "ok"}

    # -- study areas ---------------------------------------------------------

    @app.get("/api/study-areas")
    def list_study_areas(request: Request):
        user = current_user(request)
        return [a for a in store.list_study_areas()
                if store.check_permission(user, a["id"], "view-metadata")]

    # -- stations --------------------------------------------------------------

    @app.get("/api/stations")
    def list_stations(request: Request, kind: Optional[str] = None,
                      catchmentId: Optional[str] = None):
        user = current_user(request)
        stations = store.list_stations()
        out = []
        for st in stations:
            if kind and st.kind.value != kind:
                continue
            if catchmentId and st.catchment_id != catchmentId:
                continue
            if store.check_permission(user, st.id, "view-metadata"):
                out.append(_station_json(st))
        return out

    @app.get("/api/stations/{station_id}")
    def get_station(request: Request, station_id: str):
        user = current_user(request)
        authorize_read(user, station_id)
        return _station_json(store.get_station(station_id))

    @app.post("/api/stations")
    def create_station(request: Request, body: dict = Body(...)):
        user = require_user(current_user(request))
        study_area_id = str(body.get("studyAreaId", ""))
        if not store.get_study_area(study_area_id):
            raise NotFound("not found")
        authorize(user, study_area_id, "edit")
        try:
            station = Station(
                id=str(body["id"]), external_id=str(body.get("externalId", "")),
                name=str(body["name"]), kind=StationKind(body["kind"]),
                lat=float(body["lat"]), lon=float(body["lon"]),
                elevation=float(body.get("elevation", 0.0)),
                established=int(body.get("established", 0)),
                operator=str(body.get("operator", "")),
                catchment_id=body.get("catchmentId"))
        except (KeyError, ValueError, TypeError) as exc:
            raise ValidationError(f"bad station payload: {exc}")
        store.register_station(station, study_area_id, owner_id=user.id)
        return _station_json(store.get_station(station.id))

    # -- series: metadata and data ----------------------------------------------

    @app.get("/api/series")
    def list_series(request: Request, stationId: Optional[str] = None,
                    variable: Optional[str] = None):
        user = current_user(request)
        var = Variable(variable) if variable else None
        rows = store.list_series(station_id=stationId, variable=var)
        return [r for r in rows if store.check_permission(user, r["id"], "view-metadata")]

    @app.get("/api/series/{series_id}")
    def series_metadata(request: Request, series_id: str):
        user = current_user(request)
        authorize_read(user, series_id)
        info = store.series_info(series_id)
        lineage = []
        for v in info["versions"]:
            s = store.get_series(series_id, v)
            rec = s.method_record
            lineage.append({
                "version": v,
                "method": rec.method.value if rec else None,
                "createdAt": rec.created_at if rec else None,
                "createdBy": rec.created_by if rec else None,
                "parameters": dict(rec.parameters) if rec else None,
            })
        head = store.get_series(series_id)
        info.update({
            "start": head.start.isoformat(),
            "end": head.end.isoformat(),
            "unit": head.variable.unit,
            "lineage": lineage,
        })
        return info

    @app.get("/api/series/{series_id}/data")
    def series_data(request: Request, series_id: str,
                    version: Optional[int] = None,
                    from_: Optional[str] = Query(default=None, alias="from"),
                    to: Optional[str] = None):
        user = current_user(request)
        s = load_series_checked(user, series_id, "view-data", version)
        lo = _parse_iso(from_, "from") if from_ else None
        hi = _parse_iso(to, "to") if to else None
        return _series_slice_json(s, lo, hi)

    @app.get("/api/series/{series_id}/stats")
    def series_stats(request: Request, series_id: str,
                     version: Optional[int] = None,
                     from_: Optional[str] = Query(default=None, alias="from"),
                     to: Optional[str] = None):
        user = current_user(request)
        s = load_series_checked(user, series_id, "view-data", version)
        window = None
        if from_ or to:
            lo = _parse_iso(from_, "from") if from_ else s.start
            hi = _parse_iso(to, "to") if to else s.end
            window = (lo, hi)
        stats = analysis.basic_stats(s, window)
        try:
            trend = analysis.linear_trend(s).to_json_obj()
        except BasinError:
            trend = None
        return {"seriesId": series_id, "version": s.version,
                "stats": stats.to_json_obj(), "trend": trend}

    @app.get("/api/series/{series_id}/gaps")
    def series_gaps(request: Request, series_id: str, version: Optional[int] = None):
        from .ingest import detect_gaps

        user = current_user(request)
        s = load_series_checked(user, series_id, "view-data", version)
        report = detect_gaps(s)
        return report.to_json_obj()

    @app.post("/api/series/{series_id}/aggregate")
    def series_aggregate(request: Request, series_id: str, body: dict = Body(...)):
        user = current_user(request)
        authorize(user, series_id, "view-data")
        policy = policy_from_json(body)
        version = body.get("version")
        s = resolve_series(store, series_id, policy,
                           int(version) if version is not None else None)
        rows = analysis.aggregate(s, policy)
        return {"seriesId": series_id, "sourceVersion": s.version,
                "step": policy.step.value,
                "rows": [r.to_json_obj() for r in rows]}

    @app.post("/api/series")
    def ingest_series(request: Request, body: dict = Body(...)):
        user = require_user(current_user(request))
        study_area_id = str(body.get("studyAreaId", ""))
        if not store.get_study_area(study_area_id):
            raise NotFound("not found")
        authorize(user, study_area_id, "edit")
        station_id = str(body.get("stationId", ""))
        authorize_read(user, station_id)
        spec = FormatSpec.from_json_obj(body["formatSpec"]) if body.get("formatSpec") \
            else FormatSpec()
        s = parse_series(str(body.get("text", "")), spec,
                         series_id=str(body["seriesId"]),
                         station_id=station_id,
                         variable=Variable(body["variable"]))
        store.register_series(s, study_area_id, owner_id=user.id)
        return store.series_info(s.id)

    # -- analysis ------------------------------------------------------------------

    @app.post("/api/analysis/correlate")
    def correlate(request: Request, body: dict = Body(...)):
        user = current_user(request)
        a = load_series_checked(user, str(body["seriesIdA"]), "view-data",
                                body.get("versionA"))
        b = load_series_checked(user, str(body["seriesIdB"]), "view-data",
                                body.get("versionB"))
        result = analysis.correlate(a, b)
        return {"seriesIdA": a.id, "seriesIdB": b.id, **result.to_json_obj()}

    @app.post("/api/analysis/availability")
    def availability(request: Request, body: dict = Body(...)):
        user = current_user(request)
        ids = [str(x) for x in body.get("seriesIds", [])]
        series = [load_series_checked(user, sid, "view-data") for sid in ids]
        period = (_parse_iso(str(body["from"]), "from"),
                  _parse_iso(str(body["to"]), "to"))
        rows = analysis.availability(series, period)
        return {"from": period[0].isoformat(), "to": period[1].isoformat(),
                "series": [r.to_json_obj() for r in rows]}

    @app.post("/api/analysis/overlap")
    def overlap(request: Request, body: dict = Body(...)):
        user = current_user(request)
        ids = [str(x) for x in body.get("seriesIds", [])]
        series = [load_series_checked(user, sid, "view-data") for sid in ids]
        result = analysis.overlap_period(series, float(body.get("minFraction", 0.0)))
        if result is None:
            return {"start": None, "end": None}
        return {"start": result[0].isoformat(), "end": result[1].isoformat()}

    # -- correction --------------------------------------------------------------------

    @app.post("/api/series/{series_id}/outliers/detect")
    def outliers_detect(request: Request, series_id: str, body: dict = Body(default={})):
        user = current_user(request)
        s = load_series_checked(user, series_id, "view-data", body.get("version"))
        rule = correction.OutlierRule.for_variable(
            s.variable, zscore_threshold=float(body.get("zscoreThreshold", 3.5)))
        flags = correction.detect_outliers(s, rule)
        return {"seriesId": series_id, "version": s.version,
                "flags": [f.to_json_obj() for f in flags]}

    @app.post("/api/series/{series_id}/outliers/remove")
    def outliers_remove(request: Request, series_id: str, body: dict = Body(...)):
        user = require_user(current_user(request))
        authorize(user, series_id, "edit")
        raw_flags = body.get("flags", [])
        if not isinstance(raw_flags, list):
            raise ValidationError("flags must be a list")
        flags = [correction.OutlierFlag(day=_parse_iso(str(f["date"]), "date"),
                                        value=float(f["value"]),
                                        reason=str(f.get("reason", "")))
                 for f in raw_flags]
        derived = store.commit_outlier_removal(series_id, flags, user)
        return {"seriesId": series_id, "version": derived.version,
                "removed": len(flags)}

    def _build_preview(user: Optional[UserCtx], target: DailySeries,
                       method: str, params: Mapping) -> correction.FillPreview:
        def neighbor_series(key: str = "neighborSeriesIds") -> list[DailySeries]:
            ids = [str(x) for x in params.get(key, [])]
            return [load_series_checked(user, sid, "view-data") for sid in ids]

        if method in ("regression", "regression-1", "regression-multi"):
            return correction.fill_regression(
                target, neighbor_series(),
                min_pairs=int(params.get("minPairs", 30)),
                min_abs_r=float(params.get("minAbsR", 0.7)))
        if method == "idw":
            neighbors = []
            for n in neighbor_series():
                authorize_read(user, n.station_id)
                neighbors.append((n, store.get_station(n.station_id)))
            return correction.fill_idw(
                target, store.get_station(target.station_id), neighbors,
                power=float(params.get("power", 2.0)))
        if method == "normal-ratio":
            window = None
            if params.get("referenceWindow"):
                w = params["referenceWindow"]
                window = (_parse_iso(str(w[0]), "referenceWindow[0]"),
                          _parse_iso(str(w[1]), "referenceWindow[1]"))
            return correction.fill_normal_ratio(target, neighbor_series(), window)
        if method == "temporal-linear":
            return correction.fill_temporal_linear(
                target, max_gap_days=int(params.get("maxGapDays", 3)))
        if method == "external":
            spec = FormatSpec.from_json_obj(params["formatSpec"]) \
                if params.get("formatSpec") else FormatSpec()
            return correction.import_external_fill(
                target, str(params.get("text", "")), spec,
                filename=str(params.get("filename", "")))
        raise ValidationError(f"unknown fill method {method!r}")

    @app.post("/api/series/{series_id}/fill")
    def series_fill(request: Request, series_id: str, body: dict = Body(...)):
        user = require_user(current_user(request))
        authorize(user, series_id, "edit")
        target = store.get_series(series_id)
        base_version = body.get("baseVersion")
        if base_version is not None and int(base_version) != target.version:
            raise correction.StalePreview(
                f"series advanced to version {target.version}")
        preview = _build_preview(user, target, str(body.get("method", "")),
                                 body.get("parameters", {}))
        if body.get("preview", True):
            return preview.to_json_obj(target)
        derived = store.commit_fill(preview, user)
        return {"committed": True, "seriesId": series_id,
                "version": derived.version, "fillCount": len(preview.fills)}

    # -- export ------------------------------------------------------------------------

    @app.post("/api/export")
    def export(request: Request, body: dict = Body(...)):
        user = current_user(request)
        ids = [str(x) for x in body.get("seriesIds", [])]
        if not ids:
            raise ValidationError("seriesIds must not be empty")
        for sid in ids:
            authorize(user, sid, "download")
        spec = FormatSpec.from_json_obj(body["formatSpec"]) if body.get("formatSpec") \
            else FormatSpec()
        policy = policy_from_json(body["aggregation"]) if body.get("aggregation") else None
        versions = {str(k): int(v) for k, v in (body.get("versions") or {}).items()}
        text = build_export(store, ids, spec, policy, versions)
        return PlainTextResponse(text, headers={
            "content-disposition": 'attachment; filename="series-export.txt"'})

    # -- geodata -----------------------------------------------------------------------

    @app.get("/api/catchments")
    def list_catchments(request: Request):
        user = current_user(request)
        out = []
        for c in store.list_catchments():
            if store.check_permission(user, c.id, "view-metadata"):
                out.append({"id": c.id, "name": c.name, "parentId": c.parent_id,
                            "areaKm2": c.area_km2,
                            "geometry": c.geometry.to_json_obj()})
        return out

    @app.get("/api/catchments/{catchment_id}")
    def get_catchment(request: Request, catchment_id: str):
        user = current_user(request)
        authorize_read(user, catchment_id)
        c = store.get_catchment(catchment_id)
        return {"id": c.id, "name": c.name, "parentId": c.parent_id,
                "areaKm2": c.area_km2, "geometry": c.geometry.to_json_obj()}

    @app.post("/api/catchments")
    def create_catchment(request: Request, body: dict = Body(...)):
        user = require_user(current_user(request))
        study_area_id = str(body.get("studyAreaId", ""))
        if not store.get_study_area(study_area_id):
            raise NotFound("not found")
        authorize(user, study_area_id, "edit")
        catchment = Catchment(
            id=str(body["id"]), name=str(body["name"]),
            geometry=Polygon.from_json_obj(body["geometry"]),
            parent_id=body.get("parentId"))
        store.register_catchment(catchment, study_area_id, owner_id=user.id,
                                 abstract=str(body.get("abstract", "")))
        return {"id": catchment.id, "areaKm2": catchment.area_km2}

    @app.post("/api/catchments/{catchment_id}/link-stations")
    def link_stations(request: Request, catchment_id: str):
        user = require_user(current_user(request))
        authorize(user, catchment_id, "edit")
        linked = store.link_stations(catchment_id)
        return {"catchmentId": catchment_id, "linked": linked}

    @app.get("/api/catchments/{catchment_id}/coverage")
    def coverage(request: Request, catchment_id: str):
        user = current_user(request)
        authorize_read(user, catchment_id)
        subtree = store.catchment_subtree(catchment_id)
        stations = store.list_stations(catchment_ids=subtree)
        series_by_station = store.series_for_stations([st.id for st in stations])
        report = analysis.coverage_report(catchment_id, stations,
                                          series_by_station, store.today())
        return report.to_json_obj()

    # -- assets -------------------------------------------------------------------------

    @app.post("/api/assets")
    def upload_asset(request: Request, kind: str, filename: str, studyAreaId: str,
                     data: bytes = Body(default=b"")):
        user = require_user(current_user(request))
        if not store.get_study_area(studyAreaId):
            raise NotFound("not found")
        authorize(user, studyAreaId, "edit")
        asset = store.register_asset(data, AssetKind(kind), filename,
                                     study_area_id=studyAreaId, owner_id=user.id)
        return asset.to_json_obj()

    @app.get("/api/assets/{asset_id}")
    def download_asset(request: Request, asset_id: str):
        user = current_user(request)
        authorize(user, asset_id, "download")
        asset, data = store.get_asset(asset_id)
        return Response(content=data, media_type="application/octet-stream",
                        headers={"content-disposition":
                                 f'attachment; filename="{asset.filename}"'})

    # -- catalogue ----------------------------------------------------------------------

    @app.get("/csw")
    def csw(request: Request):
        user = current_user(request)
        xml = dispatch_csw(dict(request.query_params),
                           store.visible_records(user),
                           base_url=str(request.base_url) + "csw")
        return Response(content=xml, media_type="application/xml")

    # -- admin --------------------------------------------------------------------------

    @app.get("/api/admin/users")
    def list_users(request: Request):
        require_admin(current_user(request))
        return [{"id": u.id, "username": u.username, "isAdmin": u.is_admin,
                 "groups": list(u.groups)} for u in store.list_users()]

    @app.post("/api/admin/users")
    def create_user(request: Request, body: dict = Body(...)):
        require_admin(current_user(request))
        user_id = store.add_user(str(body.get("username", "")),
                                 str(body.get("password", "")),
                                 is_admin=bool(body.get("isAdmin", False)),
                                 groups=[str(g) for g in body.get("groups", [])])
        return {"id": user_id, "username": body.get("username")}

    @app.get("/api/admin/grants")
    def list_grants(request: Request, objectId: Optional[str] = None):
        require_admin(current_user(request))
        return store.list_grants(objectId)

    @app.post("/api/admin/grants")
    def create_grant(request: Request, body: dict = Body(...)):
        user = require_user(current_user(request))
        object_id = str(body.get("objectId", ""))
        if not user.is_admin:
            authorize(user, object_id, "manage")
        grant_id = store.add_grant(str(body.get("subjectId", "")),
                                   str(body.get("subjectKind", "user")),
                                   object_id,
                                   [str(a) for a in body.get("actions", [])])
        return {"id": grant_id}

    @app.post("/api/admin/study-areas")
    def create_study_area(request: Request, body: dict = Body(...)):
        user = require_admin(current_user(request))
        store.create_study_area(str(body["id"]), str(body.get("name", body["id"])),
                                root_catchment_id=body.get("rootCatchmentId"),
                                owner_id=user.id)
        return store.get_study_area(str(body["id"]))

    # -- static UI ----------------------------------------------------------------------

    resolved_ui = ui_dir or os.environ.get("BASINFO_UI_DIR")
    if not resolved_ui:
        candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        if candidate.is_dir():
            resolved_ui = str(candidate)
    if resolved_ui and Path(resolved_ui).is_dir():
        app.mount("/ui", StaticFiles(directory=resolved_ui, html=True), name="ui")

    return app
