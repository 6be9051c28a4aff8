"""Deterministic demonstration dataset for a West African sub-basin.

Everything is derived from one RNG seed, so repeated loads into fresh
stores are byte-identical: one basin polygon tuned to 5,287 km², 33
stations, and exactly 112 daily series whose activity pattern mirrors the
documented situation (flow records only 1954-1989, evaporation ending in
1996, two working climate stations plus one rainfall station outside the
basin boundary).
"""

from __future__ import annotations

import math
from datetime import date, timedelta
from typing import Optional

import numpy as np

from .geodata import AssetKind, Catchment, Polygon, build_polygon_shapefile, polygon_area_km2
from .model import DailySeries, QualityFlag, Station, StationKind, Variable, day_count
from .store import BasinStore

SEED = 20140630
REFERENCE_TODAY = date(2014, 6, 30)
TARGET_AREA_KM2 = 5287.0
BASIN_CENTER = (1.066, 9.63)  # lon, lat
BASIN_SEMI_AXES = (0.4524, 0.3045)  # degrees lon, lat

STUDY_AREA_ID = "sa-kara"
CATCHMENT_ID = "ct-kara"

ADMIN_USER = ("admin", "kara-admin-2014")
ANALYST_USER = ("analyst", "kara-analyst-2014")

_RING_STEPS = 72


def kara_polygon() -> Polygon:
    """Irregular closed ring scaled so the spherical area hits the target."""
    cx, cy = BASIN_CENTER
    a, b = BASIN_SEMI_AXES

    def ring(scale: float) -> tuple:
        pts = []
        for k in range(_RING_STEPS):
            theta = 2.0 * math.pi * k / _RING_STEPS
            wobble = 1.0 + 0.08 * math.sin(3 * theta) + 0.05 * math.sin(7 * theta + 1.0)
            lon = round(cx + a * scale * wobble * math.cos(theta), 6)
            lat = round(cy + b * scale * wobble * math.sin(theta), 6)
            pts.append((lon, lat))
        pts.append(pts[0])
        return tuple(pts)

    scale = 1.0
    for _ in range(4):
        area = polygon_area_km2(Polygon(rings=(ring(scale),)))
        scale *= math.sqrt(TARGET_AREA_KM2 / area)
    return Polygon(rings=(ring(scale),))


def _place(k: int, rho: float) -> tuple[float, float]:
    """Station spot inside the basin: golden-angle direction, radius rho."""
    theta = 2.399963229728653 * k
    cx, cy = BASIN_CENTER
    a, b = BASIN_SEMI_AXES
    return (round(cx + a * rho * math.cos(theta), 5),
            round(cy + b * rho * math.sin(theta), 5))


def _series(rng: np.random.Generator, series_id: str, station_id: str,
            variable: Variable, start: date, end: date,
            gap_fraction: float, max_gap_len: int,
            forced_gaps: tuple = ()) -> DailySeries:
    """Synthetic daily series with interior gaps; both endpoints observed."""
    n = day_count(start, end)
    day_index = np.arange(n)
    season = 2.0 * np.pi * (day_index % 365) / 365.0
    if variable is Variable.PRECIPITATION:
        wet = rng.random(n) < 0.30 + 0.25 * np.sin(season)
        vals = np.where(wet, rng.gamma(0.8, 9.0, n), 0.0)
        vals = np.round(np.maximum(vals, 0.0), 1)
    elif variable is Variable.DISCHARGE:
        base = 40.0 + 35.0 * np.sin(season - 1.2)
        vals = np.maximum(base + rng.normal(0.0, 6.0, n), 0.1)
        vals = np.round(vals, 2)
    elif variable is Variable.TEMPERATURE:
        vals = 26.0 + 4.0 * np.sin(season) + rng.normal(0.0, 1.5, n)
        vals = np.round(np.clip(vals, -39.0, 59.0), 1)
    else:
        vals = np.maximum(3.5 + 1.5 * np.sin(season) + rng.normal(0.0, 0.6, n), 0.0)
        vals = np.round(vals, 1)

    missing = np.zeros(n, dtype=bool)
    target_missing = int(gap_fraction * n)
    budget = target_missing
    while budget > 0:
        length = int(rng.integers(1, max_gap_len + 1))
        length = min(length, budget)
        pos = int(rng.integers(1, max(2, n - length - 1)))
        missing[pos:pos + length] = True
        budget = target_missing - int(missing.sum())
    for g_start, g_len in forced_gaps:
        i = (g_start - start).days
        if 1 <= i and i + g_len < n:
            missing[i:i + g_len] = True
    missing[0] = False
    missing[n - 1] = False

    values = tuple(None if missing[i] else float(vals[i]) for i in range(n))
    flags = tuple(QualityFlag.RAW for _ in range(n))
    return DailySeries(id=series_id, station_id=station_id, variable=variable,
                       start=start, end=end, values=values, flags=flags)


def load_kara(store: BasinStore) -> dict:
    """Populate an empty store with the full demonstration basin."""
    rng = np.random.default_rng(SEED)
    store.set_reference_today(REFERENCE_TODAY)

    admin_id = store.add_user(ADMIN_USER[0], ADMIN_USER[1], is_admin=True)
    analyst_id = store.add_user(ANALYST_USER[0], ANALYST_USER[1],
                                groups=("hydrologists",))

    store.create_study_area(STUDY_AREA_ID, "Kara river basin",
                            root_catchment_id=CATCHMENT_ID, owner_id=admin_id)
    polygon = kara_polygon()
    store.register_catchment(
        Catchment(id=CATCHMENT_ID, name="Kara", geometry=polygon),
        study_area_id=STUDY_AREA_ID, owner_id=admin_id,
        abstract="Kara river basin boundary, parts of Togo and Benin")
    store.set_study_area_root(STUDY_AREA_ID, CATCHMENT_ID)

    # Everyone may browse and download; the analyst group may edit.
    store.add_grant("everyone", "group", STUDY_AREA_ID,
                    ["view-metadata", "view-data", "download"])
    store.add_grant("hydrologists", "group", STUDY_AREA_ID, ["edit"])

    stations: list[Station] = []

    def add_station(sid: str, name: str, kind: StationKind, spot_k: int, rho: float,
                    established: int, operator: str,
                    coords: Optional[tuple[float, float]] = None) -> Station:
        lon, lat = coords if coords else _place(spot_k, rho)
        st = Station(id=sid, external_id=f"TG-{100 + len(stations)}", name=name,
                     kind=kind, lat=lat, lon=lon,
                     elevation=float(round(240 + 35 * ((spot_k * 7) % 11), 1)),
                     established=established, operator=operator)
        store.register_station(st, study_area_id=STUDY_AREA_ID, owner_id=admin_id)
        stations.append(st)
        return st

    meteo = "national meteorological service"
    hydro = "national hydrological service"

    add_station("st-kara", "Kara", StationKind.CLIMATE, 0, 0.30, 1975, meteo)
    add_station("st-niamtougou", "Niamtougou", StationKind.CLIMATE, 5, 0.45, 1979, meteo)
    # Pagouda sits outside the basin polygon yet reports for the basin.
    add_station("st-pagouda", "Pagouda", StationKind.RAINFALL, 0, 0.0, 1982, meteo,
                coords=(1.58, 9.97))
    for i in range(1, 13):
        add_station(f"st-g{i:02d}", f"Gauge {i:02d}", StationKind.GAUGING,
                    10 + i, 0.20 + 0.035 * (i % 9), 1952, hydro)
    for i in range(1, 6):
        add_station(f"st-r{i:02d}", f"Rain {i:02d}", StationKind.RAINFALL,
                    30 + i, 0.25 + 0.06 * i, 1948, meteo)
    for i in range(1, 14):
        add_station(f"st-h{i:02d}", f"Legacy {i:02d}", StationKind.RAINFALL,
                    50 + i, 0.18 + 0.04 * (i % 11), 1920, meteo)

    linked = store.link_stations(CATCHMENT_ID)
    store.set_station_catchment("st-pagouda", CATCHMENT_ID)

    count = 0

    def register(s: DailySeries) -> None:
        nonlocal count
        store.register_series(s, study_area_id=STUDY_AREA_ID, owner_id=admin_id)
        count += 1

    # Flow records exist only for 1954-1989, split into three archive blocks.
    blocks = ((date(1954, 1, 1), date(1965, 12, 31)),
              (date(1966, 1, 1), date(1977, 12, 31)),
              (date(1978, 1, 1), date(1989, 12, 31)))
    for i in range(1, 13):
        for b, (b_start, b_end) in enumerate(blocks, start=1):
            register(_series(rng, f"sr-g{i:02d}-discharge-{b}", f"st-g{i:02d}",
                             Variable.DISCHARGE, b_start, b_end,
                             gap_fraction=0.04, max_gap_len=20))

    register(_series(rng, "sr-kara-temperature", "st-kara", Variable.TEMPERATURE,
                     date(1976, 1, 1), REFERENCE_TODAY,
                     gap_fraction=0.02, max_gap_len=6))
    register(_series(rng, "sr-kara-precipitation", "st-kara", Variable.PRECIPITATION,
                     date(1976, 1, 1), date(2012, 12, 31),
                     gap_fraction=0.03, max_gap_len=10))
    # Evaporation observations stopped at the end of 1996.
    register(_series(rng, "sr-kara-evaporation", "st-kara", Variable.EVAPORATION,
                     date(1976, 1, 1), date(1996, 12, 31),
                     gap_fraction=0.03, max_gap_len=8))
    register(_series(rng, "sr-niamtougou-temperature", "st-niamtougou",
                     Variable.TEMPERATURE, date(1980, 1, 1), REFERENCE_TODAY,
                     gap_fraction=0.02, max_gap_len=6))
    register(_series(rng, "sr-niamtougou-precipitation", "st-niamtougou",
                     Variable.PRECIPITATION, date(1980, 1, 1), date(2012, 12, 31),
                     gap_fraction=0.03, max_gap_len=10))

    # Six comparison rainfall series with visibly different gap signatures.
    fig_specs = [
        ("sr-r01-precipitation", "st-r01", 0.10, 400, ()),
        ("sr-r02-precipitation", "st-r02", 0.08, 25, ()),
        ("sr-r03-precipitation", "st-r03", 0.15, 1200, ()),
        ("sr-r04-precipitation", "st-r04", 0.05, 90, ()),
        ("sr-r05-precipitation", "st-r05", 0.12, 240, ()),
    ]
    for sid, st_id, frac, max_len, forced in fig_specs:
        register(_series(rng, sid, st_id, Variable.PRECIPITATION,
                         date(1950, 1, 1), date(2012, 12, 31),
                         gap_fraction=frac, max_gap_len=max_len, forced_gaps=forced))
    register(_series(rng, "sr-pagouda-precipitation", "st-pagouda",
                     Variable.PRECIPITATION, date(1983, 1, 1), REFERENCE_TODAY,
                     gap_fraction=0.04, max_gap_len=15,
                     forced_gaps=((date(1995, 3, 10), 2),)))

    # Legacy rainfall archive: five multi-year blocks per station.
    for i in range(1, 14):
        y0 = 1921 + (i % 5)
        for b in range(5):
            b_start = date(y0 + 9 * b, 1, 1)
            b_end = date(y0 + 9 * b + 8, 12, 31)
            register(_series(rng, f"sr-h{i:02d}-precipitation-{b + 1}", f"st-h{i:02d}",
                             Variable.PRECIPITATION, b_start, b_end,
                             gap_fraction=0.06, max_gap_len=60))

    if count != 112:
        raise AssertionError(f"fixture produced {count} series, expected 112")

    boundary_asset = store.register_asset(
        build_polygon_shapefile([polygon]), AssetKind.VECTOR, "kara-basin.shp",
        study_area_id=STUDY_AREA_ID, owner_id=admin_id, bbox=polygon.bbox(),
        abstract="Basin boundary polygon, main shapefile")
    report = ("Socio-economic survey of the Kara basin\n\n"
              "Household water use, irrigation and livestock notes collected "
              "alongside the gauging network rehabilitation.\n").encode("utf-8")
    doc_asset = store.register_asset(
        report, AssetKind.DOCUMENT, "socio-economic-survey.txt",
        study_area_id=STUDY_AREA_ID, owner_id=admin_id,
        abstract="Survey report stored with the basin datasets")

    return {
        "studyAreaId": STUDY_AREA_ID,
        "catchmentId": CATCHMENT_ID,
        "areaKm2": polygon_area_km2(polygon),
        "stations": len(stations),
        "linkedStations": len(linked),
        "series": count,
        "assets": [boundary_asset.id, doc_asset.id],
        "users": {ADMIN_USER[0]: "admin", ANALYST_USER[0]: "analyst"},
    }
