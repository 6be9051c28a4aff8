"""Packaged demonstration basin: inventory counts, geometry calibration,
station-activity pattern, determinism across loads, and load time."""

import time
from collections import Counter
from datetime import date

import pytest

from basinfo import analysis
from basinfo.fixture import CATCHMENT_ID, STUDY_AREA_ID, load_kara
from basinfo.model import Variable
from basinfo.store import BasinStore


@pytest.fixture(scope="module")
def loaded(tmp_path_factory):
    store = BasinStore(tmp_path_factory.mktemp("fx") / "data")
    t0 = time.monotonic()
    summary = load_kara(store)
    elapsed = time.monotonic() - t0
    return store, summary, elapsed


def test_load_is_fast(loaded):
    _, _, elapsed = loaded
    assert elapsed < 10.0


def test_inventory_counts(loaded):
    store, summary, _ = loaded
    assert summary["series"] == 112
    assert summary["stations"] == 33
    assert store.count_series() == 112
    assert len(store.list_stations()) == 33
    per_variable = Counter(i["variable"] for i in store.list_series())
    assert per_variable == {"discharge": 36, "precipitation": 73,
                            "evaporation": 1, "temperature": 2}
    per_kind = Counter(st.kind.value for st in store.list_stations())
    assert per_kind == {"gauging": 12, "rainfall": 19, "climate": 2}


def test_catchment_area_within_two_percent(loaded):
    store, summary, _ = loaded
    area = store.get_catchment(CATCHMENT_ID).area_km2
    assert abs(area - 5287.0) / 5287.0 < 0.02
    assert summary["areaKm2"] == area


def test_every_station_is_linked(loaded):
    store, summary, _ = loaded
    stations = store.list_stations()
    assert all(st.catchment_id == CATCHMENT_ID for st in stations)
    # One station lies outside the digitized polygon and is hand-assigned.
    assert summary["linkedStations"] == 32


def test_reference_today_is_pinned(loaded):
    store, _, _ = loaded
    assert store.today() == date(2014, 6, 30)


def test_station_activity_pattern(loaded):
    """Discharge and evaporation networks are dead, the rainfall network has
    collapsed to a single live station, both climate stations still report."""
    store, _, _ = loaded
    stations = store.list_stations()
    series_by_station = store.series_for_stations([st.id for st in stations])
    report = analysis.coverage_report(CATCHMENT_ID, stations,
                                      series_by_station, store.today())
    v = report.variables

    dis = v[Variable.DISCHARGE]
    assert (dis.active_station_count, dis.inactive_station_count) == (0, 12)
    assert dis.earliest_observation == date(1954, 1, 1)
    assert dis.latest_observation == date(1989, 12, 31)

    eva = v[Variable.EVAPORATION]
    assert (eva.active_station_count, eva.inactive_station_count) == (0, 1)
    assert eva.latest_observation == date(1996, 12, 31)

    pre = v[Variable.PRECIPITATION]
    assert (pre.active_station_count, pre.inactive_station_count) == (1, 20)
    assert pre.earliest_observation == date(1921, 1, 1)
    assert pre.latest_observation == date(2014, 6, 30)

    tem = v[Variable.TEMPERATURE]
    assert (tem.active_station_count, tem.inactive_station_count) == (2, 0)


def test_only_pagouda_still_reports_rain(loaded):
    store, _, _ = loaded
    stations = {st.id: st for st in store.list_stations()}
    series_by_station = store.series_for_stations(list(stations))
    report = analysis.coverage_report(CATCHMENT_ID, list(stations.values()),
                                      series_by_station, store.today())
    active = [sp for sp in report.variables[Variable.PRECIPITATION].stations
              if sp.active]
    assert len(active) == 1
    assert stations[active[0].station_id].name == "Pagouda"


def test_bundled_users_work(loaded):
    store, summary, _ = loaded
    assert store.login("admin", "kara-admin-2014")
    assert store.login("analyst", "kara-analyst-2014")
    analyst = store.get_user_by_username("analyst")
    assert "hydrologists" in analyst.groups
    assert not analyst.is_admin
    # The everyone grant makes the basin browsable without an account.
    assert store.check_permission(None, STUDY_AREA_ID, "view-metadata")
    assert store.check_permission(analyst, STUDY_AREA_ID, "edit")
    assert not store.check_permission(None, STUDY_AREA_ID, "edit")


def test_store_validates_clean(loaded):
    store, _, _ = loaded
    problems, stats = store.validate_store()
    assert problems == []
    assert stats == {"series": 112, "stations": 33, "catchments": 1,
                     "assets": 2, "records": 148, "users": 2}


def test_two_loads_are_identical(tmp_path):
    """Byte-level determinism: same payload digests, same catalogue bodies."""

    def fingerprint(root):
        store = BasinStore(root)
        load_kara(store)
        c = store._conn()
        payloads = {(r["series_id"], r["version"]): r["payload_sha256"]
                    for r in c.execute("SELECT * FROM series_versions")}
        records = {r["identifier"]: r["body"]
                   for r in c.execute("SELECT * FROM records")}
        stations = {st.id: st for st in store.list_stations()}
        store.close()
        return payloads, records, stations

    a = fingerprint(tmp_path / "one")
    b = fingerprint(tmp_path / "two")
    assert a == b
