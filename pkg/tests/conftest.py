"""Shared builders for the test suite."""

from __future__ import annotations

from datetime import date, timedelta
from typing import Optional, Sequence

import pytest

from basinfo.model import DailySeries, QualityFlag, Station, StationKind, Variable

D0 = date(1990, 1, 1)


def mkseries(values: Sequence, start: date = D0,
             variable: Variable = Variable.PRECIPITATION,
             series_id: str = "sr-test", station_id: str = "st-test",
             flags: Optional[Sequence[QualityFlag]] = None,
             version: int = 1) -> DailySeries:
    end = start + timedelta(days=len(values) - 1)
    if flags is None:
        flags = tuple(QualityFlag.RAW for _ in values)
    return DailySeries(
        id=series_id, station_id=station_id, variable=variable,
        start=start, end=end, values=tuple(values), flags=tuple(flags),
        version=version)


def mkstation(station_id: str = "st-test", lat: float = 9.5, lon: float = 1.2,
              kind: StationKind = StationKind.RAINFALL,
              name: Optional[str] = None) -> Station:
    return Station(
        id=station_id, external_id=f"x-{station_id}", name=name or station_id,
        kind=kind, lat=lat, lon=lon, elevation=300.0, established=1950,
        operator="test network")


@pytest.fixture
def store(tmp_path):
    from basinfo.store import BasinStore

    return BasinStore(tmp_path / "data")


@pytest.fixture(scope="session")
def kara_app(tmp_path_factory):
    """One fixture-loaded service shared by read-only API tests."""
    from basinfo.fixture import load_kara
    from basinfo.service import create_app

    app = create_app(tmp_path_factory.mktemp("kara"))
    load_kara(app.state.store)
    return app


@pytest.fixture(scope="session")
def kara_client(kara_app):
    from fastapi.testclient import TestClient

    return TestClient(kara_app, raise_server_exceptions=False)


def login(client, username: str, password: str) -> dict:
    r = client.post("/api/auth/login", json={"username": username, "password": password})
    assert r.status_code == 200, r.text
    return {"Authorization": f"Bearer {r.json()['token']}"}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Repeat the acceptance verdicts in one uncaptured block at the end."""
    import sys

    acc = sys.modules.get("test_acceptance")
    if acc is None or not acc.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in acc.CRITERIA:
        terminalreporter.write_line(
            f"[acceptance] {name}: {acc.RESULTS.get(name, 'NOT RUN')}")
