"""Durable embedded storage: users, grants, datasets, versions, records.

SQLite in WAL mode carries everything except asset bytes, which live as
checksummed files next to the database. Writers take an immediate
transaction, so each commit is atomic and serialized; series versions are
stored as canonical JSON payloads whose hashes make immutability checkable
forever. Permission checks are default-deny and purely additive.
"""

from __future__ import annotations

import hashlib
import hmac
import json
import os
import secrets
import sqlite3
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .catalogue import MetadataRecord, RecordType
from .correction import FillPreview, OutlierFlag, apply_preview, remove_outliers
from .errors import (
    AuthFailed,
    DuplicateDate,
    NotFound,
    StaleWrite,
    TooLarge,
    UnknownCatchment,
    UnknownStation,
    ValidationError,
)
from .geodata import (
    Asset,
    AssetKind,
    Catchment,
    DEFAULT_ASSET_LIMIT,
    Polygon,
    catchment_depth,
    containing_catchment,
)
from .model import (
    DailySeries,
    Station,
    StationKind,
    Variable,
    series_from_payload,
    series_to_payload,
    validate_series,
)

ACTIONS = ("view-metadata", "view-data", "download", "edit", "manage")
EVERYONE = "everyone"
PBKDF2_ITERATIONS = 120_000
SESSION_HOURS = 24

_SCHEMA = """
CREATE TABLE IF NOT EXISTS settings (
    key TEXT PRIMARY KEY,
    value TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS users (
    id TEXT PRIMARY KEY,
    username TEXT NOT NULL UNIQUE,
    pw_hash BLOB NOT NULL,
    pw_salt BLOB NOT NULL,
    pw_iterations INTEGER NOT NULL,
    is_admin INTEGER NOT NULL DEFAULT 0
);
CREATE TABLE IF NOT EXISTS user_groups (
    user_id TEXT NOT NULL REFERENCES users(id),
    group_id TEXT NOT NULL,
    PRIMARY KEY (user_id, group_id)
);
CREATE TABLE IF NOT EXISTS sessions (
    token_hash TEXT PRIMARY KEY,
    user_id TEXT NOT NULL REFERENCES users(id),
    expires_at TEXT NOT NULL,
    revoked INTEGER NOT NULL DEFAULT 0
);
CREATE TABLE IF NOT EXISTS study_areas (
    id TEXT PRIMARY KEY,
    name TEXT NOT NULL,
    root_catchment_id TEXT,
    owner_id TEXT
);
CREATE TABLE IF NOT EXISTS grants (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    subject_id TEXT NOT NULL,
    subject_kind TEXT NOT NULL CHECK (subject_kind IN ('user', 'group')),
    object_id TEXT NOT NULL,
    actions TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS catchments (
    id TEXT PRIMARY KEY,
    name TEXT NOT NULL,
    parent_id TEXT REFERENCES catchments(id),
    geometry TEXT NOT NULL,
    study_area_id TEXT NOT NULL REFERENCES study_areas(id),
    owner_id TEXT
);
CREATE TABLE IF NOT EXISTS stations (
    id TEXT PRIMARY KEY,
    external_id TEXT NOT NULL,
    name TEXT NOT NULL,
    kind TEXT NOT NULL,
    lat REAL NOT NULL,
    lon REAL NOT NULL,
    elevation REAL NOT NULL,
    established INTEGER NOT NULL,
    operator TEXT NOT NULL,
    catchment_id TEXT REFERENCES catchments(id),
    study_area_id TEXT NOT NULL REFERENCES study_areas(id),
    owner_id TEXT
);
CREATE TABLE IF NOT EXISTS series (
    id TEXT PRIMARY KEY,
    station_id TEXT NOT NULL REFERENCES stations(id),
    variable TEXT NOT NULL,
    current_version INTEGER NOT NULL,
    study_area_id TEXT NOT NULL REFERENCES study_areas(id),
    owner_id TEXT
);
CREATE TABLE IF NOT EXISTS series_versions (
    series_id TEXT NOT NULL REFERENCES series(id),
    version INTEGER NOT NULL,
    payload BLOB NOT NULL,
    payload_sha256 TEXT NOT NULL,
    created_at TEXT NOT NULL,
    created_by TEXT,
    PRIMARY KEY (series_id, version)
);
CREATE TABLE IF NOT EXISTS assets (
    id TEXT PRIMARY KEY,
    kind TEXT NOT NULL,
    filename TEXT NOT NULL,
    byte_size INTEGER NOT NULL,
    checksum TEXT NOT NULL,
    bbox TEXT,
    study_area_id TEXT NOT NULL REFERENCES study_areas(id),
    owner_id TEXT
);
CREATE TABLE IF NOT EXISTS records (
    identifier TEXT PRIMARY KEY,
    body TEXT NOT NULL,
    modified TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS idx_series_station ON series(station_id);
CREATE INDEX IF NOT EXISTS idx_stations_catchment ON stations(catchment_id);
CREATE INDEX IF NOT EXISTS idx_grants_object ON grants(object_id);
"""


@dataclass(frozen=True)
class UserCtx:
    """Resolved identity attached to a request; None means anonymous."""

    id: str
    username: str
    is_admin: bool
    groups: tuple


def _utcnow() -> datetime:
    return datetime.now(timezone.utc)


class BasinStore:
    """One data directory: SQLite database plus an asset file tree."""

    def __init__(self, data_dir):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.assets_dir = self.data_dir / "assets"
        self.assets_dir.mkdir(exist_ok=True)
        self.db_path = self.data_dir / "basin.db"
        self._local = threading.local()
        self._all_conns: list[sqlite3.Connection] = []
        self._conns_lock = threading.Lock()
        self._conn().executescript(_SCHEMA)

    def _conn(self) -> sqlite3.Connection:
        conn = getattr(self._local, "conn", None)
        if conn is None:
            conn = sqlite3.connect(self.db_path, timeout=30)
            conn.row_factory = sqlite3.Row
            conn.isolation_level = None
            conn.execute("PRAGMA journal_mode=WAL")
            conn.execute("PRAGMA synchronous=NORMAL")
            conn.execute("PRAGMA foreign_keys=ON")
            conn.execute("PRAGMA busy_timeout=30000")
            self._local.conn = conn
            with self._conns_lock:
                self._all_conns.append(conn)
        return conn

    def close(self) -> None:
        with self._conns_lock:
            for conn in self._all_conns:
                try:
                    conn.close()
                except sqlite3.Error:
                    pass
            self._all_conns.clear()
        self._local = threading.local()

    @contextmanager
    def _write(self):
        conn = self._conn()
        conn.execute("BEGIN IMMEDIATE")
        try:
            yield conn
            conn.execute("COMMIT")
        except BaseException:
            conn.execute("ROLLBACK")
            raise

    # -- settings ---------------------------------------------------------

    def set_setting(self, key: str, value: str) -> None:
        with self._write() as c:
            c.execute(
                "INSERT INTO settings(key, value) VALUES (?, ?) "
                "ON CONFLICT(key) DO UPDATE SET value = excluded.value",
                (key, value))

    def get_setting(self, key: str) -> Optional[str]:
        row = self._conn().execute(
            "SELECT value FROM settings WHERE key = ?", (key,)).fetchone()
        return row["value"] if row else None

    def set_reference_today(self, d: date) -> None:
        self.set_setting("reference_today", d.isoformat())

    def today(self) -> date:
        raw = self.get_setting("reference_today")
        return date.fromisoformat(raw) if raw else _utcnow().date()

    def _now_iso(self) -> str:
        ref = self.get_setting("reference_today")
        if ref:
            return f"{ref}T00:00:00Z"
        return _utcnow().strftime("%Y-%m-%dT%H:%M:%SZ")

    # -- users and sessions ------------------------------------------------

    def add_user(self, username: str, password: str, is_admin: bool = False,
                 groups: Sequence[str] = ()) -> str:
        if not username or not password:
            raise ValidationError("username and password are required")
        user_id = f"u-{secrets.token_hex(8)}"
        salt = secrets.token_bytes(16)
        pw_hash = hashlib.pbkdf2_hmac("sha256", password.encode("utf-8"),
                                      salt, PBKDF2_ITERATIONS)
        with self._write() as c:
            dup = c.execute("SELECT 1 FROM users WHERE username = ?",
                            (username,)).fetchone()
            if dup:
                raise ValidationError(f"username {username!r} already exists")
            c.execute(
                "INSERT INTO users(id, username, pw_hash, pw_salt, pw_iterations, is_admin) "
                "VALUES (?, ?, ?, ?, ?, ?)",
                (user_id, username, pw_hash, salt, PBKDF2_ITERATIONS, int(is_admin)))
            for g in groups:
                c.execute("INSERT OR IGNORE INTO user_groups(user_id, group_id) "
                          "VALUES (?, ?)", (user_id, g))
        return user_id

    def add_user_to_group(self, user_id: str, group_id: str) -> None:
        with self._write() as c:
            c.execute("INSERT OR IGNORE INTO user_groups(user_id, group_id) "
                      "VALUES (?, ?)", (user_id, group_id))

    def _user_ctx(self, row) -> UserCtx:
        groups = tuple(sorted(
            r["group_id"] for r in self._conn().execute(
                "SELECT group_id FROM user_groups WHERE user_id = ?",
                (row["id"],))))
        return UserCtx(id=row["id"], username=row["username"],
                       is_admin=bool(row["is_admin"]), groups=groups)

    def login(self, username: str, password: str) -> str:
        """Verify credentials and mint an opaque expiring token."""
        row = self._conn().execute(
            "SELECT * FROM users WHERE username = ?", (username,)).fetchone()
        if row is None:
            # Equalize timing with the real verification path.
            hashlib.pbkdf2_hmac("sha256", password.encode("utf-8"),
                                b"\x00" * 16, PBKDF2_ITERATIONS)
            raise AuthFailed("invalid credentials")
        candidate = hashlib.pbkdf2_hmac("sha256", password.encode("utf-8"),
                                        row["pw_salt"], row["pw_iterations"])
        if not hmac.compare_digest(candidate, row["pw_hash"]):
            raise AuthFailed("invalid credentials")
        token = secrets.token_urlsafe(32)
        token_hash = hashlib.sha256(token.encode("ascii")).hexdigest()
        expires = (_utcnow() + timedelta(hours=SESSION_HOURS)).isoformat()
        with self._write() as c:
            c.execute("DELETE FROM sessions WHERE expires_at < ?",
                      (_utcnow().isoformat(),))
            c.execute("INSERT INTO sessions(token_hash, user_id, expires_at) "
                      "VALUES (?, ?, ?)", (token_hash, row["id"], expires))
        return token

    def verify_token(self, token: str) -> Optional[UserCtx]:
        token_hash = hashlib.sha256(token.encode("ascii", "ignore")).hexdigest()
        row = self._conn().execute(
            "SELECT s.expires_at, s.revoked, u.* FROM sessions s "
            "JOIN users u ON u.id = s.user_id WHERE s.token_hash = ?",
            (token_hash,)).fetchone()
        if row is None or row["revoked"]:
            return None
        if datetime.fromisoformat(row["expires_at"]) < _utcnow():
            return None
        return self._user_ctx(row)

    def revoke_token(self, token: str) -> None:
        token_hash = hashlib.sha256(token.encode("ascii", "ignore")).hexdigest()
        with self._write() as c:
            c.execute("UPDATE sessions SET revoked = 1 WHERE token_hash = ?",
                      (token_hash,))

    def get_user_by_username(self, username: str) -> Optional[UserCtx]:
        row = self._conn().execute(
            "SELECT * FROM users WHERE username = ?", (username,)).fetchone()
        return self._user_ctx(row) if row else None

    def list_users(self) -> list[UserCtx]:
        rows = self._conn().execute("SELECT * FROM users ORDER BY username").fetchall()
        return [self._user_ctx(r) for r in rows]

    # -- permissions --------------------------------------------------------

    def add_grant(self, subject_id: str, subject_kind: str, object_id: str,
                  actions: Sequence[str]) -> int:
        if subject_kind not in ("user", "group"):
            raise ValidationError(f"subject kind must be user or group, got {subject_kind!r}")
        if not actions:
            raise ValidationError("a grant needs at least one action")
        for a in actions:
            if a not in ACTIONS:
                raise ValidationError(f"unknown action {a!r}")
        with self._write() as c:
            cur = c.execute(
                "INSERT INTO grants(subject_id, subject_kind, object_id, actions) "
                "VALUES (?, ?, ?, ?)",
                (subject_id, subject_kind, object_id, ",".join(sorted(set(actions)))))
            return int(cur.lastrowid)

    def list_grants(self, object_id: Optional[str] = None) -> list[dict]:
        c = self._conn()
        if object_id is None:
            rows = c.execute("SELECT * FROM grants ORDER BY id").fetchall()
        else:
            rows = c.execute("SELECT * FROM grants WHERE object_id = ? ORDER BY id",
                             (object_id,)).fetchall()
        return [{"id": r["id"], "subjectId": r["subject_id"],
                 "subjectKind": r["subject_kind"], "objectId": r["object_id"],
                 "actions": r["actions"].split(",")} for r in rows]

    def _object_scope(self, object_id: str) -> Optional[tuple[Optional[str], Optional[str]]]:
        """(study_area_id, owner_id) for any known object id; None if unknown."""
        c = self._conn()
        for table in ("series", "stations", "catchments", "assets"):
            row = c.execute(
                f"SELECT study_area_id, owner_id FROM {table} WHERE id = ?",
                (object_id,)).fetchone()
            if row:
                return row["study_area_id"], row["owner_id"]
        row = c.execute("SELECT owner_id FROM study_areas WHERE id = ?",
                        (object_id,)).fetchone()
        if row:
            return None, row["owner_id"]
        return None, None

    def check_permission(self, user: Optional[UserCtx], object_id: str,
                         action: str) -> bool:
        """Default-deny: admin, owner, or a matching additive grant."""
        if action not in ACTIONS:
            return False
        if user is not None and user.is_admin:
            return True
        study_area_id, owner_id = self._object_scope(object_id)
        if user is not None and owner_id is not None and owner_id == user.id:
            return True
        subjects = [EVERYONE]
        if user is not None:
            subjects.append(user.id)
            subjects.extend(user.groups)
        objects = [object_id]
        if study_area_id:
            objects.append(study_area_id)
        qmarks_s = ",".join("?" * len(subjects))
        qmarks_o = ",".join("?" * len(objects))
        rows = self._conn().execute(
            f"SELECT actions FROM grants WHERE subject_id IN ({qmarks_s}) "
            f"AND object_id IN ({qmarks_o})", (*subjects, *objects)).fetchall()
        for row in rows:
            if action in row["actions"].split(","):
                return True
        return False

    # -- records ------------------------------------------------------------

    def _put_record(self, c: sqlite3.Connection, rec: MetadataRecord) -> None:
        body = json.dumps(rec.to_json_obj(), sort_keys=True, separators=(",", ":"))
        prev = c.execute("SELECT modified FROM records WHERE identifier = ?",
                         (rec.identifier,)).fetchone()
        modified = rec.modified
        if prev and prev["modified"] > modified:
            modified = prev["modified"]
        c.execute(
            "INSERT INTO records(identifier, body, modified) VALUES (?, ?, ?) "
            "ON CONFLICT(identifier) DO UPDATE SET body = excluded.body, "
            "modified = excluded.modified",
            (rec.identifier, body, modified))

    @staticmethod
    def _record_from_row(row) -> MetadataRecord:
        obj = json.loads(row["body"])
        return MetadataRecord(
            identifier=obj["identifier"],
            title=obj["title"],
            abstract=obj["abstract"],
            keywords=tuple(obj["keywords"]),
            rtype=RecordType(obj["type"]),
            bbox=tuple(obj["bbox"]) if obj.get("bbox") else None,
            temporal_start=date.fromisoformat(obj["temporalStart"])
            if obj.get("temporalStart") else None,
            temporal_end=date.fromisoformat(obj["temporalEnd"])
            if obj.get("temporalEnd") else None,
            modified=row["modified"],
        )

    def get_record(self, identifier: str) -> Optional[MetadataRecord]:
        row = self._conn().execute(
            "SELECT * FROM records WHERE identifier = ?", (identifier,)).fetchone()
        return self._record_from_row(row) if row else None

    def visible_records(self, user: Optional[UserCtx]) -> list[MetadataRecord]:
        rows = self._conn().execute(
            "SELECT * FROM records ORDER BY identifier").fetchall()
        out = []
        for row in rows:
            if self.check_permission(user, row["identifier"], "view-metadata"):
                out.append(self._record_from_row(row))
        return out

    # -- study areas ----------------------------------------------------------

    def create_study_area(self, area_id: str, name: str,
                          root_catchment_id: Optional[str] = None,
                          owner_id: Optional[str] = None) -> None:
        with self._write() as c:
            c.execute(
                "INSERT INTO study_areas(id, name, root_catchment_id, owner_id) "
                "VALUES (?, ?, ?, ?)", (area_id, name, root_catchment_id, owner_id))

    def get_study_area(self, area_id: str) -> Optional[dict]:
        row = self._conn().execute(
            "SELECT * FROM study_areas WHERE id = ?", (area_id,)).fetchone()
        if row is None:
            return None
        return {"id": row["id"], "name": row["name"],
                "rootCatchmentId": row["root_catchment_id"]}

    def list_study_areas(self) -> list[dict]:
        rows = self._conn().execute("SELECT * FROM study_areas ORDER BY id").fetchall()
        return [{"id": r["id"], "name": r["name"],
                 "rootCatchmentId": r["root_catchment_id"]} for r in rows]

    def set_study_area_root(self, area_id: str, catchment_id: str) -> None:
        with self._write() as c:
            c.execute("UPDATE study_areas SET root_catchment_id = ? WHERE id = ?",
                      (catchment_id, area_id))

    # -- catchments -------------------------------------------------------------

    def register_catchment(self, catchment: Catchment, study_area_id: str,
                           owner_id: Optional[str] = None,
                           abstract: str = "") -> None:
        if catchment.area_km2 <= 0:
            raise ValidationError("catchment area must be positive")
        with self._write() as c:
            if catchment.parent_id is not None:
                parent = c.execute("SELECT 1 FROM catchments WHERE id = ?",
                                   (catchment.parent_id,)).fetchone()
                if parent is None:
                    raise UnknownCatchment(f"parent {catchment.parent_id} not found")
            c.execute(
                "INSERT INTO catchments(id, name, parent_id, geometry, study_area_id, owner_id) "
                "VALUES (?, ?, ?, ?, ?, ?)",
                (catchment.id, catchment.name, catchment.parent_id,
                 json.dumps(catchment.geometry.to_json_obj()), study_area_id, owner_id))
            self._put_record(c, MetadataRecord(
                identifier=catchment.id,
                title=catchment.name,
                abstract=abstract or f"Catchment boundary of {catchment.name}",
                keywords=("catchment", "boundary", catchment.name),
                rtype=RecordType.CATCHMENT,
                bbox=catchment.geometry.bbox(),
                modified=self._now_iso(),
            ))

    def get_catchment(self, catchment_id: str) -> Catchment:
        row = self._conn().execute(
            "SELECT * FROM catchments WHERE id = ?", (catchment_id,)).fetchone()
        if row is None:
            raise UnknownCatchment(f"catchment {catchment_id} not found")
        return Catchment(
            id=row["id"], name=row["name"],
            geometry=Polygon.from_json_obj(json.loads(row["geometry"])),
            parent_id=row["parent_id"])

    def list_catchments(self) -> list[Catchment]:
        rows = self._conn().execute("SELECT id FROM catchments ORDER BY id").fetchall()
        return [self.get_catchment(r["id"]) for r in rows]

    def catchment_subtree(self, catchment_id: str) -> list[str]:
        """The catchment and all its descendants (depth-first order)."""
        rows = self._conn().execute(
            "SELECT id, parent_id FROM catchments").fetchall()
        children: dict[Optional[str], list[str]] = {}
        ids = set()
        for r in rows:
            children.setdefault(r["parent_id"], []).append(r["id"])
            ids.add(r["id"])
        if catchment_id not in ids:
            raise UnknownCatchment(f"catchment {catchment_id} not found")
        out = []
        stack = [catchment_id]
        while stack:
            cur = stack.pop()
            out.append(cur)
            stack.extend(sorted(children.get(cur, []), reverse=True))
        return out

    # -- stations ----------------------------------------------------------------

    def register_station(self, station: Station, study_area_id: str,
                          owner_id: Optional[str] = None) -> None:
        with self._write() as c:
            c.execute(
                "INSERT INTO stations(id, external_id, name, kind, lat, lon, elevation, "
                "established, operator, catchment_id, study_area_id, owner_id) "
                "VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)",
                (station.id, station.external_id, station.name, station.kind.value,
                 station.lat, station.lon, station.elevation, station.established,
                 station.operator, station.catchment_id, study_area_id, owner_id))
            self._put_record(c, MetadataRecord(
                identifier=station.id,
                title=f"{station.name} station",
                abstract=(f"{station.kind.value} station operated by {station.operator}, "
                          f"established {station.established}"),
                keywords=("station", station.kind.value, station.name),
                rtype=RecordType.STATION,
                bbox=(station.lon, station.lat, station.lon, station.lat),
                modified=self._now_iso(),
            ))

    @staticmethod
    def _station_from_row(row) -> Station:
        return Station(
            id=row["id"], external_id=row["external_id"], name=row["name"],
            kind=StationKind(row["kind"]), lat=row["lat"], lon=row["lon"],
            elevation=row["elevation"], established=row["established"],
            operator=row["operator"], catchment_id=row["catchment_id"])

    def get_station(self, station_id: str) -> Station:
        row = self._conn().execute(
            "SELECT * FROM stations WHERE id = ?", (station_id,)).fetchone()
        if row is None:
            raise UnknownStation(f"station {station_id} not found")
        return self._station_from_row(row)

    def list_stations(self, catchment_ids: Optional[Iterable[str]] = None) -> list[Station]:
        c = self._conn()
        if catchment_ids is None:
            rows = c.execute("SELECT * FROM stations ORDER BY id").fetchall()
        else:
            ids = list(catchment_ids)
            qmarks = ",".join("?" * len(ids))
            rows = c.execute(
                f"SELECT * FROM stations WHERE catchment_id IN ({qmarks}) ORDER BY id",
                ids).fetchall()
        return [self._station_from_row(r) for r in rows]

    def set_station_catchment(self, station_id: str, catchment_id: Optional[str]) -> None:
        with self._write() as c:
            cur = c.execute("UPDATE stations SET catchment_id = ? WHERE id = ?",
                            (catchment_id, station_id))
            if cur.rowcount == 0:
                raise UnknownStation(f"station {station_id} not found")

    def link_stations(self, catchment_id: str) -> list[str]:
        """Assign every station inside the catchment subtree to the deepest
        geometry containing it; returns the linked station ids."""
        subtree = self.catchment_subtree(catchment_id)
        catchments = [self.get_catchment(cid) for cid in subtree]
        linked = []
        stations = self.list_stations()
        with self._write() as c:
            for st in stations:
                best = containing_catchment((st.lon, st.lat), catchments)
                if best is not None:
                    c.execute("UPDATE stations SET catchment_id = ? WHERE id = ?",
                              (best, st.id))
                    linked.append(st.id)
        return linked

    # -- series --------------------------------------------------------------------

    def register_series(self, s: DailySeries, study_area_id: str,
                        owner_id: Optional[str] = None) -> None:
        problems = validate_series(s)
        if problems:
            raise ValidationError("invalid series: " + ", ".join(problems),
                                  detail={"violations": problems})
        if s.version != 1:
            raise ValidationError("a new series must start at version 1")
        station = self.get_station(s.station_id)
        payload = series_to_payload(s)
        digest = hashlib.sha256(payload).hexdigest()
        with self._write() as c:
            c.execute(
                "INSERT INTO series(id, station_id, variable, current_version, "
                "study_area_id, owner_id) VALUES (?, ?, ?, 1, ?, ?)",
                (s.id, s.station_id, s.variable.value, study_area_id, owner_id))
            c.execute(
                "INSERT INTO series_versions(series_id, version, payload, payload_sha256, "
                "created_at, created_by) VALUES (?, 1, ?, ?, ?, ?)",
                (s.id, payload, digest, self._now_iso(), owner_id))
            self._put_record(c, self._series_record(s, station))

    def _series_record(self, s: DailySeries, station: Station) -> MetadataRecord:
        var = s.variable.value
        keywords = ["time series", "daily", var, station.name]
        if s.variable is Variable.PRECIPITATION:
            keywords.append("rainfall")
        return MetadataRecord(
            identifier=s.id,
            title=f"Daily {var} at {station.name}",
            abstract=(f"Daily {var} ({s.variable.unit}) observed at {station.name}, "
                      f"{s.start.isoformat()} to {s.end.isoformat()}, "
                      f"version {s.version}"),
            keywords=tuple(keywords),
            rtype=RecordType.SERIES,
            bbox=(station.lon, station.lat, station.lon, station.lat),
            temporal_start=s.start,
            temporal_end=s.end,
            modified=self._now_iso(),
        )

    def get_series(self, series_id: str, version: Optional[int] = None) -> DailySeries:
        c = self._conn()
        head = c.execute("SELECT current_version FROM series WHERE id = ?",
                         (series_id,)).fetchone()
        if head is None:
            raise NotFound(f"series {series_id} not found")
        v = version if version is not None else head["current_version"]
        row = c.execute(
            "SELECT payload FROM series_versions WHERE series_id = ? AND version = ?",
            (series_id, v)).fetchone()
        if row is None:
            raise NotFound(f"series {series_id} has no version {v}")
        return series_from_payload(row["payload"])

    def get_series_payload(self, series_id: str, version: int) -> tuple[bytes, str]:
        row = self._conn().execute(
            "SELECT payload, payload_sha256 FROM series_versions "
            "WHERE series_id = ? AND version = ?", (series_id, version)).fetchone()
        if row is None:
            raise NotFound(f"series {series_id} has no version {version}")
        return row["payload"], row["payload_sha256"]

    def series_info(self, series_id: str) -> dict:
        c = self._conn()
        row = c.execute("SELECT * FROM series WHERE id = ?", (series_id,)).fetchone()
        if row is None:
            raise NotFound(f"series {series_id} not found")
        versions = [r["version"] for r in c.execute(
            "SELECT version FROM series_versions WHERE series_id = ? ORDER BY version",
            (series_id,))]
        return {
            "id": row["id"],
            "stationId": row["station_id"],
            "variable": row["variable"],
            "currentVersion": row["current_version"],
            "versions": versions,
            "studyAreaId": row["study_area_id"],
        }

    def list_series(self, station_id: Optional[str] = None,
                    variable: Optional[Variable] = None) -> list[dict]:
        c = self._conn()
        sql = "SELECT id FROM series"
        clauses = []
        params: list = []
        if station_id is not None:
            clauses.append("station_id = ?")
            params.append(station_id)
        if variable is not None:
            clauses.append("variable = ?")
            params.append(variable.value)
        if clauses:
            sql += " WHERE " + " AND ".join(clauses)
        sql += " ORDER BY id"
        return [self.series_info(r["id"]) for r in c.execute(sql, params)]

    def count_series(self) -> int:
        return int(self._conn().execute("SELECT COUNT(*) AS n FROM series").fetchone()["n"])

    def series_for_stations(self, station_ids: Sequence[str]) -> dict[str, list[DailySeries]]:
        """Current versions of every series of the given stations."""
        out: dict[str, list[DailySeries]] = {sid: [] for sid in station_ids}
        if not station_ids:
            return out
        qmarks = ",".join("?" * len(station_ids))
        rows = self._conn().execute(
            f"SELECT id, station_id FROM series WHERE station_id IN ({qmarks}) ORDER BY id",
            list(station_ids)).fetchall()
        for r in rows:
            out[r["station_id"]].append(self.get_series(r["id"]))
        return out

    def _commit_new_version(self, c: sqlite3.Connection, derived: DailySeries,
                            expected_parent: int, user_id: Optional[str]) -> None:
        payload = series_to_payload(derived)
        digest = hashlib.sha256(payload).hexdigest()
        cur = c.execute(
            "UPDATE series SET current_version = ? WHERE id = ? AND current_version = ?",
            (derived.version, derived.id, expected_parent))
        if cur.rowcount == 0:
            raise StaleWrite(f"series {derived.id} advanced past version {expected_parent}")
        c.execute(
            "INSERT INTO series_versions(series_id, version, payload, payload_sha256, "
            "created_at, created_by) VALUES (?, ?, ?, ?, ?, ?)",
            (derived.id, derived.version, payload, digest,
             derived.method_record.created_at if derived.method_record else self._now_iso(),
             user_id))
        station = self.get_station(derived.station_id)
        self._put_record(c, self._series_record(derived, station))

    def commit_fill(self, preview: FillPreview, user: UserCtx) -> DailySeries:
        """Apply a fill preview to the series head; stale previews conflict."""
        with self._write() as c:
            current = self.get_series(preview.series_id)
            derived = apply_preview(current, preview, created_by=user.username,
                                    created_at=self._now_iso())
            self._commit_new_version(c, derived, current.version, user.id)
        return derived

    def commit_outlier_removal(self, series_id: str, flags: Sequence[OutlierFlag],
                               user: UserCtx) -> DailySeries:
        with self._write() as c:
            current = self.get_series(series_id)
            derived = remove_outliers(current, flags, created_by=user.username,
                                      created_at=self._now_iso())
            self._commit_new_version(c, derived, current.version, user.id)
        return derived

    # -- assets -----------------------------------------------------------------------

    def register_asset(self, data: bytes, kind: AssetKind, filename: str,
                       study_area_id: str, owner_id: Optional[str] = None,
                       bbox: Optional[tuple] = None, abstract: str = "",
                       limit: int = DEFAULT_ASSET_LIMIT) -> Asset:
        if len(data) > limit:
            raise TooLarge(f"{len(data)} bytes exceeds the {limit} byte limit")
        checksum = hashlib.sha256(data).hexdigest()
        asset_id = f"as-{checksum[:16]}"
        path = self.assets_dir / asset_id
        with open(path, "wb") as f:
            f.write(data)
            f.flush()
            os.fsync(f.fileno())
        asset = Asset(id=asset_id, kind=kind, filename=filename,
                      byte_size=len(data), checksum=checksum,
                      bbox=tuple(bbox) if bbox else None, record_id=asset_id)
        with self._write() as c:
            dup = c.execute("SELECT 1 FROM assets WHERE id = ?", (asset_id,)).fetchone()
            if dup:
                return asset
            c.execute(
                "INSERT INTO assets(id, kind, filename, byte_size, checksum, bbox, "
                "study_area_id, owner_id) VALUES (?, ?, ?, ?, ?, ?, ?, ?)",
                (asset.id, kind.value, filename, asset.byte_size, checksum,
                 json.dumps(list(bbox)) if bbox else None, study_area_id, owner_id))
            self._put_record(c, MetadataRecord(
                identifier=asset_id,
                title=filename,
                abstract=abstract or f"Stored {kind.value} file {filename}",
                keywords=(kind.value, "asset", filename),
                rtype=RecordType(kind.value),
                bbox=tuple(bbox) if bbox else None,
                modified=self._now_iso(),
            ))
        return asset

    def get_asset(self, asset_id: str) -> tuple[Asset, bytes]:
        row = self._conn().execute(
            "SELECT * FROM assets WHERE id = ?", (asset_id,)).fetchone()
        if row is None:
            raise NotFound(f"asset {asset_id} not found")
        data = (self.assets_dir / asset_id).read_bytes()
        if hashlib.sha256(data).hexdigest() != row["checksum"]:
            raise ValidationError(f"asset {asset_id} bytes do not match checksum")
        asset = Asset(
            id=row["id"], kind=AssetKind(row["kind"]), filename=row["filename"],
            byte_size=row["byte_size"], checksum=row["checksum"],
            bbox=tuple(json.loads(row["bbox"])) if row["bbox"] else None,
            record_id=row["id"])
        return asset, data

    # -- integrity ---------------------------------------------------------------------

    def validate_store(self) -> tuple[list[str], dict]:
        """Full integrity sweep; returns (problems, counters)."""
        c = self._conn()
        problems: list[str] = []
        stats = {
            "series": self.count_series(),
            "stations": int(c.execute("SELECT COUNT(*) AS n FROM stations").fetchone()["n"]),
            "catchments": int(c.execute("SELECT COUNT(*) AS n FROM catchments").fetchone()["n"]),
            "assets": int(c.execute("SELECT COUNT(*) AS n FROM assets").fetchone()["n"]),
            "records": int(c.execute("SELECT COUNT(*) AS n FROM records").fetchone()["n"]),
            "users": int(c.execute("SELECT COUNT(*) AS n FROM users").fetchone()["n"]),
        }
        for row in c.execute("SELECT * FROM series_versions"):
            digest = hashlib.sha256(row["payload"]).hexdigest()
            if digest != row["payload_sha256"]:
                problems.append(f"series {row['series_id']} v{row['version']}: payload hash mismatch")
                continue
            try:
                s = series_from_payload(row["payload"])
            except Exception as exc:
                problems.append(f"series {row['series_id']} v{row['version']}: unreadable payload ({exc})")
                continue
            bad = validate_series(s)
            if bad:
                problems.append(f"series {row['series_id']} v{row['version']}: {', '.join(bad)}")
        for row in c.execute("SELECT * FROM series"):
            versions = [r["version"] for r in c.execute(
                "SELECT version FROM series_versions WHERE series_id = ? ORDER BY version",
                (row["id"],))]
            if versions != list(range(1, len(versions) + 1)):
                problems.append(f"series {row['id']}: version chain {versions} not contiguous")
            elif versions and versions[-1] != row["current_version"]:
                problems.append(f"series {row['id']}: head {row['current_version']} "
                                f"is not the latest version {versions[-1]}")
        dataset_ids = set()
        for table in ("series", "stations", "catchments", "assets"):
            dataset_ids.update(r["id"] for r in c.execute(f"SELECT id FROM {table}"))
        record_ids = {r["identifier"] for r in c.execute("SELECT identifier FROM records")}
        for missing in sorted(dataset_ids - record_ids):
            problems.append(f"dataset {missing}: no metadata record")
        for orphan in sorted(record_ids - dataset_ids):
            problems.append(f"record {orphan}: no underlying dataset")
        by_id = {cat.id: cat for cat in self.list_catchments()}
        for cat in by_id.values():
            try:
                catchment_depth(cat.id, by_id)
            except (ValidationError, KeyError) as exc:
                problems.append(f"catchment {cat.id}: broken hierarchy ({exc})")
        for row in c.execute("SELECT id, checksum FROM assets"):
            path = self.assets_dir / row["id"]
            if not path.exists():
                problems.append(f"asset {row['id']}: file missing")
            elif hashlib.sha256(path.read_bytes()).hexdigest() != row["checksum"]:
                problems.append(f"asset {row['id']}: bytes do not match checksum")
        return problems, stats
