"""Command-line entry points: serve, ingest, export, user admin, fixtures.

Exit codes: 0 success, 1 expected failure (bad input, not found, permission),
2 unexpected error.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path
from typing import Optional

import click

from .errors import BasinError
from .export import build_export, policy_from_json
from .ingest import FormatSpec, parse_series
from .model import Variable
from .store import ACTIONS, BasinStore

DEFAULT_PORT = 8080


def _data_dir(explicit: Optional[str]) -> Path:
    raw = explicit or os.environ.get("BASINFO_DATA_DIR") or "./basinfo-data"
    return Path(raw)


@click.group()
def cli() -> None:
    """Daily hydro-meteorological series: store, correct, analyse, serve."""


@cli.command()
@click.option("--data-dir", default=None, help="Storage directory (BASINFO_DATA_DIR).")
@click.option("--port", default=None, type=int, help="Listen port (BASINFO_PORT).")
@click.option("--host", default="127.0.0.1", show_default=True)
def serve(data_dir: Optional[str], port: Optional[int], host: str) -> None:
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    resolved_port = port or int(os.environ.get("BASINFO_PORT", DEFAULT_PORT))
    app = create_app(_data_dir(data_dir))
    uvicorn.run(app, host=host, port=resolved_port, log_level="warning")


@cli.command()
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.option("--data-dir", default=None)
@click.option("--series-id", required=True)
@click.option("--station-id", required=True)
@click.option("--variable", required=True,
              type=click.Choice([v.value for v in Variable]))
@click.option("--study-area", required=True)
@click.option("--format-spec", default=None,
              help="JSON format description; defaults to tab-delimited ISO dates.")
def ingest(path: str, data_dir: Optional[str], series_id: str, station_id: str,
           variable: str, study_area: str, format_spec: Optional[str]) -> None:
    """Parse a delimited text file and store it as a new version-1 series."""
    spec = FormatSpec.from_json_obj(json.loads(format_spec)) if format_spec \
        else FormatSpec()
    raw = Path(path).read_text(encoding="utf-8")
    s = parse_series(raw, spec, series_id=series_id, station_id=station_id,
                     variable=Variable(variable))
    store = BasinStore(_data_dir(data_dir))
    store.register_series(s, study_area)
    report = {"seriesId": s.id, "start": s.start.isoformat(),
              "end": s.end.isoformat(), "days": len(s)}
    click.echo(json.dumps(report))


@cli.command()
@click.argument("series_ids", nargs=-1, required=True)
@click.option("--data-dir", default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Output file; stdout when omitted.")
@click.option("--format-spec", default=None, help="JSON format description.")
@click.option("--aggregation", default=None,
              help='JSON aggregation policy, e.g. {"step": "monthly"}.')
def export(series_ids: tuple[str, ...], data_dir: Optional[str],
           out: Optional[str], format_spec: Optional[str],
           aggregation: Optional[str]) -> None:
    """Write one or more series as delimited text with lineage comments."""
    store = BasinStore(_data_dir(data_dir))
    spec = FormatSpec.from_json_obj(json.loads(format_spec)) if format_spec \
        else FormatSpec()
    policy = policy_from_json(json.loads(aggregation)) if aggregation else None
    text = build_export(store, list(series_ids), spec, policy)
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


@cli.group()
def user() -> None:
    """Manage accounts and permissions."""


@user.command("add")
@click.argument("username")
@click.option("--password", prompt=True, hide_input=True)
@click.option("--data-dir", default=None)
@click.option("--admin", is_flag=True, default=False)
@click.option("--group", "groups", multiple=True)
def user_add(username: str, password: str, data_dir: Optional[str],
             admin: bool, groups: tuple[str, ...]) -> None:
    """Create an account."""
    store = BasinStore(_data_dir(data_dir))
    user_id = store.add_user(username, password, is_admin=admin, groups=list(groups))
    click.echo(json.dumps({"id": user_id, "username": username}))


@user.command("grant")
@click.argument("subject_id")
@click.argument("object_id")
@click.option("--data-dir", default=None)
@click.option("--kind", type=click.Choice(["user", "group"]), default="user",
              show_default=True)
@click.option("--action", "actions", multiple=True, required=True,
              type=click.Choice(list(ACTIONS)))
def user_grant(subject_id: str, object_id: str, data_dir: Optional[str],
               kind: str, actions: tuple[str, ...]) -> None:
    """Grant actions on an object or study area to a user or group."""
    store = BasinStore(_data_dir(data_dir))
    grant_id = store.add_grant(subject_id, kind, object_id, list(actions))
    click.echo(json.dumps({"id": grant_id}))


@cli.group()
def fixture() -> None:
    """Seed demonstration datasets."""


@fixture.command("load")
@click.argument("name", type=click.Choice(["kara"]))
@click.option("--data-dir", default=None)
def fixture_load(name: str, data_dir: Optional[str]) -> None:
    """Populate the store with the named demonstration basin."""
    from .fixture import load_kara

    store = BasinStore(_data_dir(data_dir))
    summary = load_kara(store)
    click.echo(json.dumps(summary))


@cli.command()
@click.option("--data-dir", default=None)
def validate(data_dir: Optional[str]) -> None:
    """Check stored data for corruption; exit 1 when problems are found."""
    store = BasinStore(_data_dir(data_dir))
    problems, stats = store.validate_store()
    for p in problems:
        click.echo(f"problem: {p}", err=True)
    click.echo(json.dumps({"problems": len(problems), **stats}))
    if problems:
        raise SystemExit(1)


def main() -> None:
    try:
        cli.main(standalone_mode=False)
    except SystemExit as exc:
        raise exc
    except click.ClickException as exc:
        exc.show()
        sys.exit(1)
    except click.Abort:
        sys.exit(1)
    except BasinError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    except Exception as exc:  # pragma: no cover
        click.echo(f"unexpected error: {exc}", err=True)
        sys.exit(2)


if __name__ == "__main__":
    main()
