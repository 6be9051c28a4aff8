"""Command-line interface: each command against a real data directory,
plus the exit-code contract of the console entry point."""

import json
import subprocess
import sys

import pytest
from click.testing import CliRunner

from basinfo.cli import cli
from basinfo.ingest import FormatSpec, parse_series
from basinfo.model import Variable
from basinfo.store import BasinStore

from conftest import mkstation


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def seeded_dir(tmp_path):
    """Data dir with a study area and a station, ready for CLI ingest."""
    data_dir = tmp_path / "data"
    store = BasinStore(data_dir)
    store.create_study_area("sa-1", "Test area")
    store.register_station(mkstation("st-1"), "sa-1")
    store.close()
    return data_dir


SAMPLE = "1990-01-01\t1.0\n1990-01-02\t-9999\n1990-01-03\t3.5\n"


def test_ingest_reports_and_stores(runner, seeded_dir, tmp_path):
    src = tmp_path / "obs.txt"
    src.write_text(SAMPLE)
    result = runner.invoke(cli, [
        "ingest", str(src), "--data-dir", str(seeded_dir),
        "--series-id", "sr-cli", "--station-id", "st-1",
        "--variable", "precipitation", "--study-area", "sa-1"])
    assert result.exit_code == 0, result.output
    report = json.loads(result.output)
    assert report == {"seriesId": "sr-cli", "start": "1990-01-01",
                      "end": "1990-01-03", "days": 3}
    # The stored series equals a direct library parse of the same file.
    expected = parse_series(SAMPLE, FormatSpec(), series_id="sr-cli",
                            station_id="st-1", variable=Variable.PRECIPITATION)
    assert BasinStore(seeded_dir).get_series("sr-cli") == expected


def test_ingest_respects_data_dir_env(runner, seeded_dir, tmp_path):
    src = tmp_path / "obs.txt"
    src.write_text(SAMPLE)
    result = runner.invoke(cli, [
        "ingest", str(src), "--series-id", "sr-env", "--station-id", "st-1",
        "--variable", "precipitation", "--study-area", "sa-1"],
        env={"BASINFO_DATA_DIR": str(seeded_dir)})
    assert result.exit_code == 0, result.output
    assert BasinStore(seeded_dir).get_series("sr-env").values == (1.0, None, 3.5)


def test_export_round_trips_through_ingest(runner, seeded_dir, tmp_path):
    src = tmp_path / "obs.txt"
    src.write_text(SAMPLE)
    runner.invoke(cli, [
        "ingest", str(src), "--data-dir", str(seeded_dir),
        "--series-id", "sr-cli", "--station-id", "st-1",
        "--variable", "precipitation", "--study-area", "sa-1"])

    out_file = tmp_path / "export.txt"
    result = runner.invoke(cli, [
        "export", "sr-cli", "--data-dir", str(seeded_dir),
        "--out", str(out_file)])
    assert result.exit_code == 0, result.output
    text = out_file.read_text()
    assert "1990-01-02\t-9999" in text

    # Re-ingesting the exported file reproduces the values exactly.
    result = runner.invoke(cli, [
        "ingest", str(out_file), "--data-dir", str(seeded_dir),
        "--series-id", "sr-copy", "--station-id", "st-1",
        "--variable", "precipitation", "--study-area", "sa-1"])
    assert result.exit_code == 0, result.output
    store = BasinStore(seeded_dir)
    assert store.get_series("sr-copy").values == store.get_series("sr-cli").values


def test_export_to_stdout_and_aggregated(runner, seeded_dir, tmp_path):
    src = tmp_path / "obs.txt"
    src.write_text(SAMPLE)
    runner.invoke(cli, [
        "ingest", str(src), "--data-dir", str(seeded_dir),
        "--series-id", "sr-cli", "--station-id", "st-1",
        "--variable", "precipitation", "--study-area", "sa-1"])
    plain = runner.invoke(cli, ["export", "sr-cli", "--data-dir", str(seeded_dir)])
    assert plain.exit_code == 0
    assert "1990-01-01\t1" in plain.output

    agg = runner.invoke(cli, [
        "export", "sr-cli", "--data-dir", str(seeded_dir),
        "--aggregation",
        '{"step": "monthly", "gapPolicy": "tolerant", "maxMissingFraction": 1.0}'])
    assert agg.exit_code == 0
    assert "1990-01" in agg.output


def test_user_add_and_grant(runner, seeded_dir):
    added = runner.invoke(cli, [
        "user", "add", "kofi", "--data-dir", str(seeded_dir)],
        input="hunter2\n")
    assert added.exit_code == 0, added.output
    user_id = json.loads(added.stdout.splitlines()[-1])["id"]

    granted = runner.invoke(cli, [
        "user", "grant", user_id, "sa-1", "--data-dir", str(seeded_dir),
        "--action", "view-metadata", "--action", "view-data"])
    assert granted.exit_code == 0, granted.output

    store = BasinStore(seeded_dir)
    assert store.login("kofi", "hunter2")
    ctx = store.get_user_by_username("kofi")
    assert store.check_permission(ctx, "st-1", "view-data")
    assert not store.check_permission(ctx, "st-1", "edit")


def test_fixture_load_then_validate(runner, tmp_path):
    data_dir = tmp_path / "kara"
    loaded = runner.invoke(cli, [
        "fixture", "load", "kara", "--data-dir", str(data_dir)])
    assert loaded.exit_code == 0, loaded.output
    summary = json.loads(loaded.stdout)
    assert summary["series"] == 112
    assert summary["stations"] == 33

    checked = runner.invoke(cli, ["validate", "--data-dir", str(data_dir)])
    assert checked.exit_code == 0, checked.output
    stats = json.loads(checked.stdout)
    assert stats["problems"] == 0
    assert stats["series"] == 112


def test_validate_exits_nonzero_on_corruption(runner, seeded_dir, tmp_path):
    src = tmp_path / "obs.txt"
    src.write_text(SAMPLE)
    runner.invoke(cli, [
        "ingest", str(src), "--data-dir", str(seeded_dir),
        "--series-id", "sr-cli", "--station-id", "st-1",
        "--variable", "precipitation", "--study-area", "sa-1"])
    store = BasinStore(seeded_dir)
    with store._write() as c:
        c.execute("UPDATE series_versions SET payload = ?", (b"garbage",))
    store.close()

    result = runner.invoke(cli, ["validate", "--data-dir", str(seeded_dir)])
    assert result.exit_code == 1
    assert "payload hash mismatch" in result.stderr


def test_ingest_missing_file_fails(runner, seeded_dir):
    result = runner.invoke(cli, [
        "ingest", "/nonexistent/obs.txt", "--data-dir", str(seeded_dir),
        "--series-id", "s", "--station-id", "st-1",
        "--variable", "precipitation", "--study-area", "sa-1"])
    assert result.exit_code != 0


def run_entry_point(args, cwd):
    return subprocess.run(
        [sys.executable, "-c",
         "import sys; from basinfo.cli import main; "
         "sys.argv = ['basinfo'] + sys.argv[1:]; main()", *args],
        capture_output=True, text=True, cwd=cwd, timeout=60)


class TestEntryPointExitCodes:
    def test_ok_is_zero(self, seeded_dir):
        proc = run_entry_point(["validate", "--data-dir", str(seeded_dir)],
                               cwd=seeded_dir.parent)
        assert proc.returncode == 0

    def test_domain_error_is_one(self, seeded_dir):
        proc = run_entry_point(["export", "sr-ghost", "--data-dir", str(seeded_dir)],
                               cwd=seeded_dir.parent)
        assert proc.returncode == 1
        assert "error:" in proc.stderr

    def test_usage_error_is_one(self, seeded_dir):
        proc = run_entry_point(["ingest", "--series-id", "x"],
                               cwd=seeded_dir.parent)
        assert proc.returncode == 1
        assert proc.stderr
