"""File store: layout, append-only contracts, event-sourced dispositions."""

from __future__ import annotations

import json
import random
from decimal import Decimal

import pytest

from qualgate.evaluate import Disposition, evaluate_week
from qualgate.ingest import builtin_metric_definitions, make_snapshot
from qualgate.store import (
    DATA_FILES,
    ProjectStore,
    StoreError,
    salvage_jsonl,
)
from qualgate.weeks import IsoWeek

from test_schedule import pilot_schedule


@pytest.fixture
def store(tmp_path):
    return ProjectStore.init(tmp_path, "project-a")


def snapshot(week, count, metric="Open defects (excluding customer) both HW and SW"):
    statuses = {"assigned": count} if count else {}
    return make_snapshot(metric, IsoWeek.parse(week), statuses)


def test_init_creates_layout(tmp_path):
    store = ProjectStore.init(tmp_path, "project-a")
    names = sorted(p.name for p in store.directory.iterdir())
    assert names == sorted(DATA_FILES + ("manifest.json",))
    manifest = json.loads(store.path("manifest.json").read_text())
    assert manifest == {"format_version": "1", "project_id": "project-a"}


def test_init_rejects_non_empty_directory(tmp_path):
    target = tmp_path / "project-a"
    target.mkdir()
    (target / "junk.txt").write_text("x")
    with pytest.raises(StoreError):
        ProjectStore.init(tmp_path, "project-a")


def test_init_then_open_is_empty(tmp_path):
    ProjectStore.init(tmp_path, "project-a")
    store = ProjectStore.open(tmp_path, "project-a")
    assert store.load_schedules() == []
    assert store.load_records() == []
    assert store.load_series("anything") == []
    assert store.list_open_escalations() == []


def test_open_rejects_mismatched_project(tmp_path):
    store = ProjectStore.init(tmp_path, "project-a")
    (store.directory / "manifest.json").write_text(
        json.dumps({"format_version": "1", "project_id": "other"})
    )
    with pytest.raises(StoreError):
        ProjectStore.open(tmp_path, "project-a")


def test_append_snapshots_round_trip(store):
    count = store.append_snapshots([snapshot("2013-W34", 3), snapshot("2013-W35", 2)])
    assert count == 2
    assert store.append_snapshots([snapshot("2013-W36", 1), snapshot("2013-W37", 0), snapshot("2013-W38", 4)]) == 3
    series = store.load_series("Open defects (excluding customer) both HW and SW")
    assert [s.total for s in series] == [3, 2, 1, 0, 4]


def test_append_duplicate_key_leaves_file_unchanged(store):
    store.append_snapshots([snapshot("2013-W34", 3)])
    before = store.path("snapshots.jsonl").read_bytes()
    with pytest.raises(StoreError):
        store.append_snapshots([snapshot("2013-W40", 9), snapshot("2013-W34", 1)])
    assert store.path("snapshots.jsonl").read_bytes() == before
    with pytest.raises(StoreError):
        store.append_snapshots([snapshot("2013-W41", 1), snapshot("2013-W41", 1)])
    assert store.path("snapshots.jsonl").read_bytes() == before


def test_load_series_sorts_by_week(store):
    store.append_snapshots([snapshot("2014-W02", 9), snapshot("2013-W40", 8), snapshot("2013-W52", 7)])
    series = store.load_series("Open defects (excluding customer) both HW and SW")
    assert [str(s.week) for s in series] == ["2013-W40", "2013-W52", "2014-W02"]


def test_truncated_final_line_detected_and_salvageable(store):
    store.append_snapshots([snapshot("2013-W34", 3), snapshot("2013-W35", 2)])
    path = store.path("snapshots.jsonl")
    intact = path.read_text()
    path.write_text(intact + '{"metric": "Open def')
    with pytest.raises(StoreError) as err:
        store.load_series("Open defects (excluding customer) both HW and SW")
    assert "line 3" in str(err.value)
    assert "truncated" in str(err.value)
    objects, problem = salvage_jsonl(path)
    assert len(objects) == 2
    assert problem is not None


def test_corrupt_middle_line_reports_line_number(store):
    path = store.path("snapshots.jsonl")
    path.write_text('{"metric": "m", "week": "2013-W34", "per_status": {}, "total": 0}\nnot json\n')
    with pytest.raises(StoreError) as err:
        store.load_series("m")
    assert "line 2" in str(err.value)


def test_escalation_event_sourcing(store):
    schedule = pilot_schedule()
    store.save_schedule(schedule)
    week = IsoWeek.parse("2014-W06")
    event = evaluate_week(snapshot("2014-W06", 340), schedule)
    store.append_escalation(event)
    open_events = store.list_open_escalations()
    assert len(open_events) == 1
    assert open_events[0].disposition is Disposition.OPEN

    updated = store.update_disposition(
        schedule.metric_name, week, Disposition.RESOLVED, "fixed by merge"
    )
    assert updated.disposition is Disposition.RESOLVED
    assert store.list_open_escalations() == []
    # the log keeps both lines
    assert len(store.load_escalations()) == 2


def test_update_disposition_unknown_key_errors(store):
    with pytest.raises(StoreError):
        store.update_disposition(
            "Open defects (excluding customer) both HW and SW",
            IsoWeek.parse("2014-W06"),
            Disposition.RESOLVED,
            "n/a",
        )


def test_schedule_save_and_replace(store):
    schedule = pilot_schedule()
    store.save_schedule(schedule)
    assert store.load_schedule(schedule.metric_name) == schedule
    store.save_schedule(schedule)
    assert len(store.load_schedules()) == 1
    with pytest.raises(StoreError):
        store.load_schedule("unknown metric")


def test_metric_definitions_roundtrip_and_builtin_fallback(store):
    assert store.load_metric_definitions() == []
    builtin = builtin_metric_definitions()
    found = store.find_metric_definition(builtin[0].name)
    assert found == builtin[0]
    store.save_metric_definitions(builtin)
    assert store.load_metric_definitions() == builtin
    with pytest.raises(StoreError):
        store.find_metric_definition("no such metric")


def test_append_events_validates_against_history(store):
    line = json.dumps(
        {
            "item": "D-1",
            "kind": "defect",
            "origin": "internal",
            "domain": "sw",
            "planned_release": None,
            "ts": "2013-08-19T09:00:00Z",
            "status": "issued",
        }
    )
    assert store.append_events([line]) == 1
    with pytest.raises(ValueError):
        store.append_events([line])  # duplicate triple against history
    assert len(store.load_records()) == 1


def test_snapshot_round_trip_random_instances(store):
    rng = random.Random(55)
    statuses = ["issued", "analyzing", "assigned", "verifying", "exit CCB"]
    batch = []
    week = IsoWeek.parse("2013-W01")
    for i in range(60):
        per_status = {
            s: rng.randrange(0, 50) for s in rng.sample(statuses, rng.randint(0, 4))
        }
        batch.append(make_snapshot(f"metric-{i % 3}", week, per_status))
        week = week.next()
    store.append_snapshots(batch)
    restored = {
        (s.metric_name, s.week): s
        for name in ("metric-0", "metric-1", "metric-2")
        for s in store.load_series(name)
    }
    for original in batch:
        assert restored[(original.metric_name, original.week)] == original
