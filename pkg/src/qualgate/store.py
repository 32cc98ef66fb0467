"""Per-project measurement database on plain files.

Layout: ``<root>/<project_id>/`` holding a manifest, two JSON documents
(schedule.json, metrics.json) and three append-only JSON-lines logs
(events.jsonl, snapshots.jsonl, escalations.jsonl).  Logs are never
rewritten; disposition changes append superseding lines and the latest line
per key wins.  Writers take an advisory lock on ``.lock`` inside the project
directory, readers need no coordination.  A truncated final line (torn
write) is detected and reported with its line number; everything before it
stays readable.
"""

from __future__ import annotations

import fcntl
import json
import os
from contextlib import contextmanager
from pathlib import Path
from typing import Iterable, Iterator

from .evaluate import (
    Disposition,
    EscalationEvent,
    escalation_from_obj,
    escalation_to_obj,
    record_disposition,
)
from .ingest import (
    MetricDefinition,
    StatusSnapshot,
    TrackerRecord,
    builtin_metric_definitions,
    metric_from_obj,
    metric_to_obj,
    parse_event_log,
    snapshot_from_obj,
    snapshot_to_obj,
)
from .schedule import ThresholdSchedule, dump_schedules, load_schedules
from .weeks import IsoWeek

FORMAT_VERSION = "1"

MANIFEST_FILE = "manifest.json"
SCHEDULE_FILE = "schedule.json"
METRICS_FILE = "metrics.json"
EVENTS_FILE = "events.jsonl"
SNAPSHOTS_FILE = "snapshots.jsonl"
ESCALATIONS_FILE = "escalations.jsonl"
LOCK_FILE = ".lock"

DATA_FILES = (SCHEDULE_FILE, METRICS_FILE, EVENTS_FILE, SNAPSHOTS_FILE, ESCALATIONS_FILE)


class StoreError(ValueError):
    """Raised for missing, corrupt or contract-violating store content."""


def _read_jsonl(path: Path) -> list[dict]:
    """Parse a JSON-lines file strictly; line numbers make corruption findable."""
    objects = []
    text = path.read_text(encoding="utf-8")
    lines = text.split("\n")
    for line_number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            torn = line_number == len(lines) and not text.endswith("\n")
            reason = "truncated final line" if torn else f"corrupt line: {exc.msg}"
            raise StoreError(f"{path.name} line {line_number}: {reason}") from exc
        objects.append(obj)
    return objects


def salvage_jsonl(path: Path) -> tuple[list[dict], str | None]:
    """Read as far as the log is intact; returns (objects, problem or None)."""
    try:
        return _read_jsonl(path), None
    except StoreError as exc:
        problem = str(exc)
    objects = []
    for line in path.read_text(encoding="utf-8").split("\n"):
        if not line.strip():
            continue
        try:
            objects.append(json.loads(line))
        except json.JSONDecodeError:
            break
    return objects, problem


class ProjectStore:
    """Handle to one project's measurement files."""

    def __init__(self, root: Path | str, project_id: str):
        self.project_id = project_id
        self.directory = Path(root) / project_id

    # -- lifecycle -----------------------------------------------------------

    @classmethod
    def init(cls, root: Path | str, project_id: str) -> "ProjectStore":
        """Create the project layout; the directory must be absent or empty."""
        store = cls(root, project_id)
        directory = store.directory
        if directory.exists() and any(directory.iterdir()):
            raise StoreError(f"directory {directory} exists and is not empty")
        directory.mkdir(parents=True, exist_ok=True)
        manifest = {"format_version": FORMAT_VERSION, "project_id": project_id}
        (directory / MANIFEST_FILE).write_text(
            json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
        )
        for name in DATA_FILES:
            (directory / name).write_text("", encoding="utf-8")
        return store

    @classmethod
    def open(cls, root: Path | str, project_id: str) -> "ProjectStore":
        store = cls(root, project_id)
        manifest_path = store.directory / MANIFEST_FILE
        if not manifest_path.exists():
            raise StoreError(f"no project store at {store.directory}")
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        if manifest.get("format_version") != FORMAT_VERSION:
            raise StoreError(
                f"unsupported store format {manifest.get('format_version')!r}"
            )
        if manifest.get("project_id") != project_id:
            raise StoreError(
                f"manifest project id {manifest.get('project_id')!r} does not match "
                f"directory {project_id!r}"
            )
        return store

    def path(self, name: str) -> Path:
        return self.directory / name

    @contextmanager
    def _write_lock(self) -> Iterator[None]:
        # Single writer per project; readers never take the lock.
        lock_path = self.directory / LOCK_FILE
        fd = os.open(lock_path, os.O_CREAT | os.O_RDWR, 0o644)
        try:
            fcntl.flock(fd, fcntl.LOCK_EX)
            yield
        finally:
            fcntl.flock(fd, fcntl.LOCK_UN)
            os.close(fd)

    def _append_lines(self, name: str, lines: Iterable[str]) -> int:
        payload = "".join(line + "\n" for line in lines)
        if not payload:
            return 0
        with self._write_lock():
            with open(self.path(name), "a", encoding="utf-8") as handle:
                handle.write(payload)
                handle.flush()
                os.fsync(handle.fileno())
        return payload.count("\n")

    # -- schedules and metric definitions -------------------------------------

    def save_schedule(self, schedule: ThresholdSchedule) -> None:
        """Add or replace the schedule for one metric."""
        schedules = [
            s for s in self.load_schedules() if s.metric_name != schedule.metric_name
        ]
        schedules.append(schedule)
        with self._write_lock():
            self.path(SCHEDULE_FILE).write_text(
                dump_schedules(schedules), encoding="utf-8"
            )

    def load_schedules(self) -> list[ThresholdSchedule]:
        return load_schedules(self.path(SCHEDULE_FILE).read_text(encoding="utf-8"))

    def load_schedule(self, metric_name: str) -> ThresholdSchedule:
        for schedule in self.load_schedules():
            if schedule.metric_name == metric_name:
                return schedule
        raise StoreError(f"no schedule stored for metric {metric_name!r}")

    def save_metric_definitions(self, definitions: Iterable[MetricDefinition]) -> None:
        payload = json.dumps([metric_to_obj(d) for d in definitions], indent=2) + "\n"
        with self._write_lock():
            self.path(METRICS_FILE).write_text(payload, encoding="utf-8")

    def load_metric_definitions(self) -> list[MetricDefinition]:
        text = self.path(METRICS_FILE).read_text(encoding="utf-8")
        if not text.strip():
            return []
        return [metric_from_obj(obj) for obj in json.loads(text)]

    def find_metric_definition(self, name: str) -> MetricDefinition:
        """Project-specific definition if stored, else the builtin catalog."""
        for definition in self.load_metric_definitions():
            if definition.name == name:
                return definition
        for definition in builtin_metric_definitions():
            if definition.name == name:
                return definition
        raise StoreError(f"unknown metric {name!r}")

    # -- tracker events --------------------------------------------------------

    def append_events(self, lines: Iterable[str]) -> int:
        """Append raw event-log lines after validating them against history."""
        new_lines = [line.rstrip("\n") for line in lines if line.strip()]
        existing = self.path(EVENTS_FILE).read_text(encoding="utf-8")
        parse_event_log(existing.splitlines() + new_lines)
        return self._append_lines(EVENTS_FILE, new_lines)

    def load_records(self) -> list[TrackerRecord]:
        return parse_event_log(self.path(EVENTS_FILE).read_text(encoding="utf-8"))

    # -- snapshots ---------------------------------------------------------------

    def append_snapshots(self, snapshots: Iterable[StatusSnapshot]) -> int:
        """Append snapshots; duplicate (metric, week) keys reject the whole batch."""
        batch = list(snapshots)
        keys = [(s.metric_name, s.week) for s in batch]
        if len(set(keys)) != len(keys):
            raise StoreError("duplicate (metric, week) within snapshot batch")
        existing = {
            (s.metric_name, s.week) for s in self.load_all_snapshots()
        }
        clashes = [key for key in keys if key in existing]
        if clashes:
            metric, week = clashes[0]
            raise StoreError(f"snapshot for ({metric!r}, {week}) already stored")
        return self._append_lines(
            SNAPSHOTS_FILE, (json.dumps(snapshot_to_obj(s)) for s in batch)
        )

    def load_all_snapshots(self) -> list[StatusSnapshot]:
        return [snapshot_from_obj(obj) for obj in _read_jsonl(self.path(SNAPSHOTS_FILE))]

    def load_series(self, metric_name: str) -> list[StatusSnapshot]:
        """All snapshots of one metric, sorted by week."""
        series = [s for s in self.load_all_snapshots() if s.metric_name == metric_name]
        series.sort(key=lambda s: s.week)
        return series

    def load_snapshot(self, metric_name: str, week: IsoWeek) -> StatusSnapshot:
        for snapshot in self.load_all_snapshots():
            if snapshot.metric_name == metric_name and snapshot.week == week:
                return snapshot
        raise StoreError(f"no snapshot for ({metric_name!r}, {week})")

    def snapshot_weeks(self) -> list[IsoWeek]:
        return sorted({s.week for s in self.load_all_snapshots()})

    # -- escalations ---------------------------------------------------------------

    def append_escalation(self, event: EscalationEvent) -> None:
        self._append_lines(ESCALATIONS_FILE, [json.dumps(escalation_to_obj(event))])

    def load_escalations(self) -> list[EscalationEvent]:
        """Every stored line, oldest first, including superseded ones."""
        return [
            escalation_from_obj(obj) for obj in _read_jsonl(self.path(ESCALATIONS_FILE))
        ]

    def _latest_by_key(self) -> dict[tuple[str, IsoWeek], EscalationEvent]:
        latest: dict[tuple[str, IsoWeek], EscalationEvent] = {}
        for event in self.load_escalations():
            latest[(event.deviation.metric_name, event.deviation.week)] = event
        return latest

    def update_disposition(
        self, metric_name: str, week: IsoWeek, disposition: Disposition, note: str
    ) -> EscalationEvent:
        """Append a superseding line with the new disposition for (metric, week)."""
        latest = self._latest_by_key().get((metric_name, week))
        if latest is None:
            raise StoreError(f"no escalation recorded for ({metric_name!r}, {week})")
        updated = record_disposition(latest, disposition, note)
        self.append_escalation(updated)
        return updated

    def list_open_escalations(self) -> list[EscalationEvent]:
        """Events whose latest recorded disposition is still Open."""
        latest = self._latest_by_key()
        return [
            event
            for key, event in sorted(latest.items(), key=lambda kv: (kv[0][1], kv[0][0]))
            if event.disposition is Disposition.OPEN
        ]
