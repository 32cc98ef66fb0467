"""Issue-tracker event ingestion and weekly open-item snapshots.

The input is a JSON-lines event log, one status transition per line.  Records
are reconstructed by replaying transitions, so the open-item count of any
past week can be recomputed deterministically: a week's snapshot counts the
records whose status at the last UTC instant of that ISO week is one of the
metric's open statuses.

Note the organisational convention baked into the builtin metric set:
"internally closed" is still an *open* status (the item awaits external
confirmation), while the terminal status that leaves the open set is plain
"closed".
"""

from __future__ import annotations

import csv
import json
from bisect import bisect_right
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import IO, Iterable, Iterator, Mapping

from .schedule import Direction
from .weeks import IsoWeek, week_range


class EventLogError(ValueError):
    """Malformed or inconsistent event-log input; carries the line number."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class MetricError(ValueError):
    """Raised when a metric query cannot be evaluated as requested."""


class ItemKind(Enum):
    DEFECT = "defect"
    CHANGE_REQUEST = "cr"


class Origin(Enum):
    INTERNAL = "internal"
    CUSTOMER = "customer"


class OriginFilter(Enum):
    INTERNAL = "internal"
    CUSTOMER = "customer"
    ANY = "any"


class ItemDomain(Enum):
    HW = "hw"
    SW = "sw"


class ReleaseFilter(Enum):
    NONE = "none"
    CURRENT_OR_PREVIOUS = "current_or_previous"


@dataclass(frozen=True, slots=True)
class StatusEvent:
    ts: datetime
    status: str


@dataclass(frozen=True, slots=True)
class TrackerRecord:
    """One tracked item with its full status history, time-ordered."""

    item_id: str
    kind: ItemKind
    origin: Origin
    domain: ItemDomain
    planned_release: str | None
    events: tuple[StatusEvent, ...]

    def __post_init__(self) -> None:
        if not self.events:
            raise MetricError(f"record {self.item_id!r} has no events")
        for prev, cur in zip(self.events, self.events[1:]):
            if cur.ts < prev.ts:
                raise MetricError(f"record {self.item_id!r} events not time-ordered")


@dataclass(frozen=True, slots=True)
class MetricDefinition:
    """A direction-aware, status-filtered count query over tracker records."""

    name: str
    kind: ItemKind
    origin: OriginFilter
    open_statuses: frozenset[str]
    release_filter: ReleaseFilter
    direction: Direction
    process_area: str

    def __post_init__(self) -> None:
        if not self.open_statuses:
            raise MetricError(f"metric {self.name!r} has no open statuses")


@dataclass(frozen=True, slots=True)
class StatusSnapshot:
    """Open-item counts of one metric at the end of one ISO week."""

    metric_name: str
    week: IsoWeek
    per_status: Mapping[str, int] = field(default_factory=dict)
    total: int = 0

    def __post_init__(self) -> None:
        if any(count < 0 for count in self.per_status.values()):
            raise MetricError("negative count in snapshot")
        if self.total != sum(self.per_status.values()):
            raise MetricError(
                f"snapshot total {self.total} != sum of per-status counts"
            )


def make_snapshot(metric_name: str, week: IsoWeek, per_status: Mapping[str, int]) -> StatusSnapshot:
    """Snapshot with statuses in deterministic (sorted) order and derived total."""
    ordered = {status: per_status[status] for status in sorted(per_status)}
    return StatusSnapshot(metric_name, week, ordered, sum(ordered.values()))


# --- Table-style builtin metric definitions ---------------------------------

DEFECT_OPEN_STATUSES: tuple[str, ...] = (
    "issued",
    "analyzing",
    "getting analysis",
    "assigned",
    "implemented",
    "verifying",
    "getting info",
    "internally closed",
)

CHANGE_REQUEST_OPEN_STATUSES: tuple[str, ...] = (
    "issued",
    "analyzing",
    "exit CCB",
    "getting analysis",
    "assigned",
    "implemented",
    "verifying",
    "getting info",
    "internally closed",
)

# Status an item takes when it leaves every open set for good.
CLOSED_STATUS = "closed"

OPEN_DEFECTS_INTERNAL = "Open defects (excluding customer) both HW and SW"
OPEN_DEFECTS_CUSTOMER = "Open customer defects"
OPEN_CHANGE_REQUESTS_INTERNAL = "Open change requests (excluding customer - internal)"
OPEN_CHANGE_REQUESTS_CUSTOMER = "Open customer change requests"


def builtin_metric_definitions() -> list[MetricDefinition]:
    """The four organisational count metrics for problem and change management."""
    defect_statuses = frozenset(DEFECT_OPEN_STATUSES)
    cr_statuses = frozenset(CHANGE_REQUEST_OPEN_STATUSES)
    return [
        MetricDefinition(
            OPEN_DEFECTS_INTERNAL,
            ItemKind.DEFECT,
            OriginFilter.INTERNAL,
            defect_statuses,
            ReleaseFilter.NONE,
            Direction.LOWER_IS_BETTER,
            "SUP.9",
        ),
        MetricDefinition(
            OPEN_DEFECTS_CUSTOMER,
            ItemKind.DEFECT,
            OriginFilter.CUSTOMER,
            defect_statuses,
            ReleaseFilter.NONE,
            Direction.LOWER_IS_BETTER,
            "SUP.9",
        ),
        MetricDefinition(
            OPEN_CHANGE_REQUESTS_INTERNAL,
            ItemKind.CHANGE_REQUEST,
            OriginFilter.INTERNAL,
            cr_statuses,
            ReleaseFilter.CURRENT_OR_PREVIOUS,
            Direction.LOWER_IS_BETTER,
            "SUP.10",
        ),
        MetricDefinition(
            OPEN_CHANGE_REQUESTS_CUSTOMER,
            ItemKind.CHANGE_REQUEST,
            OriginFilter.CUSTOMER,
            cr_statuses,
            ReleaseFilter.CURRENT_OR_PREVIOUS,
            Direction.LOWER_IS_BETTER,
            "SUP.10",
        ),
    ]


# --- event-log parsing -------------------------------------------------------

_REQUIRED_EVENT_KEYS = ("item", "kind", "origin", "domain", "planned_release", "ts", "status")


def parse_timestamp(text: str) -> datetime:
    """Parse an RFC 3339 timestamp; the result is normalized to UTC."""
    raw = text.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    parsed = datetime.fromisoformat(raw)
    if parsed.tzinfo is None:
        raise ValueError(f"timestamp {text!r} lacks a UTC offset")
    return parsed.astimezone(timezone.utc)


def _iter_lines(source: str | bytes | IO | Iterable[str]) -> Iterator[str]:
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    if isinstance(source, str):
        yield from source.splitlines()
        return
    for line in source:
        yield line.decode("utf-8") if isinstance(line, bytes) else line


def parse_event_log(source: str | bytes | IO | Iterable[str]) -> list[TrackerRecord]:
    """Parse a JSON-lines event log into records grouped by item id.

    Fails fast with a line-numbered error on malformed JSON, unknown field
    values, duplicated (item, ts, status) triples, decreasing timestamps
    within an item, or an item whose fixed attributes change between lines.
    """
    attrs: dict[str, tuple] = {}
    events: dict[str, list[StatusEvent]] = {}
    seen: set[tuple[str, datetime, str]] = set()
    for line_number, line in enumerate(_iter_lines(source), start=1):
        text = line.strip()
        if not text:
            continue
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise EventLogError(line_number, f"invalid JSON: {exc.msg}") from exc
        if not isinstance(obj, dict):
            raise EventLogError(line_number, "event line is not a JSON object")
        missing = [key for key in _REQUIRED_EVENT_KEYS if key not in obj]
        if missing:
            raise EventLogError(line_number, f"missing keys: {', '.join(missing)}")
        try:
            item = str(obj["item"])
            kind = ItemKind(obj["kind"])
            origin = Origin(obj["origin"])
            domain = ItemDomain(obj["domain"])
            release = obj["planned_release"]
            ts = parse_timestamp(obj["ts"])
            status = str(obj["status"])
        except ValueError as exc:
            raise EventLogError(line_number, str(exc)) from exc
        if release is not None and not isinstance(release, str):
            raise EventLogError(line_number, "planned_release must be text or null")

        key = (item, ts, status)
        if key in seen:
            raise EventLogError(
                line_number, f"duplicate event ({item}, {ts.isoformat()}, {status})"
            )
        seen.add(key)

        fixed = (kind, origin, domain, release)
        if item in attrs:
            if attrs[item] != fixed:
                raise EventLogError(
                    line_number, f"item {item!r} changes kind/origin/domain/release"
                )
            if ts < events[item][-1].ts:
                raise EventLogError(
                    line_number, f"item {item!r} timestamps decrease"
                )
        else:
            attrs[item] = fixed
            events[item] = []
        events[item].append(StatusEvent(ts, status))

    return [
        TrackerRecord(item, *attrs[item], tuple(events[item]))
        for item in attrs
    ]


def status_at(record: TrackerRecord, instant: datetime) -> str | None:
    """Status of the latest event at or before instant; None if not yet created."""
    timestamps = [event.ts for event in record.events]
    position = bisect_right(timestamps, instant)
    if position == 0:
        return None
    return record.events[position - 1].status


def _matches_filters(
    record: TrackerRecord,
    definition: MetricDefinition,
    current_release: str | None,
    previous_release: str | None,
) -> bool:
    if record.kind is not definition.kind:
        return False
    if definition.origin is not OriginFilter.ANY and record.origin.value != definition.origin.value:
        return False
    if definition.release_filter is ReleaseFilter.CURRENT_OR_PREVIOUS:
        if record.planned_release is None:
            return False
        if record.planned_release not in (current_release, previous_release):
            return False
    return True


def eval_metric(
    records: Iterable[TrackerRecord],
    definition: MetricDefinition,
    week: IsoWeek,
    current_release: str | None = None,
    previous_release: str | None = None,
) -> StatusSnapshot:
    """Count open items at the end of the week, broken down per status.

    When the metric is restricted to the current or previous customer
    release, both release names come from the caller: the predecessor is
    defined by the project's milestone order, which this module does not see.
    """
    if definition.release_filter is ReleaseFilter.CURRENT_OR_PREVIOUS and current_release is None:
        raise MetricError(
            f"metric {definition.name!r} filters on release but no current release given"
        )
    instant = week.end_instant()
    counts: dict[str, int] = {}
    for record in records:
        if not _matches_filters(record, definition, current_release, previous_release):
            continue
        status = status_at(record, instant)
        if status is not None and status in definition.open_statuses:
            counts[status] = counts.get(status, 0) + 1
    return make_snapshot(definition.name, week, counts)


def weekly_series(
    records: Iterable[TrackerRecord],
    definition: MetricDefinition,
    from_week: IsoWeek,
    to_week: IsoWeek,
    current_release: str | None = None,
    previous_release: str | None = None,
) -> list[StatusSnapshot]:
    """One snapshot per ISO week, inclusive on both ends."""
    materialized = list(records)
    return [
        eval_metric(materialized, definition, week, current_release, previous_release)
        for week in week_range(from_week, to_week)
    ]


# --- wire formats -------------------------------------------------------------


def snapshot_to_obj(snapshot: StatusSnapshot) -> dict:
    return {
        "metric": snapshot.metric_name,
        "week": str(snapshot.week),
        "per_status": dict(snapshot.per_status),
        "total": snapshot.total,
    }


def snapshot_from_obj(obj: dict) -> StatusSnapshot:
    try:
        return StatusSnapshot(
            obj["metric"],
            IsoWeek.parse(obj["week"]),
            {str(k): int(v) for k, v in obj["per_status"].items()},
            int(obj["total"]),
        )
    except (KeyError, TypeError, AttributeError) as exc:
        raise MetricError(f"malformed snapshot object: {exc}") from exc


def parse_snapshot_csv(source: str | IO | Iterable[str]) -> list[StatusSnapshot]:
    """Import precomputed snapshots (header: metric,week,status,count).

    This is the route for metrics whose values come from external tools
    rather than the event log, e.g. source-code metrics.
    """
    if isinstance(source, str):
        source = source.splitlines()
    reader = csv.DictReader(source)
    expected = ["metric", "week", "status", "count"]
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != expected:
        raise MetricError(f"snapshot CSV header must be {','.join(expected)}")
    grouped: dict[tuple[str, IsoWeek], dict[str, int]] = {}
    for row_number, row in enumerate(reader, start=2):
        metric = row["metric"].strip()
        week = IsoWeek.parse(row["week"])
        status = row["status"].strip()
        try:
            count = int(row["count"])
        except (TypeError, ValueError) as exc:
            raise MetricError(f"row {row_number}: bad count {row['count']!r}") from exc
        if count < 0:
            raise MetricError(f"row {row_number}: negative count")
        statuses = grouped.setdefault((metric, week), {})
        if status in statuses:
            raise MetricError(f"row {row_number}: duplicate status {status!r}")
        statuses[status] = count
    return [
        make_snapshot(metric, week, statuses)
        for (metric, week), statuses in grouped.items()
    ]


def metric_to_obj(definition: MetricDefinition) -> dict:
    return {
        "name": definition.name,
        "kind": definition.kind.value,
        "origin": definition.origin.value,
        "open_statuses": sorted(definition.open_statuses),
        "release_filter": definition.release_filter.value,
        "direction": definition.direction.value,
        "process_area": definition.process_area,
    }


def metric_from_obj(obj: dict) -> MetricDefinition:
    try:
        return MetricDefinition(
            obj["name"],
            ItemKind(obj["kind"]),
            OriginFilter(obj["origin"]),
            frozenset(obj["open_statuses"]),
            ReleaseFilter(obj["release_filter"]),
            Direction(obj["direction"]),
            obj["process_area"],
        )
    except (KeyError, TypeError) as exc:
        raise MetricError(f"malformed metric object: {exc}") from exc
