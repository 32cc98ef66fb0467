"""Deviation computation, escalation classification and role routing.

A deviation is the signed relative distance of the measured value from the
interpolated threshold, in percent; positive means the adverse side of the
goal.  Escalation is one-sided: values better than the goal never escalate.
Band membership is inclusive at the upper edge of each level, so a deviation
of exactly 10% against bands 10/20/30 is still level 0.  Deviations beyond
the widest band are level 2 flagged out-of-range (there is no level 3), and
an adverse value against a zero threshold has no finite percentage, which the
all-zero final milestone turns into an automatic out-of-range level 2.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from decimal import Decimal
from enum import Enum

from .fixedpoint import INFINITE, format_decimal, parse_decimal, q4
from .ingest import StatusSnapshot
from .schedule import (
    DeviationBands,
    Direction,
    SchedulePoint,
    ThresholdSchedule,
    interpolate,
)
from .weeks import IsoWeek

PROJECT_QUALITY_LEADER = "Project Quality Leader"
PROJECT_LEADER = "Project Leader"
QUALITY_DEPARTMENT_LEADER = "Quality Department Leader"
HIGHER_LEVEL_MANAGEMENT = "Higher Level Management"


class EvaluationError(ValueError):
    """Raised for evaluations that violate an operation's preconditions."""


class Level(Enum):
    ON_TRACK = "ontrack"
    LEVEL0 = "l0"
    LEVEL1 = "l1"
    LEVEL2 = "l2"


_LEVEL_RANK = {Level.ON_TRACK: 0, Level.LEVEL0: 1, Level.LEVEL1: 2, Level.LEVEL2: 3}


@dataclass(frozen=True, slots=True)
class EscalationLevel:
    value: Level
    out_of_range: bool = False

    def __post_init__(self) -> None:
        if self.out_of_range and self.value is not Level.LEVEL2:
            raise EvaluationError("only level 2 can be out of range")

    def rank(self) -> int:
        """Severity order: OnTrack < L0 < L1 < L2 < L2 out-of-range."""
        return _LEVEL_RANK[self.value] + (1 if self.out_of_range else 0)


@dataclass(frozen=True, slots=True)
class RoleRoute:
    from_role: str
    to_role: str

    def __post_init__(self) -> None:
        if not self.from_role or not self.to_role:
            raise EvaluationError("route roles must be non-empty")


@dataclass(frozen=True, slots=True)
class Deviation:
    metric_name: str
    week: IsoWeek
    actual: Decimal
    threshold: Decimal
    pct: Decimal
    adverse: bool

    def __post_init__(self) -> None:
        expected_adverse = self.pct.is_infinite() or self.pct > 0
        if self.adverse != expected_adverse:
            raise EvaluationError("adverse flag inconsistent with pct sign")
        if self.pct.is_infinite() and (self.threshold != 0 or not self.adverse):
            raise EvaluationError("infinite pct requires zero threshold and adverse value")


class Disposition(Enum):
    OPEN = "open"
    ROOT_CAUSE_RECORDED = "root_cause_recorded"
    REPLANNED = "replanned"
    RESOLVED = "resolved"


@dataclass(frozen=True, slots=True)
class EscalationEvent:
    deviation: Deviation
    level: EscalationLevel
    route: RoleRoute | None
    disposition: Disposition
    note: str = ""

    def __post_init__(self) -> None:
        if (self.route is not None) != (self.level.value is not Level.ON_TRACK):
            raise EvaluationError("route must be present exactly for escalated levels")


def deviation(
    actual: Decimal,
    point: SchedulePoint,
    direction: Direction,
    metric_name: str = "",
) -> Deviation:
    """Relative deviation of actual from the threshold at this week, percent."""
    threshold = point.threshold
    if direction is Direction.LOWER_IS_BETTER:
        distance = actual - threshold
    else:
        distance = threshold - actual
    if threshold == 0:
        pct = INFINITE if distance > 0 else Decimal(0)
    else:
        pct = q4(distance * 100 / threshold)
    adverse = pct.is_infinite() or pct > 0
    return Deviation(metric_name, point.week, actual, threshold, pct, adverse)


def classify(
    dev: Deviation,
    point: SchedulePoint,
    bands: DeviationBands | None = None,
) -> EscalationLevel:
    """Map a deviation into an escalation level via the interpolated bands."""
    limits = (bands if bands is not None else point.bands).as_tuple()
    pct = dev.pct
    if not dev.adverse:
        return EscalationLevel(Level.ON_TRACK)
    if pct <= limits[0]:
        return EscalationLevel(Level.LEVEL0)
    if pct <= limits[1]:
        return EscalationLevel(Level.LEVEL1)
    if pct <= limits[2]:
        return EscalationLevel(Level.LEVEL2)
    return EscalationLevel(Level.LEVEL2, out_of_range=True)


_ROUTES = {
    Level.LEVEL0: RoleRoute(PROJECT_QUALITY_LEADER, PROJECT_LEADER),
    Level.LEVEL1: RoleRoute(PROJECT_QUALITY_LEADER, QUALITY_DEPARTMENT_LEADER),
    Level.LEVEL2: RoleRoute(QUALITY_DEPARTMENT_LEADER, HIGHER_LEVEL_MANAGEMENT),
}


def route(level: EscalationLevel) -> RoleRoute | None:
    """Escalation routing: who raises the deviation and who receives it."""
    return _ROUTES.get(level.value)


def evaluate_week(snapshot: StatusSnapshot, schedule: ThresholdSchedule) -> EscalationEvent:
    """Interpolate, compute the deviation, classify and route, in one step.

    OnTrack weeks yield an event with no route and disposition Resolved;
    escalated weeks start Open and await a recorded disposition.
    """
    if snapshot.metric_name != schedule.metric_name:
        raise EvaluationError(
            f"snapshot metric {snapshot.metric_name!r} does not match "
            f"schedule metric {schedule.metric_name!r}"
        )
    point = interpolate(schedule, snapshot.week)
    dev = deviation(
        Decimal(snapshot.total), point, schedule.direction, snapshot.metric_name
    )
    level = classify(dev, point)
    level_route = route(level)
    disposition = Disposition.RESOLVED if level_route is None else Disposition.OPEN
    return EscalationEvent(dev, level, level_route, disposition)


def record_disposition(
    event: EscalationEvent, disposition: Disposition, note: str
) -> EscalationEvent:
    """New event value with the disposition updated and the note appended."""
    if event.level.value is Level.ON_TRACK:
        raise EvaluationError("cannot record a disposition on an on-track event")
    merged = f"{event.note}; {note}" if event.note and note else (note or event.note)
    return replace(event, disposition=disposition, note=merged)


# --- escalations.jsonl wire format -------------------------------------------


def escalation_to_obj(event: EscalationEvent) -> dict:
    dev = event.deviation
    return {
        "metric": dev.metric_name,
        "week": str(dev.week),
        "actual": format_decimal(dev.actual),
        "threshold": format_decimal(dev.threshold),
        "pct": format_decimal(dev.pct),
        "level": event.level.value.value,
        "out_of_range": event.level.out_of_range,
        "from_role": event.route.from_role if event.route else None,
        "to_role": event.route.to_role if event.route else None,
        "disposition": event.disposition.value,
        "note": event.note,
    }


def escalation_from_obj(obj: dict) -> EscalationEvent:
    try:
        pct = parse_decimal(obj["pct"])
        dev = Deviation(
            obj["metric"],
            IsoWeek.parse(obj["week"]),
            parse_decimal(obj["actual"]),
            parse_decimal(obj["threshold"]),
            pct,
            pct.is_infinite() or pct > 0,
        )
        level = EscalationLevel(Level(obj["level"]), bool(obj["out_of_range"]))
        role_route = (
            RoleRoute(obj["from_role"], obj["to_role"])
            if obj.get("from_role") is not None
            else None
        )
        return EscalationEvent(
            dev, level, role_route, Disposition(obj["disposition"]), obj.get("note", "")
        )
    except (KeyError, TypeError) as exc:
        raise EvaluationError(f"malformed escalation object: {exc}") from exc
