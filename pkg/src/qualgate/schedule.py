"""Threshold schedules: milestone anchors, escalation bands, interpolation.

A schedule pins a metric's planned value (the threshold) and three tolerated
deviation percentages (the escalation bands) to each milestone of a project.
Between milestones both the threshold and the bands are interpolated linearly
in calendar-week index; outside the milestone range values clamp to the
nearest anchor, because weeks before the first or after the last milestone
have no quality plan.  Bands decay to exactly zero at the final milestone:
no deviation is tolerated at project end.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from decimal import Decimal
from enum import Enum
from typing import Iterable, Sequence

from .fixedpoint import format_decimal, parse_decimal, q4
from .weeks import IsoWeek


class ScheduleError(ValueError):
    """Raised for schedules that cannot be built or used as requested."""


class Direction(Enum):
    """Whether smaller or larger metric values are the good side of the goal."""

    LOWER_IS_BETTER = "lower_is_better"
    HIGHER_IS_BETTER = "higher_is_better"


@dataclass(frozen=True, slots=True)
class Milestone:
    """A checkpoint week at which project quality is assessed."""

    name: str
    week: IsoWeek
    index: int = 0


@dataclass(frozen=True, slots=True)
class DeviationBands:
    """Tolerated deviation percentages for escalation levels 0, 1 and 2."""

    level0_pct: Decimal
    level1_pct: Decimal
    level2_pct: Decimal

    def __post_init__(self) -> None:
        if not (0 <= self.level0_pct <= self.level1_pct <= self.level2_pct):
            raise ScheduleError(
                "band percentages must satisfy 0 <= level0 <= level1 <= level2, "
                f"got {self.level0_pct}/{self.level1_pct}/{self.level2_pct}"
            )

    def as_tuple(self) -> tuple[Decimal, Decimal, Decimal]:
        return (self.level0_pct, self.level1_pct, self.level2_pct)

    def is_zero(self) -> bool:
        return self.level2_pct == 0


@dataclass(frozen=True, slots=True)
class ScheduleAnchor:
    """One milestone with its threshold value and deviation bands."""

    milestone: Milestone
    threshold: Decimal
    bands: DeviationBands


@dataclass(frozen=True, slots=True)
class ThresholdSchedule:
    """Per-metric milestone anchors; construction is lenient, see validate_schedule."""

    metric_name: str
    direction: Direction
    anchors: tuple[ScheduleAnchor, ...]

    def milestone_named(self, name: str) -> ScheduleAnchor:
        for anchor in self.anchors:
            if anchor.milestone.name == name:
                return anchor
        raise ScheduleError(f"no milestone named {name!r} in schedule {self.metric_name!r}")

    def first_week(self) -> IsoWeek:
        return self.anchors[0].milestone.week

    def last_week(self) -> IsoWeek:
        return self.anchors[-1].milestone.week


@dataclass(frozen=True, slots=True)
class SchedulePoint:
    """Interpolated schedule state at one week: threshold, bands and bounds."""

    week: IsoWeek
    threshold: Decimal
    bound0: Decimal
    bound1: Decimal
    bound2: Decimal
    bands: DeviationBands


def band_bound(threshold: Decimal, pct: Decimal, direction: Direction) -> Decimal:
    """Absolute escalation bound for a tolerated deviation percentage.

    Deviation is tolerated away from the goal on the adverse side only, so the
    bound sits above the threshold when lower values are better and below it
    when higher values are better.
    """
    if pct < 0:
        raise ScheduleError(f"band percentage must be >= 0, got {pct}")
    offset = threshold * pct / Decimal(100)
    if direction is Direction.LOWER_IS_BETTER:
        return q4(threshold + offset)
    return q4(threshold - offset)


def _lerp(a: Decimal, b: Decimal, num: int, den: int) -> Decimal:
    # Single division keeps exactly-representable cases exact.
    return q4((a * (den - num) + b * num) / Decimal(den))


def build_schedule(
    metric_name: str,
    direction: Direction,
    milestones: Sequence[Milestone],
    start_threshold: Decimal,
    end_threshold: Decimal,
    base_bands: DeviationBands,
) -> ThresholdSchedule:
    """Generate anchors with linear threshold decay and linearly decaying bands.

    Anchor k of M receives the threshold interpolated from start to end and
    band percentages scaled by (1 - k/(M-1)), which forces all bands to zero
    at the final milestone.
    """
    if len(milestones) < 2:
        raise ScheduleError(f"need at least 2 milestones, got {len(milestones)}")
    steps = len(milestones) - 1
    anchors = []
    for k, milestone in enumerate(milestones):
        prev = milestones[k - 1] if k else None
        if prev is not None and milestone.week <= prev.week:
            raise ScheduleError(
                f"milestone weeks must strictly increase: {prev.week} then {milestone.week}"
            )
        threshold = _lerp(start_threshold, end_threshold, k, steps)
        bands = DeviationBands(
            *(_lerp(pct, Decimal(0), k, steps) for pct in base_bands.as_tuple())
        )
        anchors.append(
            ScheduleAnchor(replace(milestone, index=k), threshold, bands)
        )
    schedule = ThresholdSchedule(metric_name, direction, tuple(anchors))
    problems = validate_schedule(schedule)
    if problems:
        raise ScheduleError("; ".join(problems))
    return schedule


def validate_schedule(schedule: ThresholdSchedule) -> list[str]:
    """Check every schedule invariant; an empty report means valid."""
    problems: list[str] = []
    anchors = schedule.anchors
    if len(anchors) < 2:
        problems.append("fewer than 2 anchors")
        return problems
    names = [a.milestone.name for a in anchors]
    if len(set(names)) != len(names):
        problems.append("milestone names not unique")
    for prev, cur in zip(anchors, anchors[1:]):
        if cur.milestone.week <= prev.milestone.week:
            problems.append(
                f"milestone weeks not strictly increasing at {cur.milestone.name!r}"
            )
        if any(
            c > p for p, c in zip(prev.bands.as_tuple(), cur.bands.as_tuple())
        ):
            problems.append(
                f"bands not non-increasing at {cur.milestone.name!r}"
            )
    for k, anchor in enumerate(anchors):
        if anchor.milestone.index != k:
            problems.append(f"milestone index {anchor.milestone.index} at position {k}")
    if not anchors[-1].bands.is_zero():
        problems.append("final bands nonzero")
    return problems


def _point_at(schedule: ThresholdSchedule, week: IsoWeek, anchor: ScheduleAnchor) -> SchedulePoint:
    bounds = [
        band_bound(anchor.threshold, pct, schedule.direction)
        for pct in anchor.bands.as_tuple()
    ]
    return SchedulePoint(week, anchor.threshold, *bounds, anchor.bands)


def interpolate(schedule: ThresholdSchedule, week: IsoWeek) -> SchedulePoint:
    """Schedule state at a week: linear between anchors, clamped outside them."""
    problems = validate_schedule(schedule)
    if problems:
        raise ScheduleError("invalid schedule: " + "; ".join(problems))
    target = week.index()
    anchors = schedule.anchors
    if target <= anchors[0].milestone.week.index():
        return _point_at(schedule, week, anchors[0])
    if target >= anchors[-1].milestone.week.index():
        return _point_at(schedule, week, anchors[-1])
    for left, right in zip(anchors, anchors[1:]):
        left_idx = left.milestone.week.index()
        right_idx = right.milestone.week.index()
        if target < right_idx:
            num = target - left_idx
            den = right_idx - left_idx
            threshold = _lerp(left.threshold, right.threshold, num, den)
            bands = DeviationBands(
                *(
                    _lerp(p, c, num, den)
                    for p, c in zip(left.bands.as_tuple(), right.bands.as_tuple())
                )
            )
            bounds = [
                band_bound(threshold, pct, schedule.direction)
                for pct in bands.as_tuple()
            ]
            return SchedulePoint(week, threshold, *bounds, bands)
    raise AssertionError("unreachable: week inside anchor range")


# --- schedule.json wire format ---------------------------------------------


def schedule_to_obj(schedule: ThresholdSchedule) -> dict:
    return {
        "metric": schedule.metric_name,
        "direction": schedule.direction.value,
        "anchors": [
            {
                "name": anchor.milestone.name,
                "iso_week": str(anchor.milestone.week),
                "threshold": format_decimal(anchor.threshold),
                "bands": [format_decimal(p) for p in anchor.bands.as_tuple()],
            }
            for anchor in schedule.anchors
        ],
    }


def schedule_from_obj(obj: dict) -> ThresholdSchedule:
    try:
        direction = Direction(obj["direction"])
        anchors = tuple(
            ScheduleAnchor(
                Milestone(entry["name"], IsoWeek.parse(entry["iso_week"]), index),
                parse_decimal(entry["threshold"]),
                DeviationBands(*(parse_decimal(p) for p in entry["bands"])),
            )
            for index, entry in enumerate(obj["anchors"])
        )
        return ThresholdSchedule(obj["metric"], direction, anchors)
    except (KeyError, TypeError) as exc:
        raise ScheduleError(f"malformed schedule object: {exc}") from exc


def dump_schedules(schedules: Iterable[ThresholdSchedule]) -> str:
    return json.dumps([schedule_to_obj(s) for s in schedules], indent=2) + "\n"


def load_schedules(text: str) -> list[ThresholdSchedule]:
    data = json.loads(text) if text.strip() else []
    if not isinstance(data, list):
        raise ScheduleError("schedule file must hold a JSON array")
    return [schedule_from_obj(obj) for obj in data]


def milestones_from_pairs(pairs: Iterable[tuple[str, str]]) -> list[Milestone]:
    """Build an indexed milestone list from (name, "YYYY-Www") pairs."""
    return [
        Milestone(name, IsoWeek.parse(week), index)
        for index, (name, week) in enumerate(pairs)
    ]
