"""Reporting: weekly chart data, SVG rendering, text status, compliance map.

The chart mirrors the weekly tracking view: stacked per-status open counts
with four overlay lines (goal plus the three escalation bounds) interpolated
from the schedule, and x-axis labels only every 6th week to stay readable.
Rendering is plain SVG 1.1 built by string assembly so identical input gives
byte-identical output.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .evaluate import Level, evaluate_week
from .fixedpoint import format_decimal
from .ingest import StatusSnapshot
from .schedule import ThresholdSchedule, interpolate
from .store import ProjectStore, StoreError
from .weeks import IsoWeek

X_LABEL_EVERY = 6

OVERLAY_COLORS = {
    "threshold": "green",
    "l0": "yellow",
    "l1": "orange",
    "l2": "red",
}

_STACK_PALETTE = (
    "#c6dbef",
    "#9ecae1",
    "#6baed6",
    "#4292c6",
    "#2171b5",
    "#08519c",
    "#083d70",
    "#7fcdbb",
    "#41b6c4",
)


class ReportError(ValueError):
    """Raised for unreportable input (empty series, unknown weeks or names)."""


@dataclass(frozen=True, slots=True)
class ChartSeries:
    """Everything needed to draw one metric's weekly tracking chart."""

    metric_name: str
    weeks: tuple[IsoWeek, ...]
    stacked: Mapping[str, tuple[int, ...]]
    overlays: Mapping[str, tuple[Decimal, ...]]
    x_labels: tuple[IsoWeek, ...]


def chart_data(series: Sequence[StatusSnapshot], schedule: ThresholdSchedule) -> ChartSeries:
    """Stacked status series plus interpolated overlay lines, one point per week."""
    if not series:
        raise ReportError("no snapshots to chart")
    for snapshot in series:
        if snapshot.metric_name != schedule.metric_name:
            raise ReportError(
                f"snapshot metric {snapshot.metric_name!r} does not match "
                f"schedule {schedule.metric_name!r}"
            )
    weeks = tuple(s.week for s in series)
    if list(weeks) != sorted(weeks):
        raise ReportError("snapshots must be week-sorted")

    statuses = sorted(
        {
            status
            for snapshot in series
            for status, count in snapshot.per_status.items()
            if count
        }
    )
    stacked = {
        status: tuple(s.per_status.get(status, 0) for s in series)
        for status in statuses
    }
    points = [interpolate(schedule, week) for week in weeks]
    overlays = {
        "threshold": tuple(p.threshold for p in points),
        "l0": tuple(p.bound0 for p in points),
        "l1": tuple(p.bound1 for p in points),
        "l2": tuple(p.bound2 for p in points),
    }
    return ChartSeries(
        schedule.metric_name,
        weeks,
        stacked,
        overlays,
        weeks[::X_LABEL_EVERY],
    )


def chart_to_obj(chart: ChartSeries) -> dict:
    return {
        "metric": chart.metric_name,
        "weeks": [str(w) for w in chart.weeks],
        "stacks": {k: list(v) for k, v in chart.stacked.items()},
        "overlays": {
            k: [format_decimal(value) for value in v] for k, v in chart.overlays.items()
        },
        "x_labels": [str(w) for w in chart.x_labels],
    }


def render_svg(chart: ChartSeries) -> bytes:
    """Render the chart as a standalone SVG document, deterministically."""
    width, height = 900, 380
    left, right, top, bottom = 60.0, 20.0, 20.0, 50.0
    plot_w = width - left - right
    plot_h = height - top - bottom
    n = len(chart.weeks)

    stack_tops = [
        sum(counts[i] for counts in chart.stacked.values()) for i in range(n)
    ]
    overlay_max = max(
        (value for line in chart.overlays.values() for value in line),
        default=Decimal(0),
    )
    scale_max = max(float(max(stack_tops, default=0)), float(overlay_max), 1.0)

    def x(i: int) -> float:
        if n == 1:
            return left + plot_w / 2
        return left + plot_w * i / (n - 1)

    def y(value: float) -> float:
        return top + plot_h - plot_h * value / scale_max

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>\n',
        f'<text x="{left:.2f}" y="14" font-size="12" font-family="sans-serif">'
        f"{_escape(chart.metric_name)}</text>\n",
    ]

    # stacked areas, bottom-up in status order
    cumulative = [0.0] * n
    for k, (status, counts) in enumerate(chart.stacked.items()):
        lower = cumulative[:]
        cumulative = [lower[i] + counts[i] for i in range(n)]
        top_pts = " ".join(f"{x(i):.2f},{y(cumulative[i]):.2f}" for i in range(n))
        bottom_pts = " ".join(
            f"{x(i):.2f},{y(lower[i]):.2f}" for i in range(n - 1, -1, -1)
        )
        color = _STACK_PALETTE[k % len(_STACK_PALETTE)]
        parts.append(
            f'<polygon class="stack" points="{top_pts} {bottom_pts}" '
            f'fill="{color}" stroke="none"><title>{_escape(status)}</title></polygon>\n'
        )

    for key in ("threshold", "l0", "l1", "l2"):
        line = chart.overlays[key]
        pts = " ".join(f"{x(i):.2f},{y(float(v)):.2f}" for i, v in enumerate(line))
        parts.append(
            f'<polyline class="overlay-{key}" points="{pts}" fill="none" '
            f'stroke="{OVERLAY_COLORS[key]}" stroke-width="2"/>\n'
        )

    axis_y = top + plot_h
    parts.append(
        f'<line x1="{left:.2f}" y1="{axis_y:.2f}" x2="{left + plot_w:.2f}" '
        f'y2="{axis_y:.2f}" stroke="black"/>\n'
    )
    label_indexes = {w: i for i, w in enumerate(chart.weeks)}
    for week in chart.x_labels:
        i = label_indexes[week]
        parts.append(
            f'<text class="x-label" x="{x(i):.2f}" y="{axis_y + 16:.2f}" font-size="10" '
            f'font-family="sans-serif" text-anchor="middle">{week}</text>\n'
        )
    parts.append(
        f'<text x="4" y="{y(scale_max) + 10:.2f}" font-size="10" '
        f'font-family="sans-serif">{format_decimal(Decimal(str(scale_max)))}</text>\n'
    )
    parts.append(f'<text x="4" y="{axis_y:.2f}" font-size="10" font-family="sans-serif">0</text>\n')
    parts.append("</svg>\n")
    return "".join(parts).encode("utf-8")


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


_LEVEL_TEXT = {
    Level.ON_TRACK: "on track",
    Level.LEVEL0: "level 0",
    Level.LEVEL1: "level 1",
    Level.LEVEL2: "level 2",
}


def weekly_report(store: ProjectStore, week: IsoWeek) -> str:
    """Plain-text status for one week: per metric, then open escalations."""
    snapshots = [s for s in store.load_all_snapshots() if s.week == week]
    if not snapshots:
        raise ReportError(f"no snapshots stored for week {week}")
    lines = [f"Weekly quality status {week} (project {store.project_id})"]
    for snapshot in sorted(snapshots, key=lambda s: s.metric_name):
        schedule = store.load_schedule(snapshot.metric_name)
        event = evaluate_week(snapshot, schedule)
        dev = event.deviation
        level_text = _LEVEL_TEXT[event.level.value]
        if event.level.out_of_range:
            level_text += " (out of range)"
        line = (
            f"{snapshot.metric_name}: actual {format_decimal(dev.actual)}"
            f" | threshold {format_decimal(dev.threshold)}"
            f" | deviation {format_decimal(dev.pct)}%"
            f" | {level_text}"
        )
        if event.route is not None:
            line += f" | escalate {event.route.from_role} -> {event.route.to_role}"
        lines.append(line)
    open_events = store.list_open_escalations()
    if open_events:
        lines.append("Open escalations:")
        for event in open_events:
            dev = event.deviation
            lines.append(
                f"  {dev.metric_name} {dev.week}: {_LEVEL_TEXT[event.level.value]}"
                f" -> {event.route.to_role}"
            )
    else:
        lines.append("Open escalations: none")
    return "\n".join(lines) + "\n"


# --- process-element compliance mapping ---------------------------------------


class Stereotype(Enum):
    ACTIVITY = "Activity"
    DATA_OBJECT = "DataObject"
    DATA_STORE = "DataStore"
    POOL = "Pool"
    START_EVENT = "StartEvent"


@dataclass(frozen=True, slots=True)
class ComplianceElement:
    """One process element with the practices it satisfies in each standard."""

    element_name: str
    stereotype: Stereotype
    cmmi_refs: tuple[str, ...]
    aspice_refs: tuple[str, ...]
    implemented: bool = False

    def __post_init__(self) -> None:
        if not self.cmmi_refs and not self.aspice_refs:
            raise ReportError(
                f"element {self.element_name!r} maps to no practice at all"
            )


_A = Stereotype.ACTIVITY
_DO = Stereotype.DATA_OBJECT
_DS = Stereotype.DATA_STORE
_P = Stereotype.POOL
_SE = Stereotype.START_EVENT

_COMPLIANCE_ROWS: tuple[tuple[str, Stereotype, tuple[str, ...], tuple[str, ...]], ...] = (
    ("EE Quality Assurance Strategy", _DO, ("MA GP 2.1",), ("MAN.6.BP1", "MAN.6.BP2")),
    ("Maintain quality assurance strategy", _A, ("MA GP 2.1", "MA GP 2.6"), ()),
    (
        "Hold sprint meeting",
        _A,
        ("MA GP 2.10", "MA GP 2.3", "MA GP 2.4"),
        (
            "MAN.6 GP 2.1.4",
            "MAN.6 GP 2.1.5",
            "MAN.6 GP 2.1.6",
            "MAN.6 GP 2.2.1",
            "MAN.6 GP 2.2.2",
            "MAN.6 GP 2.2.3",
        ),
    ),
    ("Communicate results", _A, ("MA GP 2.10", "MA.SP 2.4"), ("MAN.6.BP9",)),
    (
        "Plan measurement sprint",
        _A,
        ("MA GP 2.2",),
        ("MAN.6 GP 2.1.1", "MAN.6 GP 2.1.2", "MAN.6 GP 2.1.5", "MAN.6 GP 2.2.3"),
    ),
    ("Sprint Planning Document", _DO, ("MA GP 2.2", "MA GP 2.6"), ()),
    ("Quality Department", _P, ("MA GP 2.4",), ()),
    ("Train employee", _A, ("MA GP 2.5",), ()),
    ("Measurement and Analysis Training Material", _DO, ("MA GP 2.5",), ()),
    ("Training Attendance Sheet", _DO, ("MA GP 2.5",), ()),
    ("Training Evaluation Sheet", _DO, ("MA GP 2.5",), ()),
    (
        "Collect measurement data",
        _A,
        ("MA GP 2.7", "MA.SP 2.1", "MA.SP 2.3"),
        ("MAN.6.BP6",),
    ),
    (
        "Monitor and control measurement process and its work products",
        _A,
        ("MA GP 2.8",),
        ("MAN.6 GP 2.1.3", "MAN.6 GP 2.2.4"),
    ),
    ("Evaluate adherence", _A, ("MA GP 2.9",), ()),
    ("Start", _SE, ("MA GP 3.1",), ()),
    ("Propose new metric", _A, ("MA GP 3.2",), ("MAN.6 GP 2.2.1", "MAN.6.BP3")),
    (
        "Define/refine measurement goal",
        _A,
        ("MA GP 3.2", "MA.SP 1.1"),
        (
            "ENG.2-10.GP 2.1.1",
            "MAN.3.GP 2.1.1",
            "MAN.6.BP3",
            "SUP.1.GP 2.1.1",
            "SUP.10.GP 2.1.1",
            "SUP.8.GP 2.1.1",
            "SUP.9.GP 2.1.1",
        ),
    ),
    (
        "Define/refine metrics and thresholds",
        _A,
        ("MA GP 3.2", "MA.SP 1.2"),
        ("MAN.6.BP4",),
    ),
    ("Define metric", _A, ("MA.SP 1.2",), ()),
    ("Define abstract milestones", _A, ("MA.SP 1.2", "MA.SP 1.3"), ()),
    ("Define measurement data collection", _A, ("MA.SP 1.3",), ()),
    ("Measure and analyse", _A, ("MA.SP 1.4",), ("MAN.6.BP5",)),
    ("Analyze measurement data", _A, ("MA.SP 2.2", "MA.SP 2.3"), ("MAN.6.BP7",)),
    (
        "Measurement and Analysis Database",
        _DS,
        ("MA.SP 2.3", "OPD.SP 1.4"),
        ("MAN.6.BP6",),
    ),
    ("Measurement and Analysis Process Responsible", _P, (), ("MAN.6 GP 2.1.4",)),
    ("Improve measurement approach", _A, (), ("MAN.6.BP10", "MAN.6.BP11")),
    ("Act", _A, (), ("MAN.6.BP8",)),
    ("Take appropriate action", _A, (), ("MAN.6.BP8",)),
    ("Project Quality Plan", _DO, (), ("SUP.1.BP1",)),
    ("Escalate violation of thresholds", _A, (), ("SUP.1.BP10",)),
)


def compliance_table() -> list[ComplianceElement]:
    """The full catalog of process elements with their practice mappings."""
    return [
        ComplianceElement(name, stereo, cmmi, aspice)
        for name, stereo, cmmi, aspice in _COMPLIANCE_ROWS
    ]


def compliance_report(implemented: Iterable[str]) -> dict:
    """Coverage of the catalog's practices by the implemented elements.

    Percentages are measured against the practices appearing in the catalog,
    not against the full standards.
    """
    by_name = {element.element_name: element for element in compliance_table()}
    chosen = sorted(set(implemented))
    unknown = [name for name in chosen if name not in by_name]
    if unknown:
        raise ReportError(f"unknown element names: {', '.join(unknown)}")
    all_cmmi = {ref for e in by_name.values() for ref in e.cmmi_refs}
    all_aspice = {ref for e in by_name.values() for ref in e.aspice_refs}
    covered_cmmi = {ref for name in chosen for ref in by_name[name].cmmi_refs}
    covered_aspice = {ref for name in chosen for ref in by_name[name].aspice_refs}
    return {
        "implemented": chosen,
        "cmmi": {
            "covered": sorted(covered_cmmi),
            "pct": round(100.0 * len(covered_cmmi) / len(all_cmmi), 2),
        },
        "aspice": {
            "covered": sorted(covered_aspice),
            "pct": round(100.0 * len(covered_aspice) / len(all_aspice), 2),
        },
    }
