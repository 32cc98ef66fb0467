"""Portfolio-wide threshold-improvement rule.

A threshold is kept when at least half of the projects fit within the widest
escalation band and strictly more than a quarter fit within the narrowest
one; otherwise action is needed.  The asymmetry (>= for the half, > for the
quarter) is deliberate.  A project that beats its goal (pct <= 0) fits
within every band.  Both cut-offs are configurable; the defaults are the
organisational rule.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from decimal import Decimal
from enum import Enum
from typing import IO, Iterable, Sequence

from .fixedpoint import parse_decimal, q4
from .schedule import DeviationBands


class PortfolioError(ValueError):
    """Raised for portfolios the improvement rule cannot be applied to."""


class ImprovementDecision(Enum):
    KEEP_THRESHOLD = "keep_threshold"
    ACTION_NEEDED = "action_needed"


@dataclass(frozen=True, slots=True)
class PortfolioObservation:
    """Adverse deviation of one project's metric at one milestone."""

    project_id: str
    metric_name: str
    milestone_name: str
    pct: Decimal


@dataclass(frozen=True, slots=True)
class ImprovementVerdict:
    decision: ImprovementDecision
    frac_within_l2: Decimal
    frac_within_l0: Decimal
    suggestions: tuple[str, ...]


def suggestions_catalog() -> list[str]:
    """The alternative actions when a threshold does not hold up portfolio-wide."""
    return [
        "modification of the thresholds",
        "communication of the importance of the metric",
        "redefinition of the metric",
    ]


def improvement_check(
    observations: Sequence[PortfolioObservation],
    bands: DeviationBands,
    *,
    min_within_widest: Decimal = Decimal("0.5"),
    min_within_narrowest: Decimal = Decimal("0.25"),
) -> ImprovementVerdict:
    """Decide whether the threshold behind these observations should stay."""
    if not observations:
        raise PortfolioError("no observations to check")
    metrics = {o.metric_name for o in observations}
    milestones = {o.milestone_name for o in observations}
    if len(metrics) > 1 or len(milestones) > 1:
        raise PortfolioError(
            f"observations mix metrics {sorted(metrics)} or milestones {sorted(milestones)}"
        )
    keys = {(o.project_id, o.metric_name, o.milestone_name) for o in observations}
    if len(keys) != len(observations):
        raise PortfolioError("duplicate project observations")

    total = len(observations)
    within_l2 = sum(1 for o in observations if o.pct <= bands.level2_pct)
    within_l0 = sum(1 for o in observations if o.pct <= bands.level0_pct)
    keep = (
        within_l2 >= total * min_within_widest
        and within_l0 > total * min_within_narrowest
    )
    decision = (
        ImprovementDecision.KEEP_THRESHOLD if keep else ImprovementDecision.ACTION_NEEDED
    )
    suggestions = () if keep else tuple(suggestions_catalog())
    return ImprovementVerdict(
        decision,
        q4(Decimal(within_l2) / total),
        q4(Decimal(within_l0) / total),
        suggestions,
    )


def parse_portfolio_csv(source: str | IO | Iterable[str]) -> list[PortfolioObservation]:
    """Read observations (header: project,metric,milestone,pct; pct may be "inf")."""
    if isinstance(source, str):
        source = source.splitlines()
    reader = csv.DictReader(source)
    expected = ["project", "metric", "milestone", "pct"]
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != expected:
        raise PortfolioError(f"portfolio CSV header must be {','.join(expected)}")
    observations = []
    seen = set()
    for row_number, row in enumerate(reader, start=2):
        try:
            pct = parse_decimal(row["pct"])
        except ValueError as exc:
            raise PortfolioError(f"row {row_number}: {exc}") from exc
        key = (row["project"].strip(), row["metric"].strip(), row["milestone"].strip())
        if key in seen:
            raise PortfolioError(f"row {row_number}: duplicate observation for {key}")
        seen.add(key)
        observations.append(PortfolioObservation(*key, pct))
    return observations
