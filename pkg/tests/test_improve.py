"""Threshold-improvement rule against a counting oracle."""

from __future__ import annotations

import random
from decimal import Decimal

import pytest

from qualgate.fixedpoint import INFINITE
from qualgate.improve import (
    ImprovementDecision,
    PortfolioError,
    PortfolioObservation,
    improvement_check,
    parse_portfolio_csv,
    suggestions_catalog,
)
from qualgate.schedule import DeviationBands

BANDS = DeviationBands(Decimal(10), Decimal(20), Decimal(30))


def observations(pcts):
    return [
        PortfolioObservation(f"P{i}", "open defects", "Release 2.1.0", Decimal(str(p)))
        for i, p in enumerate(pcts)
    ]


def oracle_decision(pcts, bands, half=Decimal("0.5"), quarter=Decimal("0.25")):
    """Count-and-compare reference, written independently of the module."""
    n = len(pcts)
    fit_widest = len([p for p in pcts if p <= bands.level2_pct])
    fit_narrowest = len([p for p in pcts if p <= bands.level0_pct])
    if fit_widest >= n * half and fit_narrowest > n * quarter:
        return ImprovementDecision.KEEP_THRESHOLD
    return ImprovementDecision.ACTION_NEEDED


def test_keep_when_portfolio_fits():
    # 6 of 10 within the widest band, 3 of 10 within the narrowest.
    pcts = [5, 8, 9, 15, 25, 28, 40, 50, 60, 70]
    verdict = improvement_check(observations(pcts), BANDS)
    assert verdict.decision is ImprovementDecision.KEEP_THRESHOLD
    assert verdict.frac_within_l2 == Decimal("0.6")
    assert verdict.frac_within_l0 == Decimal("0.3")
    assert verdict.suggestions == ()


def test_action_when_narrow_fit_is_exactly_a_quarter():
    # 5 of 10 within l2 passes the half rule, but exactly 2 of 10 within l0
    # fails the strictly-more-than-a-quarter rule... 2/10 = 0.2 not > 0.25.
    pcts = [5, 9, 15, 25, 28, 40, 50, 60, 70, 80]
    verdict = improvement_check(observations(pcts), BANDS)
    assert verdict.frac_within_l2 == Decimal("0.5")
    assert verdict.frac_within_l0 == Decimal("0.2")
    assert verdict.decision is ImprovementDecision.ACTION_NEEDED
    assert verdict.suggestions == tuple(suggestions_catalog())


def test_boundary_half_and_over_quarter_keeps():
    # Exactly half within l2 and half within l0: 0.5 >= 0.5 and 0.5 > 0.25.
    pcts = [5, 8, 40, 50]
    verdict = improvement_check(observations(pcts), BANDS)
    assert verdict.frac_within_l2 == Decimal("0.5")
    assert verdict.frac_within_l0 == Decimal("0.5")
    assert verdict.decision is ImprovementDecision.KEEP_THRESHOLD


def test_boundary_exactly_quarter_within_l0_needs_action():
    # 4 projects, exactly 1 within l0: 0.25 is not > 0.25.
    pcts = [5, 12, 14, 40]
    verdict = improvement_check(observations(pcts), BANDS)
    assert verdict.frac_within_l0 == Decimal("0.25")
    assert verdict.decision is ImprovementDecision.ACTION_NEEDED


def test_favorable_deviation_fits_every_band():
    verdict = improvement_check(observations([-5, 0, -30]), BANDS)
    assert verdict.frac_within_l2 == 1
    assert verdict.frac_within_l0 == 1
    assert verdict.decision is ImprovementDecision.KEEP_THRESHOLD


def test_infinite_deviation_fits_nothing():
    pcts = [INFINITE] * 9 + [Decimal(0)]
    obs = [
        PortfolioObservation(f"P{i}", "m", "ms", p) for i, p in enumerate(pcts)
    ]
    verdict = improvement_check(obs, BANDS)
    assert verdict.frac_within_l2 == Decimal("0.1")
    assert verdict.decision is ImprovementDecision.ACTION_NEEDED


def test_rejects_empty_and_mixed_portfolios():
    with pytest.raises(PortfolioError):
        improvement_check([], BANDS)
    mixed = observations([1, 2])
    mixed[1] = PortfolioObservation("P1", "other metric", "Release 2.1.0", Decimal(2))
    with pytest.raises(PortfolioError):
        improvement_check(mixed, BANDS)


def test_rejects_duplicate_projects():
    twice = [
        PortfolioObservation("P0", "m", "ms", Decimal(1)),
        PortfolioObservation("P0", "m", "ms", Decimal(2)),
    ]
    with pytest.raises(PortfolioError):
        improvement_check(twice, BANDS)


def test_verdict_matches_oracle_on_random_portfolios():
    rng = random.Random(31)
    for _ in range(1000):
        n = rng.randint(1, 40)
        pcts = [Decimal(rng.randrange(-2000, 8000)) / 100 for _ in range(n)]
        if rng.random() < 0.2:
            pcts[rng.randrange(n)] = INFINITE
        raw = sorted(Decimal(rng.randrange(0, 5000)) / 100 for _ in range(3))
        bands = DeviationBands(*raw)
        obs = [PortfolioObservation(f"P{i}", "m", "ms", p) for i, p in enumerate(pcts)]
        verdict = improvement_check(obs, bands)
        assert verdict.decision == oracle_decision(pcts, bands)
        assert verdict.frac_within_l0 <= verdict.frac_within_l2
        shuffled = obs[:]
        rng.shuffle(shuffled)
        assert improvement_check(shuffled, bands) == verdict


def test_monotone_improvement():
    rng = random.Random(32)
    for _ in range(300):
        n = rng.randint(1, 20)
        pcts = [Decimal(rng.randrange(-100, 6000)) / 100 for _ in range(n)]
        obs = [PortfolioObservation(f"P{i}", "m", "ms", p) for i, p in enumerate(pcts)]
        verdict = improvement_check(obs, BANDS)
        if verdict.decision is ImprovementDecision.KEEP_THRESHOLD:
            i = rng.randrange(n)
            improved = obs[:]
            improved[i] = PortfolioObservation(
                obs[i].project_id, "m", "ms", obs[i].pct - Decimal(rng.randrange(0, 500)) / 100
            )
            assert (
                improvement_check(improved, BANDS).decision
                is ImprovementDecision.KEEP_THRESHOLD
            )


def test_suggestions_catalog_content():
    catalog = suggestions_catalog()
    assert len(catalog) == 3
    assert "modification of the thresholds" in catalog
    assert "redefinition of the metric" in catalog
    assert "communication of the importance of the metric" in catalog


def test_portfolio_csv_parse():
    text = "\n".join(
        [
            "project,metric,milestone,pct",
            "alpha,open defects,Release 2.1.0,12.5",
            "beta,open defects,Release 2.1.0,inf",
            "gamma,open defects,Release 2.1.0,-3",
        ]
    )
    obs = parse_portfolio_csv(text)
    assert len(obs) == 3
    assert obs[1].pct.is_infinite()
    assert obs[2].pct == -3
    with pytest.raises(PortfolioError):
        parse_portfolio_csv("project,pct\nx,1")
    with pytest.raises(PortfolioError):
        parse_portfolio_csv(text + "\nalpha,open defects,Release 2.1.0,1")
