"""Module-level goal allocation: conservation, proportionality, ranking."""

from __future__ import annotations

import random
from fractions import Fraction

import pytest

from qualgate.breakdown import (
    BreakdownError,
    BreakdownMode,
    ModuleSpec,
    breakdown_targets,
    parse_modules_csv,
    targets_to_csv,
)


def modules(sizes, priorities=None):
    priorities = priorities or [0] * len(sizes)
    return [
        ModuleSpec(f"mod{i}", size, priority)
        for i, (size, priority) in enumerate(zip(sizes, priorities))
    ]


def test_exact_proportional_split():
    targets = breakdown_targets(100, modules([50, 30, 20]))
    assert [t.target for t in targets] == [50, 30, 20]


def test_largest_remainder_tie_goes_to_priority():
    # 10 over three equal modules: everyone gets 3, the spare unit goes to
    # the priority-3 module.
    targets = breakdown_targets(10, modules([1, 1, 1], [3, 1, 2]))
    assert [t.target for t in targets] == [4, 3, 3]
    assert [t.plan_rank for t in targets] == [1, 3, 2]


def test_single_module_takes_everything():
    targets = breakdown_targets(7, modules([123]))
    assert [t.target for t in targets] == [7]
    assert targets[0].plan_rank == 1


def test_ratio_mode_copies_target():
    targets = breakdown_targets(85, modules([50, 30, 20]), BreakdownMode.PER_MODULE_RATIO)
    assert [t.target for t in targets] == [85, 85, 85]


def test_rejects_bad_inputs():
    with pytest.raises(BreakdownError):
        breakdown_targets(10, [])
    with pytest.raises(BreakdownError):
        ModuleSpec("m", 0, 1)
    with pytest.raises(BreakdownError):
        breakdown_targets(-1, modules([1]))
    with pytest.raises(BreakdownError):
        breakdown_targets(1, [ModuleSpec("a", 1, 0), ModuleSpec("a", 2, 0)])


def test_conservation_and_proportionality_random():
    rng = random.Random(41)
    for _ in range(1000):
        n = rng.randint(1, 12)
        sizes = [rng.randint(1, 500) for _ in range(n)]
        priorities = [rng.randint(-5, 5) for _ in range(n)]
        target = rng.randint(0, 2000)
        result = breakdown_targets(target, modules(sizes, priorities))
        got = [t.target for t in result]
        assert sum(got) == target
        total_size = sum(sizes)
        for value, size in zip(got, sizes):
            exact = Fraction(target * size, total_size)
            assert abs(Fraction(value) - exact) < 1


def test_size_scale_invariance():
    rng = random.Random(42)
    for _ in range(200):
        n = rng.randint(1, 8)
        sizes = [rng.randint(1, 100) for _ in range(n)]
        priorities = [rng.randint(0, 5) for _ in range(n)]
        target = rng.randint(0, 500)
        scale = rng.randint(2, 9)
        base = breakdown_targets(target, modules(sizes, priorities))
        scaled = breakdown_targets(target, modules([s * scale for s in sizes], priorities))
        assert [t.target for t in base] == [t.target for t in scaled]


def test_rank_ignores_sizes():
    a = breakdown_targets(10, modules([5, 50, 500], [1, 5, 3]))
    b = breakdown_targets(10, modules([500, 50, 5], [1, 5, 3]))
    assert [t.plan_rank for t in a] == [t.plan_rank for t in b] == [3, 1, 2]


def test_rank_tie_uses_input_order():
    targets = breakdown_targets(0, modules([1, 1, 1], [2, 2, 1]))
    assert [t.plan_rank for t in targets] == [1, 2, 3]


def test_csv_round_trip():
    text = "module,size,priority\ncore,120,3\nio,60,1\n"
    specs = parse_modules_csv(text)
    assert specs == [ModuleSpec("core", 120, 3), ModuleSpec("io", 60, 1)]
    out = targets_to_csv(breakdown_targets(9, specs))
    assert out == "module,target,plan_rank\ncore,6,1\nio,3,2\n"
    with pytest.raises(BreakdownError):
        parse_modules_csv("module,size\nx,1")
