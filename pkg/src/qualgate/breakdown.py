"""Break a project-level quality target down to module-level targets.

Count targets (e.g. open defects) are split proportionally to module size
with largest-remainder rounding, so the module targets always sum exactly to
the project target.  Ratio targets (e.g. coverage percentages) apply to every
module unchanged.  Modules are ranked for planning by descending priority,
ties broken by input order; priorities come from the projects reusing the
modules and are plain inputs here.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import IO, Iterable, Sequence


class BreakdownError(ValueError):
    """Raised for module lists a target cannot be allocated over."""


class BreakdownMode(Enum):
    COUNT_SHARE = "count_share"
    PER_MODULE_RATIO = "per_module_ratio"


@dataclass(frozen=True, slots=True)
class ModuleSpec:
    name: str
    size: int
    priority: int

    def __post_init__(self) -> None:
        if self.size <= 0:
            raise BreakdownError(f"module {self.name!r} has non-positive size {self.size}")


@dataclass(frozen=True, slots=True)
class ModuleTarget:
    module: ModuleSpec
    target: int
    plan_rank: int


def breakdown_targets(
    project_target: int,
    modules: Sequence[ModuleSpec],
    mode: BreakdownMode = BreakdownMode.COUNT_SHARE,
) -> list[ModuleTarget]:
    """Allocate the project target over modules and rank them for planning."""
    if not modules:
        raise BreakdownError("no modules to break the target down to")
    if project_target < 0:
        raise BreakdownError(f"negative project target {project_target}")
    names = [m.name for m in modules]
    if len(set(names)) != len(names):
        raise BreakdownError("module names not unique")

    if mode is BreakdownMode.PER_MODULE_RATIO:
        targets = [project_target] * len(modules)
    else:
        total_size = sum(m.size for m in modules)
        shares = [Fraction(project_target * m.size, total_size) for m in modules]
        targets = [int(share) for share in shares]  # floor
        leftover = project_target - sum(targets)
        # Hand out the leftover units by largest fractional remainder;
        # ties go to higher priority, then earlier input position.
        order = sorted(
            range(len(modules)),
            key=lambda i: (shares[i] - targets[i], modules[i].priority, -i),
            reverse=True,
        )
        for i in order[:leftover]:
            targets[i] += 1

    rank_order = sorted(
        range(len(modules)), key=lambda i: (-modules[i].priority, i)
    )
    ranks = [0] * len(modules)
    for rank, i in enumerate(rank_order, start=1):
        ranks[i] = rank
    return [
        ModuleTarget(module, target, rank)
        for module, target, rank in zip(modules, targets, ranks)
    ]


def parse_modules_csv(source: str | IO | Iterable[str]) -> list[ModuleSpec]:
    """Read module specs (header: module,size,priority)."""
    if isinstance(source, str):
        source = source.splitlines()
    reader = csv.DictReader(source)
    expected = ["module", "size", "priority"]
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != expected:
        raise BreakdownError(f"modules CSV header must be {','.join(expected)}")
    modules = []
    for row_number, row in enumerate(reader, start=2):
        try:
            modules.append(
                ModuleSpec(row["module"].strip(), int(row["size"]), int(row["priority"]))
            )
        except (TypeError, ValueError) as exc:
            raise BreakdownError(f"row {row_number}: {exc}") from exc
    return modules


def targets_to_csv(targets: Iterable[ModuleTarget]) -> str:
    lines = ["module,target,plan_rank"]
    lines += [f"{t.module.name},{t.target},{t.plan_rank}" for t in targets]
    return "\n".join(lines) + "\n"
