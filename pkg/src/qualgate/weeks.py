"""ISO-8601 calendar weeks: parsing, ordering, iteration and week boundaries.

Weeks are the time axis of the whole engine: milestones anchor to weeks,
snapshots are taken per week, and interpolation runs on the week index.  The
index is a global ordinal (weeks since the epoch Monday) so distances between
weeks of different ISO years are exact integers.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from typing import Iterator

_WEEK_RE = re.compile(r"^(\d{4})-W(\d{2})$")


class WeekError(ValueError):
    """Raised for malformed or impossible ISO week designators."""


@dataclass(frozen=True, order=True, slots=True)
class IsoWeek:
    """One ISO-8601 calendar week, e.g. 2013-W34."""

    year: int
    week: int

    def __post_init__(self) -> None:
        try:
            date.fromisocalendar(self.year, self.week, 1)
        except ValueError as exc:
            raise WeekError(f"no such ISO week: {self.year}-W{self.week:02d}") from exc

    @classmethod
    def parse(cls, text: str) -> IsoWeek:
        """Parse the "YYYY-Www" wire form."""
        match = _WEEK_RE.match(text.strip())
        if not match:
            raise WeekError(f"expected YYYY-Www, got {text!r}")
        return cls(int(match.group(1)), int(match.group(2)))

    @classmethod
    def from_date(cls, day: date) -> IsoWeek:
        iso = day.isocalendar()
        return cls(iso[0], iso[1])

    @classmethod
    def from_instant(cls, instant: datetime) -> IsoWeek:
        return cls.from_date(instant.astimezone(timezone.utc).date())

    def monday(self) -> date:
        return date.fromisocalendar(self.year, self.week, 1)

    def index(self) -> int:
        """Global week ordinal; consecutive weeks differ by exactly 1."""
        # date(1, 1, 1) is a Monday with ordinal 1, so Monday ordinals are
        # congruent to 1 mod 7 and the division below is exact.
        return (self.monday().toordinal() - 1) // 7

    def end_instant(self) -> datetime:
        """Last representable UTC instant of the week (Sunday 23:59:59.999999)."""
        next_monday = self.monday() + timedelta(days=7)
        return datetime.combine(
            next_monday, datetime.min.time(), tzinfo=timezone.utc
        ) - timedelta(microseconds=1)

    def next(self) -> IsoWeek:
        return IsoWeek.from_date(self.monday() + timedelta(days=7))

    def __str__(self) -> str:
        return f"{self.year}-W{self.week:02d}"


def week_range(start: IsoWeek, end: IsoWeek) -> Iterator[IsoWeek]:
    """Yield every week from start to end inclusive."""
    if start > end:
        raise WeekError(f"inverted week range: {start} .. {end}")
    current = start
    while current <= end:
        yield current
        current = current.next()
