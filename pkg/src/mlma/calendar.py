"""Business-time calendar and batch indexing.

Demand arrives in quarter-hour bins during business hours only.  Internally
everything is indexed by the contiguous business-bin index t = 1, 2, ...
(overnight gaps collapsed), so a "day" is exactly ``bins_per_day``
consecutive bins and batch ends fall at t = B, 2B, 3B, ...
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta
from pathlib import Path


@dataclass(frozen=True)
class BusinessCalendar:
    """Maps contiguous business bins to wall-clock timestamps.

    ``event_dates`` are days on which the monitoring engine forces a model
    re-train regardless of the stability test outcome.
    """

    business_hours_per_day: int = 15
    first_date: date = date(2019, 1, 1)
    business_day_start: time = time(9, 0)
    event_dates: frozenset = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if self.business_hours_per_day < 1:
            raise ValueError("business_hours_per_day must be >= 1")
        bad = [d for d in self.event_dates if d < self.first_date]
        if bad:
            raise ValueError(f"event dates before first_date: {sorted(bad)}")

    @property
    def bins_per_day(self) -> int:
        return self.business_hours_per_day * 4

    # -- day arithmetic (day indices are 1-based) --

    def date_of_day(self, day: int) -> date:
        return self.first_date + timedelta(days=day - 1)

    def day_of_date(self, d: date) -> int:
        return (d - self.first_date).days + 1

    def day_of_bin(self, t: int) -> int:
        if t < 1:
            raise ValueError(f"bin index must be >= 1, got {t}")
        return (t - 1) // self.bins_per_day + 1

    def bin_of_day(self, day: int) -> int:
        """First bin index of the given day."""
        return (day - 1) * self.bins_per_day + 1

    def slot_of_bin(self, t: int) -> int:
        """Position of bin t within its day, 0-based."""
        return (t - 1) % self.bins_per_day

    def hour_slot(self, t: int) -> int:
        """Business hour of bin t, 0 .. business_hours_per_day-1."""
        return self.slot_of_bin(t) // 4

    def weekday_of_day(self, day: int) -> int:
        """0=Monday .. 6=Sunday."""
        return self.date_of_day(day).weekday()

    def bin_timestamp(self, t: int) -> datetime:
        day = self.day_of_bin(t)
        slot = self.slot_of_bin(t)
        start = datetime.combine(self.date_of_day(day), self.business_day_start)
        return start + timedelta(minutes=15 * slot)

    def bin_of_timestamp(self, ts: datetime) -> int:
        """Inverse of :meth:`bin_timestamp`; raises on off-grid timestamps."""
        day_start = datetime.combine(ts.date(), self.business_day_start)
        minutes = (ts - day_start).total_seconds() / 60.0
        slot, rem = divmod(minutes, 15.0)
        slot = int(slot)
        if rem != 0.0 or not (0 <= slot < self.bins_per_day):
            raise ValueError(f"timestamp {ts.isoformat()} is not a business bin")
        day = self.day_of_date(ts.date())
        if day < 1:
            raise ValueError(f"timestamp {ts.isoformat()} precedes calendar start")
        return (day - 1) * self.bins_per_day + slot + 1

    def batch_indices(self, series_length: int) -> list[BatchIndex]:
        """Batch ends of a series of ``series_length`` bins, with dates."""
        ends = batch_ends(series_length, self.bins_per_day)
        return [BatchIndex(t=b, b=b, day=self.date_of_day(self.day_of_bin(b))) for b in ends]


@dataclass(frozen=True)
class BatchIndex:
    """A batch-end position: global bin index t with mod(t, B) = 0."""

    t: int
    b: int
    day: date

    def __post_init__(self) -> None:
        if self.t != self.b:
            raise ValueError("batch end has t == b")


def batch_ends(series_length: int, bins_per_batch: int) -> list[int]:
    """All bin indices t <= series_length with mod(t, B) = 0, increasing.

    >>> batch_ends(180, 60)
    [60, 120, 180]
    """
    if bins_per_batch < 1:
        raise ValueError("bins_per_batch must be >= 1")
    if series_length < 0:
        raise ValueError("series_length must be >= 0")
    return list(range(bins_per_batch, series_length + 1, bins_per_batch))


def load_calendar_config(path: str | Path) -> BusinessCalendar:
    """Read a calendar config file.

    Keys: ``bins_per_day`` (multiple of 4), ``first_date`` (ISO date),
    ``business_day_start`` ("HH:MM"), ``event_dates`` (list of ISO dates).
    """
    raw = json.loads(Path(path).read_text())
    bins = int(raw.get("bins_per_day", 60))
    if bins % 4 != 0 or bins < 4:
        raise ValueError(f"bins_per_day must be a positive multiple of 4, got {bins}")
    hh, mm = str(raw.get("business_day_start", "09:00")).split(":")
    return BusinessCalendar(
        business_hours_per_day=bins // 4,
        first_date=date.fromisoformat(raw["first_date"]),
        business_day_start=time(int(hh), int(mm)),
        event_dates=frozenset(date.fromisoformat(d) for d in raw.get("event_dates", [])),
    )


def save_calendar_config(calendar: BusinessCalendar, path: str | Path) -> None:
    payload = {
        "bins_per_day": calendar.bins_per_day,
        "first_date": calendar.first_date.isoformat(),
        "business_day_start": calendar.business_day_start.strftime("%H:%M"),
        "event_dates": sorted(d.isoformat() for d in calendar.event_dates),
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")
