"""Stream panel container and CSV ingestion.

A Panel is a balanced set of demand streams sharing one calendar: every
stream covers exactly the same bins 1..L with L a multiple of the batch
size.  Missing bins are hard errors, never imputed, because the loss
streams downstream would silently change.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

import numpy as np

from .calendar import BusinessCalendar


class CsvParseError(ValueError):
    """A row that cannot be parsed; carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class PanelValidationError(ValueError):
    """Structurally invalid panel (unbalanced, negative or non-finite values)."""

    def __init__(self, message: str, missing: list | None = None):
        super().__init__(message)
        self.missing = missing or []


@dataclass(frozen=True)
class StreamSeries:
    """One stream's demand values per business bin, plus its calendar."""

    stream_id: str
    values: np.ndarray
    calendar: BusinessCalendar

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        values.setflags(write=False)
        if values.ndim != 1:
            raise PanelValidationError(f"stream {self.stream_id!r}: values must be 1-d")
        if len(values) % self.calendar.bins_per_day != 0:
            raise PanelValidationError(
                f"stream {self.stream_id!r}: length {len(values)} is not a "
                f"multiple of bins_per_day {self.calendar.bins_per_day}"
            )
        if not np.all(np.isfinite(values)):
            raise PanelValidationError(f"stream {self.stream_id!r}: non-finite values")
        if np.any(values < 0):
            raise PanelValidationError(f"stream {self.stream_id!r}: negative demand")

    @property
    def n_bins(self) -> int:
        return len(self.values)

    @property
    def n_days(self) -> int:
        return len(self.values) // self.calendar.bins_per_day

    def value_at(self, t: int) -> float:
        """Value at 1-based bin index t."""
        return float(self.values[t - 1])

    def day_slice(self, day: int) -> np.ndarray:
        b = self.calendar.bins_per_day
        return self.values[(day - 1) * b : day * b]


@dataclass(frozen=True)
class Panel:
    """Balanced collection of streams on a shared calendar."""

    streams: tuple
    calendar: BusinessCalendar

    def __post_init__(self) -> None:
        object.__setattr__(self, "streams", tuple(self.streams))
        if not self.streams:
            raise PanelValidationError("panel has no streams")
        lengths = {s.n_bins for s in self.streams}
        if len(lengths) != 1:
            raise PanelValidationError(f"streams have unequal lengths: {sorted(lengths)}")
        ids = [s.stream_id for s in self.streams]
        if len(set(ids)) != len(ids):
            raise PanelValidationError("duplicate stream ids")

    @property
    def D(self) -> int:
        return len(self.streams)

    @property
    def n_bins(self) -> int:
        return self.streams[0].n_bins

    @property
    def n_days(self) -> int:
        return self.streams[0].n_days

    @property
    def stream_ids(self) -> list[str]:
        return [s.stream_id for s in self.streams]

    def stream(self, stream_id: str) -> StreamSeries:
        for s in self.streams:
            if s.stream_id == stream_id:
                return s
        raise KeyError(f"unknown stream {stream_id!r}")

    def values_matrix(self) -> np.ndarray:
        """(D, n_bins) matrix in stream order."""
        return np.stack([s.values for s in self.streams])


CSV_HEADER = ["timestamp", "stream_id", "value"]


def ingest_csv(path: str | Path, calendar: BusinessCalendar) -> Panel:
    """Load a panel from CSV with header ``timestamp,stream_id,value``.

    Timestamps are ISO-8601 to the minute and must land exactly on the
    calendar's quarter-hour grid starting at ``first_date``.  Every stream
    must cover bins 1..L completely for some L that is a whole number of
    days; any hole raises :class:`PanelValidationError` naming the missing
    (stream, bin) pairs.
    """
    path = Path(path)
    per_stream: dict[str, dict[int, float]] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError(1, "empty file") from None
        if [h.strip() for h in header] != CSV_HEADER:
            raise CsvParseError(1, f"expected header {','.join(CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise CsvParseError(lineno, f"expected 3 fields, got {len(row)}")
            ts_raw, sid, val_raw = row[0].strip(), row[1].strip(), row[2].strip()
            try:
                ts = datetime.strptime(ts_raw, "%Y-%m-%dT%H:%M")
            except ValueError:
                raise CsvParseError(lineno, f"bad timestamp {ts_raw!r}") from None
            try:
                t = calendar.bin_of_timestamp(ts)
            except ValueError as exc:
                raise CsvParseError(lineno, str(exc)) from None
            try:
                value = float(val_raw)
            except ValueError:
                raise CsvParseError(lineno, f"bad value {val_raw!r}") from None
            if not np.isfinite(value):
                raise PanelValidationError(f"line {lineno}: non-finite demand for {sid!r}")
            if value < 0:
                raise PanelValidationError(f"line {lineno}: negative demand for {sid!r}")
            bins = per_stream.setdefault(sid, {})
            if t in bins:
                raise CsvParseError(lineno, f"duplicate bin {t} for stream {sid!r}")
            bins[t] = value
    if not per_stream:
        raise PanelValidationError("no data rows")

    length = max(max(b) for b in per_stream.values())
    missing = []
    for sid in sorted(per_stream):
        have = per_stream[sid]
        missing.extend((sid, t) for t in range(1, length + 1) if t not in have)
    if missing:
        shown = ", ".join(f"({sid}, bin {t})" for sid, t in missing[:10])
        more = "" if len(missing) <= 10 else f" and {len(missing) - 10} more"
        raise PanelValidationError(f"unbalanced panel, missing: {shown}{more}", missing=missing)
    if length % calendar.bins_per_day != 0:
        raise PanelValidationError(
            f"panel length {length} is not a whole number of days "
            f"(bins_per_day={calendar.bins_per_day})"
        )

    streams = []
    for sid in sorted(per_stream):
        bins = per_stream[sid]
        values = np.array([bins[t] for t in range(1, length + 1)], dtype=float)
        streams.append(StreamSeries(stream_id=sid, values=values, calendar=calendar))
    return Panel(streams=tuple(streams), calendar=calendar)


def write_csv(panel: Panel, path: str | Path) -> None:
    """Inverse of :func:`ingest_csv`; values round-trip bit-exactly via repr."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for s in panel.streams:
            for t in range(1, s.n_bins + 1):
                ts = panel.calendar.bin_timestamp(t)
                writer.writerow([ts.strftime("%Y-%m-%dT%H:%M"), s.stream_id, repr(float(s.values[t - 1]))])
