"""Feature construction for the demand forecaster.

Each target bin t of a stream gets one row: a linear trend (the global bin
index), hour-of-business-day indicators, day-of-week indicators with one
reference category dropped, and same-bin lags of *all* streams one day and
one week back.  Cross-stream lags let the model pick up spillovers between
streams.  For D streams and 15 business hours the row has
1 + 15 + 6 + 2D columns (86 when D = 32).
"""

from __future__ import annotations

import numpy as np

from .panel import Panel


class InsufficientHistoryError(ValueError):
    """Requested bins whose day/week lags precede the sample start."""


N_DOW_DUMMIES = 6  # Monday is the dropped reference category


def feature_count(panel: Panel) -> int:
    return 1 + panel.calendar.business_hours_per_day + N_DOW_DUMMIES + 2 * panel.D


def feature_names(panel: Panel) -> list[str]:
    cal = panel.calendar
    names = ["trend"]
    names += [f"hour_{h}" for h in range(cal.business_hours_per_day)]
    names += [f"dow_{d}" for d in range(1, N_DOW_DUMMIES + 1)]
    names += [f"lag_day_{sid}" for sid in panel.stream_ids]
    names += [f"lag_week_{sid}" for sid in panel.stream_ids]
    return names


def min_feature_bin(panel: Panel) -> int:
    """First bin with both lags observed: one week of history plus one."""
    return 7 * panel.calendar.bins_per_day + 1


def build_rows(panel: Panel, t_values: np.ndarray) -> np.ndarray:
    """Feature rows for the given 1-based bin indices (any stream's target)."""
    cal = panel.calendar
    t = np.asarray(t_values, dtype=np.int64)
    if len(t) == 0:
        raise ValueError("empty bin-index range")
    lag_week = 7 * cal.bins_per_day
    if t.min() <= lag_week:
        raise InsufficientHistoryError(
            f"bin {int(t.min())} needs history before bin 1 (lags {cal.bins_per_day} "
            f"and {lag_week} must both exist; first usable bin is {lag_week + 1})"
        )
    n = len(t)
    hours = cal.business_hours_per_day
    X = np.zeros((n, 1 + hours + N_DOW_DUMMIES + 2 * panel.D))
    X[:, 0] = t.astype(float)
    slot = (t - 1) % cal.bins_per_day
    hour = slot // 4
    X[np.arange(n), 1 + hour] = 1.0
    day = (t - 1) // cal.bins_per_day  # 0-based day index
    dow = (cal.first_date.weekday() + day) % 7
    has_dummy = dow >= 1
    X[np.arange(n)[has_dummy], 1 + hours + dow[has_dummy] - 1] = 1.0
    values = panel.values_matrix()
    base = 1 + hours + N_DOW_DUMMIES
    X[:, base : base + panel.D] = values[:, t - 1 - cal.bins_per_day].T
    X[:, base + panel.D : base + 2 * panel.D] = values[:, t - 1 - lag_week].T
    return X


def build_feature_matrix(
    panel: Panel, target_stream: str, t_start: int, t_end: int
) -> tuple[np.ndarray, np.ndarray]:
    """(features, targets) for the target stream over bins t_start..t_end."""
    if t_end < t_start:
        raise ValueError(f"empty bin range {t_start}..{t_end}")
    if t_end > panel.n_bins:
        raise ValueError(f"bin {t_end} beyond panel end {panel.n_bins}")
    t = np.arange(t_start, t_end + 1, dtype=np.int64)
    X = build_rows(panel, t)
    y = panel.stream(target_stream).values[t - 1].copy()
    return X, y


class FeatureCache:
    """One-shot feature rows for every bin of a panel with full lag history.

    Feature rows contain only lagged values and deterministic calendar
    terms, so precomputing them over the whole panel leaks nothing: the
    row for bin t is identical whether built from data through bin t-1 or
    from the full sample.
    """

    def __init__(self, panel: Panel):
        self.panel = panel
        self.t0 = min_feature_bin(panel)
        if self.t0 > panel.n_bins:
            raise InsufficientHistoryError("panel shorter than one week of lags")
        self._X = build_rows(panel, np.arange(self.t0, panel.n_bins + 1, dtype=np.int64))

    def rows(self, t_start: int, t_end: int) -> np.ndarray:
        """Feature rows for bins t_start..t_end inclusive (read-only view)."""
        if t_start < self.t0:
            raise InsufficientHistoryError(f"bin {t_start} precedes first usable bin {self.t0}")
        if t_end > self.panel.n_bins:
            raise ValueError(f"bin {t_end} beyond panel end {self.panel.n_bins}")
        return self._X[t_start - self.t0 : t_end - self.t0 + 1]
