"""Trained forecaster handles: random forest and seasonal naive.

A ForecastModel is an opaque trained forecaster tagged with the stream and
training window it came from.  ``predict_next_day`` produces the full
next-day horizon (one forecast per bin); because the horizon never exceeds
one day, the day and week lags of every forecast bin are already observed
and no recursive forecasting is needed.
"""

from __future__ import annotations

import pickle
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import features
from .forest import ForestConfig, RegressionForest
from .panel import Panel

MODEL_SCHEMA_VERSION = 1

KIND_RANDOM_FOREST = "random_forest"
KIND_SEASONAL_NAIVE = "seasonal_naive"


@dataclass(frozen=True)
class TrainingWindow:
    stream_id: str
    start_day: int
    end_day: int


@dataclass(frozen=True)
class ForecastModel:
    kind: str
    trained_on: TrainingWindow | None
    forest: RegressionForest | None = None
    training_seconds: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in (KIND_RANDOM_FOREST, KIND_SEASONAL_NAIVE):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.kind == KIND_RANDOM_FOREST and self.forest is None:
            raise ValueError("random_forest model needs a fitted forest")


def train_random_forest(X, y, config: ForestConfig, window: TrainingWindow, n_jobs: int = 1) -> ForecastModel:
    """Fit a forest on prepared (features, targets); deterministic given rng_seed."""
    t0 = time.perf_counter()
    forest = RegressionForest(config).fit(X, y, n_jobs=n_jobs)
    return ForecastModel(
        kind=KIND_RANDOM_FOREST,
        trained_on=window,
        forest=forest,
        training_seconds=time.perf_counter() - t0,
    )


def train_seasonal_naive(stream_id: str | None = None) -> ForecastModel:
    """Zero-cost model: forecast = value one week earlier, same bin."""
    window = TrainingWindow(stream_id, 0, 0) if stream_id is not None else None
    return ForecastModel(kind=KIND_SEASONAL_NAIVE, trained_on=window, training_seconds=0.0)


def train_for_window(
    panel: Panel,
    stream_id: str,
    start_day: int,
    end_day: int,
    kind: str,
    forest_config: ForestConfig,
    n_jobs: int = 1,
    cache: "features.FeatureCache | None" = None,
) -> ForecastModel:
    """Train a model of the given kind on days start_day..end_day of one stream.

    Feature rows are restricted to bins whose lags exist, so the first
    seven days of the window contribute targets only via later lags.
    """
    if kind == KIND_SEASONAL_NAIVE:
        return train_seasonal_naive(stream_id)
    cal = panel.calendar
    t_start = max((start_day - 1) * cal.bins_per_day + 1, features.min_feature_bin(panel))
    t_end = end_day * cal.bins_per_day
    if cache is not None:
        X = cache.rows(t_start, t_end)
        y = panel.stream(stream_id).values[t_start - 1 : t_end].copy()
    else:
        X, y = features.build_feature_matrix(panel, stream_id, t_start, t_end)
    window = TrainingWindow(stream_id=stream_id, start_day=start_day, end_day=end_day)
    return train_random_forest(X, y, forest_config, window, n_jobs=n_jobs)


def predict_next_day(
    model: ForecastModel,
    panel: Panel,
    stream_id: str,
    b: int,
    cache: "features.FeatureCache | None" = None,
) -> np.ndarray:
    """Forecasts for bins b+1 .. b+bins_per_day, given data through bin b.

    All lags of the forecast bins are at or before b, so a single direct
    prediction covers the whole horizon.
    """
    cal = panel.calendar
    B = cal.bins_per_day
    if b % B != 0:
        raise ValueError(f"b={b} is not a batch end (bins_per_day={B})")
    if b + B > panel.n_bins:
        raise ValueError(f"panel has no bins {b + 1}..{b + B}")
    if model.trained_on is not None and model.trained_on.stream_id not in (None, stream_id):
        raise ValueError(
            f"model trained for {model.trained_on.stream_id!r}, asked to forecast {stream_id!r}"
        )
    t = np.arange(b + 1, b + B + 1, dtype=np.int64)
    if model.kind == KIND_SEASONAL_NAIVE:
        lag = 7 * B
        if b + 1 - lag < 1:
            raise ValueError(f"seasonal naive needs a week of history before bin {b + 1}")
        return panel.stream(stream_id).values[t - 1 - lag].copy()
    X = cache.rows(b + 1, b + B) if cache is not None else features.build_rows(panel, t)
    return model.forest.predict(X)


def save_model(model: ForecastModel, path: str | Path) -> None:
    """Versioned binary serialisation; round-trips predictions bit-exactly."""
    payload = {"schema_version": MODEL_SCHEMA_VERSION, "model": model}
    with Path(path).open("wb") as fh:
        pickle.dump(payload, fh)


def load_model(path: str | Path) -> ForecastModel:
    with Path(path).open("rb") as fh:
        payload = pickle.load(fh)
    version = payload.get("schema_version")
    if version != MODEL_SCHEMA_VERSION:
        raise ValueError(f"unsupported model schema version {version!r}")
    return payload["model"]
