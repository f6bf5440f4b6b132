"""Dict <-> dataclass converters for strategy, engine and rate configs.

Used by the CLI (config files) and the HTTP service (request bodies); the
inverse direction is the dataclasses' own to_dict methods.
"""

from __future__ import annotations

from dataclasses import fields

from .costing import CostRates
from .engine import EngineConfig, StrategySpec
from .forest import ForestConfig


def _pick(cls, raw: dict) -> dict:
    names = {f.name for f in fields(cls)}
    unknown = set(raw) - names
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return raw


def strategy_from_dict(raw: dict) -> StrategySpec:
    return StrategySpec(**_pick(StrategySpec, dict(raw)))


def forest_from_dict(raw: dict) -> ForestConfig:
    return ForestConfig(**_pick(ForestConfig, dict(raw)))


def rates_from_dict(raw: dict) -> CostRates:
    return CostRates(**_pick(CostRates, dict(raw)))


def engine_config_from_dict(raw: dict) -> EngineConfig:
    raw = dict(raw)
    if "forest" in raw:
        raw["forest"] = forest_from_dict(raw["forest"])
    if "rates" in raw:
        raw["rates"] = rates_from_dict(raw["rates"])
    return EngineConfig(**_pick(EngineConfig, raw))
