"""Labor, CPU-rental and CO2 cost accounting.

All costs are rate-based: event counts times configured per-event rates,
never wall-clock measurements, so reports are machine-independent.  Labor
is reported per month, computing per year; the evaluation span is scaled
to those units linearly.
"""

from __future__ import annotations

from dataclasses import dataclass

DAYS_PER_MONTH = 365.0 / 12.0
DAYS_PER_YEAR = 365.0


@dataclass(frozen=True)
class CostRates:
    alert_validation_minutes: float = 1.0
    retrain_protocol_minutes: float = 3.0
    manual_daily_test_minutes: float = 4.0
    hourly_salary_usd: float = 64.75
    cpu_usd_per_hour: float = 1.624
    chip_kw: float = 1.0
    co2_kg_per_mwh: float = 232.0
    usd_per_tonne_co2: float = 86.25
    train_minutes: float = 3.5
    forecast_seconds_per_day: float = 1.0

    def __post_init__(self) -> None:
        for name, value in self.__dict__.items():
            if value < 0:
                raise ValueError(f"rate {name} must be >= 0, got {value}")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class LaborCost:
    hours_per_month: float
    usd_per_month: float

    def to_dict(self) -> dict:
        return {"hours_per_month": self.hours_per_month, "usd_per_month": self.usd_per_month}


@dataclass(frozen=True)
class ComputeCost:
    cpu_hours_per_year: float
    cpu_usd_per_year: float
    co2_usd_per_year: float

    def to_dict(self) -> dict:
        return {
            "cpu_hours_per_year": self.cpu_hours_per_year,
            "cpu_usd_per_year": self.cpu_usd_per_year,
            "co2_usd_per_year": self.co2_usd_per_year,
        }


def labor_cost(
    alerts: int, retrains: int, manual_test_days: int, months: float, rates: CostRates
) -> LaborCost:
    """Engineer time: validating alerts, running re-train protocols, manual tests."""
    if months <= 0:
        raise ValueError("months must be positive")
    minutes = (
        alerts * rates.alert_validation_minutes
        + retrains * rates.retrain_protocol_minutes
        + manual_test_days * rates.manual_daily_test_minutes
    )
    hours_per_month = minutes / 60.0 / months
    return LaborCost(
        hours_per_month=hours_per_month,
        usd_per_month=hours_per_month * rates.hourly_salary_usd,
    )


def co2_usd_per_kwh(rates: CostRates) -> float:
    """Offset cost of one kWh: kg-per-MWh times USD-per-tonne over 10^6."""
    return rates.co2_kg_per_mwh * rates.usd_per_tonne_co2 / 1_000_000.0


def compute_cost(trainings: int, forecast_days: int, years: float, rates: CostRates) -> ComputeCost:
    """CPU rental plus CO2 offset for trainings and daily forecast runs."""
    if years <= 0:
        raise ValueError("years must be positive")
    cpu_hours = (
        trainings * rates.train_minutes / 60.0
        + forecast_days * rates.forecast_seconds_per_day / 3600.0
    ) / years
    return ComputeCost(
        cpu_hours_per_year=cpu_hours,
        cpu_usd_per_year=cpu_hours * rates.cpu_usd_per_hour,
        co2_usd_per_year=cpu_hours * rates.chip_kw * co2_usd_per_kwh(rates),
    )
