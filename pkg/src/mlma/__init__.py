"""Streaming forecast monitoring with test-based re-training alerts."""

from .calendar import BatchIndex, BusinessCalendar, batch_ends
from .costing import ComputeCost, CostRates, LaborCost, co2_usd_per_kwh, compute_cost, labor_cost
from .engine import (
    Alert,
    EngineConfig,
    MonitorState,
    RunReport,
    StrategySpec,
    initialize,
    regime_durations,
    run_strategy,
    schedule_retrain,
    step_day,
)
from .features import FeatureCache, build_feature_matrix
from .forest import ForestConfig, RegressionForest
from .losstest import (
    LossBatch,
    ReferenceBatchAggregate,
    TestResult,
    sape,
    smape,
    squared_loss,
    update_reference,
    welch_test,
)
from .models import ForecastModel, predict_next_day, train_random_forest, train_seasonal_naive
from .panel import Panel, StreamSeries, ingest_csv, write_csv
from .synthgen import MCConfig, SyntheticPanelConfig, generate_panel, run_size_study

__version__ = "0.1.0"
