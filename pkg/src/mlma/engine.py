"""Per-stream monitoring state machine and strategy runner.

Daily cycle per stream, at each batch end: score yesterday's forecasts
against today's actuals, test the new loss batch against the reference,
decide on re-training (statistical alert + decision policy, forced event
or scheduled dates, periodic cadence, or a business SMAPE threshold
depending on the strategy), update the reference batch, and produce the
next day's forecasts.  Streams are fully independent; all state lives in
per-stream MonitorState objects that can be checkpointed and resumed
without changing the trajectory.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from datetime import date, datetime, timezone

import numpy as np

from . import costing, losstest, models
from .calendar import BusinessCalendar
from .features import FeatureCache
from .forest import ForestConfig
from .losstest import ReferenceBatchAggregate, TestResult
from .panel import Panel

STRATEGY_KINDS = (
    "mlma",
    "mlma_manual",
    "do_nothing_ml",
    "do_nothing_naive",
    "periodic",
    "on_demand",
)
DECISION_POLICIES = ("auto_threshold", "always", "scripted")


class AwaitingDecisionError(RuntimeError):
    """A scripted-policy stream needs a decision that was not supplied."""

    def __init__(self, stream_id: str, day: int, alert_id: str):
        super().__init__(f"stream {stream_id!r} awaits a decision for alert {alert_id} on day {day}")
        self.stream_id = stream_id
        self.day = day
        self.alert_id = alert_id


@dataclass(frozen=True)
class StrategySpec:
    kind: str
    period_days: int | None = None
    smape_threshold: float | None = None
    decision_policy: str = "auto_threshold"

    def __post_init__(self) -> None:
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        if self.decision_policy not in DECISION_POLICIES:
            raise ValueError(f"unknown decision policy {self.decision_policy!r}")
        if self.kind == "periodic" and (self.period_days is None or self.period_days < 1):
            raise ValueError("periodic strategy requires period_days >= 1")
        if self.kind == "on_demand" and self.smape_threshold is None:
            raise ValueError("on_demand strategy requires smape_threshold")

    @property
    def is_mlma(self) -> bool:
        return self.kind in ("mlma", "mlma_manual")

    @property
    def model_kind(self) -> str:
        return models.KIND_SEASONAL_NAIVE if self.kind == "do_nothing_naive" else models.KIND_RANDOM_FOREST

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "period_days": self.period_days,
            "smape_threshold": self.smape_threshold,
            "decision_policy": self.decision_policy,
        }


@dataclass(frozen=True)
class EngineConfig:
    window_days: int = 180
    alpha: float = 0.05
    forest: ForestConfig = field(default_factory=ForestConfig)
    seed: int = 0
    reset_on_reject_always: bool = False
    threshold_sd_multiplier: float = 2.0
    engineer_threshold: float | None = None  # overrides mean + k*sd when set
    n_jobs: int = 1
    rates: costing.CostRates = field(default_factory=costing.CostRates)

    def to_dict(self) -> dict:
        return {
            "window_days": self.window_days,
            "alpha": self.alpha,
            "forest": dict(self.forest.__dict__),
            "seed": self.seed,
            "reset_on_reject_always": self.reset_on_reject_always,
            "threshold_sd_multiplier": self.threshold_sd_multiplier,
            "engineer_threshold": self.engineer_threshold,
            "rates": self.rates.to_dict(),
        }


@dataclass
class Alert:
    alert_id: str
    stream_id: str
    day: int
    day_date: str
    test: TestResult | None
    ref_mean_smape: float
    new_mean_smape: float
    threshold: float
    auto_recommendation: bool
    status: str  # pending | approved | denied | auto
    forced: bool = False
    raised_at: str = ""
    decided_by: str | None = None
    decision: str | None = None
    decided_at: str | None = None

    def to_dict(self) -> dict:
        return {
            "alert_id": self.alert_id,
            "stream_id": self.stream_id,
            "day": self.day,
            "day_date": self.day_date,
            "test": self.test.to_dict() if self.test else None,
            "ref_mean_smape": self.ref_mean_smape,
            "new_mean_smape": self.new_mean_smape,
            "threshold": self.threshold,
            "auto_recommendation": self.auto_recommendation,
            "status": self.status,
            "forced": self.forced,
            "raised_at": self.raised_at,
            "decided_by": self.decided_by,
            "decision": self.decision,
            "decided_at": self.decided_at,
        }


@dataclass
class PendingDay:
    """Losses of a day whose re-train decision is still outstanding."""

    day: int
    loss_sq: np.ndarray
    loss_sape: np.ndarray
    test: TestResult | None
    forced: bool


@dataclass
class MonitorState:
    stream_id: str
    model: models.ForecastModel
    ref: ReferenceBatchAggregate | None
    sape_ref: ReferenceBatchAggregate | None
    engineer_threshold: float
    initial_sape_mean: float
    initial_sape_sd: float
    day_cursor: int
    next_forecasts: np.ndarray | None
    r_stream: dict = field(default_factory=dict)  # day -> 0/1
    p_stream: dict = field(default_factory=dict)  # day -> (ref_mean, new_mean)
    scheduled_retrains: set = field(default_factory=set)  # of date
    last_retrain_day: int = 0
    pending_alert: Alert | None = None
    pending_day: PendingDay | None = None
    awaiting_decision: bool = False
    smape_sum: float = 0.0
    smape_count: int = 0
    daily_smape: dict = field(default_factory=dict)  # day -> mean sape of the day
    alerts_validated: int = 0
    trainings: int = 0
    forecast_days: int = 0
    alerts: list = field(default_factory=list)

    @property
    def retrain_days(self) -> list[int]:
        return sorted(d for d, r in self.r_stream.items() if r == 1)


@dataclass
class StepOutcome:
    state: MonitorState
    forecasts: np.ndarray | None
    alert: Alert | None
    events: list
    awaiting: bool = False


def _training_seed(config: EngineConfig, stream_id: str, end_day: int) -> int:
    digest = hashlib.sha256(f"{config.seed}:{stream_id}:{end_day}".encode()).digest()
    return int.from_bytes(digest[:8], "big") % (2**63)


def _train(
    panel: Panel,
    spec: StrategySpec,
    config: EngineConfig,
    stream_id: str,
    end_day: int,
    cache: FeatureCache | None,
) -> models.ForecastModel:
    start_day = max(1, end_day - config.window_days + 1)
    forest_config = replace(config.forest, rng_seed=_training_seed(config, stream_id, end_day))
    return models.train_for_window(
        panel,
        stream_id,
        start_day,
        end_day,
        kind=spec.model_kind,
        forest_config=forest_config,
        n_jobs=config.n_jobs,
        cache=cache,
    )


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def first_monitored_day(config: EngineConfig) -> int:
    """First day whose losses face a re-train decision (reference is one day older)."""
    return config.window_days + 2


def initialize(
    panel: Panel,
    spec: StrategySpec,
    config: EngineConfig,
    cache: FeatureCache | None = None,
) -> dict:
    """Train initial models, forecast the first monitored days, build references.

    After this, every stream has processed day ``window_days + 1`` (whose
    losses seeded the reference batch) and carries forecasts for the first
    monitored day.
    """
    cal = panel.calendar
    B = cal.bins_per_day
    needed = (config.window_days + 2) * B
    if panel.n_bins < needed:
        raise ValueError(
            f"panel has {panel.n_bins} bins; monitoring with a {config.window_days}-day "
            f"window needs at least {needed}"
        )
    if cache is None:
        cache = FeatureCache(panel)
    states = {}
    for series in panel.streams:
        sid = series.stream_id
        model = _train(panel, spec, config, sid, config.window_days, cache)
        trainings = 1 if model.kind == models.KIND_RANDOM_FOREST else 0

        fitted, actual = _in_sample_fit(panel, model, sid, config, cache)
        in_sape = losstest.sape_values(actual, fitted)
        sape_mean = float(np.mean(in_sape))
        sape_sd = float(np.std(in_sape, ddof=1)) if len(in_sape) > 1 else 0.0
        if config.engineer_threshold is not None:
            threshold = config.engineer_threshold
        else:
            threshold = sape_mean + config.threshold_sd_multiplier * sape_sd

        ref_day = config.window_days + 1
        forecasts_ref_day = models.predict_next_day(model, panel, sid, config.window_days * B, cache=cache)
        actuals_ref_day = series.day_slice(ref_day)
        sq = losstest.squared_values(actuals_ref_day, forecasts_ref_day)
        sp = losstest.sape_values(actuals_ref_day, forecasts_ref_day)
        ref = ReferenceBatchAggregate.from_losses(sq, started_at=ref_day * B)
        sape_ref = ReferenceBatchAggregate.from_losses(sp, started_at=ref_day * B)

        next_forecasts = None
        forecast_days = 1
        if (ref_day + 1) * B <= panel.n_bins:
            next_forecasts = models.predict_next_day(model, panel, sid, ref_day * B, cache=cache)
            forecast_days = 2

        states[sid] = MonitorState(
            stream_id=sid,
            model=model,
            ref=ref,
            sape_ref=sape_ref,
            engineer_threshold=threshold,
            initial_sape_mean=sape_mean,
            initial_sape_sd=sape_sd,
            day_cursor=ref_day,
            next_forecasts=next_forecasts,
            last_retrain_day=config.window_days,
            trainings=trainings,
            forecast_days=forecast_days,
        )
    return states


def _in_sample_fit(
    panel: Panel,
    model: models.ForecastModel,
    stream_id: str,
    config: EngineConfig,
    cache: FeatureCache,
) -> tuple[np.ndarray, np.ndarray]:
    """Fitted values of the freshly trained model over its own training rows."""
    from . import features as feat

    cal = panel.calendar
    t_start = feat.min_feature_bin(panel)
    t_end = config.window_days * cal.bins_per_day
    t = np.arange(t_start, t_end + 1, dtype=np.int64)
    actual = panel.stream(stream_id).values[t - 1]
    if model.kind == models.KIND_SEASONAL_NAIVE:
        fitted = panel.stream(stream_id).values[t - 1 - 7 * cal.bins_per_day]
    else:
        fitted = model.forest.predict(cache.rows(t_start, t_end))
    return fitted, actual


def _wants_retrain_on_schedule(spec: StrategySpec, config: EngineConfig, day: int) -> bool:
    if spec.kind != "periodic":
        return False
    return (day - first_monitored_day(config)) % spec.period_days == 0


def step_day(
    state: MonitorState,
    panel: Panel,
    spec: StrategySpec,
    config: EngineConfig,
    day: int | None = None,
    decision_input: str | bool | None = None,
    cache: FeatureCache | None = None,
) -> StepOutcome:
    """Process one day's actuals for one stream (resumable when suspended).

    Order: score yesterday's forecasts, run the stability test, consult the
    decision policy (suspending under the scripted policy when no decision
    is supplied), re-train or extend the reference, then forecast the next
    day.
    """
    cal = panel.calendar
    B = cal.bins_per_day
    if day is None:
        day = state.day_cursor + 1
    if cache is None:
        cache = FeatureCache(panel)

    if state.awaiting_decision:
        if day != state.pending_day.day:
            raise ValueError(f"stream {state.stream_id!r} suspended at day {state.pending_day.day}, not {day}")
        if decision_input is None:
            return StepOutcome(state=state, forecasts=None, alert=state.pending_alert, events=[], awaiting=True)
        return _resolve_pending(state, panel, spec, config, decision_input, cache)

    if day != state.day_cursor + 1:
        raise ValueError(f"stream {state.stream_id!r} is at day {state.day_cursor}, cannot step day {day}")
    if day * B > panel.n_bins:
        raise ValueError(f"panel ends before day {day}")
    if state.next_forecasts is None:
        raise ValueError(f"stream {state.stream_id!r} has no stored forecasts for day {day}")

    series = panel.stream(state.stream_id)
    actuals = series.day_slice(day)
    loss_sq = losstest.squared_values(actuals, state.next_forecasts)
    loss_sape = losstest.sape_values(actuals, state.next_forecasts)
    day_smape = float(np.mean(loss_sape))
    state.daily_smape[day] = day_smape
    state.smape_sum += float(np.sum(loss_sape))
    state.smape_count += len(loss_sape)

    day_date = cal.date_of_day(day)
    forced = spec.is_mlma and (day_date in cal.event_dates or day_date in state.scheduled_retrains)

    test: TestResult | None = None
    alert: Alert | None = None
    retrain = False

    if spec.kind in ("do_nothing_ml", "do_nothing_naive"):
        pass
    elif spec.kind == "periodic":
        retrain = _wants_retrain_on_schedule(spec, config, day)
    elif spec.kind == "on_demand":
        merged_sape = state.sape_ref.merged_with(loss_sape)
        if merged_sape.mean > spec.smape_threshold:
            retrain = True
            state.alerts_validated += 1
    elif spec.is_mlma:
        test = losstest.welch_test(state.ref, loss_sq, config.alpha)
        if test.reject:
            state.alerts_validated += 1
        if test.reject or forced:
            alert = _make_alert(state, spec, day, day_date, test, loss_sape, forced)
            if alert.status == "pending" and decision_input is None:
                state.pending_alert = alert
                state.pending_day = PendingDay(day, loss_sq, loss_sape, test, forced)
                state.awaiting_decision = True
                state.alerts.append(alert)
                return StepOutcome(state=state, forecasts=None, alert=alert, events=[], awaiting=True)
            if alert.status == "pending":
                _decide(alert, decision_input, decided_by="script")
            state.alerts.append(alert)
            retrain = forced or alert.decision == "retrain" or (alert.status == "auto" and alert.auto_recommendation)

    return _complete_day(state, panel, spec, config, day, loss_sq, loss_sape, test, alert, retrain, forced, cache)


def _make_alert(
    state: MonitorState,
    spec: StrategySpec,
    day: int,
    day_date: date,
    test: TestResult | None,
    loss_sape: np.ndarray,
    forced: bool,
) -> Alert:
    new_mean_smape = float(np.mean(loss_sape))
    recommend = forced or new_mean_smape > state.engineer_threshold
    if forced or spec.decision_policy in ("auto_threshold", "always"):
        status = "auto"
        if spec.decision_policy == "always" and not forced:
            recommend = True
    else:
        status = "pending"
    return Alert(
        alert_id=f"{state.stream_id}-d{day}",
        stream_id=state.stream_id,
        day=day,
        day_date=day_date.isoformat(),
        test=test,
        ref_mean_smape=state.sape_ref.mean,
        new_mean_smape=new_mean_smape,
        threshold=state.engineer_threshold,
        auto_recommendation=recommend,
        status=status,
        forced=forced,
        raised_at=_now(),
    )


def _decide(alert: Alert, decision_input: str | bool, decided_by: str) -> None:
    if isinstance(decision_input, bool):
        decision = "retrain" if decision_input else "skip"
    else:
        decision = str(decision_input)
    if decision not in ("retrain", "skip"):
        raise ValueError(f"decision must be 'retrain' or 'skip', got {decision_input!r}")
    alert.decision = decision
    alert.status = "approved" if decision == "retrain" else "denied"
    alert.decided_by = decided_by
    alert.decided_at = _now()


def _resolve_pending(
    state: MonitorState,
    panel: Panel,
    spec: StrategySpec,
    config: EngineConfig,
    decision_input: str | bool,
    cache: FeatureCache,
) -> StepOutcome:
    alert = state.pending_alert
    pending = state.pending_day
    _decide(alert, decision_input, decided_by="operator")
    state.pending_alert = None
    state.pending_day = None
    state.awaiting_decision = False
    retrain = pending.forced or alert.decision == "retrain"
    return _complete_day(
        state, panel, spec, config, pending.day,
        pending.loss_sq, pending.loss_sape, pending.test, alert, retrain, pending.forced, cache,
    )


def _complete_day(
    state: MonitorState,
    panel: Panel,
    spec: StrategySpec,
    config: EngineConfig,
    day: int,
    loss_sq: np.ndarray,
    loss_sape: np.ndarray,
    test: TestResult | None,
    alert: Alert | None,
    retrain: bool,
    forced: bool,
    cache: FeatureCache,
) -> StepOutcome:
    cal = panel.calendar
    B = cal.bins_per_day
    b = day * B
    day_date = cal.date_of_day(day)
    skip_reference = spec.kind in ("do_nothing_ml", "do_nothing_naive")

    ref_mean_before = state.ref.mean if state.ref is not None else 0.0
    new_sq_mean = float(np.mean(loss_sq))

    if retrain:
        state.model = _train(panel, spec, config, state.stream_id, day, cache)
        if state.model.kind == models.KIND_RANDOM_FOREST:
            state.trainings += 1
        state.ref = ReferenceBatchAggregate.from_losses(loss_sq, started_at=b)
        state.sape_ref = ReferenceBatchAggregate.from_losses(loss_sape, started_at=b)
        state.r_stream[day] = 1
        state.p_stream[day] = (ref_mean_before, new_sq_mean)
        state.last_retrain_day = day
        state.scheduled_retrains.discard(day_date)
    else:
        if not skip_reference:
            rejected = bool(test and test.reject and config.reset_on_reject_always)
            state.ref = losstest.update_reference(state.ref, loss_sq, rejected=rejected, b=b)
            state.sape_ref = losstest.update_reference(state.sape_ref, loss_sape, rejected=rejected, b=b)
        state.r_stream[day] = 0
        state.p_stream[day] = (0.0, 0.0)

    state.day_cursor = day
    forecasts = None
    if (day + 1) * B <= panel.n_bins:
        forecasts = models.predict_next_day(state.model, panel, state.stream_id, b, cache=cache)
        state.forecast_days += 1
    state.next_forecasts = forecasts

    event = {
        "type": "step",
        "stream": state.stream_id,
        "day": day,
        "date": day_date.isoformat(),
        "b": b,
        "forecasts": None if forecasts is None else [float(x) for x in forecasts],
        "loss_sq": [float(x) for x in loss_sq],
        "loss_sape": [float(x) for x in loss_sape],
        "day_smape": state.daily_smape[day],
        "test": test.to_dict() if test else None,
        "alert_id": alert.alert_id if alert else None,
        "decision": alert.decision if alert else None,
        "retrained": retrain,
        "forced": forced,
        "r": state.r_stream[day],
        "p_pair": list(state.p_stream[day]),
        "ref": None if state.ref is None else {
            "n": state.ref.n, "mean": state.ref.mean, "m2": state.ref.m2,
            "started_at": state.ref.started_at,
        },
    }
    events = [event]
    if alert is not None:
        events.append({"type": "alert", "alert": alert.to_dict()})
    return StepOutcome(state=state, forecasts=forecasts, alert=alert, events=events)


def regime_durations(state: MonitorState) -> list[int]:
    """Day gaps between successive re-training events; empty below two events."""
    days = state.retrain_days
    return [b - a for a, b in zip(days, days[1:])]


def schedule_retrain(state: MonitorState, day_date: date, calendar: BusinessCalendar) -> MonitorState:
    """Force r=1 on a future date; idempotent."""
    if day_date <= calendar.date_of_day(state.day_cursor):
        raise ValueError(f"scheduled date {day_date} is not after the current monitored day")
    state.scheduled_retrains.add(day_date)
    return state


def cancel_scheduled_retrain(state: MonitorState, day_date: date) -> MonitorState:
    state.scheduled_retrains.discard(day_date)
    return state


# ---------------------------------------------------------------------------
# full runs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunReport:
    strategy: dict
    seed: int
    window_days: int
    eval_days: int
    months: float
    years: float
    per_stream_smape: dict
    avg_smape: float
    retrain_events: list  # (stream, day) pairs
    durations: dict  # stream -> list of day gaps
    alerts: int
    trainings: int
    forecast_days: int
    labor: costing.LaborCost
    compute: costing.ComputeCost
    rates: dict

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "seed": self.seed,
            "window_days": self.window_days,
            "eval_days": self.eval_days,
            "months": self.months,
            "years": self.years,
            "per_stream_smape": self.per_stream_smape,
            "avg_smape": self.avg_smape,
            "retrain_events": [list(e) for e in self.retrain_events],
            "durations": self.durations,
            "alerts": self.alerts,
            "trainings": self.trainings,
            "forecast_days": self.forecast_days,
            "labor": self.labor.to_dict(),
            "compute": self.compute.to_dict(),
            "rates": self.rates,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def build_report(
    panel: Panel, spec: StrategySpec, config: EngineConfig, states: dict
) -> RunReport:
    eval_days = panel.n_days - (config.window_days + 1)
    months = eval_days / costing.DAYS_PER_MONTH
    years = eval_days / costing.DAYS_PER_YEAR
    per_stream = {
        sid: (s.smape_sum / s.smape_count if s.smape_count else 0.0) for sid, s in states.items()
    }
    retrain_events = sorted(
        ((sid, d) for sid, s in states.items() for d in s.retrain_days), key=lambda e: (e[1], e[0])
    )
    durations = {sid: regime_durations(s) for sid, s in states.items()}
    total_alerts = sum(s.alerts_validated for s in states.values())
    total_trainings = sum(s.trainings for s in states.values())
    total_forecast_days = sum(s.forecast_days for s in states.values())
    manual_days = len(states) * eval_days if spec.kind == "mlma_manual" else 0
    labor = costing.labor_cost(
        alerts=0 if spec.kind == "mlma_manual" else total_alerts,
        retrains=total_trainings,
        manual_test_days=manual_days,
        months=months,
        rates=config.rates,
    )
    compute = costing.compute_cost(
        trainings=total_trainings,
        forecast_days=total_forecast_days,
        years=years,
        rates=config.rates,
    )
    return RunReport(
        strategy=spec.to_dict(),
        seed=config.seed,
        window_days=config.window_days,
        eval_days=eval_days,
        months=months,
        years=years,
        per_stream_smape=per_stream,
        avg_smape=float(np.mean(list(per_stream.values()))),
        retrain_events=retrain_events,
        durations=durations,
        alerts=total_alerts,
        trainings=total_trainings,
        forecast_days=total_forecast_days,
        labor=labor,
        compute=compute,
        rates=config.rates.to_dict(),
    )


def run_strategy(
    panel: Panel,
    spec: StrategySpec,
    config: EngineConfig,
    decisions: dict | None = None,
    log=None,
    states: dict | None = None,
    cache: FeatureCache | None = None,
) -> RunReport:
    """Drive initialize + step_day over the whole evaluation period.

    ``decisions`` maps (stream_id, day) to "retrain"/"skip" for the
    scripted policy; a missing entry raises AwaitingDecisionError because
    headless runs must never block.  Passing ``states`` resumes a
    checkpointed run instead of initialising.
    """
    if cache is None:
        cache = FeatureCache(panel)
    if states is None:
        states = initialize(panel, spec, config, cache=cache)
        if log is not None:
            log.append({
                "type": "run_start",
                "strategy": spec.to_dict(),
                "config": config.to_dict(),
                "streams": sorted(states),
                "n_days": panel.n_days,
            })
    for sid in sorted(states):
        state = states[sid]
        while state.day_cursor < panel.n_days or state.awaiting_decision:
            day = state.pending_day.day if state.awaiting_decision else state.day_cursor + 1
            decision = None
            if decisions is not None:
                decision = decisions.get((sid, day))
            outcome = step_day(state, panel, spec, config, day=day, decision_input=decision, cache=cache)
            if outcome.awaiting:
                raise AwaitingDecisionError(sid, day, state.pending_alert.alert_id)
            if log is not None:
                for event in outcome.events:
                    log.append(event)
    report = build_report(panel, spec, config, states)
    if log is not None:
        log.append({"type": "run_end", "report": report.to_dict()})
    return report
