"""HTTP+JSON service for the operator console.

Each run advances day by day; under the scripted decision policy a stream
suspends while its re-training alert is pending and resumes when the
operator posts a decision.  Decisions are appended to the event log and
flushed before they are acknowledged, so a crashed service can be
restarted from the last checkpoint plus the log without changing the
trajectory.
"""

from __future__ import annotations

import threading
import uuid
from datetime import date, datetime, timezone
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import HTMLResponse

from . import engine
from .calendar import load_calendar_config
from .config import engine_config_from_dict, strategy_from_dict
from .engine import AwaitingDecisionError, EngineConfig, StrategySpec
from .eventlog import EventLog, RunManifest, load_checkpoint, read_events, save_checkpoint
from .features import FeatureCache
from .panel import Panel, ingest_csv


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class RunController:
    """Owns one run: states, event log, manifest, decision application."""

    def __init__(
        self,
        run_id: str,
        panel: Panel,
        spec: StrategySpec,
        config: EngineConfig,
        run_dir: Path,
        fresh: bool = True,
    ):
        self.run_id = run_id
        self.panel = panel
        self.spec = spec
        self.config = config
        self.run_dir = Path(run_dir)
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self.cache = FeatureCache(panel)
        self.lock = threading.Lock()
        self.report = None
        log_path = self.run_dir / "events.jsonl"
        self.manifest_path = self.run_dir / "manifest.json"

        if fresh:
            self.log = EventLog(log_path, run_id)
            self.manifest = RunManifest(
                run_id=run_id,
                strategy=spec.to_dict(),
                data_source=str(self.run_dir / "panel.csv"),
                seed=config.seed,
                rates=config.rates.to_dict(),
                event_log=str(log_path),
            )
            self.states = engine.initialize(panel, spec, config, cache=self.cache)
            self.log.append({
                "type": "run_start",
                "strategy": spec.to_dict(),
                "config": config.to_dict(),
                "streams": sorted(self.states),
                "n_days": panel.n_days,
            })
            self._save_manifest()
        else:
            self.manifest = RunManifest.load(self.manifest_path)
            if not self.manifest.checkpoints:
                raise ValueError(f"run {run_id} has no checkpoint to restore from")
            self.states, _meta = load_checkpoint(self.manifest.checkpoints[-1])
            self.log = EventLog(log_path, run_id)
            self._replay_decisions()

    # -- lifecycle --

    def _save_manifest(self) -> None:
        self.manifest.save(self.manifest_path)

    def _replay_decisions(self) -> None:
        """Re-apply logged decisions to restored states (idempotent by alert_id)."""
        for rec in read_events(self.log.path, types=("decision",)):
            alert_id = rec["alert_id"]
            for state in self.states.values():
                if state.awaiting_decision and state.pending_alert.alert_id == alert_id:
                    self._apply_to_state(state, rec["decision"])

    def _apply_to_state(self, state, decision: str) -> None:
        outcome = engine.step_day(
            state, self.panel, self.spec, self.config,
            day=state.pending_day.day, decision_input=decision, cache=self.cache,
        )
        for event in outcome.events:
            self.log.append(event)

    def advance(self) -> None:
        """Step every stream until it finishes or suspends on an alert."""
        with self.lock:
            self._advance_locked()

    def _advance_locked(self) -> None:
        if self.manifest.status == "done":
            return
        for sid in sorted(self.states):
            state = self.states[sid]
            while not state.awaiting_decision and state.day_cursor < self.panel.n_days:
                try:
                    outcome = engine.step_day(
                        state, self.panel, self.spec, self.config, cache=self.cache
                    )
                except AwaitingDecisionError:  # pragma: no cover - step returns instead
                    break
                for event in outcome.events:
                    self.log.append(event)
                if outcome.awaiting:
                    break
        if any(s.awaiting_decision for s in self.states.values()):
            if self.manifest.status != "awaiting_decision":
                self.manifest.transition("awaiting_decision")
        elif all(s.day_cursor >= self.panel.n_days for s in self.states.values()):
            self.report = engine.build_report(self.panel, self.spec, self.config, self.states)
            self.log.append({"type": "run_end", "report": self.report.to_dict()})
            if self.manifest.status == "awaiting_decision":
                self.manifest.transition("running")
            self.manifest.transition("done")
        else:
            if self.manifest.status != "running":
                self.manifest.transition("running")
        self._save_manifest()

    def checkpoint(self) -> Path:
        with self.lock:
            path = self.run_dir / f"checkpoint_{len(self.manifest.checkpoints):04d}.pkl"
            save_checkpoint(path, self.states, {"run_id": self.run_id})
            self.manifest.checkpoints.append(str(path))
            self.log.append({"type": "checkpoint", "path": str(path)})
            self._save_manifest()
            return path

    # -- queries --

    def alerts(self, status: str | None = None) -> list[dict]:
        out = []
        for state in self.states.values():
            for alert in state.alerts:
                if status is None or alert.status == status:
                    out.append(alert.to_dict())
        out.sort(key=lambda a: (-a["day"], a["stream_id"]))
        return out

    def find_alert(self, alert_id: str):
        for state in self.states.values():
            for alert in state.alerts:
                if alert.alert_id == alert_id:
                    return state, alert
        return None, None

    def decide(self, alert_id: str, decision: str, decided_by: str = "operator") -> dict:
        if decision not in ("retrain", "skip"):
            raise HTTPException(status_code=422, detail="decision must be 'retrain' or 'skip'")
        with self.lock:
            state, alert = self.find_alert(alert_id)
            if alert is None:
                raise HTTPException(status_code=404, detail=f"unknown alert {alert_id}")
            if alert.status != "pending":
                raise HTTPException(
                    status_code=409,
                    detail=f"alert {alert_id} already {alert.status}",
                )
            # durably log before applying
            self.log.append({
                "type": "decision",
                "alert_id": alert_id,
                "decided_by": decided_by,
                "decision": decision,
                "decided_at": _now(),
            })
            self._apply_to_state(state, decision)
            self._advance_locked()
            return alert.to_dict()

    def schedule(self, stream_id: str, day_date: date) -> dict:
        with self.lock:
            state = self.states.get(stream_id)
            if state is None:
                raise HTTPException(status_code=404, detail=f"unknown stream {stream_id}")
            try:
                engine.schedule_retrain(state, day_date, self.panel.calendar)
            except ValueError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from None
            self.log.append({
                "type": "scheduled_retrain",
                "stream": stream_id,
                "date": day_date.isoformat(),
            })
            return {"stream_id": stream_id, "scheduled": sorted(d.isoformat() for d in state.scheduled_retrains)}

    def metrics(self, stream_id: str) -> dict:
        state = self.states.get(stream_id)
        if state is None:
            raise HTTPException(status_code=404, detail=f"unknown stream {stream_id}")
        smape = (state.smape_sum / state.smape_count) if state.smape_count else 0.0
        return {
            "stream_id": stream_id,
            "day_cursor": state.day_cursor,
            "r": {str(d): r for d, r in sorted(state.r_stream.items())},
            "p": {str(d): list(p) for d, p in sorted(state.p_stream.items())},
            "daily_smape": {str(d): s for d, s in sorted(state.daily_smape.items())},
            "retrain_days": state.retrain_days,
            "durations": engine.regime_durations(state),
            "smape": smape,
            "scheduled_retrains": sorted(d.isoformat() for d in state.scheduled_retrains),
            "engineer_threshold": state.engineer_threshold,
        }

    def costs(self) -> dict:
        report = engine.build_report(self.panel, self.spec, self.config, self.states)
        return {
            "alerts": report.alerts,
            "trainings": report.trainings,
            "forecast_days": report.forecast_days,
            "labor": report.labor.to_dict(),
            "compute": report.compute.to_dict(),
            "rates": report.rates,
        }

    def summary(self) -> dict:
        done = self.manifest.status == "done"
        return {
            "run_id": self.run_id,
            "strategy": self.spec.to_dict(),
            "status": self.manifest.status,
            "streams": sorted(self.states),
            "n_days": self.panel.n_days,
            "day_cursors": {sid: s.day_cursor for sid, s in sorted(self.states.items())},
            "pending_alerts": sum(1 for s in self.states.values() if s.awaiting_decision),
            "avg_smape": self.report.avg_smape if done and self.report else None,
        }


class RunStore:
    """All live runs, addressable by run id and by alert id."""

    def __init__(self, data_dir: Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.runs: dict[str, RunController] = {}

    def create_run(self, panel: Panel, spec: StrategySpec, config: EngineConfig, run_id: str | None = None) -> RunController:
        run_id = run_id or uuid.uuid4().hex[:12]
        if run_id in self.runs:
            raise HTTPException(status_code=409, detail=f"run {run_id} exists")
        controller = RunController(run_id, panel, spec, config, self.data_dir / run_id)
        self.runs[run_id] = controller
        return controller

    def restore_run(self, run_id: str, panel: Panel, spec: StrategySpec, config: EngineConfig) -> RunController:
        controller = RunController(run_id, panel, spec, config, self.data_dir / run_id, fresh=False)
        self.runs[run_id] = controller
        return controller

    def get(self, run_id: str) -> RunController:
        if run_id not in self.runs:
            raise HTTPException(status_code=404, detail=f"unknown run {run_id}")
        return self.runs[run_id]

    def find_alert(self, alert_id: str) -> RunController:
        for controller in self.runs.values():
            _state, alert = controller.find_alert(alert_id)
            if alert is not None:
                return controller
        raise HTTPException(status_code=404, detail=f"unknown alert {alert_id}")


def create_app(store: RunStore) -> FastAPI:
    app = FastAPI(title="forecast monitoring service")
    app.state.store = store

    @app.get("/runs")
    def list_runs():
        return [c.summary() for c in store.runs.values()]

    @app.post("/runs", status_code=201)
    def create_run(body: dict):
        calendar = load_calendar_config(body["calendar"])
        panel = ingest_csv(body["data"], calendar)
        spec = strategy_from_dict(body.get("strategy", {"kind": "mlma"}))
        config = engine_config_from_dict(body.get("config", {}))
        controller = store.create_run(panel, spec, config, run_id=body.get("run_id"))
        controller.advance()
        return controller.summary()

    @app.get("/runs/{run_id}")
    def get_run(run_id: str):
        return store.get(run_id).summary()

    @app.get("/runs/{run_id}/alerts")
    def get_alerts(run_id: str, status: str | None = None):
        return store.get(run_id).alerts(status=status)

    @app.post("/alerts/{alert_id}/decision")
    def decide(alert_id: str, body: dict):
        controller = store.find_alert(alert_id)
        return controller.decide(alert_id, body.get("decision", ""))

    @app.post("/runs/{run_id}/streams/{stream_id}/scheduled-retrain")
    def schedule(run_id: str, stream_id: str, body: dict):
        try:
            day_date = date.fromisoformat(body.get("date", ""))
        except ValueError:
            raise HTTPException(status_code=422, detail="body needs ISO 'date'") from None
        return store.get(run_id).schedule(stream_id, day_date)

    @app.get("/runs/{run_id}/streams/{stream_id}/metrics")
    def metrics(run_id: str, stream_id: str):
        return store.get(run_id).metrics(stream_id)

    @app.get("/runs/{run_id}/costs")
    def costs(run_id: str):
        return store.get(run_id).costs()

    @app.post("/runs/{run_id}/checkpoint")
    def checkpoint(run_id: str):
        path = store.get(run_id).checkpoint()
        return {"path": str(path)}

    console_index = Path(__file__).resolve().parent.parent.parent / "frontend" / "dist" / "index.html"

    @app.get("/", response_class=HTMLResponse)
    def index():
        if console_index.exists():
            return console_index.read_text()
        return "<html><body><h3>forecast monitoring service</h3><p>console not built</p></body></html>"

    return app
