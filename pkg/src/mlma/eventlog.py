"""Run persistence: append-only event log, checkpoints and run manifests.

The event log is newline-delimited JSON, one record per event, flushed on
every append so decisions are durable before they are acknowledged.  A
checkpoint is a full pickle of the per-stream monitor states plus run
metadata; the manifest ties a run's id, spec, data source and checkpoint
files together and tracks its lifecycle status.
"""

from __future__ import annotations

import json
import pickle
from dataclasses import dataclass, field
from pathlib import Path

EVENT_SCHEMA_VERSION = 1
CHECKPOINT_SCHEMA_VERSION = 1

RUN_STATUSES = ("running", "awaiting_decision", "done")


class EventLog:
    """Append-only JSONL writer; every record carries schema version and seq."""

    def __init__(self, path: str | Path, run_id: str = ""):
        self.path = Path(path)
        self.run_id = run_id
        self._seq = 0
        if self.path.exists():
            for _ in read_events(self.path):
                self._seq += 1
        self._fh = self.path.open("a")

    def append(self, record: dict) -> dict:
        rec = {"schema": EVENT_SCHEMA_VERSION, "seq": self._seq, "run_id": self.run_id}
        rec.update(record)
        self._fh.write(json.dumps(rec, sort_keys=True) + "\n")
        self._fh.flush()
        self._seq += 1
        return rec

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "EventLog":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_events(path: str | Path, types: tuple | None = None):
    """Iterate records from a JSONL event log, optionally filtered by type."""
    with Path(path).open() as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if types is None or rec.get("type") in types:
                yield rec


def save_checkpoint(path: str | Path, states: dict, metadata: dict | None = None) -> None:
    payload = {
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "states": states,
        "metadata": metadata or {},
    }
    with Path(path).open("wb") as fh:
        pickle.dump(payload, fh)


def load_checkpoint(path: str | Path) -> tuple[dict, dict]:
    with Path(path).open("rb") as fh:
        payload = pickle.load(fh)
    version = payload.get("schema_version")
    if version != CHECKPOINT_SCHEMA_VERSION:
        raise ValueError(f"unsupported checkpoint schema version {version!r}")
    return payload["states"], payload["metadata"]


@dataclass
class RunManifest:
    run_id: str
    strategy: dict
    data_source: str
    seed: int
    rates: dict
    status: str = "running"
    checkpoints: list = field(default_factory=list)
    event_log: str = ""

    def transition(self, status: str) -> None:
        allowed = {
            "running": {"awaiting_decision", "done"},
            "awaiting_decision": {"running"},
            "done": set(),
        }
        if status not in RUN_STATUSES:
            raise ValueError(f"unknown status {status!r}")
        if status != self.status and status not in allowed[self.status]:
            raise ValueError(f"illegal status transition {self.status} -> {status}")
        self.status = status

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "strategy": self.strategy,
            "data_source": self.data_source,
            "seed": self.seed,
            "rates": self.rates,
            "status": self.status,
            "checkpoints": list(self.checkpoints),
            "event_log": self.event_log,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "RunManifest":
        raw = json.loads(Path(path).read_text())
        return cls(**raw)
