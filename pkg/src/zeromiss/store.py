"""Append-only run log plus a models directory keyed by run id.

No database: one JSON line per run record, written under a lock, listed
back in insertion order.  Records are immutable once written.
"""

from __future__ import annotations

import hashlib
import json
import threading
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from .pipeline import ModelBundle


class StoreError(ValueError):
    pass


@dataclass(frozen=True)
class RunRecord:
    run_id: str
    kind: str  # generate | train | sweep | select
    timestamp: str
    config: dict
    input_digests: dict
    results: dict

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "kind": self.kind,
            "timestamp": self.timestamp,
            "config": self.config,
            "input_digests": self.input_digests,
            "results": self.results,
        }

    @staticmethod
    def from_dict(raw: dict) -> "RunRecord":
        return RunRecord(
            run_id=raw["run_id"],
            kind=raw["kind"],
            timestamp=raw["timestamp"],
            config=raw["config"],
            input_digests=raw.get("input_digests", {}),
            results=raw["results"],
        )


def new_run_id() -> str:
    return f"run-{uuid.uuid4().hex[:12]}"


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class RunStore:
    """Serializes writes; safe for concurrent readers within one process."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "models").mkdir(exist_ok=True)
        self._log = self.root / "runs.jsonl"
        self._lock = threading.Lock()

    def append(self, kind: str, config: dict, results: dict,
               input_digests: Optional[dict] = None,
               bundle: Optional[ModelBundle] = None) -> RunRecord:
        record = RunRecord(
            run_id=new_run_id(),
            kind=kind,
            timestamp=datetime.now(timezone.utc).isoformat(),
            config=config,
            input_digests=input_digests or {},
            results=results,
        )
        with self._lock:
            if any(r.run_id == record.run_id for r in self.list()):
                raise StoreError(f"run id collision: {record.run_id}")
            with self._log.open("a") as fh:
                fh.write(json.dumps(record.to_dict()) + "\n")
            if bundle is not None:
                bundle.save(self.root / "models" / f"{record.run_id}.json")
        return record

    def list(self) -> list[RunRecord]:
        if not self._log.exists():
            return []
        records = []
        with self._log.open() as fh:
            for line in fh:
                if line.strip():
                    records.append(RunRecord.from_dict(json.loads(line)))
        return records

    def get(self, run_id: str) -> RunRecord:
        for record in self.list():
            if record.run_id == run_id:
                return record
        raise StoreError(f"no run record {run_id!r}")

    def load_bundle(self, run_id: str) -> ModelBundle:
        path = self.root / "models" / f"{run_id}.json"
        if not path.exists():
            raise StoreError(f"run {run_id!r} has no stored model")
        return ModelBundle.load(path)

    def latest_model_run(self) -> Optional[RunRecord]:
        latest = None
        for record in self.list():
            if (self.root / "models" / f"{record.run_id}.json").exists():
                latest = record
        return latest
