"""HTTP API for the interactive advisor.

Long-running work (training, option evaluation) runs on a small worker
pool; submission endpoints return a job id immediately and clients poll
GET /jobs/{id}.  Run records are appended to the same store the CLI
uses, so API results and CLI results are interchangeable.
"""

from __future__ import annotations

import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .cli import AppConfig
from .cohort import EncodingError, encode_feature_record
from .pipeline import PipelineConfig, PipelineError, bundle_from_result, run_pipeline
from .schema import SchemaError
from .select import (
    BudgetQuery,
    SelectionError,
    TestAttr,
    select_best,
    tests_to_dict,
)
from .store import RunStore


class TestRowIn(BaseModel):
    name: str
    cost: float = Field(ge=0)
    discomfort: float = Field(ge=0)
    columns: Optional[list[str]] = None


class TestTableIn(BaseModel):
    tests: list[TestRowIn]


class SelectIn(BaseModel):
    mode: str
    budget: float = Field(ge=0)
    protocol: Optional[str] = None


class TrainIn(BaseModel):
    seed: Optional[int] = None


class PredictIn(BaseModel):
    record: dict


class _Jobs:
    def __init__(self, max_workers: int = 2):
        self._pool = ThreadPoolExecutor(max_workers=max_workers)
        self._lock = threading.Lock()
        self._jobs: dict[str, dict] = {}

    def submit(self, fn) -> str:
        job_id = f"job-{uuid.uuid4().hex[:12]}"
        with self._lock:
            self._jobs[job_id] = {"job_id": job_id, "status": "queued"}

        def run():
            with self._lock:
                self._jobs[job_id]["status"] = "running"
            try:
                result = fn()
            except Exception as exc:  # surfaced to the poller, not swallowed
                with self._lock:
                    self._jobs[job_id].update(status="failed", error=str(exc))
                return
            with self._lock:
                self._jobs[job_id].update(status="done", result=result)

        self._pool.submit(run)
        return job_id

    def get(self, job_id: str) -> dict:
        with self._lock:
            if job_id not in self._jobs:
                raise KeyError(job_id)
            return dict(self._jobs[job_id])


def _normalize_mode(mode: str) -> str:
    aliases = {"cost": "cost_select", "cost_select": "cost_select",
               "discomfort": "discomfort_remove", "discomfort_remove": "discomfort_remove"}
    if mode not in aliases:
        raise SelectionError(f"unknown mode {mode!r}")
    return aliases[mode]


def create_app(cfg: Optional[AppConfig] = None, ui_dir: Optional[str] = None) -> FastAPI:
    cfg = cfg or AppConfig()
    if not cfg.protocol_explicit:
        # advisor default: calibrate on a dedicated split, not the test set
        cfg.pipeline = PipelineConfig.from_dict(
            {**cfg.pipeline.to_dict(), "protocol": "holdout"}
        )
    app = FastAPI(title="zeromiss advisor", version="0.1.0")
    store = RunStore(cfg.store_dir)
    jobs = _Jobs()
    state_lock = threading.Lock()
    state = {
        "tests": cfg.load_tests(),
        "cohort": None,  # lazily loaded, reused across jobs
    }

    def get_cohort():
        with state_lock:
            if state["cohort"] is None:
                state["cohort"] = cfg.load_cohort(cfg.pipeline.seed)
            return state["cohort"]

    @app.get("/tests")
    def get_tests():
        with state_lock:
            return tests_to_dict(state["tests"])

    @app.put("/tests")
    def put_tests(body: TestTableIn):
        with state_lock:
            existing = {t.name: t for t in state["tests"]}
            rows = []
            for row in body.tests:
                columns = row.columns
                if columns is None:
                    if row.name not in existing:
                        raise HTTPException(
                            status_code=422,
                            detail=f"unknown test {row.name!r}: supply its columns",
                        )
                    columns = list(existing[row.name].feature_columns)
                try:
                    rows.append(TestAttr(name=row.name, cost=row.cost,
                                         discomfort=row.discomfort,
                                         feature_columns=tuple(columns)))
                except SelectionError as exc:
                    raise HTTPException(status_code=422, detail=str(exc))
            if len({r.name for r in rows}) != len(rows):
                raise HTTPException(status_code=422, detail="duplicate test names")
            state["tests"] = rows
            return tests_to_dict(rows)

    @app.post("/select")
    def post_select(body: SelectIn):
        try:
            query = BudgetQuery(
                mode=_normalize_mode(body.mode),
                budget=body.budget,
                protocol=body.protocol or cfg.pipeline.protocol,
            )
        except SelectionError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        pipeline = cfg.pipeline
        if query.protocol != pipeline.protocol:
            pipeline = PipelineConfig.from_dict(
                {**pipeline.to_dict(), "protocol": query.protocol}
            )
        with state_lock:
            tests = list(state["tests"])

        def work():
            ranked = select_best(query, get_cohort(), pipeline, tests)
            record = store.append(
                kind="select",
                config={**cfg.to_dict(),
                        "query": {"mode": query.mode, "budget": query.budget,
                                   "protocol": query.protocol}},
                results={"options": [opt.to_dict() for opt in ranked]},
            )
            return {"run_id": record.run_id,
                    "query": {"mode": query.mode, "budget": query.budget,
                               "protocol": query.protocol},
                    "options": [opt.to_dict() for opt in ranked]}

        return {"job_id": jobs.submit(work)}

    @app.post("/train")
    def post_train(body: Optional[TrainIn] = None):
        pipeline = cfg.pipeline
        if body and body.seed is not None:
            pipeline = PipelineConfig.from_dict({**pipeline.to_dict(), "seed": body.seed})

        def work():
            cohort = (get_cohort() if pipeline.seed == cfg.pipeline.seed
                      else cfg.load_cohort(pipeline.seed))
            result = run_pipeline(cohort, pipeline)
            record = store.append(
                kind="train",
                config={**cfg.to_dict(), "pipeline": pipeline.to_dict()},
                results=result.summary(),
                bundle=bundle_from_result(result),
            )
            return {"run_id": record.run_id, **result.summary()}

        return {"job_id": jobs.submit(work)}

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str):
        try:
            return jobs.get(job_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no job {job_id!r}")

    @app.get("/runs")
    def get_runs():
        return {"runs": [r.to_dict() for r in store.list()]}

    @app.get("/runs/{run_id}")
    def get_run(run_id: str):
        for record in store.list():
            if record.run_id == run_id:
                return record.to_dict()
        raise HTTPException(status_code=404, detail=f"no run {run_id!r}")

    @app.post("/predict")
    def post_predict(body: PredictIn):
        latest = store.latest_model_run()
        if latest is None:
            raise HTTPException(status_code=409, detail="no trained model; POST /train first")
        bundle = store.load_bundle(latest.run_id)
        try:
            schema = cfg.load_schema()
            row = encode_feature_record(body.record, schema)
            out = bundle.predict_encoded(row, [name for name, _ in schema.binary_columns()])
        except (EncodingError, SchemaError, PipelineError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {"run_id": latest.run_id, **out}

    if ui_dir and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
