"""Command-line driver: generate / train / sweep / select / serve.

Exit codes: 0 success, 1 usage error, 2 data error, 3 finished with a
convergence warning (with --strict the warning blocks persistence).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .cohort import EncodingError, load_records_csv, encode_records, save_cohort_csv
from .pipeline import PipelineConfig, PipelineError, bundle_from_result, run_pipeline
from .schema import FeatureSchema, SchemaError, default_schema, load_schema
from .select import (
    BudgetQuery,
    SelectionError,
    ablation_sweep,
    default_removal_order,
    default_test_table,
    load_test_table,
    select_best,
    write_option_report,
    write_sweep_report,
)
from .store import RunStore, file_digest
from .synth import SynthConfig, SynthError, default_synth_config, generate_synthetic

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_CONVERGENCE = 3

DataError = (SchemaError, EncodingError, SynthError, SelectionError, PipelineError,
             json.JSONDecodeError, OSError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse default exits 2; we reserve that for data errors
        raise UsageError(message)


@dataclass
class AppConfig:
    """Top-level config file: pipeline settings plus data sources."""

    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    schema_path: Optional[str] = None
    cohort_csv: Optional[str] = None
    synth_overrides: dict = field(default_factory=dict)
    tests_path: Optional[str] = None
    store_dir: str = "runs"
    # reproduction runs default to the paper protocol; the advisor service
    # defaults to holdout unless the config pins a protocol explicitly
    protocol_explicit: bool = False

    @staticmethod
    def from_file(path: Optional[str]) -> "AppConfig":
        if path is None:
            return AppConfig()
        p = Path(path)
        if not p.exists():
            raise EncodingError(f"config not found: {p}")
        raw = json.loads(p.read_text())
        cfg = AppConfig(
            pipeline=PipelineConfig.from_dict(raw.get("pipeline", {})),
            schema_path=raw.get("schema"),
            cohort_csv=raw.get("cohort_csv"),
            synth_overrides=raw.get("synth", {}) or {},
            tests_path=raw.get("tests"),
            store_dir=raw.get("store", "runs"),
            protocol_explicit="protocol" in raw.get("pipeline", {}),
        )
        return cfg

    def to_dict(self) -> dict:
        return {
            "pipeline": self.pipeline.to_dict(),
            "schema": self.schema_path,
            "cohort_csv": self.cohort_csv,
            "synth": self.synth_overrides,
            "tests": self.tests_path,
            "store": self.store_dir,
        }

    def load_schema(self) -> FeatureSchema:
        if self.schema_path is not None:
            return load_schema(self.schema_path)
        return default_schema()

    def synth_config(self, seed: int) -> SynthConfig:
        overrides = dict(self.synth_overrides)
        if "planted_rules" in overrides:
            from .synth import PlantedRule

            overrides["planted_rules"] = tuple(
                PlantedRule(features=tuple(r["features"]), implies=r["implies"],
                            noise_rate=r.get("noise_rate", 0.0))
                for r in overrides["planted_rules"]
            )
        if "base_rates" in overrides:
            overrides["base_rates"] = dict(overrides["base_rates"])
        if "columns" in overrides and overrides["columns"] is not None:
            overrides["columns"] = tuple((str(n), str(c)) for n, c in overrides["columns"])
        return default_synth_config(seed=seed, **overrides)

    def load_cohort(self, seed: int):
        if self.cohort_csv is not None:
            schema = self.load_schema()
            records = load_records_csv(self.cohort_csv, schema)
            return encode_records(records, schema)
        return generate_synthetic(self.synth_config(seed))

    def load_tests(self):
        if self.tests_path is not None:
            return load_test_table(self.tests_path)
        return default_test_table()

    def input_digests(self) -> dict:
        digests = {}
        for key, path in (("schema", self.schema_path), ("cohort_csv", self.cohort_csv),
                          ("tests", self.tests_path)):
            if path is not None:
                digests[key] = file_digest(path)
        return digests


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="zeromiss",
                     description="Zero-false-normal screening and test selection")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="output path")

    p_gen = sub.add_parser("generate", help="write a synthetic cohort CSV")
    common(p_gen)

    p_train = sub.add_parser("train", help="run the full training pipeline")
    common(p_train)
    p_train.add_argument("--strict", action="store_true",
                         help="fail instead of warning on non-convergence")

    p_sweep = sub.add_parser("sweep", help="feature-ablation sweep over BCT columns")
    common(p_sweep)
    p_sweep.add_argument("--order", help="comma-separated BCT column removal order")

    p_select = sub.add_parser("select", help="budgeted test-selection case study")
    common(p_select)
    p_select.add_argument("--mode", choices=["cost", "discomfort"], required=True)
    p_select.add_argument("--budget", type=float, required=True)
    p_select.add_argument("--protocol", choices=["paper", "holdout"])
    p_select.add_argument("--strict", action="store_true")

    p_serve = sub.add_parser("serve", help="run the advisor HTTP service")
    common(p_serve)
    p_serve.add_argument("--address", default="127.0.0.1:8000", help="host:port")
    return parser


def _apply_seed(cfg: AppConfig, seed: Optional[int]) -> AppConfig:
    if seed is not None:
        cfg.pipeline = PipelineConfig.from_dict({**cfg.pipeline.to_dict(), "seed": seed})
    return cfg


def _cmd_generate(cfg: AppConfig, out: Optional[str]) -> int:
    cohort = generate_synthetic(cfg.synth_config(cfg.pipeline.seed))
    out_path = out or "cohort.csv"
    save_cohort_csv(cohort, out_path)
    print(f"wrote {cohort.n_rows} rows ({cohort.n_abnormal} abnormal) to {out_path}")
    return EXIT_OK


def _cmd_train(cfg: AppConfig, out: Optional[str], strict: bool) -> int:
    cohort = cfg.load_cohort(cfg.pipeline.seed)
    result = run_pipeline(cohort, cfg.pipeline)
    if not result.converged and strict:
        print("error: training did not converge (--strict)", file=sys.stderr)
        return EXIT_CONVERGENCE
    store = RunStore(cfg.store_dir)
    record = store.append(
        kind="train",
        config=cfg.to_dict(),
        results=result.summary(),
        input_digests=cfg.input_digests(),
        bundle=bundle_from_result(result),
    )
    summary = {"run_id": record.run_id, **result.summary()}
    text = json.dumps(summary, indent=2)
    if out:
        Path(out).write_text(text + "\n")
    print(text)
    if not result.converged:
        print("warning: training did not converge", file=sys.stderr)
        return EXIT_CONVERGENCE
    return EXIT_OK


def _cmd_sweep(cfg: AppConfig, out: Optional[str], order_arg: Optional[str]) -> int:
    cohort = cfg.load_cohort(cfg.pipeline.seed)
    order = order_arg.split(",") if order_arg else default_removal_order(cohort)
    points = ablation_sweep(cohort, order, cfg.pipeline)
    out_path = out or "sweep.csv"
    write_sweep_report(points, out_path)
    store = RunStore(cfg.store_dir)
    record = store.append(
        kind="sweep",
        config={**cfg.to_dict(), "removal_order": list(order)},
        results={"points": [p.to_dict() for p in points]},
        input_digests=cfg.input_digests(),
    )
    print(f"run {record.run_id}: {len(points)} sweep points -> {out_path}")
    return EXIT_OK


def _cmd_select(cfg: AppConfig, out: Optional[str], mode: str, budget: float,
                protocol: Optional[str], strict: bool) -> int:
    query = BudgetQuery(
        mode="cost_select" if mode == "cost" else "discomfort_remove",
        budget=budget,
        protocol=protocol or cfg.pipeline.protocol,
    )
    pipeline = cfg.pipeline
    if protocol and protocol != pipeline.protocol:
        pipeline = PipelineConfig.from_dict({**pipeline.to_dict(), "protocol": protocol})
    cohort = cfg.load_cohort(pipeline.seed)
    tests = cfg.load_tests()
    ranked = select_best(query, cohort, pipeline, tests)
    warned = any(not opt.result.converged for opt in ranked)
    if warned and strict:
        print("error: an option's training did not converge (--strict)", file=sys.stderr)
        return EXIT_CONVERGENCE
    out_path = out or "options.csv"
    write_option_report(ranked, out_path)
    store = RunStore(cfg.store_dir)
    record = store.append(
        kind="select",
        config={**cfg.to_dict(), "query": {"mode": query.mode, "budget": query.budget,
                                            "protocol": query.protocol}},
        results={"options": [opt.to_dict() for opt in ranked]},
        input_digests=cfg.input_digests(),
    )
    best = ranked[0]
    print(f"run {record.run_id}: {len(ranked)} options -> {out_path}")
    print(f"best: {best.option_id} fa={best.result.fa} kept={list(best.kept_tests)}")
    if warned:
        print("warning: some options did not converge", file=sys.stderr)
        return EXIT_CONVERGENCE
    return EXIT_OK


def _cmd_serve(cfg: AppConfig, address: str) -> int:
    import os

    import uvicorn

    from .service import create_app

    host, _, port = address.partition(":")
    ui_dir = os.environ.get("ZEROMISS_UI_DIR")
    if ui_dir is None and Path("frontend/dist").is_dir():
        ui_dir = "frontend/dist"
    app = create_app(cfg, ui_dir=ui_dir)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000))
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = _apply_seed(AppConfig.from_file(args.config), args.seed)
        if args.command == "generate":
            return _cmd_generate(cfg, args.out)
        if args.command == "train":
            return _cmd_train(cfg, args.out, args.strict)
        if args.command == "sweep":
            return _cmd_sweep(cfg, args.out, args.order)
        if args.command == "select":
            return _cmd_select(cfg, args.out, args.mode, args.budget,
                               args.protocol, args.strict)
        if args.command == "serve":
            return _cmd_serve(cfg, args.address)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
