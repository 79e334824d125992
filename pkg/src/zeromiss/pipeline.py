"""End-to-end screening pipeline.

Two evaluation protocols:

* ``paper`` — supersample the whole cohort, then split; the operating
  threshold is calibrated on the test split.  This reproduces the source
  procedure and is knowingly leaky twice over (duplicates cross the
  split, and the threshold is tuned on the reported set).
* ``holdout`` — split first, supersample the training rows only, and
  calibrate on a dedicated calibration split carved out of the held-out
  rows; final metrics come from rows never touched by calibration.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import sparse

from . import calibrator as cal
from .cohort import EncodedCohort, split, supersample
from .expand import MULTISET, MonomialIndex
from .learner import (
    L1Penalty,
    L2Penalty,
    ModelWeights,
    Penalty,
    TrainConfig,
    predict_proba,
    predict_proba_batch,
    train_lr,
)
from .schema import CATEGORY_MP

PROTOCOL_PAPER = "paper"
PROTOCOL_HOLDOUT = "holdout"
PROTOCOLS = (PROTOCOL_PAPER, PROTOCOL_HOLDOUT)

TRAIN_FRACTION = 2.0 / 3.0


class PipelineError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    degree: int = 3
    expansion_mode: str = MULTISET
    penalty: Penalty = field(default_factory=L2Penalty)
    tol: float = 1e-8
    max_epochs: int = 400
    protocol: str = PROTOCOL_PAPER
    supersample_factor: int = 10
    train_fraction: float = TRAIN_FRACTION
    include_mp: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if self.protocol not in PROTOCOLS:
            raise PipelineError(f"unknown protocol {self.protocol!r}, expected {PROTOCOLS}")
        if self.degree < 1:
            raise PipelineError("degree must be >= 1")
        if not (0.0 < self.train_fraction < 1.0):
            raise PipelineError("train_fraction must lie in (0, 1)")
        if self.supersample_factor < 0:
            raise PipelineError("supersample_factor must be >= 0")

    def train_config(self) -> TrainConfig:
        return TrainConfig(penalty=self.penalty, tol=self.tol,
                           max_epochs=self.max_epochs, seed=self.seed)

    def to_dict(self) -> dict:
        if isinstance(self.penalty, L2Penalty):
            penalty = {"kind": "l2", "ridge": self.penalty.ridge}
        else:
            penalty = {"kind": "l1", "C": self.penalty.C, "l1": self.penalty.l1}
        return {
            "degree": self.degree,
            "expansion_mode": self.expansion_mode,
            "penalty": penalty,
            "tol": self.tol,
            "max_epochs": self.max_epochs,
            "protocol": self.protocol,
            "supersample_factor": self.supersample_factor,
            "train_fraction": self.train_fraction,
            "include_mp": self.include_mp,
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(raw: dict) -> "PipelineConfig":
        raw = dict(raw)
        penalty_raw = raw.pop("penalty", {"kind": "l2", "ridge": 1e-8})
        if penalty_raw.get("kind") == "l1":
            penalty: Penalty = L1Penalty(C=penalty_raw.get("C", 1.0),
                                         l1=penalty_raw.get("l1", 1.0))
        elif penalty_raw.get("kind") == "l2":
            penalty = L2Penalty(ridge=penalty_raw.get("ridge", 1e-8))
        else:
            raise PipelineError(f"unknown penalty kind {penalty_raw.get('kind')!r}")
        allowed = {"degree", "expansion_mode", "tol", "max_epochs", "protocol",
                   "supersample_factor", "train_fraction", "include_mp", "seed"}
        unknown = set(raw) - allowed
        if unknown:
            raise PipelineError(f"unknown pipeline config keys: {sorted(unknown)}")
        return PipelineConfig(penalty=penalty, **raw)


@dataclass(frozen=True)
class EvalSet:
    """Metrics of one scored population at 0.5 and at the calibrated threshold."""

    population: int
    init_cm: cal.ConfusionMatrix
    post_cm: cal.ConfusionMatrix

    def to_dict(self) -> dict:
        def cm_dict(cm: cal.ConfusionMatrix) -> dict:
            return {"ta": cm.ta, "fa": cm.fa, "fn": cm.fn, "tn": cm.tn,
                    "accuracy": cal.accuracy(cm), "sensitivity": cal.sensitivity(cm)}
        return {
            "population": self.population,
            "init": cm_dict(self.init_cm),
            "post": cm_dict(self.post_cm),
        }


@dataclass(frozen=True)
class PipelineResult:
    config: PipelineConfig
    threshold: float
    calibration: EvalSet
    train_eval: EvalSet
    test_eval: Optional[EvalSet]  # holdout protocol only
    model: ModelWeights
    base_columns: tuple[str, ...]
    dropped_columns: tuple[str, ...]
    n_train_rows: int

    @property
    def fa(self) -> int:
        return self.calibration.post_cm.fa

    @property
    def fa_rate(self) -> float:
        return self.fa / self.calibration.population

    @property
    def converged(self) -> bool:
        return self.model.converged

    def summary(self) -> dict:
        out = {
            "threshold": self.threshold,
            "fa": self.fa,
            "fa_rate": self.fa_rate,
            "population": self.calibration.population,
            "calibration": self.calibration.to_dict(),
            "train": self.train_eval.to_dict(),
            "n_train_rows": self.n_train_rows,
            "n_base_features": len(self.base_columns),
            "dropped_columns": list(self.dropped_columns),
            "converged": self.converged,
            "epochs": self.model.epochs,
        }
        if self.test_eval is not None:
            out["test"] = self.test_eval.to_dict()
        return out


def _scores(model: ModelWeights, X: sparse.csr_matrix, labels: np.ndarray,
            origin_ids: Sequence[str]) -> list[cal.ScoredInstance]:
    p_abnormal = predict_proba_batch(model, X)
    return [
        cal.ScoredInstance(z=cal.to_normal_prob(float(p)),
                           label=cal.ABNORMAL if y else cal.NORMAL,
                           origin_id=origin)
        for p, y, origin in zip(p_abnormal, labels, origin_ids)
    ]


def _expand_matrix(index: MonomialIndex, matrix: np.ndarray) -> sparse.csr_matrix:
    indptr = [0]
    parts = []
    for vec in index.expand_rows(matrix):
        parts.append(vec.indices)
        indptr.append(indptr[-1] + vec.nnz)
    return sparse.csr_matrix(
        (
            np.ones(indptr[-1]),
            np.concatenate(parts) if parts else np.empty(0, dtype=np.int64),
            np.asarray(indptr, dtype=np.int64),
        ),
        shape=(matrix.shape[0], index.total),
    )


def _eval_set(model: ModelWeights, X: sparse.csr_matrix, cohort: EncodedCohort,
              threshold: float) -> EvalSet:
    scored = _scores(model, X, cohort.labels, cohort.origin_ids)
    return EvalSet(
        population=len(scored),
        init_cm=cal.confusion(scored, 0.5),
        post_cm=cal.confusion(scored, threshold),
    )


def run_pipeline(
    cohort: EncodedCohort,
    config: PipelineConfig,
    drop_columns: Sequence[str] = (),
) -> PipelineResult:
    """Encode-to-threshold run on an already-encoded cohort.

    drop_columns removes feature columns (e.g. de-selected clinical tests)
    before expansion; MP-category columns are dropped as well unless
    config.include_mp is set.
    """
    to_drop = list(dict.fromkeys(drop_columns))
    if not config.include_mp:
        to_drop.extend(c for c in cohort.columns_in_category(CATEGORY_MP)
                       if c not in to_drop)
    working = cohort.drop_columns(to_drop) if to_drop else cohort
    if working.matrix.shape[1] == 0:
        raise PipelineError("no feature columns left after drops")

    if config.protocol == PROTOCOL_PAPER:
        pool = supersample(working, config.supersample_factor)
        parts = split(pool, config.train_fraction, config.seed)
        train_cohort, calib_cohort = parts.train, parts.test
        test_cohort = None
    else:
        parts = split(working, config.train_fraction, config.seed)
        held = split(parts.test, 0.5, config.seed + 1)
        train_cohort = supersample(parts.train, config.supersample_factor)
        calib_cohort, test_cohort = held.train, held.test

    index = MonomialIndex(base_dim=working.matrix.shape[1], degree=config.degree,
                          mode=config.expansion_mode)
    X_train = _expand_matrix(index, train_cohort.matrix)
    signs = np.where(train_cohort.labels == 1, 1.0, -1.0)
    model = train_lr((X_train, signs), config.train_config())

    X_calib = _expand_matrix(index, calib_cohort.matrix)
    calib_scored = _scores(model, X_calib, calib_cohort.labels, calib_cohort.origin_ids)
    result = cal.calibrate(calib_scored)

    calibration = EvalSet(
        population=len(calib_scored),
        init_cm=cal.confusion(calib_scored, 0.5),
        post_cm=result.cm,
    )
    train_eval = _eval_set(model, X_train, train_cohort, result.threshold)
    test_eval = None
    if test_cohort is not None and test_cohort.n_rows:
        test_eval = _eval_set(model, _expand_matrix(index, test_cohort.matrix),
                              test_cohort, result.threshold)

    return PipelineResult(
        config=config,
        threshold=result.threshold,
        calibration=calibration,
        train_eval=train_eval,
        test_eval=test_eval,
        model=model,
        base_columns=working.column_names,
        dropped_columns=tuple(to_drop),
        n_train_rows=train_cohort.n_rows,
    )


@dataclass(frozen=True)
class ModelBundle:
    """Everything needed to score a new encoded record with a trained run."""

    config: PipelineConfig
    base_columns: tuple[str, ...]
    dropped_columns: tuple[str, ...]
    threshold: float
    weights: np.ndarray

    def predict_encoded(self, full_row: np.ndarray,
                        all_columns: Sequence[str]) -> dict:
        """Score a row encoded over `all_columns` (drops are applied here)."""
        keep = [i for i, name in enumerate(all_columns) if name in set(self.base_columns)]
        row = np.asarray(full_row)[keep]
        if row.shape[0] != len(self.base_columns):
            raise PipelineError(
                f"record encodes {row.shape[0]} of {len(self.base_columns)} model columns"
            )
        index = MonomialIndex(base_dim=len(self.base_columns),
                              degree=self.config.degree, mode=self.config.expansion_mode)
        vec = index.expand(row)
        model = ModelWeights(w=self.weights, dim=index.total)
        p_abnormal = predict_proba(model, vec)
        z = cal.to_normal_prob(p_abnormal)
        return {
            "p_abnormal": p_abnormal,
            "z_normal": z,
            "threshold": self.threshold,
            "decision": cal.NORMAL if z > self.threshold else cal.ABNORMAL,
        }

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "config": self.config.to_dict(),
            "base_columns": list(self.base_columns),
            "dropped_columns": list(self.dropped_columns),
            "threshold": self.threshold,
            "weights": self.weights.tolist(),
        }

    @staticmethod
    def from_dict(raw: dict) -> "ModelBundle":
        if raw.get("format_version") != 1:
            raise PipelineError(f"unsupported bundle format {raw.get('format_version')!r}")
        return ModelBundle(
            config=PipelineConfig.from_dict(raw["config"]),
            base_columns=tuple(raw["base_columns"]),
            dropped_columns=tuple(raw["dropped_columns"]),
            threshold=raw["threshold"],
            weights=np.asarray(raw["weights"], dtype=np.float64),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @staticmethod
    def load(path: str | Path) -> "ModelBundle":
        return ModelBundle.from_dict(json.loads(Path(path).read_text()))


def bundle_from_result(result: PipelineResult) -> ModelBundle:
    return ModelBundle(
        config=result.config,
        base_columns=result.base_columns,
        dropped_columns=result.dropped_columns,
        threshold=result.threshold,
        weights=result.model.w,
    )
