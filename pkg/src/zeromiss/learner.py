"""Regularized logistic regression on sparse expanded rows, plus a
Bernoulli Naive Bayes baseline.

The logistic trainer minimizes either

* ridge form:  sum_i log(1 + exp(-s_i w.x_i)) + ridge * ||w||^2
* L1 form:     C * sum_i log(1 + exp(-s_i w.x_i)) + l1 * ||w||_1

with s_i = +1 for abnormal rows and -1 for normal rows, by proximal
gradient descent with backtracking line search.  Backtracking enforces
the majorization inequality each step, so the objective is non-increasing
across epochs by construction.  There is no separate intercept: the
expansion's bias column plays that role and is penalized like any weight.

Note on orientation: the source formula for the posterior is read with the
standard convention p(abnormal) = sigmoid(+w.x); the printed form with a
negated exponent only flips the sign of the learned weights.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from scipy import sparse
from scipy.special import expit

from .calibrator import ABNORMAL, NORMAL
from .expand import SparseVector


class TrainingError(ValueError):
    pass


@dataclass(frozen=True)
class L2Penalty:
    ridge: float = 1e-8

    def __post_init__(self) -> None:
        if self.ridge < 0:
            raise TrainingError(f"ridge {self.ridge} must be >= 0")


@dataclass(frozen=True)
class L1Penalty:
    C: float = 1.0
    l1: float = 1.0

    def __post_init__(self) -> None:
        if self.C <= 0:
            raise TrainingError(f"C {self.C} must be > 0")
        if self.l1 < 0:
            raise TrainingError(f"l1 coefficient {self.l1} must be >= 0")


Penalty = Union[L2Penalty, L1Penalty]


@dataclass(frozen=True)
class TrainConfig:
    penalty: Penalty = field(default_factory=L2Penalty)
    tol: float = 1e-8
    max_epochs: int = 1000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.tol <= 0:
            raise TrainingError(f"tol {self.tol} must be > 0")
        if self.max_epochs < 1:
            raise TrainingError("max_epochs must be >= 1")


@dataclass(frozen=True)
class ModelWeights:
    w: np.ndarray
    dim: int
    converged: bool = True
    epochs: int = 0
    final_objective: float = float("nan")
    objective_history: tuple[float, ...] = ()
    column_names: Optional[tuple[str, ...]] = None

    def __post_init__(self) -> None:
        w = np.asarray(self.w, dtype=np.float64)
        if w.shape != (self.dim,):
            raise TrainingError(f"weights shape {w.shape} does not match dim {self.dim}")
        if not np.isfinite(w).all():
            raise TrainingError("weights contain non-finite entries")
        w.flags.writeable = False
        object.__setattr__(self, "w", w)

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.w))


def _label_sign(label) -> float:
    if isinstance(label, str):
        if label == ABNORMAL:
            return 1.0
        if label == NORMAL:
            return -1.0
        raise TrainingError(f"unknown label {label!r}")
    return 1.0 if int(label) == 1 else -1.0


def collect_stream(
    data: Iterable[tuple[SparseVector, object]],
) -> tuple[sparse.csr_matrix, np.ndarray]:
    """Assemble a stream of (SparseVector, label) into CSR + sign vector."""
    indptr = [0]
    index_parts: list[np.ndarray] = []
    value_parts: list[np.ndarray] = []
    signs: list[float] = []
    dim = None
    for vector, label in data:
        if dim is None:
            dim = vector.dim
        elif vector.dim != dim:
            raise TrainingError(f"inconsistent dimensions: {vector.dim} vs {dim}")
        index_parts.append(vector.indices)
        value_parts.append(vector.values)
        indptr.append(indptr[-1] + vector.nnz)
        signs.append(_label_sign(label))
    if dim is None:
        raise TrainingError("empty training stream")
    X = sparse.csr_matrix(
        (
            np.concatenate(value_parts) if value_parts else np.empty(0),
            np.concatenate(index_parts) if index_parts else np.empty(0, dtype=np.int64),
            np.asarray(indptr, dtype=np.int64),
        ),
        shape=(len(signs), dim),
    )
    return X, np.asarray(signs)


def smooth_objective(w: np.ndarray, X: sparse.csr_matrix, signs: np.ndarray,
                     penalty: Penalty) -> float:
    """Differentiable part of the objective (includes the ridge term)."""
    margins = signs * (X @ w)
    loss = float(np.logaddexp(0.0, -margins).sum())
    if isinstance(penalty, L2Penalty):
        return loss + penalty.ridge * float(w @ w)
    return penalty.C * loss


def smooth_gradient(w: np.ndarray, X: sparse.csr_matrix, signs: np.ndarray,
                    penalty: Penalty) -> np.ndarray:
    """Gradient of smooth_objective; accumulation order is fixed by the data order."""
    margins = signs * (X @ w)
    coeff = -signs * expit(-margins)
    grad = X.T @ coeff
    if isinstance(penalty, L2Penalty):
        return grad + 2.0 * penalty.ridge * w
    return penalty.C * grad


def _nonsmooth(w: np.ndarray, penalty: Penalty) -> float:
    if isinstance(penalty, L1Penalty):
        return penalty.l1 * float(np.abs(w).sum())
    return 0.0


def full_objective(w: np.ndarray, X: sparse.csr_matrix, signs: np.ndarray,
                   penalty: Penalty) -> float:
    return smooth_objective(w, X, signs, penalty) + _nonsmooth(w, penalty)


def _prox(v: np.ndarray, step: float, penalty: Penalty) -> np.ndarray:
    if isinstance(penalty, L1Penalty) and penalty.l1 > 0:
        thresh = step * penalty.l1
        return np.sign(v) * np.maximum(np.abs(v) - thresh, 0.0)
    return v


def train_lr(
    data: Iterable[tuple[SparseVector, object]] | tuple[sparse.csr_matrix, np.ndarray],
    cfg: TrainConfig,
    column_names: Optional[Sequence[str]] = None,
) -> ModelWeights:
    """Fit logistic regression by proximal gradient with backtracking.

    Accepts either a stream of (SparseVector, label) pairs or a
    pre-assembled (csr_matrix, sign vector) pair.  Raises on single-class
    data; on hitting max_epochs the best iterate is returned with
    converged=False.
    """
    if isinstance(data, tuple) and sparse.issparse(data[0]):
        X, signs = data
        signs = np.asarray(signs, dtype=np.float64)
    else:
        X, signs = collect_stream(data)
    if len(set(np.sign(signs).tolist())) < 2:
        raise TrainingError("training data contains a single class")

    penalty = cfg.penalty
    w = np.zeros(X.shape[1])
    objective = full_objective(w, X, signs, penalty)
    history = [objective]
    lipschitz = 1.0
    converged = False
    epoch = 0
    for epoch in range(1, cfg.max_epochs + 1):
        f_w = smooth_objective(w, X, signs, penalty)
        grad = smooth_gradient(w, X, signs, penalty)
        while True:
            step = 1.0 / lipschitz
            w_next = _prox(w - step * grad, step, penalty)
            delta = w_next - w
            quad = f_w + float(grad @ delta) + 0.5 * lipschitz * float(delta @ delta)
            if smooth_objective(w_next, X, signs, penalty) <= quad + 1e-12:
                break
            lipschitz *= 2.0
            if lipschitz > 1e18:
                raise TrainingError("backtracking failed: objective is ill-conditioned")
        new_objective = full_objective(w_next, X, signs, penalty)
        w = w_next
        history.append(new_objective)
        if abs(objective - new_objective) <= cfg.tol * max(1.0, abs(objective)):
            objective = new_objective
            converged = True
            break
        objective = new_objective
        lipschitz = max(lipschitz * 0.9, 1e-12)

    return ModelWeights(
        w=w,
        dim=X.shape[1],
        converged=converged,
        epochs=epoch,
        final_objective=objective,
        objective_history=tuple(history),
        column_names=tuple(column_names) if column_names is not None else None,
    )


def predict_proba(model: ModelWeights, x: SparseVector) -> float:
    """P(abnormal) = sigmoid(w.x)."""
    if x.dim != model.dim:
        raise TrainingError(f"dimension mismatch: vector {x.dim} vs model {model.dim}")
    return float(expit(x.dot(model.w)))


def predict_proba_batch(model: ModelWeights, X: sparse.csr_matrix) -> np.ndarray:
    if X.shape[1] != model.dim:
        raise TrainingError(f"dimension mismatch: matrix {X.shape[1]} vs model {model.dim}")
    return expit(X @ model.w)


def save_model(model: ModelWeights, path: str | Path, meta: Optional[dict] = None) -> None:
    """Versioned JSON dump; float round-trip through JSON is bit-exact."""
    payload = {
        "format_version": 1,
        "dim": model.dim,
        "converged": model.converged,
        "epochs": model.epochs,
        "final_objective": model.final_objective,
        "weights": model.w.tolist(),
        "column_names": list(model.column_names) if model.column_names else None,
        "meta": meta or {},
    }
    Path(path).write_text(json.dumps(payload))


def save_weights_csv(model: ModelWeights, index, path: str | Path) -> None:
    """Export (column name, weight) rows with columns named by monomial."""
    import csv

    from .expand import weight_column_names

    if index.total != model.dim:
        raise TrainingError(f"index dimension {index.total} does not match model {model.dim}")
    names = weight_column_names(index)
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["column", "weight"])
        for name, weight in zip(names, model.w):
            writer.writerow([name, repr(float(weight))])


def load_model(path: str | Path) -> tuple[ModelWeights, dict]:
    raw = json.loads(Path(path).read_text())
    if raw.get("format_version") != 1:
        raise TrainingError(f"unsupported model format {raw.get('format_version')!r}")
    model = ModelWeights(
        w=np.asarray(raw["weights"], dtype=np.float64),
        dim=raw["dim"],
        converged=raw["converged"],
        epochs=raw["epochs"],
        final_objective=raw["final_objective"],
        column_names=tuple(raw["column_names"]) if raw.get("column_names") else None,
    )
    return model, raw.get("meta", {})


@dataclass(frozen=True)
class NbModel:
    """Bernoulli Naive Bayes with additive smoothing alpha."""

    prior_abnormal: float
    p1_abnormal: np.ndarray  # P(x_j = 1 | abnormal)
    p1_normal: np.ndarray
    alpha: float

    def __post_init__(self) -> None:
        for arr_name in ("p1_abnormal", "p1_normal"):
            arr = np.asarray(getattr(self, arr_name), dtype=np.float64)
            arr.flags.writeable = False
            object.__setattr__(self, arr_name, arr)


class ZeroProbabilityError(TrainingError):
    """alpha = 0 left a feature pattern with zero likelihood under both classes."""


def train_nb(
    data: Iterable[tuple[np.ndarray, object]],
    alpha: float = 1.0,
) -> NbModel:
    if alpha < 0:
        raise TrainingError(f"smoothing alpha {alpha} must be >= 0")
    rows = []
    ys = []
    for vector, label in data:
        rows.append(np.asarray(vector, dtype=np.float64))
        ys.append(1.0 if _label_sign(label) > 0 else 0.0)
    if not rows:
        raise TrainingError("empty training stream")
    X = np.stack(rows)
    y = np.asarray(ys)
    n_abn = y.sum()
    n_norm = len(y) - n_abn
    if n_abn == 0 or n_norm == 0:
        raise TrainingError("training data contains a single class")
    p1_abn = (X[y == 1].sum(axis=0) + alpha) / (n_abn + 2 * alpha)
    p1_norm = (X[y == 0].sum(axis=0) + alpha) / (n_norm + 2 * alpha)
    return NbModel(
        prior_abnormal=float(n_abn / len(y)),
        p1_abnormal=p1_abn,
        p1_normal=p1_norm,
        alpha=alpha,
    )


def predict_nb(model: NbModel, x: np.ndarray) -> float:
    """Posterior P(abnormal | x) under class-conditional independence."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != model.p1_abnormal.shape:
        raise TrainingError(
            f"dimension mismatch: vector {x.shape} vs model {model.p1_abnormal.shape}"
        )
    with np.errstate(divide="ignore"):
        log_like_abn = np.where(x == 1, np.log(model.p1_abnormal),
                                np.log1p(-model.p1_abnormal)).sum()
        log_like_norm = np.where(x == 1, np.log(model.p1_normal),
                                 np.log1p(-model.p1_normal)).sum()
    log_post_abn = log_like_abn + np.log(model.prior_abnormal)
    log_post_norm = log_like_norm + np.log(1.0 - model.prior_abnormal)
    if np.isneginf(log_post_abn) and np.isneginf(log_post_norm):
        raise ZeroProbabilityError(
            "feature pattern has zero probability under both classes; use alpha > 0"
        )
    if np.isneginf(log_post_abn):
        return 0.0
    if np.isneginf(log_post_norm):
        return 1.0
    # normalize in log space over the two classes
    m = max(log_post_abn, log_post_norm)
    pa = np.exp(log_post_abn - m)
    pn = np.exp(log_post_norm - m)
    return float(pa / (pa + pn))
