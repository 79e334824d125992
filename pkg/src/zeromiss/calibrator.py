"""Operating-threshold calibration that forces false normals to zero.

Scores here are ``z = P(normal)``.  The classification rule is
``predict normal iff z > threshold`` with ties classified abnormal, so
raising the threshold to the largest z seen on an abnormal instance
(never below the 0.5 starting point) guarantees that no abnormal
instance is ever predicted normal on the calibration data.

Tie note: the source procedure counts false abnormals with a strict
``z < threshold`` comparison, which silently omits normal instances
sitting exactly at the threshold.  The confusion matrix here counts
those ties as false abnormals, consistent with the prediction rule
(ties are classified abnormal); the two counts differ only on exact
ties, which the strict-loop reading cannot classify at all.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

NORMAL = "normal"
ABNORMAL = "abnormal"


class CalibrationError(ValueError):
    pass


@dataclass(frozen=True)
class ScoredInstance:
    """One scored record: z is the normal-class probability."""

    z: float
    label: str
    origin_id: str = ""

    def __post_init__(self) -> None:
        if not (0.0 <= self.z <= 1.0):
            raise CalibrationError(f"z={self.z} outside [0, 1]")
        if self.label not in (NORMAL, ABNORMAL):
            raise CalibrationError(f"label must be {NORMAL!r} or {ABNORMAL!r}, got {self.label!r}")


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts in the (abnormal=positive) convention: TA FA / FN TN."""

    ta: int
    fa: int
    fn: int
    tn: int

    def __post_init__(self) -> None:
        if min(self.ta, self.fa, self.fn, self.tn) < 0:
            raise CalibrationError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.ta + self.fa + self.fn + self.tn


@dataclass(frozen=True)
class ThresholdResult:
    threshold: float
    cm: ConfusionMatrix

    @property
    def fa(self) -> int:
        return self.cm.fa


def to_normal_prob(p_abnormal: float) -> float:
    """Convert an abnormal-class probability to the normal-class score z."""
    if not (0.0 <= p_abnormal <= 1.0):
        raise CalibrationError(f"probability {p_abnormal} outside [0, 1]")
    return 1.0 - p_abnormal


def confusion(scored: Iterable[ScoredInstance], threshold: float) -> ConfusionMatrix:
    """Counts under the rule: z > threshold => normal, else abnormal."""
    if not (0.0 <= threshold <= 1.0):
        raise CalibrationError(f"threshold {threshold} outside [0, 1]")
    ta = fa = fn = tn = 0
    for inst in scored:
        predicted_normal = inst.z > threshold
        if inst.label == ABNORMAL:
            if predicted_normal:
                fn += 1
            else:
                ta += 1
        else:
            if predicted_normal:
                tn += 1
            else:
                fa += 1
    return ConfusionMatrix(ta=ta, fa=fa, fn=fn, tn=tn)


def calibrate(scored: Sequence[ScoredInstance]) -> ThresholdResult:
    """Smallest threshold >= 0.5 with zero false normals on the given scores.

    The threshold starts at 0.5 and is raised to the largest z observed on
    an abnormal instance.  Result is invariant to the ordering of ``scored``.
    """
    scored = list(scored)
    if not scored:
        raise CalibrationError("cannot calibrate on an empty score set")
    threshold = 0.5
    for inst in scored:
        if inst.label == ABNORMAL and inst.z > threshold:
            threshold = inst.z
    cm = confusion(scored, threshold)
    assert cm.fn == 0, "calibrated threshold must yield zero false normals"
    return ThresholdResult(threshold=threshold, cm=cm)


def sensitivity(cm: ConfusionMatrix) -> Optional[float]:
    """TA / (TA + FN); None when there are no abnormal instances."""
    denom = cm.ta + cm.fn
    if denom == 0:
        return None
    return cm.ta / denom


def accuracy(cm: ConfusionMatrix) -> float:
    """(TA + TN) / total."""
    if cm.total == 0:
        raise CalibrationError("accuracy undefined on an empty confusion matrix")
    return (cm.ta + cm.tn) / cm.total


def calibration_report(result: ThresholdResult, protocol: str) -> dict:
    """Serializable summary of a calibration outcome."""
    sens = sensitivity(result.cm)
    return {
        "protocol": protocol,
        "threshold": result.threshold,
        "ta": result.cm.ta,
        "fa": result.cm.fa,
        "fn": result.cm.fn,
        "tn": result.cm.tn,
        "sensitivity": sens,
        "accuracy": accuracy(result.cm),
    }
