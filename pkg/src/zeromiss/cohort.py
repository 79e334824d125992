"""Record ingestion: imputation, binary encoding, splitting, supersampling.

All cohort types are immutable after construction (the numpy buffers are
frozen), so they are safe to share across threads read-only.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .calibrator import ABNORMAL, NORMAL
from .schema import FeatureSchema, FieldSpec

logger = logging.getLogger(__name__)

MISSING = None


class EncodingError(ValueError):
    """A record value violates the schema (unknown value, out-of-bin numeric)."""


class RecordRejected(EncodingError):
    """A record hit a reject imputation rule and must be skipped."""


@dataclass(frozen=True)
class PatientRecord:
    """Raw field values of one merged record; None marks a missing value."""

    values: Mapping[str, object]
    origin_id: str = ""

    def get(self, name: str):
        v = self.values.get(name, MISSING)
        return MISSING if v == "" else v


@dataclass(frozen=True)
class CohortStats:
    """Per-field mean (numeric) and mode (nominal) over observed values."""

    mean: Mapping[str, float]
    mode: Mapping[str, str]
    quartile_edges: Mapping[str, tuple[float, ...]] = field(default_factory=dict)


@dataclass(frozen=True)
class EncodedCohort:
    """0/1 feature matrix with labels and per-row provenance.

    labels holds 1 for abnormal rows; columns carries (name, category)
    tags for every feature column.
    """

    matrix: np.ndarray
    labels: np.ndarray
    origin_ids: tuple[str, ...]
    columns: tuple[tuple[str, str], ...]

    def __post_init__(self) -> None:
        matrix = np.ascontiguousarray(np.asarray(self.matrix, dtype=np.uint8))
        labels = np.asarray(self.labels, dtype=np.uint8)
        if matrix.ndim != 2 or matrix.shape[1] != len(self.columns):
            raise EncodingError(
                f"matrix shape {matrix.shape} does not match {len(self.columns)} columns"
            )
        if labels.shape != (matrix.shape[0],):
            raise EncodingError("labels length does not match row count")
        if len(self.origin_ids) != matrix.shape[0]:
            raise EncodingError("origin_ids length does not match row count")
        if matrix.size and matrix.max() > 1:
            raise EncodingError("matrix entries must be 0 or 1")
        if labels.size and labels.max() > 1:
            raise EncodingError("labels must be 0 (normal) or 1 (abnormal)")
        matrix.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "origin_ids", tuple(self.origin_ids))
        object.__setattr__(self, "columns", tuple((str(n), str(c)) for n, c in self.columns))

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_abnormal(self) -> int:
        return int(self.labels.sum())

    @property
    def n_normal(self) -> int:
        return self.n_rows - self.n_abnormal

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.columns)

    def label_names(self) -> list[str]:
        return [ABNORMAL if y else NORMAL for y in self.labels]

    def columns_in_category(self, category: str) -> list[str]:
        return [name for name, cat in self.columns if cat == category]

    def take(self, row_indices: np.ndarray) -> "EncodedCohort":
        idx = np.asarray(row_indices)
        return EncodedCohort(
            matrix=self.matrix[idx],
            labels=self.labels[idx],
            origin_ids=tuple(self.origin_ids[int(i)] for i in idx),
            columns=self.columns,
        )

    def drop_columns(self, names: Iterable[str]) -> "EncodedCohort":
        drop = set(names)
        unknown = drop - set(self.column_names)
        if unknown:
            raise EncodingError(f"cannot drop unknown columns: {sorted(unknown)}")
        keep = [i for i, (name, _) in enumerate(self.columns) if name not in drop]
        return EncodedCohort(
            matrix=self.matrix[:, keep],
            labels=self.labels,
            origin_ids=self.origin_ids,
            columns=tuple(self.columns[i] for i in keep),
        )


@dataclass(frozen=True)
class SplitResult:
    train: EncodedCohort
    test: EncodedCohort
    seed: int


def compute_cohort_stats(records: Sequence[PatientRecord], schema: FeatureSchema) -> CohortStats:
    """Means, modes and quartile bin edges from the observed (non-missing) values."""
    mean: dict[str, float] = {}
    mode: dict[str, str] = {}
    quartiles: dict[str, tuple[float, ...]] = {}
    for spec in schema.fields:
        observed = [r.get(spec.name) for r in records]
        observed = [v for v in observed if v is not MISSING]
        if spec.kind == "numeric":
            numbers = [float(v) for v in observed]
            if numbers:
                mean[spec.name] = float(np.mean(numbers))
                if spec.bin_edges is None:
                    qs = np.quantile(numbers, [0.0, 0.25, 0.5, 0.75, 1.0])
                    # collapse of duplicate quantiles would break binning
                    if len(np.unique(qs)) < len(qs):
                        raise EncodingError(
                            f"field {spec.name!r}: cannot derive quartile bins "
                            "from near-constant data; declare bin edges instead"
                        )
                    quartiles[spec.name] = tuple(float(q) for q in qs)
        else:
            strings = [str(v) for v in observed]
            if strings:
                counts: dict[str, int] = {}
                for v in strings:
                    counts[v] = counts.get(v, 0) + 1
                # deterministic tie-break by value
                mode[spec.name] = min(counts, key=lambda v: (-counts[v], v))
    return CohortStats(mean=mean, mode=mode, quartile_edges=quartiles)


def _fill(spec: FieldSpec, rule_kind: str, stats: CohortStats):
    if rule_kind == "mean":
        if spec.name not in stats.mean:
            raise EncodingError(f"cohort stats missing mean for field {spec.name!r}")
        return stats.mean[spec.name]
    if rule_kind == "mode":
        if spec.name not in stats.mode:
            raise EncodingError(f"cohort stats missing mode for field {spec.name!r}")
        return stats.mode[spec.name]
    raise RecordRejected(f"field {spec.name!r} missing and marked reject")


def _impute_fields(record: PatientRecord, fields: Sequence[FieldSpec],
                   stats: CohortStats) -> dict:
    filled = dict(record.values)
    for spec in fields:
        if record.get(spec.name) is not MISSING:
            filled[spec.name] = record.get(spec.name)
            continue
        rule = spec.impute
        if rule.kind == "conditional":
            if record.get(rule.predicate_field) is not MISSING:
                filled[spec.name] = rule.implied_value
            else:
                filled[spec.name] = _fill(spec, rule.fallback, stats)
        else:
            filled[spec.name] = _fill(spec, rule.kind, stats)
    return filled


def impute(record: PatientRecord, schema: FeatureSchema, stats: CohortStats) -> PatientRecord:
    """Fill every missing field per its rule; non-missing values pass through.

    Idempotent: a fully populated record comes back unchanged.
    Raises RecordRejected when a reject-rule field is missing.
    """
    filled = _impute_fields(record, schema.fields, stats)
    return PatientRecord(values=filled, origin_id=record.origin_id)


def _bin_index(value: float, edges: Sequence[float], name: str) -> int:
    if value < edges[0] or value > edges[-1]:
        raise EncodingError(
            f"field {name!r}: value {value} outside bins [{edges[0]}, {edges[-1]}]"
        )
    for i in range(len(edges) - 1):
        if value < edges[i + 1]:
            return i
    return len(edges) - 2  # value == last edge, closed on the right


def _binarize_features(
    record: PatientRecord,
    schema: FeatureSchema,
    stats: Optional[CohortStats] = None,
) -> np.ndarray:
    out = np.zeros(schema.n_binary_columns, dtype=np.uint8)
    pos = 0
    for spec in schema.feature_fields:
        value = record.get(spec.name)
        if value is MISSING:
            raise EncodingError(f"field {spec.name!r} is missing; impute first")
        if spec.kind == "numeric":
            edges = spec.bin_edges
            if edges is None:
                if stats is None or spec.name not in stats.quartile_edges:
                    raise EncodingError(
                        f"field {spec.name!r} uses quartile bins; cohort stats required"
                    )
                edges = stats.quartile_edges[spec.name]
            out[pos + _bin_index(float(value), edges, spec.name)] = 1
            pos += len(edges) - 1
        elif spec.positive_value is not None:
            if str(value) not in spec.values:
                raise EncodingError(
                    f"field {spec.name!r}: unknown value {value!r} "
                    f"(expected one of {list(spec.values)})"
                )
            out[pos] = 1 if str(value) == spec.positive_value else 0
            pos += 1
        else:
            if str(value) not in spec.values:
                raise EncodingError(
                    f"field {spec.name!r}: unknown value {value!r} "
                    f"(expected one of {list(spec.values)})"
                )
            out[pos + spec.values.index(str(value))] = 1
            pos += len(spec.values)
    return out


def binarize(
    record: PatientRecord,
    schema: FeatureSchema,
    stats: Optional[CohortStats] = None,
) -> tuple[np.ndarray, str]:
    """Encode a fully imputed record into a 0/1 vector plus its label name.

    One-hot fields set exactly one of their columns; indicator fields set
    their single column iff the value equals the declared positive value;
    numeric fields one-hot by bin.
    """
    out = _binarize_features(record, schema, stats)
    label_value = record.get(schema.label_field)
    if label_value not in (NORMAL, ABNORMAL):
        raise EncodingError(f"label value {label_value!r} must be normal/abnormal")
    return out, str(label_value)


def encode_feature_record(
    raw: Mapping[str, object],
    schema: FeatureSchema,
    stats: Optional[CohortStats] = None,
) -> np.ndarray:
    """Encode one label-less record (a new patient) into a feature row.

    Conditional impute rules run as usual; mean/mode rules need `stats`,
    so without stats the record must cover every such field.
    """
    unknown = set(raw) - {f.name for f in schema.fields}
    if unknown:
        raise EncodingError(f"record has fields not in the schema: {sorted(unknown)}")
    record = PatientRecord(values=dict(raw))
    stats = stats or CohortStats(mean={}, mode={})
    filled = _impute_fields(record, schema.feature_fields, stats)
    return _binarize_features(PatientRecord(values=filled), schema, stats)


def encode_records(
    records: Sequence[PatientRecord],
    schema: FeatureSchema,
    stats: Optional[CohortStats] = None,
) -> EncodedCohort:
    """Impute and binarize a batch of records, in input order.

    Records that fail validation (reject rule, unknown closed-set value,
    out-of-range numeric) are logged and skipped, not fatal.
    """
    if stats is None:
        stats = compute_cohort_stats(records, schema)
    rows: list[np.ndarray] = []
    labels: list[int] = []
    origin_ids: list[str] = []
    for i, record in enumerate(records):
        origin = record.origin_id or f"rec-{i:06d}"
        try:
            full = impute(record, schema, stats)
            vector, label = binarize(full, schema, stats)
        except EncodingError as exc:
            logger.warning("skipping record %s: %s", origin, exc)
            continue
        rows.append(vector)
        labels.append(1 if label == ABNORMAL else 0)
        origin_ids.append(origin)
    if not rows:
        raise EncodingError("no valid records to encode")
    return EncodedCohort(
        matrix=np.stack(rows),
        labels=np.array(labels, dtype=np.uint8),
        origin_ids=tuple(origin_ids),
        columns=tuple(schema.binary_columns()),
    )


def split(cohort: EncodedCohort, fraction: float, seed: int) -> SplitResult:
    """Seeded uniform shuffle, then prefix split with |train| = floor(fraction*N)."""
    if not (0.0 < fraction < 1.0):
        raise EncodingError(f"split fraction {fraction} must lie in (0, 1)")
    if cohort.n_rows == 0:
        raise EncodingError("cannot split an empty cohort")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(cohort.n_rows)
    # the epsilon guards float error for human ratios like 2/3
    n_train = int(np.floor(fraction * cohort.n_rows + 1e-9))
    return SplitResult(
        train=cohort.take(perm[:n_train]),
        test=cohort.take(perm[n_train:]),
        seed=seed,
    )


def supersample(cohort: EncodedCohort, factor: int) -> EncodedCohort:
    """Append `factor` extra copies of every abnormal row (factor+1 total).

    Normal rows and origin ids are untouched; copies keep the origin id of
    their source row so duplicates stay traceable.
    """
    if factor < 0:
        raise EncodingError(f"supersample factor {factor} must be >= 0")
    if factor == 0 or cohort.n_abnormal == 0:
        return cohort
    abnormal_idx = np.flatnonzero(cohort.labels == 1)
    extra = np.tile(abnormal_idx, factor)
    order = np.concatenate([np.arange(cohort.n_rows), extra])
    return cohort.take(order)


def load_records_csv(path: str | Path, schema: FeatureSchema) -> list[PatientRecord]:
    """Read raw records from CSV; header row names fields, empty cell = missing."""
    path = Path(path)
    if not path.exists():
        raise EncodingError(f"cohort file not found: {path}")
    known = {f.name for f in schema.fields}
    records: list[PatientRecord] = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = set(reader.fieldnames or ())
        unknown = header - known - {"origin_id"}
        if unknown:
            raise EncodingError(f"CSV has columns not in the schema: {sorted(unknown)}")
        for i, row in enumerate(reader):
            values = {k: (v if v != "" else MISSING) for k, v in row.items() if k != "origin_id"}
            records.append(PatientRecord(values=values, origin_id=row.get("origin_id") or f"rec-{i:06d}"))
    return records


def save_cohort_csv(cohort: EncodedCohort, path: str | Path, label_column: str = "label") -> None:
    """Write the encoded 0/1 matrix plus label column to CSV."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["origin_id", *cohort.column_names, label_column])
        label_names = cohort.label_names()
        for i in range(cohort.n_rows):
            writer.writerow([cohort.origin_ids[i], *cohort.matrix[i].tolist(), label_names[i]])


def load_cohort_csv(
    path: str | Path,
    columns: Optional[Sequence[tuple[str, str]]] = None,
    label_column: str = "label",
) -> EncodedCohort:
    """Read back an encoded cohort CSV written by save_cohort_csv.

    When `columns` is given it supplies the (name, category) tags; otherwise
    every feature column is tagged with an empty category.
    """
    path = Path(path)
    if not path.exists():
        raise EncodingError(f"cohort file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[0] != "origin_id" or header[-1] != label_column:
            raise EncodingError("encoded cohort CSV must start with origin_id and end with the label")
        names = header[1:-1]
        rows, labels, origins = [], [], []
        for row in reader:
            origins.append(row[0])
            rows.append([int(v) for v in row[1:-1]])
            labels.append(1 if row[-1] == ABNORMAL else 0)
    if columns is None:
        tagged = tuple((n, "") for n in names)
    else:
        by_name = {n: c for n, c in columns}
        missing = [n for n in names if n not in by_name]
        if missing:
            raise EncodingError(f"no category tags for columns: {missing}")
        tagged = tuple((n, by_name[n]) for n in names)
    return EncodedCohort(
        matrix=np.array(rows, dtype=np.uint8),
        labels=np.array(labels, dtype=np.uint8),
        origin_ids=tuple(origins),
        columns=tagged,
    )
