"""Declarative feature schema for patient records.

A schema lists the raw fields of a merged health record, how each one is
imputed when missing, and how it becomes 0/1 feature columns:

* ``nominal`` fields one-hot into one column per declared value, except
  when a ``positive_value`` is declared, in which case the (two-valued)
  field collapses to a single indicator column named after the field.
* ``numeric`` fields one-hot by bin.  Bin edges may be declared in the
  schema or left as ``"quartiles"`` to be computed from the cohort at
  ingestion time.

The bundled default schema describes 56 fields in five categories and
emits 81 feature columns plus the label.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

from .calibrator import ABNORMAL, NORMAL

CATEGORY_DEMOGRAPHICS = "Demographics"
CATEGORY_LIFESTYLE = "Lifestyle"
CATEGORY_BCT = "BCT"
CATEGORY_MP = "MP"
CATEGORY_HISTORY = "History"
CATEGORY_LABEL = "Label"
CATEGORIES = (
    CATEGORY_DEMOGRAPHICS,
    CATEGORY_LIFESTYLE,
    CATEGORY_BCT,
    CATEGORY_MP,
    CATEGORY_HISTORY,
    CATEGORY_LABEL,
)

QUARTILE_BINS = 4


class SchemaError(ValueError):
    """Schema file fails to parse or violates a structural invariant."""


@dataclass(frozen=True)
class ImputeRule:
    """How a missing value is filled.

    kinds: ``mean`` (cohort average, numeric only), ``mode`` (most common
    value), ``reject`` (drop the record), ``conditional`` (implied value
    when a predicate field is present in the raw record, otherwise the
    fallback rule applies).
    """

    kind: str
    predicate_field: Optional[str] = None
    implied_value: Optional[str] = None
    fallback: str = "mode"

    def __post_init__(self) -> None:
        if self.kind not in ("mean", "mode", "reject", "conditional"):
            raise SchemaError(f"unknown impute kind {self.kind!r}")
        if self.kind == "conditional":
            if not self.predicate_field or self.implied_value is None:
                raise SchemaError("conditional impute needs a predicate field and implied value")
            if self.fallback not in ("mean", "mode", "reject"):
                raise SchemaError(f"unknown conditional fallback {self.fallback!r}")


@dataclass(frozen=True)
class FieldSpec:
    name: str
    category: str
    kind: str  # "nominal" | "numeric"
    values: tuple[str, ...] = ()
    positive_value: Optional[str] = None  # indicator encoding for two-valued nominals
    bin_edges: Optional[tuple[float, ...]] = None  # None => quartiles at ingestion
    impute: ImputeRule = field(default_factory=lambda: ImputeRule(kind="mode"))

    def __post_init__(self) -> None:
        if self.category not in CATEGORIES:
            raise SchemaError(f"field {self.name!r}: unknown category {self.category!r}")
        if self.kind == "nominal":
            if len(self.values) < 2:
                raise SchemaError(f"nominal field {self.name!r} needs >= 2 values")
            if len(set(self.values)) != len(self.values):
                raise SchemaError(f"nominal field {self.name!r} has duplicate values")
            if self.positive_value is not None:
                if len(self.values) != 2:
                    raise SchemaError(
                        f"field {self.name!r}: indicator encoding requires exactly 2 values"
                    )
                if self.positive_value not in self.values:
                    raise SchemaError(
                        f"field {self.name!r}: positive value {self.positive_value!r} "
                        "not in declared values"
                    )
            if self.impute.kind == "mean":
                raise SchemaError(f"nominal field {self.name!r} cannot use mean imputation")
        elif self.kind == "numeric":
            if self.bin_edges is not None:
                edges = self.bin_edges
                if len(edges) < 3:
                    raise SchemaError(f"numeric field {self.name!r} needs >= 2 bins")
                if any(edges[i] >= edges[i + 1] for i in range(len(edges) - 1)):
                    raise SchemaError(f"numeric field {self.name!r}: edges must increase")
        else:
            raise SchemaError(f"field {self.name!r}: unknown kind {self.kind!r}")

    @property
    def n_columns(self) -> int:
        if self.kind == "numeric":
            return len(self.bin_edges) - 1 if self.bin_edges else QUARTILE_BINS
        if self.positive_value is not None:
            return 1
        return len(self.values)

    def column_names(self) -> list[str]:
        if self.kind == "numeric":
            return [f"{self.name}-bin{i + 1}" for i in range(self.n_columns)]
        if self.positive_value is not None:
            return [self.name]
        return [f"{self.name}-{v}" for v in self.values]


@dataclass(frozen=True)
class FeatureSchema:
    fields: tuple[FieldSpec, ...]
    label_field: str

    def __post_init__(self) -> None:
        names = [f.name for f in self.fields]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise SchemaError(f"duplicate field names: {dupes}")
        labels = [f for f in self.fields if f.category == CATEGORY_LABEL]
        if len(labels) > 1:
            raise SchemaError("ambiguous label: more than one Label-category field")
        if not labels:
            raise SchemaError("schema has no Label-category field")
        label = labels[0]
        if label.name != self.label_field:
            raise SchemaError(
                f"label_field {self.label_field!r} does not match the "
                f"Label-category field {label.name!r}"
            )
        if label.kind != "nominal" or set(label.values) != {NORMAL, ABNORMAL}:
            raise SchemaError(
                f"label field must be nominal with values {{{NORMAL!r}, {ABNORMAL!r}}}"
            )
        if label.impute.kind != "reject":
            raise SchemaError("label field must use the reject impute rule")
        for f in self.fields:
            rule = f.impute
            if rule.kind == "conditional" and rule.predicate_field not in names:
                raise SchemaError(
                    f"field {f.name!r}: conditional impute references unknown "
                    f"field {rule.predicate_field!r}"
                )

    @property
    def label(self) -> FieldSpec:
        return next(f for f in self.fields if f.category == CATEGORY_LABEL)

    @property
    def feature_fields(self) -> tuple[FieldSpec, ...]:
        return tuple(f for f in self.fields if f.category != CATEGORY_LABEL)

    def field_by_name(self, name: str) -> FieldSpec:
        for f in self.fields:
            if f.name == name:
                return f
        raise SchemaError(f"unknown field {name!r}")

    def binary_columns(self) -> list[tuple[str, str]]:
        """(column name, category) for every emitted feature column, label excluded."""
        cols: list[tuple[str, str]] = []
        for f in self.feature_fields:
            cols.extend((c, f.category) for c in f.column_names())
        return cols

    @property
    def n_binary_columns(self) -> int:
        return sum(f.n_columns for f in self.feature_fields)


def _parse_impute(raw: dict) -> ImputeRule:
    kind = raw.get("kind")
    if kind == "conditional":
        return ImputeRule(
            kind="conditional",
            predicate_field=raw.get("field"),
            implied_value=raw.get("value"),
            fallback=raw.get("fallback", "mode"),
        )
    return ImputeRule(kind=kind)


def _parse_field(raw: dict) -> FieldSpec:
    if "name" not in raw or "category" not in raw or "kind" not in raw:
        raise SchemaError(f"field entry missing name/category/kind: {raw}")
    impute = _parse_impute(raw["impute"]) if "impute" in raw else ImputeRule(kind="mode")
    bins = raw.get("bins")
    if bins == "quartiles":
        bins = None
    return FieldSpec(
        name=raw["name"],
        category=raw["category"],
        kind=raw["kind"],
        values=tuple(raw.get("values", ())),
        positive_value=raw.get("positive_value"),
        bin_edges=tuple(float(e) for e in bins) if bins is not None else None,
        impute=impute,
    )


def schema_from_dict(raw: dict) -> FeatureSchema:
    if "fields" not in raw or "label_field" not in raw:
        raise SchemaError("schema needs 'fields' and 'label_field'")
    fields = tuple(_parse_field(f) for f in raw["fields"])
    return FeatureSchema(fields=fields, label_field=raw["label_field"])


def schema_to_dict(schema: FeatureSchema) -> dict:
    out_fields = []
    for f in schema.fields:
        entry: dict = {"name": f.name, "category": f.category, "kind": f.kind}
        if f.kind == "nominal":
            entry["values"] = list(f.values)
            if f.positive_value is not None:
                entry["positive_value"] = f.positive_value
        else:
            entry["bins"] = list(f.bin_edges) if f.bin_edges else "quartiles"
        rule = f.impute
        if rule.kind == "conditional":
            entry["impute"] = {
                "kind": "conditional",
                "field": rule.predicate_field,
                "value": rule.implied_value,
                "fallback": rule.fallback,
            }
        else:
            entry["impute"] = {"kind": rule.kind}
        out_fields.append(entry)
    return {"label_field": schema.label_field, "fields": out_fields}


def load_schema(path: str | Path) -> FeatureSchema:
    """Load and validate a schema JSON file."""
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"schema not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"schema {path} is not valid JSON: {exc}") from exc
    return schema_from_dict(raw)


def save_schema(schema: FeatureSchema, path: str | Path) -> None:
    Path(path).write_text(json.dumps(schema_to_dict(schema), indent=2) + "\n")


def default_schema() -> FeatureSchema:
    """The bundled screening schema: 56 fields, 81 feature columns + label."""
    text = resources.files("zeromiss.data").joinpath("default_schema.json").read_text()
    return schema_from_dict(json.loads(text))
