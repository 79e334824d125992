"""Synthetic screening cohort with planted class structure.

Stands in for the private field data: features are per-column Bernoulli
draws, class membership is planted through conjunction rules so that the
default cohort is perfectly separable by a degree-3 polynomial over the
base features but not by any linear rule, and the practitioner-exam (MP)
column block is made individually predictive so that dropping it
recreates the hard version of the problem.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Mapping, Optional, Sequence

import numpy as np

from .cohort import EncodedCohort
from .schema import CATEGORY_MP, default_schema

DEFAULT_N_TOTAL = 3689
DEFAULT_N_ABNORMAL = 92
DEFAULT_BASE_RATE = 0.15

# Features of the default planted structure.  weight_loss alone implies
# abnormal; the three-test parity is what makes the cohort need a degree-3
# boundary (an AND of three tests is still a linear threshold function,
# parity is not).
DEFAULT_TRIGGER_FEATURE = "weight_loss"
DEFAULT_INTERACTION = ("tuberculosis", "asthma", "neck_nodes")
# The interaction features run hot (~0.35) on purpose: parity-odd rows are
# then about half of all draws, so a linear model cannot buy 100%
# sensitivity by flagging every trio-active row without also flagging
# half the normals.
DEFAULT_RATE_OVERRIDES = {
    "weight_loss": 0.03,
    "tuberculosis": 0.35,
    "asthma": 0.35,
    "neck_nodes": 0.35,
}

RULE_CONJUNCTION = "conjunction"
RULE_PARITY = "parity"


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class PlantedRule:
    """A feature pattern that pins down the row's class.

    conjunction: fires when every feature in `features` is 1.
    parity: fires when an odd number of them are 1.

    With noise_rate r the rule is ignored for a firing row with
    probability r; at r = 0 the implication holds exactly.
    """

    features: tuple[str, ...]
    implies: str  # "normal" | "abnormal"
    noise_rate: float = 0.0
    kind: str = RULE_CONJUNCTION

    def __post_init__(self) -> None:
        if not self.features:
            raise SynthError("planted rule needs at least one feature")
        if self.implies not in ("normal", "abnormal"):
            raise SynthError(f"rule implication must be normal/abnormal, got {self.implies!r}")
        if not (0.0 <= self.noise_rate <= 1.0):
            raise SynthError(f"noise rate {self.noise_rate} outside [0, 1]")
        if self.kind not in (RULE_CONJUNCTION, RULE_PARITY):
            raise SynthError(f"unknown rule kind {self.kind!r}")


@dataclass(frozen=True)
class SynthConfig:
    n_total: int = DEFAULT_N_TOTAL
    n_abnormal: int = DEFAULT_N_ABNORMAL
    planted_rules: tuple[PlantedRule, ...] = dc_field(default_factory=tuple)
    base_rates: Mapping[str, float] = dc_field(default_factory=dict)
    default_rate: float = DEFAULT_BASE_RATE
    columns: Optional[tuple[tuple[str, str], ...]] = None  # default: bundled schema layout
    mp_signal_rate: float = 0.9  # P(MP group shows its signal value | abnormal)
    mp_background_rate: float = 0.02  # P(signal value | normal)
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0 < self.n_abnormal < self.n_total):
            raise SynthError(
                f"need 0 < n_abnormal < n_total, got {self.n_abnormal}/{self.n_total}"
            )
        for rate in (*self.base_rates.values(), self.default_rate):
            if not (0.0 <= rate <= 1.0):
                raise SynthError(f"base rate {rate} outside [0, 1]")
        implications = {r.implies for r in self.planted_rules}
        if len(implications) > 1:
            # two rules with different implications can both fire on the row
            # that has all their features set, so the ruleset is inconsistent
            raise SynthError("inconsistent planted rules: conflicting class implications")


def default_synth_config(seed: int = 0, **overrides) -> SynthConfig:
    """The default cohort: 92/3689 skew, weight-loss trigger, degree-3 conjunction."""
    params = dict(
        n_total=DEFAULT_N_TOTAL,
        n_abnormal=DEFAULT_N_ABNORMAL,
        planted_rules=(
            PlantedRule(features=(DEFAULT_TRIGGER_FEATURE,), implies="abnormal"),
            PlantedRule(features=DEFAULT_INTERACTION, implies="abnormal",
                        kind=RULE_PARITY),
        ),
        base_rates=dict(DEFAULT_RATE_OVERRIDES),
        seed=seed,
    )
    params.update(overrides)
    return SynthConfig(**params)


def _mp_groups(columns: Sequence[tuple[str, str]]) -> list[list[int]]:
    """MP column indices grouped by field (shared name prefix before '-')."""
    groups: dict[str, list[int]] = {}
    for i, (name, category) in enumerate(columns):
        if category == CATEGORY_MP:
            groups.setdefault(name.split("-")[0], []).append(i)
    return list(groups.values())


def generate_synthetic(config: SynthConfig) -> EncodedCohort:
    """Draw a cohort with exact class counts; deterministic for a fixed seed."""
    columns = config.columns or tuple(default_schema().binary_columns())
    names = [name for name, _ in columns]
    name_to_col = {name: i for i, name in enumerate(names)}

    unknown_rates = set(config.base_rates) - set(names)
    if unknown_rates:
        raise SynthError(f"base rates for unknown features: {sorted(unknown_rates)}")
    for rule in config.planted_rules:
        missing = set(rule.features) - set(names)
        if missing:
            raise SynthError(f"planted rule references unknown features: {sorted(missing)}")

    mp_groups = _mp_groups(columns)
    mp_cols = {i for grp in mp_groups for i in grp}
    rates = np.array(
        [0.0 if i in mp_cols else config.base_rates.get(name, config.default_rate)
         for i, name in enumerate(names)]
    )

    rules = list(config.planted_rules)
    target_abnormal = all(r.implies == "abnormal" for r in rules) if rules else None

    rng = np.random.default_rng(config.seed)
    n_normal_wanted = config.n_total - config.n_abnormal
    kept_rows: list[np.ndarray] = []
    kept_labels: list[int] = []
    n_kept_abnormal = 0
    n_kept_normal = 0
    max_draws = max(1000 * config.n_total, 100_000)
    drawn = 0
    batch = 2048
    while n_kept_abnormal < config.n_abnormal or n_kept_normal < n_normal_wanted:
        if drawn >= max_draws:
            raise SynthError(
                f"planted structure too rare: {n_kept_abnormal}/{config.n_abnormal} abnormal "
                f"rows after {drawn} draws; raise the trigger feature rates"
            )
        block = (rng.random((batch, len(names))) < rates).astype(np.uint8)
        if rules:
            fired = np.zeros(batch, dtype=bool)
            for rule in rules:
                cols = [name_to_col[f] for f in rule.features]
                if rule.kind == RULE_PARITY:
                    hits = block[:, cols].sum(axis=1) % 2 == 1
                else:
                    hits = block[:, cols].all(axis=1)
                if rule.noise_rate > 0.0:
                    hits &= rng.random(batch) >= rule.noise_rate
                fired |= hits
            block_abnormal = fired if target_abnormal else ~fired
        else:
            block_abnormal = rng.random(batch) < config.n_abnormal / config.n_total
        drawn += batch
        for row, is_abn in zip(block, block_abnormal):
            if is_abn and n_kept_abnormal < config.n_abnormal:
                kept_rows.append(row)
                kept_labels.append(1)
                n_kept_abnormal += 1
            elif not is_abn and n_kept_normal < n_normal_wanted:
                kept_rows.append(row)
                kept_labels.append(0)
                n_kept_normal += 1

    matrix = np.stack(kept_rows)
    labels = np.array(kept_labels, dtype=np.uint8)

    # MP block: each exam-field group points at its last column (the
    # "positive finding" value) for abnormal rows and its first column
    # otherwise, with configurable leak rates.
    for group in mp_groups:
        signal = rng.random(config.n_total)
        shows_signal = np.where(labels == 1,
                                signal < config.mp_signal_rate,
                                signal < config.mp_background_rate)
        matrix[:, group] = 0
        if len(group) == 1:
            matrix[:, group[0]] = shows_signal.astype(np.uint8)
        else:
            matrix[np.arange(config.n_total),
                   np.where(shows_signal, group[-1], group[0])] = 1

    return EncodedCohort(
        matrix=matrix,
        labels=labels,
        origin_ids=tuple(f"syn-{i:06d}" for i in range(config.n_total)),
        columns=columns,
    )
