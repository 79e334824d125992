"""Budget-aware clinical test selection.

Given per-test cost and discomfort values, enumerate every *maximal*
feasible option (no further test can be added / removed without breaking
the budget), evaluate each option by re-running the full pipeline with
the de-selected test columns dropped, and rank options by false-abnormal
count.  The enumeration is a depth-first subset search with budget
pruning plus a maximality post-filter; at 15 tests the 2^15 worst case
is trivial, so clarity wins over cleverness.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from .cohort import EncodedCohort
from .pipeline import PipelineConfig, run_pipeline
from .schema import CATEGORY_BCT

MODE_COST = "cost_select"
MODE_DISCOMFORT = "discomfort_remove"
MODES = (MODE_COST, MODE_DISCOMFORT)


class SelectionError(ValueError):
    pass


@dataclass(frozen=True)
class TestAttr:
    """One orderable clinical test and the feature columns it produces."""

    __test__ = False  # keep pytest from collecting this as a test class

    name: str
    cost: float
    discomfort: float
    feature_columns: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.cost < 0 or self.discomfort < 0:
            raise SelectionError(f"test {self.name!r}: cost/discomfort must be >= 0")
        if not self.feature_columns:
            raise SelectionError(f"test {self.name!r}: needs at least one feature column")


@dataclass(frozen=True)
class BudgetQuery:
    mode: str
    budget: float
    protocol: str = "paper"
    # extension: in discomfort mode, bound the discomfort *endured* (kept
    # tests) instead of the removed total
    endured: bool = False

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise SelectionError(f"unknown mode {self.mode!r}, expected one of {MODES}")
        if self.budget < 0:
            raise SelectionError(f"budget {self.budget} must be >= 0")
        if self.endured and self.mode != MODE_DISCOMFORT:
            raise SelectionError("endured flag only applies to discomfort mode")


@dataclass(frozen=True)
class OptionResult:
    fa: int
    fa_rate: float
    population: int
    threshold: float
    accuracy: float
    sensitivity: Optional[float]
    converged: bool

    def to_dict(self) -> dict:
        return {
            "fa": self.fa,
            "fa_rate": self.fa_rate,
            "population": self.population,
            "threshold": self.threshold,
            "accuracy": self.accuracy,
            "sensitivity": self.sensitivity,
            "converged": self.converged,
        }


@dataclass(frozen=True)
class TestOption:
    __test__ = False

    option_id: str
    kept_tests: tuple[str, ...]
    removed_tests: tuple[str, ...]
    total_cost: float
    total_discomfort: float  # of the kept tests
    removed_discomfort: float
    result: Optional[OptionResult] = None

    def to_dict(self) -> dict:
        out = {
            "option_id": self.option_id,
            "kept_tests": list(self.kept_tests),
            "removed_tests": list(self.removed_tests),
            "total_cost": self.total_cost,
            "total_discomfort": self.total_discomfort,
            "removed_discomfort": self.removed_discomfort,
        }
        if self.result is not None:
            out["result"] = self.result.to_dict()
        return out


@dataclass(frozen=True)
class AblationPoint:
    n_features: int
    removed: tuple[str, ...]
    accuracy_init: float
    accuracy_post: float
    fa_init: int
    fa_post: int
    fn_post: int
    sensitivity_post: Optional[float]
    threshold: float
    population: int

    def to_dict(self) -> dict:
        return {
            "n_features": self.n_features,
            "removed": list(self.removed),
            "accuracy_init": self.accuracy_init,
            "accuracy_post": self.accuracy_post,
            "fa_init": self.fa_init,
            "fa_post": self.fa_post,
            "fn_post": self.fn_post,
            "sensitivity_post": self.sensitivity_post,
            "threshold": self.threshold,
            "population": self.population,
        }


def default_test_table() -> list[TestAttr]:
    """The bundled 15-test table with indicative cost/discomfort values."""
    text = resources.files("zeromiss.data").joinpath("default_tests.json").read_text()
    return tests_from_dict(json.loads(text))


def tests_from_dict(raw: dict) -> list[TestAttr]:
    if "tests" not in raw:
        raise SelectionError("test table needs a 'tests' list")
    tests = [
        TestAttr(name=t["name"], cost=float(t["cost"]), discomfort=float(t["discomfort"]),
                 feature_columns=tuple(t["columns"]))
        for t in raw["tests"]
    ]
    names = [t.name for t in tests]
    if len(set(names)) != len(names):
        raise SelectionError("duplicate test names in table")
    return tests


def tests_to_dict(tests: Sequence[TestAttr]) -> dict:
    return {"tests": [
        {"name": t.name, "cost": t.cost, "discomfort": t.discomfort,
         "columns": list(t.feature_columns)}
        for t in tests
    ]}


def load_test_table(path: str | Path) -> list[TestAttr]:
    path = Path(path)
    if not path.exists():
        raise SelectionError(f"test table not found: {path}")
    return tests_from_dict(json.loads(path.read_text()))


def save_test_table(tests: Sequence[TestAttr], path: str | Path) -> None:
    Path(path).write_text(json.dumps(tests_to_dict(tests), indent=2) + "\n")


def _maximal_subsets(names: list[str], value: dict[str, float], budget: float) -> list[frozenset]:
    """Maximal subsets of `names` with total value <= budget.

    Zero-value names can always be added, so every maximal subset contains
    all of them; the DFS explores only the positive-value names.
    """
    free = [n for n in names if value[n] == 0]
    priced = [n for n in names if value[n] > 0]
    feasible: list[frozenset] = []

    def walk(i: int, chosen: list[str], total: float) -> None:
        if i == len(priced):
            feasible.append(frozenset(chosen))
            return
        name = priced[i]
        if total + value[name] <= budget:
            chosen.append(name)
            walk(i + 1, chosen, total + value[name])
            chosen.pop()
        walk(i + 1, chosen, total)

    walk(0, [], 0.0)
    maximal = [
        s for s in feasible
        if all(sum(value[n] for n in s) + value[extra] > budget
               for extra in priced if extra not in s)
    ]
    return [s | frozenset(free) for s in maximal]


def enumerate_maximal(tests: Sequence[TestAttr], query: BudgetQuery) -> list[TestOption]:
    """All maximal feasible options, unevaluated, deterministically ordered.

    cost_select: kept sets with total cost <= budget; discomfort_remove:
    removed sets with total removed discomfort <= budget (or kept-side
    totals when query.endured is set).  Order: total constrained value
    descending, then lexicographic by the constrained set.
    """
    names = [t.name for t in tests]
    cost = {t.name: t.cost for t in tests}
    disc = {t.name: t.discomfort for t in tests}
    all_names = set(names)

    if query.mode == MODE_COST or query.endured:
        value = cost if query.mode == MODE_COST else disc
        kept_sets = _maximal_subsets(names, value, query.budget)
        options = [(kept, all_names - kept) for kept in kept_sets]
        constrained = [sum(value[n] for n in kept) for kept, _ in options]
        key_sets = [kept for kept, _ in options]
    else:
        removed_sets = _maximal_subsets(names, disc, query.budget)
        options = [(all_names - removed, removed) for removed in removed_sets]
        constrained = [sum(disc[n] for n in removed) for _, removed in options]
        key_sets = [removed for _, removed in options]

    order = sorted(
        range(len(options)),
        key=lambda i: (-constrained[i], tuple(sorted(key_sets[i]))),
    )
    out = []
    for rank, i in enumerate(order, start=1):
        kept, removed = options[i]
        kept_ordered = tuple(n for n in names if n in kept)
        removed_ordered = tuple(n for n in names if n in removed)
        out.append(TestOption(
            option_id=f"option-{rank:02d}",
            kept_tests=kept_ordered,
            removed_tests=removed_ordered,
            total_cost=sum(cost[n] for n in kept_ordered),
            total_discomfort=sum(disc[n] for n in kept_ordered),
            removed_discomfort=sum(disc[n] for n in removed_ordered),
        ))
    return out


def _columns_for(tests: Sequence[TestAttr], names: Sequence[str],
                 cohort: EncodedCohort) -> list[str]:
    by_name = {t.name: t for t in tests}
    tagged = dict(cohort.columns)
    columns: list[str] = []
    for name in names:
        for col in by_name[name].feature_columns:
            if col not in tagged:
                raise SelectionError(f"test {name!r}: column {col!r} not in cohort")
            if tagged[col] != CATEGORY_BCT:
                raise SelectionError(
                    f"test {name!r}: column {col!r} is tagged {tagged[col]!r}, expected BCT"
                )
            columns.append(col)
    return columns


def evaluate_option(
    option: TestOption,
    cohort: EncodedCohort,
    config: PipelineConfig,
    tests: Sequence[TestAttr],
) -> TestOption:
    """Run the full pipeline with the option's removed test columns dropped."""
    if option.result is not None:
        raise SelectionError(f"{option.option_id} is already evaluated")
    drop = _columns_for(tests, option.removed_tests, cohort)
    run = run_pipeline(cohort, config, drop_columns=drop)
    from . import calibrator as cal_mod

    post = run.calibration.post_cm
    result = OptionResult(
        fa=post.fa,
        fa_rate=post.fa / run.calibration.population,
        population=run.calibration.population,
        threshold=run.threshold,
        accuracy=cal_mod.accuracy(post),
        sensitivity=cal_mod.sensitivity(post),
        converged=run.converged,
    )
    return replace(option, result=result)


def select_best(
    query: BudgetQuery,
    cohort: EncodedCohort,
    config: PipelineConfig,
    tests: Optional[Sequence[TestAttr]] = None,
    max_workers: int = 4,
) -> list[TestOption]:
    """Enumerate, evaluate, and rank every maximal option; best first.

    Ranking: ascending false-abnormal count; ties broken by lower kept
    cost (cost mode) or higher removed discomfort (discomfort mode), then
    lexicographically by kept tests.
    """
    tests = list(tests) if tests is not None else default_test_table()
    options = enumerate_maximal(tests, query)
    if not options:
        raise SelectionError("no feasible options to evaluate")
    if max_workers > 1 and len(options) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            evaluated = list(pool.map(
                lambda opt: evaluate_option(opt, cohort, config, tests), options
            ))
    else:
        evaluated = [evaluate_option(opt, cohort, config, tests) for opt in options]

    if query.mode == MODE_COST:
        def tie(opt: TestOption) -> tuple:
            return (opt.result.fa, opt.total_cost, opt.kept_tests)
    else:
        def tie(opt: TestOption) -> tuple:
            return (opt.result.fa, -opt.removed_discomfort, opt.kept_tests)

    return sorted(evaluated, key=tie)


def ablation_sweep(
    cohort: EncodedCohort,
    removal_order: Sequence[str],
    config: PipelineConfig,
) -> list[AblationPoint]:
    """Drop BCT feature columns cumulatively and rerun the pipeline each time.

    Point k drops the first k columns of removal_order; every point records
    accuracy and false abnormals at threshold 0.5 (init) and at the
    calibrated zero-false-normal threshold (post).
    """
    tagged = dict(cohort.columns)
    for name in removal_order:
        if name not in tagged:
            raise SelectionError(f"removal order references unknown column {name!r}")
        if tagged[name] != CATEGORY_BCT:
            raise SelectionError(f"column {name!r} is tagged {tagged[name]!r}, expected BCT")

    from . import calibrator as cal_mod

    points = []
    for k in range(len(removal_order) + 1):
        removed = tuple(removal_order[:k])
        run = run_pipeline(cohort, config, drop_columns=list(removed))
        calib = run.calibration
        points.append(AblationPoint(
            n_features=len(run.base_columns),
            removed=removed,
            accuracy_init=cal_mod.accuracy(calib.init_cm),
            accuracy_post=cal_mod.accuracy(calib.post_cm),
            fa_init=calib.init_cm.fa,
            fa_post=calib.post_cm.fa,
            fn_post=calib.post_cm.fn,
            sensitivity_post=cal_mod.sensitivity(calib.post_cm),
            threshold=run.threshold,
            population=calib.population,
        ))
    return points


def default_removal_order(cohort: EncodedCohort) -> list[str]:
    """BCT columns in schema declaration order."""
    return cohort.columns_in_category(CATEGORY_BCT)


def write_option_report(options: Sequence[TestOption], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["option_id", "kept_tests", "removed_tests", "total_cost",
                         "total_discomfort", "removed_discomfort", "fa", "fa_rate",
                         "population", "threshold", "accuracy", "sensitivity"])
        for opt in options:
            r = opt.result
            writer.writerow([
                opt.option_id, "|".join(opt.kept_tests), "|".join(opt.removed_tests),
                opt.total_cost, opt.total_discomfort, opt.removed_discomfort,
                r.fa if r else "", r.fa_rate if r else "", r.population if r else "",
                r.threshold if r else "", r.accuracy if r else "",
                r.sensitivity if r else "",
            ])


def write_sweep_report(points: Sequence[AblationPoint], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n_features", "n_removed", "accuracy_init", "accuracy_post",
                         "fa_init", "fa_post", "fn_post", "threshold", "population"])
        for p in points:
            writer.writerow([p.n_features, len(p.removed), p.accuracy_init,
                             p.accuracy_post, p.fa_init, p.fa_post, p.fn_post,
                             p.threshold, p.population])
