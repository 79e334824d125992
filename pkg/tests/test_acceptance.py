"""Acceptance suite: every release criterion at its stated tolerance.

Run with `pytest tests/test_acceptance.py -s` to see one PASS/FAIL line
per criterion (stdout is captured otherwise).
"""

import itertools
import json
import time
from contextlib import contextmanager

import numpy as np
import pytest

from zeromiss.calibrator import (
    ABNORMAL,
    NORMAL,
    ConfusionMatrix,
    ScoredInstance,
    accuracy,
    calibrate,
    sensitivity,
)
from zeromiss.cli import main as cli_main
from zeromiss.cohort import EncodedCohort, supersample
from zeromiss.expand import DEDUP, MULTISET, expanded_dimension
from zeromiss.learner import (
    L1Penalty,
    L2Penalty,
    TrainConfig,
    smooth_gradient,
    smooth_objective,
    train_lr,
)
from zeromiss.pipeline import PipelineConfig, run_pipeline
from zeromiss.select import (
    BudgetQuery,
    ablation_sweep,
    default_removal_order,
    default_test_table,
    enumerate_maximal,
)
from zeromiss.store import RunStore
from zeromiss.synth import default_synth_config, generate_synthetic

SEED = 7


@contextmanager
def criterion(name: str, budget_s: float):
    start = time.perf_counter()
    failed = False
    try:
        yield
    except BaseException:
        failed = True
        raise
    finally:
        elapsed = time.perf_counter() - start
        ok = not failed and elapsed < budget_s
        print(f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} ({elapsed:.2f}s)",
              flush=True)
    assert elapsed < budget_s, f"{name} exceeded its {budget_s}s runtime budget"


@pytest.fixture(scope="module")
def default_cohort():
    return generate_synthetic(default_synth_config(seed=SEED))


def test_expansion_counts():
    with criterion("expansion-count", budget_s=1.0):
        assert expanded_dimension(63, 3, MULTISET) == 45760
        assert expanded_dimension(63, 3, DEDUP) == 41728
        # cross-check the dedup formula by exhaustive enumeration at d <= 6
        for d in range(1, 7):
            enumerated = sum(
                1 for k in range(4) for _ in itertools.combinations(range(d), k)
            )
            assert expanded_dimension(d, 3, DEDUP) == enumerated
            enumerated_ms = sum(
                1 for k in range(4)
                for _ in itertools.combinations_with_replacement(range(d), k)
            )
            assert expanded_dimension(d, 3, MULTISET) == enumerated_ms


def test_unskew_arithmetic():
    with criterion("unskew-arithmetic", budget_s=1.0):
        n_normal, n_abnormal = 3597, 92
        labels = np.array([0] * n_normal + [1] * n_abnormal, dtype=np.uint8)
        cohort = EncodedCohort(
            matrix=np.zeros((len(labels), 1), dtype=np.uint8),
            labels=labels,
            origin_ids=tuple(f"r{i}" for i in range(len(labels))),
            columns=(("x", "BCT"),),
        )
        out = supersample(cohort, factor=10)
        assert out.n_rows == 4609
        assert abs(out.n_abnormal / out.n_normal - 0.2813) <= 1e-4


def test_enumeration_counts():
    with criterion("enumeration-counts", budget_s=1.0):
        tests = default_test_table()
        names = [t.name for t in tests]

        def oracle(values, budget):
            found = set()
            for r in range(len(names) + 1):
                for combo in itertools.combinations(names, r):
                    s = frozenset(combo)
                    total = sum(values[n] for n in s)
                    if total > budget:
                        continue
                    if any(total + values[n] <= budget
                           for n in names if n not in s):
                        continue
                    found.add(s)
            return found

        cost_oracle = oracle({t.name: t.cost for t in tests}, 2000)
        cost_options = enumerate_maximal(tests, BudgetQuery(mode="cost_select", budget=2000))
        assert {frozenset(o.kept_tests) for o in cost_options} == cost_oracle
        assert len(cost_options) == len(cost_oracle) == 12

        disc_oracle = oracle({t.name: t.discomfort for t in tests}, 10)
        disc_options = enumerate_maximal(tests, BudgetQuery(mode="discomfort_remove", budget=10))
        assert {frozenset(o.removed_tests) for o in disc_options} == disc_oracle
        assert len(disc_options) == len(disc_oracle) == 15


def test_total_cost_consistency():
    with criterion("total-cost", budget_s=1.0):
        assert sum(t.cost for t in default_test_table()) == 6250


def test_zero_miss_property_suite():
    with criterion("zero-miss-suite", budget_s=10.0):
        rng = np.random.default_rng(SEED)
        for _ in range(1000):
            n = int(rng.integers(1, 501))
            zs = rng.random(n)
            abnormal_fraction = rng.random()
            labels = np.where(rng.random(n) < abnormal_fraction, 1, 0)
            scored = [
                ScoredInstance(z=float(z), label=ABNORMAL if y else NORMAL)
                for z, y in zip(zs, labels)
            ]
            result = calibrate(scored)
            assert result.cm.fn == 0
            assert result.threshold >= 0.5

            # vectorized grid oracle over every candidate threshold in [0.5, 1]
            candidates = np.unique(np.concatenate([[0.5, 1.0], zs]))
            candidates = candidates[candidates >= 0.5]
            is_abn = labels == 1
            fn = (zs[is_abn][None, :] > candidates[:, None]).sum(axis=1)
            fa = (zs[~is_abn][None, :] <= candidates[:, None]).sum(axis=1)
            feasible = fn == 0
            assert feasible.any()
            assert result.fa == fa[feasible].min()


def test_solver_correctness():
    with criterion("solver-correctness", budget_s=30.0):
        rng = np.random.default_rng(SEED)

        def problem(n=20, d=10):
            from scipy import sparse

            X = rng.integers(0, 2, size=(n, d)).astype(float)
            X[:, 0] = 1.0
            y = rng.integers(0, 2, size=n)
            while y.min() == y.max():
                y = rng.integers(0, 2, size=n)
            return sparse.csr_matrix(X), np.where(y == 1, 1.0, -1.0)

        # analytic gradient vs central differences on 20 random instances
        eps = 1e-6
        for _ in range(20):
            X, signs = problem()
            penalty = L2Penalty(ridge=float(rng.random() * 0.1))
            w = rng.normal(scale=0.7, size=X.shape[1])
            analytic = smooth_gradient(w, X, signs, penalty)
            numeric = np.zeros_like(w)
            for j in range(len(w)):
                up, dn = w.copy(), w.copy()
                up[j] += eps
                dn[j] -= eps
                numeric[j] = (smooth_objective(up, X, signs, penalty)
                              - smooth_objective(dn, X, signs, penalty)) / (2 * eps)
            rel = np.linalg.norm(analytic - numeric) / max(np.linalg.norm(numeric), 1e-12)
            assert rel <= 1e-5

        # objective is non-increasing at every epoch
        for penalty in (L2Penalty(ridge=0.01), L1Penalty(C=1.0, l1=0.5)):
            X, signs = problem(n=60, d=12)
            model = train_lr((X, signs), TrainConfig(penalty=penalty, max_epochs=300))
            diffs = np.diff(np.array(model.objective_history))
            assert (diffs <= 1e-9).all()

        # L1 sparsity is monotone across three penalty settings
        X, signs = problem(n=80, d=12)
        nnzs = [
            train_lr((X, signs), TrainConfig(penalty=L1Penalty(C=1.0, l1=l1),
                                             max_epochs=3000, tol=1e-12)).nnz
            for l1 in (0.01, 1.0, 8.0)
        ]
        assert nnzs[0] >= nnzs[1] >= nnzs[2]


def test_end_to_end_degree_gap(default_cohort):
    with criterion("end-to-end-degree-gap", budget_s=300.0):
        assert default_cohort.n_abnormal == 92
        assert default_cohort.n_normal == 3597

        deg3 = run_pipeline(default_cohort, PipelineConfig(degree=3, seed=SEED))
        assert sensitivity(deg3.calibration.post_cm) == 1.0
        assert deg3.calibration.post_cm.fn == 0
        assert accuracy(deg3.train_eval.init_cm) >= 0.99

        deg1 = run_pipeline(default_cohort,
                            PipelineConfig(degree=1, seed=SEED, max_epochs=600))
        assert sensitivity(deg1.train_eval.init_cm) < 1.0


def test_ablation_sweep(default_cohort):
    with criterion("ablation-sweep", budget_s=600.0):
        order = default_removal_order(default_cohort)
        assert len(order) == 15
        points = ablation_sweep(default_cohort, order,
                                PipelineConfig(degree=3, seed=SEED))
        assert len(points) == 16
        for p in points:
            assert p.fn_post == 0
            assert p.sensitivity_post in (None, 1.0)
        assert points[-1].fa_post >= points[0].fa_post


def test_metric_formulas():
    with criterion("metric-formulas", budget_s=1.0):
        rng = np.random.default_rng(SEED)
        for _ in range(100):
            ta, fa, fn, tn = (int(v) for v in rng.integers(0, 200, size=4))
            cm = ConfusionMatrix(ta=ta, fa=fa, fn=fn, tn=tn)
            if ta + fn > 0:
                assert sensitivity(cm) == pytest.approx(ta / (ta + fn))
            else:
                assert sensitivity(cm) is None
            if cm.total > 0:
                assert accuracy(cm) == pytest.approx((ta + tn) / cm.total)
        assert round(100 * sensitivity(ConfusionMatrix(ta=45, fa=0, fn=1, tn=0)), 2) == 97.83
        assert round(100 * sensitivity(ConfusionMatrix(ta=15, fa=0, fn=1, tn=0)), 2) == 93.75


def test_replay_reproduces_run_exactly(tmp_path):
    with criterion("replay", budget_s=120.0):
        config = {
            "pipeline": {"degree": 3, "seed": SEED, "max_epochs": 400},
            "store": str(tmp_path / "store-a"),
        }
        path = tmp_path / "config.json"
        path.write_text(json.dumps(config))
        assert cli_main(["train", "--config", str(path)]) == 0
        first = RunStore(config["store"]).list()[0]

        snapshot = dict(first.config)
        snapshot["store"] = str(tmp_path / "store-b")
        replay_path = tmp_path / "replay.json"
        replay_path.write_text(json.dumps(snapshot))
        assert cli_main(["train", "--config", str(replay_path)]) == 0
        second = RunStore(snapshot["store"]).list()[0]

        assert second.results == first.results  # exact, including every float
