"""
Desk-scale end-to-end checks; deselected by default, run with `pytest -m slow`.
"""
import numpy as np
import pytest

from src.base import FairnessMetric, ForestParams, SearchConfig
from src.dare_forest import DareForest
from src.dataset import split_dataset
from src.harness import make_planted_bias, make_synthetic, run_bench, run_fidelity
from src.lattice import LatticeSearch, verify_top_k

pytestmark = pytest.mark.slow

PARAMS = ForestParams(n_trees=50, max_depth=10, d_rand=2, k_thresholds=5, seed=0)


@pytest.mark.parametrize("steps, low, high", [(1000, 1, 3), (20, 20, 60), (5, 100, 250)])
def test_cache_stays_exact_over_many_deletions(steps, low, high):
    d = make_synthetic(2000, 6, seed=4)
    forest = DareForest(ForestParams(n_trees=10, max_depth=8, d_rand=2, k_thresholds=5, seed=4)).fit(d)
    rng = np.random.default_rng(4)
    deleted = []
    for step in range(steps):
        ids = rng.choice(forest.live_ids, size=int(rng.integers(low, high)), replace=False)
        forest.delete(ids)
        deleted.extend(ids.tolist())
        audit = forest.audit_recount(d.drop(deleted))
        assert audit, f"step {step}: {audit.discrepancy}"
        assert forest.check_split_optimality() == [], f"step {step}: a greedy split is no longer optimal"


def test_cache_stays_exact_after_subtree_deletions():
    d = make_synthetic(2000, 6, seed=5)
    forest = DareForest(ForestParams(n_trees=10, max_depth=8, d_rand=2, k_thresholds=5, seed=5)).fit(d)
    deleted = []
    for step, tree in enumerate(forest.trees_[:4]):
        # every row of one branch two levels down
        node = tree.root
        for side in ("left", "right"):
            if node.is_leaf:
                break
            node = getattr(node, side)
        positions = np.concatenate([leaf.leaf_ids for leaf in node.leaves()])
        ids = forest.ids_[positions]
        report = forest.delete(ids)
        deleted.extend(ids.tolist())
        assert report.n_deleted == len(ids), f"step {step}: {report.n_deleted} of {len(ids)} rows deleted"
        audit = forest.audit_recount(d.drop(deleted))
        assert audit, f"step {step}: {audit.discrepancy}"
        assert forest.check_split_optimality() == [], f"step {step}: a greedy split is no longer optimal"


@pytest.mark.parametrize("metric", list(FairnessMetric))
def test_unlearning_matches_retraining(metric):
    train, test = split_dataset(make_synthetic(1000, 5, seed=0), 0.2, seed=0)
    forest = DareForest(PARAMS).fit(train)
    report = run_fidelity(train, test, forest, metric, 100, 100, (0.0, 0.05), max_literals=3)
    for kind in ("random", "coherent", "all"):
        summary = report.summary[kind]
        assert summary["n_defined"] > 0, f"no defined {kind} pair"
        assert summary["mean_abs_error"] <= 0.02, f"{kind} mean error {summary['mean_abs_error']:.4f}"
        assert summary["p95_abs_error"] <= 0.05, f"{kind} p95 error {summary['p95_abs_error']:.4f}"


def test_contribution_estimates_agree():
    data, _ = make_planted_bias(n=1000, seed=0)
    train, test = split_dataset(data, 0.2, seed=0)
    forest = DareForest(PARAMS).fit(train)
    pairs = run_fidelity(
        train, test, forest, FairnessMetric.STATISTICAL_PARITY, 0, 50, (0.05, 0.15), max_literals=2
    ).pairs
    defined = pairs[pairs["defined"]]
    close = (defined["phi_unlearning"] - defined["phi_retrain"]).abs() <= 0.25
    assert len(defined) > 0 and close.mean() >= 0.9, f"only {close.mean():.0%} of the estimates agree"


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_planted_subset_is_recovered(seed):
    data, planted = make_planted_bias(n=1000, seed=seed)
    train, test = split_dataset(data, 0.2, seed=seed)
    params = ForestParams(n_trees=50, max_depth=10, d_rand=2, k_thresholds=5, seed=seed)
    cfg = SearchConfig(support_range=(0.05, 0.15), max_literals=2, k=5)
    explanations = LatticeSearch(cfg).fit(train, test, DareForest(params).fit(train)).explanations_
    verify_top_k(explanations, train, test, cfg, params)
    found = [e for e in explanations[:3] if e.predicate.canonical_key == planted.canonical_key]
    assert found, f"planted subset missing from {[str(e.predicate) for e in explanations[:3]]}"
    assert found[0].verification.bias_reduction > 0, "retraining without the planted subset should reduce the bias"


@pytest.mark.parametrize("metric", [FairnessMetric.STATISTICAL_PARITY, FairnessMetric.EQUALIZED_ODDS])
def test_explanations_are_cheap_and_responsible(metric):
    data, _ = make_planted_bias(n=1000, seed=0)
    train, test = split_dataset(data, 0.2, seed=0)
    cfg = SearchConfig(support_range=(0.05, 0.15), max_literals=2, k=5, metric=metric)
    explanations = LatticeSearch(cfg).fit(train, test, DareForest(PARAMS).fit(train)).explanations_
    verify_top_k(explanations, train, test, cfg, PARAMS)
    assert explanations, "the planted bias should yield explanations"
    assert all(e.bias_reduction > 0 for e in explanations), "every explanation must reduce the bias"
    assert all(e.accuracy_reduction <= 5 for e in explanations), "an explanation costs more than 5 accuracy points"
    assert explanations[0].verified_responsible, "the top explanation should survive retraining"


def test_unlearning_is_faster_than_retraining():
    table = run_bench([(10000, 5)], ForestParams(n_trees=100, seed=0))
    assert table.loc[0, "speedup"] >= 2, f"speedup {table.loc[0, 'speedup']:.2f}"
