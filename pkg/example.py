from src.base import FairnessMetric, ForestParams, SearchConfig
from src.dare_forest import DareForest
from src.dataset import split_dataset
from src.fairness import model_bias
from src.harness import make_planted_bias
from src.lattice import LatticeSearch, verify_top_k
from src.report import diagnose, render_tables

# Synthetic credit data where one coherent subset was labelled against the protected group
data, planted = make_planted_bias(n=1000, seed=0)
train, test = split_dataset(data, 0.2, seed=0)
print(f"planted subset: {planted}")

params = ForestParams(n_trees=50, max_depth=10, d_rand=2, k_thresholds=5, seed=0)
forest = DareForest(params).fit(train)

# Bias of the original model, protected minus privileged
report, acc = model_bias(forest, test, FairnessMetric.STATISTICAL_PARITY)
print(f"statistical parity {report.value:+.4f}, accuracy {acc:.4f}")

# Unlearning one subset leaves the fitted forest untouched
working = forest.copy()
deletion = working.delete(train.ids[:10])
print(f"deleted {deletion.n_deleted} rows, {deletion.subtrees_retrained} subtrees retrained")

# Top-5 subsets whose removal reduces the bias the most, checked by retraining
cfg = SearchConfig(support_range=(0.05, 0.15), max_literals=2, k=5)
explanations = LatticeSearch(cfg).fit(train, test, forest).explanations_
verify_top_k(explanations, train, test, cfg, params)
print(render_tables(explanations, diagnose(explanations, forest, train), fmt="markdown"))

# Same search with the equalized odds notion
cfg = SearchConfig(support_range=(0.05, 0.15), max_literals=2, k=5, metric=FairnessMetric.EQUALIZED_ODDS)
print(render_tables(LatticeSearch(cfg).fit(train, test, forest).explanations_, fmt="markdown"))
