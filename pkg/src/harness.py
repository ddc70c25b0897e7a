"""
Synthetic data generators, subset samplers and the fidelity and runtime harnesses.
"""
from __future__ import annotations

import itertools
import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.stats import linregress, wilcoxon

from src.base import FairnessMetric, ForestParams, SearchConfig
from src.dare_forest import DareForest
from src.dataset import (
    AttributeSpec,
    Dataset,
    Literal,
    Predicate,
    Schema,
    dataset_from_frame,
    evaluate_predicate,
    selection_from_ids,
    split_dataset,
)
from src.errors import DatasetError, UnbiasedModelError
from src.fairness import model_bias, retrain_contribution, subset_contribution
from src.lattice import LatticeSearch

logger = logging.getLogger(__name__)

SENSITIVE = "sex"
PROTECTED_VALUE = "female"
PRIVILEGED_VALUE = "male"


# Generators
def _values(n_values: int) -> tuple:
    return tuple(f"v{i}" for i in range(n_values))


def _schema(names: Sequence[str], n_values: int) -> Schema:
    attributes = [AttributeSpec(name=name, domain=_values(n_values)) for name in names]
    attributes.append(AttributeSpec(name=SENSITIVE, domain=(PRIVILEGED_VALUE, PROTECTED_VALUE)))
    return Schema(
        attributes=tuple(attributes),
        sensitive_attribute=SENSITIVE,
        privileged_value=PRIVILEGED_VALUE,
        positive_label="good",
        negative_label="bad",
    )


def _to_dataset(columns: dict, labels: np.ndarray, schema: Schema) -> Dataset:
    frame = pd.DataFrame(columns)
    frame[schema.label_column] = np.where(labels == 1, schema.positive_label, schema.negative_label)
    return dataset_from_frame(frame, schema)


def make_planted_bias(
    n: int = 1000,
    n_attributes: int = 4,
    n_values: int = 3,
    planted: Optional[dict] = None,
    flip_rate: float = 1.0,
    seed: int = 0,
) -> tuple:
    """
    Categorical data with fair base labels and one coherent subset whose labels were flipped against the protected
    group: inside the subset privileged members are positive and protected members negative.

    Parameters
    ----------
    n (int): Number of rows.
    n_attributes (int): Non-sensitive attributes a0, a1, ...; a0 drives the base labels.
    n_values (int): Values per attribute, v0, v1, ...
    planted (dict | None): Equality assignment defining the subset, {"a1": "v0", "a2": "v1"} by default.
    flip_rate (float): Fraction of the subset's rows whose label is overwritten.
    seed (int): Seed of the generator.

    Returns
    -------
    (dataset, planted predicate).
    """
    if n_attributes < 1:
        raise ValueError("n_attributes must be >= 1")
    rng = np.random.default_rng(seed)
    names = [f"a{i}" for i in range(n_attributes)]
    values = np.asarray(_values(n_values), dtype=object)
    codes = rng.integers(n_values, size=(n, n_attributes))
    columns = {name: values[codes[:, j]] for j, name in enumerate(names)}
    columns[SENSITIVE] = np.where(rng.random(n) < 0.5, PRIVILEGED_VALUE, PROTECTED_VALUE)

    base_rates = np.linspace(0.8, 0.2, n_values)
    labels = (rng.random(n) < base_rates[codes[:, 0]]).astype(np.int8)

    assignment = planted or {"a1": "v0", "a2": "v1"}
    predicate = Predicate.equalities(assignment)
    inside = np.ones(n, dtype=bool)
    for attribute, value in assignment.items():
        inside &= columns[attribute] == value
    flip = inside & (rng.random(n) < flip_rate)
    labels[flip] = (columns[SENSITIVE][flip] == PRIVILEGED_VALUE).astype(np.int8)
    logger.debug("planted %s over %d rows", predicate, int(inside.sum()))
    return _to_dataset(columns, labels, _schema(names, n_values)), predicate


def make_synthetic(n: int, m: int, n_values: int = 4, bias: float = 0.2, seed: int = 0) -> Dataset:
    """
    n rows of m categorical attributes (the sensitive one included) with labels leaning towards the privileged group.
    """
    rng = np.random.default_rng(seed)
    names = [f"a{i}" for i in range(max(m - 1, 1))]
    values = np.asarray(_values(n_values), dtype=object)
    codes = rng.integers(n_values, size=(n, len(names)))
    columns = {name: values[codes[:, j]] for j, name in enumerate(names)}
    privileged = rng.random(n) < 0.5
    columns[SENSITIVE] = np.where(privileged, PRIVILEGED_VALUE, PROTECTED_VALUE)
    weights = rng.normal(size=(len(names), n_values))
    score = weights[np.arange(len(names)), codes].sum(axis=1) / math.sqrt(len(names))
    score += 4 * bias * np.where(privileged, 1.0, -1.0)
    labels = (rng.random(n) < 1.0 / (1.0 + np.exp(-score))).astype(np.int8)
    return _to_dataset(columns, labels, _schema(names, n_values))


def make_fair(n_pairs: int = 100, n_values: int = 3, seed: int = 0) -> Dataset:
    """
    Every row appears once per sensitive group with the same attributes and a label that is a function of a0,
    so any forest fitted on it is exactly fair on it.
    """
    rng = np.random.default_rng(seed)
    values = np.asarray(_values(n_values), dtype=object)
    a0 = values[rng.integers(n_values, size=n_pairs)]
    columns = {
        "a0": np.concatenate([a0, a0]),
        SENSITIVE: np.repeat(np.asarray([PRIVILEGED_VALUE, PROTECTED_VALUE], dtype=object), n_pairs),
    }
    labels = (columns["a0"] == "v0").astype(np.int8)
    return _to_dataset(columns, labels, _schema(["a0"], n_values))


# Subset samplers
def _band_sizes(n: int, support_range: tuple) -> tuple:
    low = max(1, math.ceil(support_range[0] * n))
    high = min(n - 1, math.floor(support_range[1] * n))
    return low, high


def sample_random_subsets(train: Dataset, n_subsets: int, support_range: tuple, seed: int = 0) -> list:
    """
    Uniformly drawn row sets whose support lies in the band, at least one row each.
    """
    rng = np.random.default_rng(seed)
    low, high = _band_sizes(train.n, support_range)
    if n_subsets and high < low:
        logger.warning("support band %s holds no subset of %d rows", list(support_range), train.n)
        return []
    selections = []
    for _ in range(n_subsets):
        size = int(rng.integers(low, high + 1))
        ids = rng.choice(train.ids, size=size, replace=False)
        selections.append(selection_from_ids(train, ids))
    return selections


def coherent_candidates(train: Dataset, support_range: tuple, max_literals: int = 2) -> list:
    """
    Every consistent conjunction of equality literals with at most `max_literals` literals and support in the band,
    in canonical order.
    """
    low, high = _band_sizes(train.n, support_range)
    found = []
    attributes = train.schema.attributes
    for level in range(1, max_literals + 1):
        for specs in itertools.combinations(attributes, level):
            for values in itertools.product(*(spec.domain for spec in specs)):
                predicate = Predicate(frozenset(Literal(s.name, "=", v) for s, v in zip(specs, values)))
                selection = evaluate_predicate(predicate, train)
                if low <= selection.size <= high:
                    found.append(selection)
    found.sort(key=lambda sel: sel.predicate.canonical_key)
    return found


def sample_coherent_subsets(
    train: Dataset, n_subsets: int, support_range: tuple, max_literals: int = 2, seed: int = 0
) -> list:
    """
    Predicate-defined subsets drawn without replacement among those with support in the band.
    """
    if n_subsets == 0:
        return []
    pool = coherent_candidates(train, support_range, max_literals)
    if len(pool) <= n_subsets:
        if len(pool) < n_subsets:
            logger.warning("only %d coherent subsets lie in the support band, %d requested", len(pool), n_subsets)
        return pool
    rng = np.random.default_rng(seed)
    picked = np.sort(rng.choice(len(pool), size=n_subsets, replace=False))
    return [pool[i] for i in picked]


# Fidelity
@dataclass
class FidelityReport:
    """
    Unlearned versus retrained fairness of sampled subsets. Attributes are:
    metric (FairnessMetric)
    pairs (pd.DataFrame): one row per subset with kind, pattern, size, support, unlearned and retrained fairness
        values, their absolute difference, both contributions and a defined flag.
    summary (dict): error statistics per kind ("all", "random", "coherent").
    """

    metric: FairnessMetric
    pairs: pd.DataFrame = field(default_factory=pd.DataFrame)
    summary: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "metric": self.metric.value,
            "summary": self.summary,
            "pairs": self.pairs.astype(object).where(self.pairs.notna(), None).to_dict(orient="records"),
        }


PAIR_COLUMNS = [
    "kind",
    "pattern",
    "size",
    "support",
    "unlearned",
    "retrained",
    "abs_error",
    "phi_unlearning",
    "phi_retrain",
    "defined",
]


def summarize_pairs(pairs: pd.DataFrame) -> dict:
    """
    Mean, 95th percentile and max absolute error, a paired Wilcoxon signed-rank test and a least-squares fit of
    retrained on unlearned fairness.
    """
    defined = pairs[pairs["defined"]] if len(pairs) else pairs
    out = {"n_pairs": int(len(pairs)), "n_defined": int(len(defined))}
    stats = dict.fromkeys(
        ["mean_abs_error", "p95_abs_error", "max_abs_error", "wilcoxon_statistic", "wilcoxon_pvalue", "slope", "intercept", "rvalue"]
    )
    out.update(stats)
    if len(defined) == 0:
        return out
    errors = defined["abs_error"].to_numpy(dtype=np.float64)
    unlearned = defined["unlearned"].to_numpy(dtype=np.float64)
    retrained = defined["retrained"].to_numpy(dtype=np.float64)
    out["mean_abs_error"] = float(np.mean(errors))
    out["p95_abs_error"] = float(np.percentile(errors, 95))
    out["max_abs_error"] = float(np.max(errors))
    if np.count_nonzero(unlearned - retrained) >= 2:
        test = wilcoxon(unlearned, retrained)
        out["wilcoxon_statistic"], out["wilcoxon_pvalue"] = float(test.statistic), float(test.pvalue)
    if len(defined) >= 2 and np.ptp(unlearned) > 0:
        fit = linregress(unlearned, retrained)
        out["slope"], out["intercept"], out["rvalue"] = float(fit.slope), float(fit.intercept), float(fit.rvalue)
    return out


def run_fidelity(
    train: Dataset,
    test: Dataset,
    forest: DareForest,
    metric: FairnessMetric,
    n_random: int = 100,
    n_coherent: int = 100,
    support_range: tuple = (0.0, 0.05),
    max_literals: int = 2,
    seed: int = 0,
) -> FidelityReport:
    """
    Compare the fairness of the forest after unlearning each sampled subset with the fairness of a forest retrained
    without it (same hyperparameters and seed as `forest`).

    Parameters
    ----------
    train (Dataset): Training data of `forest`.
    test (Dataset): Data on which fairness is measured.
    forest (DareForest): The fitted forest, left unchanged.
    metric (FairnessMetric): The fairness notion.
    n_random (int): Number of uniformly drawn subsets.
    n_coherent (int): Number of predicate-defined subsets.
    support_range (tuple): Support band of the sampled subsets.
    max_literals (int): Maximum literals of coherent subsets.
    seed (int): Seed of the samplers.

    Returns
    -------
    The FidelityReport; no subset gives an empty report.
    """
    bias, acc = model_bias(forest, test, metric)
    if bias.exact_magnitude == 0:
        raise UnbiasedModelError()
    batches = (
        ("random", sample_random_subsets(train, n_random, support_range, seed)),
        ("coherent", sample_coherent_subsets(train, n_coherent, support_range, max_literals, seed)),
    )
    rows = []
    for kind, selections in batches:
        for sel in selections:
            unlearned = subset_contribution(forest, sel, metric, test, bias, acc)
            try:
                retrained = retrain_contribution(train, sel, metric, test, forest.params, bias, acc, seed=forest.params.seed)
            except DatasetError as err:
                logger.warning("%s subset %s is not retrainable: %s", kind, sel.predicate, err)
                retrained = None
            defined = unlearned.defined and retrained is not None and retrained.defined
            row = {
                "kind": kind,
                "pattern": str(sel.predicate),
                "size": sel.size,
                "support": sel.support,
                "unlearned": unlearned.report_after.value if unlearned.defined else np.nan,
                "retrained": retrained.report_after.value if retrained is not None and retrained.defined else np.nan,
                "phi_unlearning": unlearned.phi if unlearned.defined else np.nan,
                "phi_retrain": retrained.phi if retrained is not None and retrained.defined else np.nan,
                "defined": defined,
            }
            row["abs_error"] = abs(row["unlearned"] - row["retrained"]) if defined else np.nan
            rows.append(row)
        logger.info("fidelity: evaluated %d %s subsets", len(selections), kind)
    pairs = pd.DataFrame(rows, columns=PAIR_COLUMNS)
    if len(pairs):
        pairs["defined"] = pairs["defined"].astype(bool)
    summary = {"all": summarize_pairs(pairs)}
    for kind, _ in batches:
        summary[kind] = summarize_pairs(pairs[pairs["kind"] == kind])
    return FidelityReport(metric=metric, pairs=pairs, summary=summary)


# Runtime
def _timed(func, *args):
    start = time.perf_counter()
    out = func(*args)
    return out, time.perf_counter() - start


def run_bench(
    sizes: Iterable[tuple],
    params: ForestParams = ForestParams(),
    cfg: Optional[SearchConfig] = None,
    subset_fraction: float = 0.05,
    seed: int = 0,
) -> pd.DataFrame:
    """
    Wall-clock runtimes on synthetic data of growing size.

    Parameters
    ----------
    sizes (Iterable[tuple]): (n, m) pairs, rows and attributes.
    params (ForestParams): Forest hyperparameters.
    cfg (SearchConfig | None): When given, the lattice search is timed on an 80/20 split as well.
    subset_fraction (float): Support of the random subset deleted and retrained without.
    seed (int): Seed of the generator and of the deleted subset.

    Returns
    -------
    One row per size with fit, delete, retrain and search seconds and the retrain / delete speedup.
    """
    rows = []
    for n, m in sizes:
        data = make_synthetic(n, m, seed=seed)
        forest, fit_seconds = _timed(DareForest(params).fit, data)
        rng = np.random.default_rng(seed)
        ids = rng.choice(data.ids, size=max(1, int(subset_fraction * n)), replace=False)
        working = forest.copy()
        report, delete_seconds = _timed(working.delete, ids)
        _, retrain_seconds = _timed(DareForest(replace(params, seed=params.seed + 1)).fit, data.drop(ids))
        row = {
            "n": n,
            "m": m,
            "fit_seconds": fit_seconds,
            "delete_seconds": delete_seconds,
            "retrain_seconds": retrain_seconds,
            "speedup": retrain_seconds / delete_seconds if delete_seconds > 0 else np.inf,
            "subtrees_retrained": report.subtrees_retrained,
            "search_seconds": np.nan,
        }
        if cfg is not None:
            train, test = split_dataset(data, 0.2, seed)
            model = DareForest(params).fit(train)
            try:
                _, row["search_seconds"] = _timed(LatticeSearch(cfg).fit, train, test, model)
            except UnbiasedModelError:
                logger.warning("synthetic model with n=%d, m=%d is unbiased, search not timed", n, m)
        logger.info("bench n=%d m=%d: fit %.3fs, delete %.3fs, retrain %.3fs", n, m, fit_seconds, delete_seconds, retrain_seconds)
        rows.append(row)
    return pd.DataFrame(
        rows,
        columns=["n", "m", "fit_seconds", "delete_seconds", "retrain_seconds", "speedup", "subtrees_retrained", "search_seconds"],
    )
