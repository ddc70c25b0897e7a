"""
Lattice of conjunctive subsets explored level by level, pruned by support, complexity, parent quality and responsibility.
"""
from __future__ import annotations

import json
import logging
from contextlib import ExitStack
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from src.base import CompareStrategy, ForestParams, NodeStatus, SearchConfig
from src.dare_forest import DareForest
from src.dataset import Dataset, Literal, Predicate, SubsetSelection, evaluate_predicate
from src.errors import DatasetError, UnbiasedModelError
from src.fairness import RETRAIN, ContributionResult, model_bias, retrain_contribution, subset_contribution

logger = logging.getLogger(__name__)


@dataclass
class LatticeNode:
    """
    One subset of the lattice. `parents` holds the canonical keys of the two merged level-(l-1) predicates.
    """

    predicate: Predicate
    selection: SubsetSelection
    parents: tuple = ()
    contribution: Optional[ContributionResult] = None
    status: Optional[NodeStatus] = None

    @property
    def level(self) -> int:
        return self.predicate.level

    @property
    def key(self) -> str:
        return self.predicate.canonical_key

    def quality(self, strategy: CompareStrategy) -> float:
        """
        Bias reduction (normal) or bias reduction per removed instance (perInstance); -inf when unmeasured.
        """
        if self.contribution is None or not self.contribution.defined:
            return -np.inf
        if strategy == CompareStrategy.PER_INSTANCE:
            return self.contribution.bias_reduction / self.selection.size
        return self.contribution.bias_reduction

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "pattern": str(self.predicate),
            "key": self.key,
            "parents": list(self.parents),
            "status": None if self.status is None else self.status.value,
            "support": self.selection.support,
            "size": self.selection.size,
            "contribution": None if self.contribution is None else self.contribution.to_dict(),
        }


@dataclass
class Explanation:
    """
    A ranked responsible subset. Attributes are:
    rank (int)
    predicate (Predicate)
    selection (SubsetSelection)
    support (float)
    bias_reduction (float): percent, estimated by unlearning.
    accuracy_reduction (float): percentage points.
    method (str)
    contribution (ContributionResult)
    verification (ContributionResult | None): retrain measurement attached by `verify_top_k`.
    """

    rank: int
    predicate: Predicate
    selection: SubsetSelection
    support: float
    bias_reduction: float
    accuracy_reduction: float
    method: str
    contribution: ContributionResult
    verification: Optional[ContributionResult] = None

    @property
    def verified_responsible(self) -> Optional[bool]:
        if self.verification is None:
            return None
        return self.verification.defined and self.verification.bias_reduction > 0

    def to_dict(self) -> dict:
        return {
            "rank": self.rank,
            "pattern": str(self.predicate),
            "predicate": self.predicate.to_dict(),
            "support": self.support,
            "bias_reduction": self.bias_reduction,
            "accuracy_reduction": self.accuracy_reduction,
            "method": self.method,
            "verification": None if self.verification is None else self.verification.to_dict(),
        }


def seed_level1(train: Dataset) -> list:
    """
    One equality literal per (attribute, value) of the discretized schema, sensitive attribute included.
    """
    nodes = []
    for spec in train.schema.attributes:
        if not spec.is_categorical:
            raise DatasetError(f"attribute {spec.name!r} is continuous, discretize the data first")
        for value in spec.domain:
            predicate = Predicate(frozenset({Literal(spec.name, "=", value)}))
            nodes.append(LatticeNode(predicate=predicate, selection=evaluate_predicate(predicate, train)))
    return nodes


def merge(a: LatticeNode, b: LatticeNode, seen: Optional[set] = None) -> Optional[Predicate]:
    """
    Apriori join of two level-(l-1) nodes sharing l-2 literals; None for contradictory or already seen unions.
    """
    if a.level != b.level:
        return None
    union = a.predicate.literals | b.predicate.literals
    if len(union) != a.level + 1:
        return None
    attributes = [lit.attribute for lit in union]
    if len(set(attributes)) != len(attributes):
        return None
    predicate = Predicate(union)
    if seen is not None and predicate.canonical_key in seen:
        return None
    return predicate


def apply_pruning(
    node: LatticeNode,
    cfg: SearchConfig,
    original_bias: float,
    parents: Sequence[LatticeNode] = (),
) -> NodeStatus:
    """
    Decide whether a node is expanded, carried over for its oversized support, or pruned. A node covering the whole
    training set is always carried over unmeasured.

    Parameters
    ----------
    node (LatticeNode): Node with its selection, and its contribution unless support-pruned.
    cfg (SearchConfig): The search hyperparameters.
    original_bias (float): Bias magnitude of the original model.
    parents (Sequence[LatticeNode]): The two nodes the predicate was merged from.

    Returns
    -------
    The node status.
    """
    if original_bias <= 0:
        raise UnbiasedModelError()
    support = node.selection.support
    if node.selection.size == 0 or support < cfg.support_min:
        return NodeStatus.PRUNED_SUPPORT
    if support > cfg.support_max or node.selection.size == node.selection.n_total:
        return NodeStatus.OVERSUPPORT_CARRYOVER
    if node.contribution is None or not node.contribution.defined:
        logger.warning("contribution of %s is undefined, not expanding it", node.predicate)
        return NodeStatus.PRUNED_NOT_RESPONSIBLE
    if node.level >= 2:
        if cfg.compare_parents:
            quality = node.quality(cfg.compare_strategy)
            if any(quality < parent.quality(cfg.compare_strategy) for parent in parents):
                return NodeStatus.PRUNED_QUALITY
        if cfg.compare_original_parity and node.contribution.bias_reduction <= 0:
            return NodeStatus.PRUNED_NOT_RESPONSIBLE
    return NodeStatus.EXPANDED


def _ranking_key(node: LatticeNode) -> tuple:
    return -node.contribution.bias_reduction, node.selection.support, node.key


class LatticeSearch:
    """
    Breadth-first generation of explanations over the subset lattice.

    Parameters
    ----------
    cfg (SearchConfig): The search hyperparameters.
    """

    def __init__(self, cfg: SearchConfig = SearchConfig()):
        self.cfg = cfg.validate()

    def fit(self, train: Dataset, test: Dataset, forest: DareForest) -> "LatticeSearch":
        """
        Based on the sklearn API, run the search.

        Parameters
        ----------
        train (Dataset): Discretized training data the forest was fitted on.
        test (Dataset): Data on which the bias is measured.
        forest (DareForest): The trained model, left unchanged.

        Returns
        -------
        The fitted object, with `explanations_`, `nodes_` and `bias_before_`.
        """
        cfg = self.cfg
        self.bias_before_, self.accuracy_before_ = model_bias(forest, test, cfg.metric)
        if self.bias_before_.exact_magnitude == 0:
            raise UnbiasedModelError()
        self.nodes_ = []
        by_key = {}
        candidates = []
        frontier = seed_level1(train)
        seen = {node.key for node in frontier}
        level = 1
        with ExitStack() as stack:
            trace = stack.enter_context(open(cfg.trace_path, "w", encoding="utf-8")) if cfg.trace_path else None
            while True:
                frontier.sort(key=lambda node: node.key)
                self._evaluate(frontier, forest, test)
                expandable = []
                for node in frontier:
                    node.status = apply_pruning(
                        node, cfg, self.bias_before_.magnitude, [by_key[k] for k in node.parents if k in by_key]
                    )
                    by_key[node.key] = node
                    self.nodes_.append(node)
                    if node.status in (NodeStatus.EXPANDED, NodeStatus.OVERSUPPORT_CARRYOVER):
                        expandable.append(node)
                    if node.status == NodeStatus.EXPANDED and node.quality(CompareStrategy.NORMAL) > 0:
                        candidates.append(node)
                    if trace is not None:
                        trace.write(json.dumps(node.to_dict(), sort_keys=True) + "\n")
                logger.info(
                    "level %d: %d nodes, %d expandable, %d candidates so far", level, len(frontier), len(expandable), len(candidates)
                )
                level += 1
                if level > cfg.max_literals:
                    break
                frontier = self._expand(expandable, seen, train)
                if not frontier:
                    break

        candidates.sort(key=_ranking_key)
        self.explanations_ = [
            Explanation(
                rank=rank,
                predicate=node.predicate,
                selection=node.selection,
                support=node.selection.support,
                bias_reduction=node.contribution.bias_reduction,
                accuracy_reduction=node.contribution.accuracy_reduction,
                method=node.contribution.method,
                contribution=node.contribution,
            )
            for rank, node in enumerate(candidates[: cfg.k], start=1)
        ]
        if not self.explanations_:
            logger.warning("no responsible subset found in the support range %s", list(cfg.support_range))
        return self

    def _needs_contribution(self, node: LatticeNode) -> bool:
        support = node.selection.support
        if node.selection.size == 0 or support < self.cfg.support_min:
            return False
        # removing every training row leaves nothing to unlearn from
        if node.selection.size == node.selection.n_total:
            return False
        if support <= self.cfg.support_max:
            return True
        return self.cfg.compare_parents and node.level < self.cfg.max_literals

    def _evaluate(self, nodes: list, forest: DareForest, test: Dataset) -> None:
        todo = [node for node in nodes if self._needs_contribution(node)]
        args = (self.cfg.metric, test, self.bias_before_, self.accuracy_before_)
        if self.cfg.n_jobs == 1:
            results = [subset_contribution(forest, node.selection, *args) for node in todo]
        else:
            results = Parallel(n_jobs=self.cfg.n_jobs)(
                delayed(subset_contribution)(forest, node.selection, *args) for node in todo
            )
        for node, result in zip(todo, results):
            node.contribution = result
            logger.debug("%s: support %.4f, bias reduction %s", node.predicate, node.selection.support, result.bias_reduction)

    @staticmethod
    def _expand(expandable: list, seen: set, train: Dataset) -> list:
        expandable = sorted(expandable, key=lambda node: node.key)
        children = []
        for i, a in enumerate(expandable):
            for b in expandable[i + 1:]:
                predicate = merge(a, b, seen)
                if predicate is None:
                    continue
                seen.add(predicate.canonical_key)
                children.append(
                    LatticeNode(predicate=predicate, selection=evaluate_predicate(predicate, train), parents=(a.key, b.key))
                )
        return children


def run_search(train: Dataset, test: Dataset, forest: DareForest, cfg: SearchConfig) -> list:
    """
    Top-k explanations ranked by decreasing bias reduction (ties: smaller support, then canonical key).
    """
    return LatticeSearch(cfg).fit(train, test, forest).explanations_


def verify_top_k(
    explanations: list,
    train: Dataset,
    test: Dataset,
    cfg: SearchConfig,
    params: ForestParams,
) -> list:
    """
    Attach a retrain measurement to every explanation and flag those that do not reduce the retrained bias.
    """
    if not explanations:
        return explanations
    fresh = replace(params, seed=params.seed + 1)
    bias_before, accuracy_before = model_bias(DareForest(fresh).fit(train), test, cfg.metric)
    for explanation in explanations:
        try:
            explanation.verification = retrain_contribution(
                train, explanation.selection, cfg.metric, test, params, bias_before, accuracy_before
            )
        except DatasetError as err:
            logger.warning("explanation %d cannot be verified: %s", explanation.rank, err)
            explanation.verification = ContributionResult(
                predicate=explanation.predicate,
                support=explanation.support,
                size=explanation.selection.size,
                bias_before=bias_before.magnitude,
                method=RETRAIN,
                defined=False,
                undefined_reason=str(err),
            )
            continue
        if not explanation.verified_responsible:
            logger.warning(
                "explanation %d (%s) does not reduce the bias of a retrained model", explanation.rank, explanation.predicate
            )
    logger.info(
        "verified %d explanations, %d responsible after retraining",
        len(explanations), sum(bool(e.verified_responsible) for e in explanations),
    )
    return explanations
