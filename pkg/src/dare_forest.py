"""
Removal-enabled random forest.

The top `d_rand` levels of every tree split at random; deeper nodes pick the best Gini split among cached candidates.
Every internal node caches the label counts of its candidates and every leaf stores its training instances, so
deleting instances only updates counts along their paths and retrains the subtrees whose split stops being optimal.
"""
from __future__ import annotations

import copy
import json
import logging
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np
from joblib import Parallel, delayed

from src.base import ForestParams
from src.dataset import Dataset
from src.errors import ForestError, UnknownInstanceError

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


class NodeKind(str, Enum):
    RANDOM = "random"
    GREEDY = "greedy"
    LEAF = "leaf"


def gini(n, n_pos) -> np.ndarray:
    """
    Gini impurity of binary label counts, 0 for empty nodes.
    """
    n = np.asarray(n, dtype=np.float64)
    n_pos = np.asarray(n_pos, dtype=np.float64)
    p = np.divide(n_pos, n, out=np.zeros_like(n), where=n > 0)
    return 2.0 * p * (1.0 - p)


def goes_left(column: np.ndarray, value, ordered) -> np.ndarray:
    """
    Threshold test (x <= value) for ordered attributes, one-vs-rest test (x == value) otherwise.
    """
    return np.where(ordered, column <= value, column == value)


@dataclass
class NodeStats:
    """
    Cached statistics of a node. Attributes are:
    n (int): instances routed to the node.
    n_pos (int): positive instances routed to the node.
    attributes (np.ndarray): attribute index of every candidate split.
    values (np.ndarray): threshold or category code of every candidate split.
    n_left (np.ndarray): instances sent left by every candidate.
    n_left_pos (np.ndarray): positive instances sent left by every candidate.
    """

    n: int
    n_pos: int
    attributes: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    values: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.float64))
    n_left: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    n_left_pos: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    @property
    def n_right(self) -> np.ndarray:
        return self.n - self.n_left

    @property
    def n_right_pos(self) -> np.ndarray:
        return self.n_pos - self.n_left_pos

    def gains(self) -> np.ndarray:
        if self.n == 0:
            return np.zeros(len(self.n_left))
        parent = gini(self.n, self.n_pos)
        left = self.n_left / self.n * gini(self.n_left, self.n_left_pos)
        right = self.n_right / self.n * gini(self.n_right, self.n_right_pos)
        return parent - left - right

    def valid(self, min_leaf: int) -> np.ndarray:
        return (self.n_left >= min_leaf) & (self.n_right >= min_leaf)

    def best(self, min_leaf: int) -> int:
        """
        Index of the best valid candidate, -1 when none is valid. Ties go to the lowest index.
        """
        valid = self.valid(min_leaf)
        if not valid.any():
            return -1
        gains = np.where(valid, self.gains(), -np.inf)
        return int(np.argmax(gains))

    def to_dict(self) -> dict:
        return {
            "n": int(self.n),
            "n_pos": int(self.n_pos),
            "attributes": self.attributes.tolist(),
            "values": self.values.tolist(),
            "n_left": self.n_left.tolist(),
            "n_left_pos": self.n_left_pos.tolist(),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "NodeStats":
        return cls(
            n=raw["n"],
            n_pos=raw["n_pos"],
            attributes=np.asarray(raw["attributes"], dtype=np.int64),
            values=np.asarray(raw["values"], dtype=np.float64),
            n_left=np.asarray(raw["n_left"], dtype=np.int64),
            n_left_pos=np.asarray(raw["n_left_pos"], dtype=np.int64),
        )


@dataclass
class DareNode:
    """
    Node of a removal-enabled tree. Random and greedy nodes hold a chosen candidate index; leaves hold their instances.
    """

    kind: NodeKind
    depth: int
    stats: NodeStats
    chosen: int = -1
    leaf_ids: Optional[np.ndarray] = None
    left: Optional["DareNode"] = None
    right: Optional["DareNode"] = None

    @property
    def is_leaf(self) -> bool:
        return self.kind == NodeKind.LEAF

    @property
    def attribute(self) -> int:
        return int(self.stats.attributes[self.chosen])

    @property
    def value(self) -> float:
        return float(self.stats.values[self.chosen])

    @property
    def proba(self) -> float:
        return self.stats.n_pos / self.stats.n if self.stats.n else 0.0

    def leaves(self) -> Iterable["DareNode"]:
        stack = [self]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                yield node
            else:
                stack.extend((node.right, node.left))

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value, "depth": self.depth, "stats": self.stats.to_dict(), "chosen": self.chosen}
        if self.is_leaf:
            out["leaf_ids"] = self.leaf_ids.tolist()
        else:
            out["left"] = self.left.to_dict()
            out["right"] = self.right.to_dict()
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "DareNode":
        node = cls(kind=NodeKind(raw["kind"]), depth=raw["depth"], stats=NodeStats.from_dict(raw["stats"]), chosen=raw["chosen"])
        if node.is_leaf:
            node.leaf_ids = np.asarray(raw["leaf_ids"], dtype=np.int64)
        else:
            node.left = cls.from_dict(raw["left"])
            node.right = cls.from_dict(raw["right"])
        return node


@dataclass
class DeletionReport:
    """
    Work done by a deletion. Attributes are:
    n_deleted (int)
    nodes_updated (int): internal nodes whose cached counts were decremented.
    leaves_updated (int)
    subtrees_retrained (int)
    """

    n_deleted: int = 0
    nodes_updated: int = 0
    leaves_updated: int = 0
    subtrees_retrained: int = 0

    def merge(self, other: "DeletionReport") -> None:
        self.nodes_updated += other.nodes_updated
        self.leaves_updated += other.leaves_updated
        self.subtrees_retrained += other.subtrees_retrained


@dataclass
class AuditResult:
    passed: bool
    discrepancy: Optional[str] = None

    def __bool__(self) -> bool:
        return self.passed


class DareTree:
    """
    One removal-enabled tree. Instances are referenced by their row position in the forest's training matrix.
    Every random draw is appended to a log: `fit_log` while fitting, `retrain_log` while retraining subtrees.
    """

    def __init__(self, params: ForestParams, ordered: np.ndarray, n_features: int, seed):
        self.params = params
        self.ordered = ordered
        self.n_features = n_features
        self.rng = np.random.default_rng(seed)
        self.fit_log: list = []
        self.retrain_log: list = []
        self.root: Optional[DareNode] = None
        self._log = self.fit_log
        self._replay = None

    def fit(self, X: np.ndarray, y: np.ndarray, positions: np.ndarray) -> "DareTree":
        self._log = self.fit_log
        self.root = self._build(X, y, positions, depth=0)
        return self

    def replay(self, X: np.ndarray, y: np.ndarray, positions: np.ndarray, draws: list) -> "DareTree":
        """
        Rebuild the tree consuming recorded draws instead of the random stream.
        """
        self._replay = iter(draws)
        try:
            self.fit_log = list(draws)
            self.root = self._build(X, y, positions, depth=0)
        finally:
            self._replay = None
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(len(X), dtype=np.float64)
        self._route(self.root, X, np.arange(len(X)), out)
        return out

    def delete(self, X: np.ndarray, y: np.ndarray, positions: np.ndarray) -> DeletionReport:
        report = DeletionReport(n_deleted=len(positions))
        self._log = self.retrain_log
        self.root = self._delete(self.root, X, y, np.sort(positions), report)
        return report

    # private
    def _draw(self, make) -> dict:
        if self._replay is not None:
            return next(self._replay)
        draw = make(self.rng)
        self._log.append(draw)
        return draw

    def _leaf(self, positions: np.ndarray, n_pos: int, depth: int) -> DareNode:
        return DareNode(
            kind=NodeKind.LEAF,
            depth=depth,
            stats=NodeStats(n=len(positions), n_pos=n_pos),
            leaf_ids=np.sort(positions),
        )

    def _count(self, Xn: np.ndarray, yn: np.ndarray, attributes: np.ndarray, values: np.ndarray) -> NodeStats:
        left = goes_left(Xn[:, attributes], values, self.ordered[attributes])
        return NodeStats(
            n=len(yn),
            n_pos=int(yn.sum()),
            attributes=attributes,
            values=values,
            n_left=left.sum(axis=0).astype(np.int64),
            n_left_pos=left[yn == 1].sum(axis=0).astype(np.int64),
        )

    def _random_split(self, rng: np.random.Generator, Xn: np.ndarray, eligible: np.ndarray) -> dict:
        attribute = int(rng.choice(eligible))
        values = np.unique(Xn[:, attribute])
        candidates = values[:-1] if self.ordered[attribute] else values
        return {"kind": NodeKind.RANDOM.value, "attributes": [attribute], "values": [float(rng.choice(candidates))]}

    def _greedy_candidates(self, rng: np.random.Generator, Xn: np.ndarray, eligible: np.ndarray) -> dict:
        size = min(self.n_features, len(eligible))
        sampled = np.sort(rng.choice(eligible, size=size, replace=False))
        attributes, values = [], []
        for attribute in sampled:
            distinct = np.unique(Xn[:, attribute])
            candidates = distinct[:-1] if self.ordered[attribute] else distinct
            taken = np.sort(rng.choice(candidates, size=min(self.params.k_thresholds, len(candidates)), replace=False))
            attributes.extend([int(attribute)] * len(taken))
            values.extend(float(v) for v in taken)
        return {"kind": NodeKind.GREEDY.value, "attributes": attributes, "values": values}

    def _build(self, X: np.ndarray, y: np.ndarray, positions: np.ndarray, depth: int) -> DareNode:
        n = len(positions)
        yn = y[positions]
        n_pos = int(yn.sum())
        if depth >= self.params.max_depth or n_pos == 0 or n_pos == n:
            return self._leaf(positions, n_pos, depth)
        is_random = depth < self.params.d_rand
        if not is_random and n < 2 * self.params.min_leaf:
            return self._leaf(positions, n_pos, depth)
        Xn = X[positions]
        eligible = np.flatnonzero(Xn.min(axis=0) < Xn.max(axis=0))
        if len(eligible) == 0:
            return self._leaf(positions, n_pos, depth)

        if is_random:
            draw = self._draw(lambda rng: self._random_split(rng, Xn, eligible))
        else:
            draw = self._draw(lambda rng: self._greedy_candidates(rng, Xn, eligible))
        attributes = np.asarray(draw["attributes"], dtype=np.int64)
        values = np.asarray(draw["values"], dtype=np.float64)
        stats = self._count(Xn, yn, attributes, values)
        chosen = 0 if is_random else stats.best(self.params.min_leaf)
        if chosen < 0:
            return self._leaf(positions, n_pos, depth)

        node = DareNode(kind=NodeKind.RANDOM if is_random else NodeKind.GREEDY, depth=depth, stats=stats, chosen=chosen)
        mask = goes_left(Xn[:, node.attribute], node.value, self.ordered[node.attribute])
        node.left = self._build(X, y, positions[mask], depth + 1)
        node.right = self._build(X, y, positions[~mask], depth + 1)
        return node

    def _route(self, node: DareNode, X: np.ndarray, rows: np.ndarray, out: np.ndarray) -> None:
        if node.is_leaf:
            out[rows] = node.proba
            return
        mask = goes_left(X[rows, node.attribute], node.value, self.ordered[node.attribute])
        if mask.any():
            self._route(node.left, X, rows[mask], out)
        if not mask.all():
            self._route(node.right, X, rows[~mask], out)

    def _delete(self, node: DareNode, X: np.ndarray, y: np.ndarray, removed: np.ndarray, report: DeletionReport) -> DareNode:
        stats = node.stats
        y_removed = y[removed]
        valid_before = stats.valid(self.params.min_leaf)
        stats.n -= len(removed)
        stats.n_pos -= int(y_removed.sum())

        if node.is_leaf:
            node.leaf_ids = np.setdiff1d(node.leaf_ids, removed, assume_unique=True)
            report.leaves_updated += 1
            return node

        left = goes_left(X[removed][:, stats.attributes], stats.values, self.ordered[stats.attributes])
        stats.n_left -= left.sum(axis=0).astype(np.int64)
        stats.n_left_pos -= left[y_removed == 1].sum(axis=0).astype(np.int64)
        report.nodes_updated += 1

        if node.kind == NodeKind.RANDOM:
            retrain = stats.n_left[0] == 0 or stats.n_left[0] == stats.n
        else:
            retrain = (
                stats.n_pos == 0
                or stats.n_pos == stats.n
                or stats.n < 2 * self.params.min_leaf
                or bool(np.any(valid_before & ~stats.valid(self.params.min_leaf)))
                or stats.best(self.params.min_leaf) != node.chosen
            )
        if retrain:
            survivors = np.setdiff1d(np.concatenate([leaf.leaf_ids for leaf in node.leaves()]), removed, assume_unique=True)
            report.subtrees_retrained += 1
            logger.debug("retraining %s subtree at depth %d over %d instances", node.kind.value, node.depth, len(survivors))
            return self._build(X, y, survivors, node.depth)

        mask = left[:, node.chosen]
        if mask.any():
            node.left = self._delete(node.left, X, y, removed[mask], report)
        if not mask.all():
            node.right = self._delete(node.right, X, y, removed[~mask], report)
        return node

    def impurity_decrease(self, n_attributes: int) -> np.ndarray:
        """
        Sample-weighted Gini decrease accumulated per attribute over the internal nodes.
        """
        out = np.zeros(n_attributes, dtype=np.float64)
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                continue
            s, c = node.stats, node.chosen
            decrease = (
                s.n * gini(s.n, s.n_pos)
                - s.n_left[c] * gini(s.n_left[c], s.n_left_pos[c])
                - s.n_right[c] * gini(s.n_right[c], s.n_right_pos[c])
            )
            out[node.attribute] += float(decrease)
            stack.extend((node.left, node.right))
        return out

    def audit(self, X: np.ndarray, y: np.ndarray, positions: np.ndarray) -> Optional[str]:
        """
        Recount every cached statistic from the live instances; return the first discrepancy found.
        """
        stack = [(self.root, np.sort(positions), "root")]
        while stack:
            node, rows, path = stack.pop()
            s = node.stats
            n_pos = int(y[rows].sum())
            if s.n != len(rows) or s.n_pos != n_pos:
                return f"{path}: cached (n={s.n}, n_pos={s.n_pos}) but recount gives (n={len(rows)}, n_pos={n_pos})"
            if node.is_leaf:
                if not np.array_equal(np.sort(node.leaf_ids), rows):
                    return f"{path}: leaf instance list differs from the routed instances"
                continue
            recount = self._count(X[rows], y[rows], s.attributes, s.values)
            for name in ("n_left", "n_left_pos"):
                cached, fresh = getattr(s, name), getattr(recount, name)
                if not np.array_equal(cached, fresh):
                    bad = int(np.flatnonzero(cached != fresh)[0])
                    return f"{path}: candidate {bad} cached {name}={cached[bad]} but recount gives {fresh[bad]}"
            mask = goes_left(X[rows, node.attribute], node.value, self.ordered[node.attribute])
            stack.append((node.right, rows[~mask], path + ".R"))
            stack.append((node.left, rows[mask], path + ".L"))
        return None

    def split_violations(self) -> list:
        """
        Paths of greedy nodes whose chosen split is not the best valid cached candidate.
        """
        violations = []
        stack = [(self.root, "root")]
        while stack:
            node, path = stack.pop()
            if node.is_leaf:
                continue
            if node.kind == NodeKind.GREEDY and node.stats.best(self.params.min_leaf) != node.chosen:
                violations.append(path)
            stack.extend(((node.left, path + ".L"), (node.right, path + ".R")))
        return violations

    def to_dict(self) -> dict:
        return {
            "rng_state": self.rng.bit_generator.state,
            "fit_log": self.fit_log,
            "retrain_log": self.retrain_log,
            "root": self.root.to_dict(),
        }

    @classmethod
    def from_dict(cls, raw: dict, params: ForestParams, ordered: np.ndarray, n_features: int) -> "DareTree":
        tree = cls(params, ordered, n_features, seed=None)
        tree.rng.bit_generator.state = raw["rng_state"]
        tree.fit_log = raw["fit_log"]
        tree.retrain_log = raw["retrain_log"]
        tree._log = tree.fit_log
        tree.root = DareNode.from_dict(raw["root"])
        return tree


def _fit_tree(params: ForestParams, ordered: np.ndarray, n_features: int, seed, X, y, positions) -> DareTree:
    return DareTree(params, ordered, n_features, seed).fit(X, y, positions)


class DareForest:
    """
    Random forest supporting exact removal of training instances.
    Every tree is trained on the full training set (no bootstrap); diversity comes from random top splits and
    per-node attribute and threshold sampling.

    Parameters
    ----------
    params (ForestParams): The forest hyperparameters.
    """

    def __init__(self, params: ForestParams = ForestParams()):
        self.params = params.validate()
        self.trees_: list = []

    def fit(self, d: Dataset) -> "DareForest":
        """
        Based on the sklearn API, train the forest.

        Parameters
        ----------
        d (Dataset): Training data, ids act as the instance registry.

        Returns
        -------
        The fitted object.
        """
        if d.n == 0:
            raise ForestError("cannot fit on an empty dataset")
        self.schema_names_ = tuple(d.schema.names)
        self.ordered_ = d.ordered_mask
        self.X_ = np.array(d.encoded, dtype=np.float64)
        self.y_ = np.asarray(d.labels, dtype=np.int64)
        self.ids_ = np.asarray(d.ids, dtype=np.int64)
        self.live_ = np.ones(d.n, dtype=bool)
        if self.y_.min() == self.y_.max():
            logger.warning("training labels contain a single class, the forest predicts a constant")

        n_features = self.params.n_features(d.p)
        seeds = np.random.SeedSequence(self.params.seed).spawn(self.params.n_trees)
        positions = np.arange(d.n)
        if self.params.n_jobs == 1:
            self.trees_ = [_fit_tree(self.params, self.ordered_, n_features, s, self.X_, self.y_, positions) for s in seeds]
        else:
            self.trees_ = Parallel(n_jobs=self.params.n_jobs)(
                delayed(_fit_tree)(self.params, self.ordered_, n_features, s, self.X_, self.y_, positions) for s in seeds
            )
        logger.info("fitted %d trees on %d instances", len(self.trees_), d.n)
        return self

    @property
    def live_ids(self) -> np.ndarray:
        return self.ids_[self.live_]

    def _check_schema(self, d: Dataset) -> None:
        if not self.trees_:
            raise ForestError("forest is not fitted")
        if tuple(d.schema.names) != self.schema_names_ or not np.array_equal(d.ordered_mask, self.ordered_):
            raise ForestError("dataset schema does not match the training schema")

    def predict_proba(self, d: Dataset) -> np.ndarray:
        """
        Mean over trees of the positive fraction of the reached leaf.
        """
        self._check_schema(d)
        X = d.encoded
        total = np.zeros(d.n, dtype=np.float64)
        for tree in self.trees_:
            total += tree.predict_proba(X)
        return total / len(self.trees_)

    def predict(self, d: Dataset) -> tuple:
        """
        Returns
        -------
        (labels, probabilities); a probability of exactly 0.5 predicts 1.
        """
        proba = self.predict_proba(d)
        return (proba >= 0.5).astype(np.int8), proba

    def _positions(self, ids: Iterable[int]) -> np.ndarray:
        ids = np.asarray(list(ids) if not isinstance(ids, np.ndarray) else ids, dtype=np.int64)
        if len(np.unique(ids)) != len(ids):
            raise UnknownInstanceError("deletion request contains duplicated ids")
        pos = np.searchsorted(self.ids_, ids)
        pos = np.minimum(pos, len(self.ids_) - 1)
        unknown = ids[self.ids_[pos] != ids]
        if len(unknown):
            raise UnknownInstanceError(f"unknown training id(s): {unknown[:5].tolist()}")
        dead = ids[~self.live_[pos]]
        if len(dead):
            raise UnknownInstanceError(f"already deleted training id(s): {dead[:5].tolist()}")
        return pos

    def delete(self, ids: Iterable[int]) -> DeletionReport:
        """
        Remove training instances from every tree.

        Parameters
        ----------
        ids (Iterable[int]): Live training-row ids.

        Returns
        -------
        Counts of updated nodes and retrained subtrees summed over the trees.
        """
        positions = self._positions(ids)
        if len(positions) == 0:
            return DeletionReport()
        if len(positions) >= int(self.live_.sum()):
            raise ForestError("cannot delete every remaining training instance")
        report = DeletionReport(n_deleted=len(positions))
        for tree in self.trees_:
            report.merge(tree.delete(self.X_, self.y_, positions))
        self.live_[positions] = False
        logger.debug(
            "deleted %d instances: %d nodes updated, %d subtrees retrained",
            len(positions), report.nodes_updated, report.subtrees_retrained,
        )
        return report

    def copy(self) -> "DareForest":
        """
        Independent copy; the immutable training matrix is shared.
        """
        memo = {id(self.X_): self.X_, id(self.y_): self.y_, id(self.ids_): self.ids_, id(self.ordered_): self.ordered_}
        return copy.deepcopy(self, memo)

    def snapshot(self) -> "SnapshotHandle":
        return SnapshotHandle(forest=self.copy())

    def feature_importances(self) -> dict:
        """
        Mean decrease in Gini impurity per attribute, normalized per tree then across attributes.
        """
        p = len(self.schema_names_)
        total = np.zeros(p, dtype=np.float64)
        for tree in self.trees_:
            decrease = tree.impurity_decrease(p)
            if decrease.sum() > 0:
                total += decrease / decrease.sum()
        if total.sum() > 0:
            total /= total.sum()
        else:
            logger.warning("no tree has an internal node, every importance is zero")
        return dict(zip(self.schema_names_, total.tolist()))

    def audit_recount(self, d: Dataset) -> AuditResult:
        """
        Recompute every cached count by scanning the live training data.

        Parameters
        ----------
        d (Dataset): The training data minus every deleted row (ids preserved).

        Returns
        -------
        Pass, or fail with the first discrepancy.
        """
        if not np.array_equal(np.sort(d.ids), self.live_ids):
            return AuditResult(False, "dataset rows differ from the forest's live registry")
        positions = np.searchsorted(self.ids_, d.ids)
        X = self.X_.copy()
        y = self.y_.copy()
        X[positions] = d.encoded
        y[positions] = d.labels
        for i, tree in enumerate(self.trees_):
            message = tree.audit(X, y, positions)
            if message is not None:
                return AuditResult(False, f"tree {i} {message}")
        return AuditResult(True)

    def check_split_optimality(self) -> list:
        return [f"tree {i} {path}" for i, tree in enumerate(self.trees_) for path in tree.split_violations()]

    def replay(self) -> "DareForest":
        """
        Rebuild the fitted forest from the recorded fit-time draws on the full training data.
        """
        forest = DareForest(self.params)
        forest.schema_names_, forest.ordered_ = self.schema_names_, self.ordered_
        forest.X_, forest.y_, forest.ids_ = self.X_, self.y_, self.ids_
        forest.live_ = np.ones(len(self.ids_), dtype=bool)
        n_features = self.params.n_features(len(self.schema_names_))
        positions = np.arange(len(self.ids_))
        forest.trees_ = [
            DareTree(self.params, self.ordered_, n_features, seed=None).replay(self.X_, self.y_, positions, tree.fit_log)
            for tree in self.trees_
        ]
        return forest

    def to_dict(self) -> dict:
        return {
            "format": "dare-forest",
            "version": FORMAT_VERSION,
            "params": asdict(self.params),
            "schema_names": list(self.schema_names_),
            "ordered": self.ordered_.tolist(),
            "X": self.X_.tolist(),
            "y": self.y_.tolist(),
            "ids": self.ids_.tolist(),
            "live": self.live_.tolist(),
            "trees": [tree.to_dict() for tree in self.trees_],
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "DareForest":
        if raw.get("format") != "dare-forest" or raw.get("version") != FORMAT_VERSION:
            raise ForestError(f"unsupported forest blob (format={raw.get('format')}, version={raw.get('version')})")
        forest = cls(ForestParams(**raw["params"]))
        forest.schema_names_ = tuple(raw["schema_names"])
        forest.ordered_ = np.asarray(raw["ordered"], dtype=bool)
        forest.X_ = np.asarray(raw["X"], dtype=np.float64).reshape(len(raw["y"]), len(forest.schema_names_))
        forest.y_ = np.asarray(raw["y"], dtype=np.int64)
        forest.ids_ = np.asarray(raw["ids"], dtype=np.int64)
        forest.live_ = np.asarray(raw["live"], dtype=bool)
        n_features = forest.params.n_features(len(forest.schema_names_))
        forest.trees_ = [DareTree.from_dict(t, forest.params, forest.ordered_, n_features) for t in raw["trees"]]
        return forest

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "DareForest":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class SnapshotHandle:
    """
    Saved forest state. Every `restore` returns an independent forest.
    """

    forest: Optional[DareForest] = None
    path: Optional[Path] = None

    def spill(self, path: Union[str, Path]) -> "SnapshotHandle":
        """
        Move the saved state to disk and release the in-memory copy.
        """
        self.forest.save(path)
        self.forest, self.path = None, Path(path)
        return self

    def restore(self) -> DareForest:
        if self.forest is not None:
            return self.forest.copy()
        return DareForest.load(self.path)


def snapshot(f: DareForest) -> SnapshotHandle:
    return f.snapshot()


def restore(handle: SnapshotHandle) -> DareForest:
    return handle.restore()
