from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike

from src.errors import ConfigError, UndefinedMetricError


class FairnessMetric(str, Enum):
    """
    Closed enumeration of the supported group fairness notions.
    """

    STATISTICAL_PARITY = "statistical_parity"
    PREDICTIVE_PARITY = "predictive_parity"
    EQUALIZED_ODDS = "equalized_odds"

    @classmethod
    def from_name(cls, name: str) -> "FairnessMetric":
        """
        Accept the full metric name or its short alias (sp, pp, eo).
        """
        aliases = {"sp": cls.STATISTICAL_PARITY, "pp": cls.PREDICTIVE_PARITY, "eo": cls.EQUALIZED_ODDS}
        key = name.strip().lower()
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise ConfigError(f"unknown fairness metric: {name!r}") from None

    @property
    def short_name(self) -> str:
        return {"statistical_parity": "sp", "predictive_parity": "pp", "equalized_odds": "eo"}[self.value]


class CompareStrategy(str, Enum):
    NORMAL = "normal"
    PER_INSTANCE = "perInstance"


class NodeStatus(str, Enum):
    EXPANDED = "expanded"
    PRUNED_SUPPORT = "pruned_support"
    PRUNED_QUALITY = "pruned_quality"
    PRUNED_NOT_RESPONSIBLE = "pruned_not_responsible"
    OVERSUPPORT_CARRYOVER = "oversupport_carryover"


@dataclass(frozen=True)
class ForestParams:
    """
    Hyperparameters of the removal-enabled random forest. Attributes are:
    n_trees (int): number of trees, each trained on the full training set.
    max_depth (int): maximum depth of a tree (0 gives single-leaf trees).
    d_rand (int): number of top levels whose splits are drawn at random.
    k_thresholds (int): candidate thresholds (or category values) cached per sampled attribute at greedy nodes.
    feature_sample (float | None): fraction of attributes sampled per greedy node, None for sqrt(p).
    min_leaf (int): minimum number of instances on each side of a greedy split.
    seed (int): seed of the forest random stream.
    n_jobs (int): joblib workers used to fit trees.
    """

    n_trees: int = 100
    max_depth: int = 10
    d_rand: int = 2
    k_thresholds: int = 5
    feature_sample: Optional[float] = None
    min_leaf: int = 1
    seed: int = 0
    n_jobs: int = 1

    def validate(self) -> "ForestParams":
        if self.n_trees < 1:
            raise ConfigError("n_trees must be >= 1")
        if self.max_depth < 0:
            raise ConfigError("max_depth must be >= 0")
        if not 0 <= self.d_rand <= self.max_depth:
            raise ConfigError("d_rand must lie in [0, max_depth]")
        if self.k_thresholds < 1:
            raise ConfigError("k_thresholds must be >= 1")
        if self.feature_sample is not None and not 0 < self.feature_sample <= 1:
            raise ConfigError("feature_sample must lie in (0, 1]")
        if self.min_leaf < 1:
            raise ConfigError("min_leaf must be >= 1")
        return self

    def n_features(self, n_attributes: int) -> int:
        """
        Number of attributes sampled at a greedy node for a dataset with `n_attributes` columns.
        """
        if self.feature_sample is None:
            return max(1, int(math.sqrt(n_attributes)))
        return max(1, int(self.feature_sample * n_attributes))


@dataclass(frozen=True)
class SearchConfig:
    """
    Hyperparameters of the lattice search. Attributes are:
    max_literals (int): maximum number of literals of an explanation.
    support_range (tuple[float, float]): inclusive support band of reported subsets.
    compare_strategy (CompareStrategy): normal compares bias reductions, perInstance divides them by subset size.
    compare_original_parity (bool): only expand subsets whose removal reduces bias.
    k (int): number of explanations returned.
    metric (FairnessMetric): fairness metric being debugged.
    compare_parents (bool): prune children whose quality is below a parent's.
    n_jobs (int): joblib workers evaluating candidates of one level.
    trace_path (Path | None): JSON-lines file receiving every visited node.
    """

    max_literals: int = 2
    support_range: tuple = (0.05, 0.15)
    compare_strategy: CompareStrategy = CompareStrategy.NORMAL
    compare_original_parity: bool = True
    k: int = 5
    metric: FairnessMetric = FairnessMetric.STATISTICAL_PARITY
    compare_parents: bool = True
    n_jobs: int = 1
    trace_path: Optional[Path] = None

    @property
    def support_min(self) -> float:
        return self.support_range[0]

    @property
    def support_max(self) -> float:
        return self.support_range[1]

    def validate(self) -> "SearchConfig":
        low, high = self.support_range
        if not 0 <= low <= high <= 1:
            raise ConfigError("support range must satisfy 0 <= min <= max <= 1")
        if self.max_literals < 1:
            raise ConfigError("max_literals must be >= 1")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        return self


@dataclass
class BiasReport:
    """
    Dataclass used to store a fairness measurement. Attributes are:
    metric (FairnessMetric)
    value (float): signed protected-minus-privileged difference.
    magnitude (float): bias of the model.
    exact_value (Fraction)
    exact_magnitude (Fraction)
    group_rates (dict): per-group probabilities entering the formula.
    counts (dict): integer numerators and denominators behind each rate.
    is_fitted (bool)
    """

    metric: FairnessMetric = None
    value: float = None
    magnitude: float = None
    exact_value: Fraction = None
    exact_magnitude: Fraction = None
    group_rates: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)
    is_fitted: bool = False

    def to_dict(self) -> dict:
        return {
            "metric": self.metric.value,
            "value": self.value,
            "magnitude": self.magnitude,
            "exact_value": str(self.exact_value),
            "exact_magnitude": str(self.exact_magnitude),
            "group_rates": self.group_rates,
            "counts": self.counts,
        }


class GroupFairnessMetric(ABC):
    """
    Abstract class that define the interface for the group fairness metrics (statistical parity, predictive parity, ...).
    Group 0 is the protected group, group 1 the privileged one.
    """

    metric: FairnessMetric = None

    def __init__(self):
        self.report = BiasReport(metric=self.metric)

    def fit(self, predictions: ArrayLike, labels: ArrayLike, sensitive: ArrayLike) -> "GroupFairnessMetric":
        """
        Based on the sklearn API, measure the metric.

        Parameters
        ----------
        predictions (ArrayLike): Predicted labels in {0, 1}.
        labels (ArrayLike): True labels in {0, 1}.
        sensitive (ArrayLike): Group membership, 1 for the privileged group.

        Returns
        -------
        The fitted object.
        """
        predictions = np.asarray(predictions, dtype=np.int64)
        labels = np.asarray(labels, dtype=np.int64)
        sensitive = np.asarray(sensitive, dtype=np.int64)
        if not len(predictions) == len(labels) == len(sensitive):
            raise ValueError("predictions, labels and sensitive must have the same length")
        for group, name in ((0, "protected"), (1, "privileged")):
            if not np.any(sensitive == group):
                raise UndefinedMetricError(f"{name} group members")
        self._compute_metric(predictions, labels, sensitive)
        self.report.is_fitted = True
        return self

    @abstractmethod
    def _compute_metric(self, predictions: np.ndarray, labels: np.ndarray, sensitive: np.ndarray) -> None:
        """
        The method where the metric will be computed in.

        Parameters
        ----------
        predictions (np.ndarray): Predicted labels.
        labels (np.ndarray): True labels.
        sensitive (np.ndarray): Group membership.
        """
        pass

    def _store(self, value: Fraction, magnitude: Fraction, group_rates: dict, counts: dict) -> None:
        self.report.exact_value = value
        self.report.exact_magnitude = magnitude
        self.report.value = float(value)
        self.report.magnitude = float(magnitude)
        self.report.group_rates = group_rates
        self.report.counts = counts

    @staticmethod
    def _rate(numerator: int, denominator: int, name: str) -> Fraction:
        if denominator == 0:
            raise UndefinedMetricError(name)
        return Fraction(int(numerator), int(denominator))
