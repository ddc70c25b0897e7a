from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike

from src.base import BiasReport, FairnessMetric, ForestParams, GroupFairnessMetric
from src.dare_forest import DareForest
from src.dataset import Dataset, Predicate, SubsetSelection
from src.errors import DatasetError, UnbiasedModelError, UndefinedMetricError

logger = logging.getLogger(__name__)

UNLEARNING = "unlearning"
RETRAIN = "retrain"


class StatisticalParity(GroupFairnessMetric):
    """
    Difference of positive prediction rates, P(Ŷ=1|S=0) - P(Ŷ=1|S=1).
    """

    metric = FairnessMetric.STATISTICAL_PARITY

    def _compute_metric(self, predictions: np.ndarray, labels: np.ndarray, sensitive: np.ndarray) -> None:
        rates, counts = {}, {}
        for group in (0, 1):
            in_group = sensitive == group
            num, den = int(np.sum(predictions[in_group] == 1)), int(in_group.sum())
            rates[group] = self._rate(num, den, f"members (S={group})")
            counts[f"predicted_positive_s{group}"], counts[f"members_s{group}"] = num, den
        value = rates[0] - rates[1]
        self._store(value, abs(value), {f"positive_rate_s{g}": float(r) for g, r in rates.items()}, counts)


class PredictiveParity(GroupFairnessMetric):
    """
    Difference of precisions, P(Y=1|S=0,Ŷ=1) - P(Y=1|S=1,Ŷ=1).
    """

    metric = FairnessMetric.PREDICTIVE_PARITY

    def _compute_metric(self, predictions: np.ndarray, labels: np.ndarray, sensitive: np.ndarray) -> None:
        rates, counts = {}, {}
        for group in (0, 1):
            predicted = (sensitive == group) & (predictions == 1)
            num, den = int(np.sum(labels[predicted] == 1)), int(predicted.sum())
            rates[group] = self._rate(num, den, f"predicted positives (S={group})")
            counts[f"true_positive_s{group}"], counts[f"predicted_positive_s{group}"] = num, den
        value = rates[0] - rates[1]
        self._store(value, abs(value), {f"precision_s{g}": float(r) for g, r in rates.items()}, counts)


class EqualizedOdds(GroupFairnessMetric):
    """
    Mean of the true positive rate and false positive rate differences.
    The magnitude is the mean of the absolute differences, so opposite gaps do not cancel.
    """

    metric = FairnessMetric.EQUALIZED_ODDS

    def _compute_metric(self, predictions: np.ndarray, labels: np.ndarray, sensitive: np.ndarray) -> None:
        tpr, fpr, counts = {}, {}, {}
        for group in (0, 1):
            in_group = sensitive == group
            actual_pos = in_group & (labels == 1)
            actual_neg = in_group & (labels == 0)
            tp, fp = int(np.sum(predictions[actual_pos] == 1)), int(np.sum(predictions[actual_neg] == 1))
            tpr[group] = self._rate(tp, int(actual_pos.sum()), f"actual positives (S={group})")
            fpr[group] = self._rate(fp, int(actual_neg.sum()), f"actual negatives (S={group})")
            counts[f"true_positive_s{group}"], counts[f"actual_positive_s{group}"] = tp, int(actual_pos.sum())
            counts[f"false_positive_s{group}"], counts[f"actual_negative_s{group}"] = fp, int(actual_neg.sum())
        d_tpr, d_fpr = tpr[0] - tpr[1], fpr[0] - fpr[1]
        value = (d_tpr + d_fpr) / 2
        magnitude = (abs(d_tpr) + abs(d_fpr)) / 2
        rates = {"tpr_s0": float(tpr[0]), "tpr_s1": float(tpr[1]), "fpr_s0": float(fpr[0]), "fpr_s1": float(fpr[1])}
        self._store(value, magnitude, rates, counts)


METRICS = {
    FairnessMetric.STATISTICAL_PARITY: StatisticalParity,
    FairnessMetric.PREDICTIVE_PARITY: PredictiveParity,
    FairnessMetric.EQUALIZED_ODDS: EqualizedOdds,
}


def compute_bias(metric: FairnessMetric, predictions: ArrayLike, labels: ArrayLike, sensitive: ArrayLike) -> BiasReport:
    """
    Signed group fairness violation of a set of predictions.

    Parameters
    ----------
    metric (FairnessMetric): The fairness notion.
    predictions (ArrayLike): Predicted labels.
    labels (ArrayLike): True labels.
    sensitive (ArrayLike): 1 for the privileged group, 0 for the protected one.

    Returns
    -------
    The bias report; raises UndefinedMetricError when a conditioning event is empty.
    """
    return METRICS[FairnessMetric(metric)]().fit(predictions, labels, sensitive).report


def accuracy(predictions: ArrayLike, labels: ArrayLike) -> float:
    predictions, labels = np.asarray(predictions), np.asarray(labels)
    if len(predictions) != len(labels):
        raise ValueError("predictions and labels must have the same length")
    return float(np.mean(predictions == labels)) if len(labels) else 0.0


def accuracy_reduction(before: float, after: float) -> float:
    """
    Accuracy drop in percentage points; negative when removing the subset improved accuracy.
    """
    return 100.0 * (before - after)


@dataclass
class ContributionResult:
    """
    Effect of removing a subset on the model bias. Attributes are:
    predicate (Predicate)
    support (float)
    size (int)
    bias_before (float) / bias_after (float): bias magnitudes.
    phi (float): relative change of the bias, (after - before) / before.
    bias_reduction (float): -100 * phi, in percent.
    accuracy_before (float) / accuracy_after (float)
    accuracy_reduction (float): in percentage points.
    method (str): "unlearning" or "retrain".
    defined (bool): False when the metric is undefined after removal.
    undefined_reason (str | None)
    report_after (BiasReport | None)
    """

    predicate: Predicate
    support: float
    size: int
    bias_before: float
    bias_after: Optional[float] = None
    phi: Optional[float] = None
    bias_reduction: Optional[float] = None
    accuracy_before: Optional[float] = None
    accuracy_after: Optional[float] = None
    accuracy_reduction: Optional[float] = None
    method: str = UNLEARNING
    defined: bool = True
    undefined_reason: Optional[str] = None
    exact_phi: Optional[Fraction] = None
    report_after: Optional[BiasReport] = None

    @property
    def responsible(self) -> bool:
        return self.defined and self.phi < 0

    def to_dict(self) -> dict:
        return {
            "predicate": self.predicate.to_dict(),
            "pattern": str(self.predicate),
            "support": self.support,
            "size": self.size,
            "bias_before": self.bias_before,
            "bias_after": self.bias_after,
            "phi": self.phi,
            "exact_phi": None if self.exact_phi is None else str(self.exact_phi),
            "bias_reduction": self.bias_reduction,
            "accuracy_before": self.accuracy_before,
            "accuracy_after": self.accuracy_after,
            "accuracy_reduction": self.accuracy_reduction,
            "method": self.method,
            "defined": self.defined,
            "undefined_reason": self.undefined_reason,
            "report_after": None if self.report_after is None else self.report_after.to_dict(),
        }


def _contribution(
    sel: SubsetSelection,
    before: BiasReport,
    accuracy_before: float,
    predictions: np.ndarray,
    test: Dataset,
    metric: FairnessMetric,
    method: str,
) -> ContributionResult:
    result = ContributionResult(
        predicate=sel.predicate,
        support=sel.support,
        size=sel.size,
        bias_before=before.magnitude,
        accuracy_before=accuracy_before,
        method=method,
    )
    result.accuracy_after = accuracy(predictions, test.labels)
    result.accuracy_reduction = accuracy_reduction(accuracy_before, result.accuracy_after)
    try:
        after = compute_bias(metric, predictions, test.labels, test.sensitive)
    except UndefinedMetricError as err:
        logger.warning("metric undefined after removing %s: %s", sel.predicate, err)
        result.defined, result.undefined_reason = False, str(err)
        return result
    result.report_after = after
    result.bias_after = after.magnitude
    result.exact_phi = (after.exact_magnitude - before.exact_magnitude) / before.exact_magnitude
    result.phi = float(result.exact_phi)
    result.bias_reduction = float(-100 * result.exact_phi)
    return result


def model_bias(forest: DareForest, test: Dataset, metric: FairnessMetric) -> tuple:
    """
    Returns
    -------
    (BiasReport, accuracy) of the forest on the test data.
    """
    predictions, _ = forest.predict(test)
    return compute_bias(metric, predictions, test.labels, test.sensitive), accuracy(predictions, test.labels)


def subset_contribution(
    f: DareForest,
    sel: SubsetSelection,
    metric: FairnessMetric,
    test: Dataset,
    bias_before: Optional[BiasReport] = None,
    accuracy_before: Optional[float] = None,
) -> ContributionResult:
    """
    Subset contribution estimated by unlearning the subset from a private copy of the forest.

    Parameters
    ----------
    f (DareForest): The trained model, left unchanged.
    sel (SubsetSelection): The training rows to remove.
    metric (FairnessMetric): The fairness notion.
    test (Dataset): Data on which the bias is measured.
    bias_before (BiasReport | None): Bias of `f` on `test`, recomputed when not given.
    accuracy_before (float | None): Accuracy of `f` on `test`, recomputed when not given.

    Returns
    -------
    The contribution; `defined` is False when the metric is undefined after removal.
    """
    if sel.size == 0:
        raise DatasetError("cannot measure the contribution of an empty subset")
    if sel.size == sel.n_total:
        raise DatasetError("cannot unlearn the whole training set")
    if bias_before is None or accuracy_before is None:
        bias_before, accuracy_before = model_bias(f, test, metric)
    if bias_before.exact_magnitude == 0:
        raise UnbiasedModelError("original model unbiased: subset contribution is undefined")
    working = f.copy()
    working.delete(sel.member_ids)
    predictions, _ = working.predict(test)
    return _contribution(sel, bias_before, accuracy_before, predictions, test, metric, UNLEARNING)


def retrain_contribution(
    train: Dataset,
    sel: SubsetSelection,
    metric: FairnessMetric,
    test: Dataset,
    params: ForestParams,
    bias_before: Optional[BiasReport] = None,
    accuracy_before: Optional[float] = None,
    seed: Optional[int] = None,
) -> ContributionResult:
    """
    Subset contribution measured by training a fresh forest on the training data without the subset.

    Parameters
    ----------
    train (Dataset): Full training data.
    sel (SubsetSelection): The training rows to remove.
    metric (FairnessMetric): The fairness notion.
    test (Dataset): Data on which the bias is measured.
    params (ForestParams): Hyperparameters of the retrained forest.
    bias_before (BiasReport | None): Bias of the original model; by default the bias of a forest fitted on `train`
        with the same seed as the retrained one.
    accuracy_before (float | None): Accuracy of the original model.
    seed (int | None): Seed of the retrained forest, `params.seed + 1` by default.

    Returns
    -------
    The contribution with method "retrain". Removing a subset that takes a label or a sensitive group with it raises
    DatasetError.
    """
    fresh = replace(params, seed=params.seed + 1 if seed is None else seed)
    if bias_before is None or accuracy_before is None:
        bias_before, accuracy_before = model_bias(DareForest(fresh).fit(train), test, metric)
    if bias_before.exact_magnitude == 0:
        raise UnbiasedModelError("original model unbiased: subset contribution is undefined")
    remaining = train.drop(sel.member_ids) if sel.size else train
    if remaining.n == 0:
        raise DatasetError("removing the subset leaves no training data")
    if len(np.unique(remaining.labels)) < 2 or len(np.unique(remaining.sensitive)) < 2:
        raise DatasetError(f"training data without {sel.predicate} lacks a label or a sensitive group")
    predictions, _ = DareForest(fresh).fit(remaining).predict(test)
    return _contribution(sel, bias_before, accuracy_before, predictions, test, metric, RETRAIN)
