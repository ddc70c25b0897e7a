from fractions import Fraction

import numpy as np
import pytest

from src.base import FairnessMetric
from src.dataset import Predicate, evaluate_predicate, selection_from_ids
from src.errors import DatasetError, UnbiasedModelError, UndefinedMetricError
from src.fairness import (
    RETRAIN,
    UNLEARNING,
    EqualizedOdds,
    PredictiveParity,
    StatisticalParity,
    accuracy,
    accuracy_reduction,
    compute_bias,
    model_bias,
    retrain_contribution,
    subset_contribution,
)
from src.dare_forest import DareForest
from src.harness import make_fair

SP = FairnessMetric.STATISTICAL_PARITY
PP = FairnessMetric.PREDICTIVE_PARITY
EO = FairnessMetric.EQUALIZED_ODDS

# (metric, predictions, labels, sensitive, value, magnitude); sensitive 0 is the protected group
FIXTURES = [
    (SP, [1, 1, 0, 0, 1, 0, 0, 0], [1, 0, 1, 0, 1, 0, 1, 0], [0, 0, 0, 0, 1, 1, 1, 1], Fraction(1, 4), Fraction(1, 4)),
    (SP, [0, 0, 1, 1], [0, 1, 0, 1], [0, 0, 1, 1], Fraction(-1), Fraction(1)),
    (SP, [1, 0, 1, 0], [1, 1, 0, 0], [0, 0, 1, 1], Fraction(0), Fraction(0)),
    (SP, [1, 0, 0, 1, 1, 1], [0, 0, 0, 0, 0, 0], [0, 0, 0, 1, 1, 1], Fraction(-2, 3), Fraction(2, 3)),
    (SP, [1] * 3 + [0] * 4 + [1] * 6 + [0] * 1, [0] * 14, [0] * 7 + [1] * 7, Fraction(-3, 7), Fraction(3, 7)),
    (PP, [1, 1, 1, 0, 1, 0], [1, 1, 0, 0, 1, 1], [0, 0, 0, 0, 1, 1], Fraction(-1, 3), Fraction(1, 3)),
    (PP, [1, 1, 1, 1], [1, 0, 0, 0], [0, 0, 1, 1], Fraction(1, 2), Fraction(1, 2)),
    (PP, [1, 1, 1, 1, 1], [1, 0, 1, 1, 1], [0, 0, 1, 1, 1], Fraction(-1, 2), Fraction(1, 2)),
    (EO, [1, 0, 0, 0, 1, 1, 1, 0], [1, 1, 0, 0, 1, 1, 0, 0], [0, 0, 0, 0, 1, 1, 1, 1], Fraction(-1, 2), Fraction(1, 2)),
    (EO, [1, 0, 0, 1], [1, 0, 1, 0], [0, 0, 1, 1], Fraction(0), Fraction(1)),
    (EO, [1, 1, 0, 0, 0, 0], [1, 0, 1, 0, 1, 0], [0, 0, 1, 1, 1, 1], Fraction(1), Fraction(1)),
    (EO, [1, 0, 1, 0], [1, 0, 1, 0], [0, 0, 1, 1], Fraction(0), Fraction(0)),
]


@pytest.mark.parametrize("metric, predictions, labels, sensitive, value, magnitude", FIXTURES)
def test_hand_fixtures(metric, predictions, labels, sensitive, value, magnitude):
    report = compute_bias(metric, predictions, labels, sensitive)
    assert report.exact_value == value, f"{metric.value}: {report.exact_value} != {value}"
    assert report.exact_magnitude == magnitude, f"{metric.value}: magnitude {report.exact_magnitude} != {magnitude}"
    assert np.isclose(report.value, float(value)), "float value does not match the exact one"
    assert report.is_fitted, "report should be fitted"


@pytest.mark.parametrize("metric, predictions, labels, sensitive, value, magnitude", FIXTURES)
def test_group_swap(metric, predictions, labels, sensitive, value, magnitude):
    swapped = compute_bias(metric, predictions, labels, 1 - np.asarray(sensitive))
    assert swapped.exact_value == -value, "swapping the groups should negate the value"
    assert swapped.exact_magnitude == magnitude, "swapping the groups should keep the magnitude"


def test_rates_example():
    predictions = [1] * 3 + [0] * 7 + [1] * 4 + [0] * 6
    report = StatisticalParity().fit(predictions, [0] * 20, [0] * 10 + [1] * 10).report
    assert report.exact_value == Fraction(-1, 10), "0.3 - 0.4 should give -0.1"
    assert np.isclose(report.magnitude, 0.1), "magnitude should be 0.1"
    assert report.group_rates == {"positive_rate_s0": 0.3, "positive_rate_s1": 0.4}, "group rates not reported"
    assert report.counts["members_s0"] == 10 and report.counts["predicted_positive_s1"] == 4, "counts not reported"


def test_equal_tables_are_fair():
    predictions, labels = [1, 0, 1, 0], [1, 1, 0, 0]
    for metric in (SP, PP, EO):
        report = compute_bias(metric, predictions * 2, labels * 2, [0] * 4 + [1] * 4)
        assert report.exact_value == 0, f"{metric.value} should be 0 on identical group tables"


def test_undefined_metrics():
    with pytest.raises(UndefinedMetricError) as err:
        PredictiveParity().fit([0, 0, 1, 1], [1, 0, 1, 0], [0, 0, 1, 1])
    assert err.value.denominator == "predicted positives (S=0)", "vanished denominator not named"
    with pytest.raises(UndefinedMetricError) as err:
        EqualizedOdds().fit([1, 0, 1, 1], [1, 0, 1, 1], [0, 0, 1, 1])
    assert err.value.denominator == "actual negatives (S=1)", "vanished denominator not named"
    with pytest.raises(UndefinedMetricError, match="protected group members"):
        compute_bias(SP, [1, 0], [1, 0], [1, 1])
    with pytest.raises(ValueError):
        compute_bias(SP, [1, 0, 1], [1, 0], [0, 1])


def test_accuracy():
    assert accuracy([1, 0, 1], [1, 0, 1]) == 1.0, "all correct should give 1.0"
    assert np.isclose(accuracy_reduction(0.91, 0.88), 3.0), "0.91 -> 0.88 is a 3 point drop"
    assert accuracy_reduction(0.88, 0.90) < 0, "accuracy gain is a negative reduction"


# Contributions
def test_subset_contribution(fitted, planted):
    train, test, forest = fitted
    _, predicate = planted
    before = forest.predict_proba(test)
    sel = evaluate_predicate(predicate, train)
    result = subset_contribution(forest, sel, SP, test)
    assert result.method == UNLEARNING and result.defined, "unlearning contribution expected"
    assert np.isclose(result.phi, (result.bias_after - result.bias_before) / result.bias_before), "phi formula"
    assert np.isclose(result.bias_reduction, -100 * result.phi), "bias reduction is -100 phi"
    assert result.exact_phi == (result.report_after.exact_magnitude - model_bias(forest, test, SP)[0].exact_magnitude) / (
        model_bias(forest, test, SP)[0].exact_magnitude
    ), "exact phi should use rational magnitudes"
    assert np.array_equal(forest.predict_proba(test), before), "the forest must be left unchanged"
    assert forest.live_.all(), "no row may be deleted from the forest"
    assert result.responsible == (result.phi < 0), "responsible means the bias decreased"


def test_subset_contribution_errors(fitted):
    train, test, forest = fitted
    with pytest.raises(DatasetError):
        subset_contribution(forest, selection_from_ids(train, []), SP, test)
    with pytest.raises(DatasetError, match="whole training set"):
        subset_contribution(forest, selection_from_ids(train, train.ids), SP, test)
    fair = make_fair(n_pairs=60)
    fair_forest = DareForest(forest.params).fit(fair)
    with pytest.raises(UnbiasedModelError):
        subset_contribution(fair_forest, selection_from_ids(fair, [0, 1]), SP, fair)


def test_retrain_contribution(fitted, small_params):
    train, test, _ = fitted
    empty = retrain_contribution(train, selection_from_ids(train, []), SP, test, small_params)
    assert empty.method == RETRAIN, "retrain method expected"
    assert empty.phi == 0, "removing nothing with the baseline seed changes nothing"
    sel = evaluate_predicate(Predicate.equalities({"a0": "v0"}), train)
    result = retrain_contribution(train, sel, SP, test, small_params)
    assert result.size == sel.size and result.defined, "retrained contribution should be defined"
    assert np.isclose(result.bias_reduction, -100 * result.phi), "bias reduction is -100 phi"


def test_contribution_undefined_after_unlearning(precision_gap, caplog):
    train, test, forest = precision_gap
    before, _ = model_bias(forest, test, PP)
    assert np.isclose(before.value, -0.5), f"precision gap of the original forest is {before.value}"
    sel = evaluate_predicate(Predicate.equalities({"x": "a"}), train)
    result = subset_contribution(forest, sel, PP, test)
    assert result.defined is False, "no protected row is predicted positive after unlearning x='a'"
    assert "predicted positives (S=0)" in result.undefined_reason, f"unexpected reason {result.undefined_reason}"
    assert result.phi is None and result.bias_reduction is None, "an undefined contribution has no phi"
    assert "metric undefined" in caplog.text, "undefined metric should be logged"
    assert forest.predict(test)[0].tolist() == [1, 1, 1, 1, 0, 0], "the forest must be left unchanged"


def test_retrain_contribution_needs_both_classes_and_groups(fitted, precision_gap, small_params):
    train, test, _ = fitted
    female = evaluate_predicate(Predicate.equalities({"sex": "female"}), train)
    with pytest.raises(DatasetError, match="sensitive group"):
        retrain_contribution(train, female, SP, test, small_params)
    gap_train, gap_test, _ = precision_gap
    positives = evaluate_predicate(Predicate.equalities({"x": "a"}), gap_train)
    with pytest.raises(DatasetError, match="lacks a label"):
        retrain_contribution(gap_train, positives, PP, gap_test, small_params)
