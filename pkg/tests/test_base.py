from dataclasses import fields

import pytest

from src.base import (
    BiasReport,
    CompareStrategy,
    FairnessMetric,
    ForestParams,
    GroupFairnessMetric,
    NodeStatus,
    SearchConfig,
)
from src.errors import ConfigError


def test_report_fields():
    fields_name = [field.name for field in fields(BiasReport)]
    expected_fields = ["metric", "value", "magnitude", "exact_value", "exact_magnitude", "group_rates", "counts", "is_fitted"]
    assert all(var in fields_name for var in expected_fields), "Dataclass is missing expected variables"


def test_abstract_metric():
    with pytest.raises(TypeError):
        GroupFairnessMetric()


@pytest.mark.parametrize(
    "name, expected",
    [
        ("sp", FairnessMetric.STATISTICAL_PARITY),
        ("PP", FairnessMetric.PREDICTIVE_PARITY),
        (" eo ", FairnessMetric.EQUALIZED_ODDS),
        ("equalized_odds", FairnessMetric.EQUALIZED_ODDS),
    ],
)
def test_metric_names(name, expected):
    assert FairnessMetric.from_name(name) == expected, f"{name!r} does not resolve to {expected}"
    assert FairnessMetric.from_name(expected.short_name) == expected, "short name does not round-trip"


def test_unknown_metric():
    with pytest.raises(ConfigError):
        FairnessMetric.from_name("demographic_parity")


def test_enum_values():
    assert CompareStrategy("perInstance") == CompareStrategy.PER_INSTANCE, "strategy value does not match the flag"
    assert NodeStatus("oversupport_carryover") == NodeStatus.OVERSUPPORT_CARRYOVER, "status value changed"


def test_forest_defaults():
    params = ForestParams().validate()
    assert params.n_trees == 100 and params.max_depth == 10 and params.d_rand == 2, "forest defaults changed"
    assert params.n_features(16) == 4, "sqrt(p) attributes expected by default"
    assert ForestParams(feature_sample=0.5).n_features(10) == 5, "fraction of attributes not applied"
    assert ForestParams(feature_sample=0.01).n_features(10) == 1, "at least one attribute must be sampled"


@pytest.mark.parametrize(
    "kwargs",
    [
        {"n_trees": 0},
        {"max_depth": -1},
        {"max_depth": 1, "d_rand": 2},
        {"k_thresholds": 0},
        {"feature_sample": 0.0},
        {"min_leaf": 0},
    ],
)
def test_forest_invalid(kwargs):
    with pytest.raises(ConfigError):
        ForestParams(**kwargs).validate()


def test_search_defaults():
    cfg = SearchConfig().validate()
    assert (cfg.support_min, cfg.support_max) == (0.05, 0.15), "support band defaults changed"
    assert cfg.max_literals == 2 and cfg.k == 5, "search defaults changed"
    assert cfg.compare_original_parity and cfg.compare_parents, "pruning rules must be on by default"


@pytest.mark.parametrize(
    "kwargs",
    [
        {"support_range": (0.2, 0.1)},
        {"support_range": (-0.1, 0.1)},
        {"support_range": (0.1, 1.5)},
        {"max_literals": 0},
        {"k": 0},
    ],
)
def test_search_invalid(kwargs):
    with pytest.raises(ConfigError):
        SearchConfig(**kwargs).validate()
