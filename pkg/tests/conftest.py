import numpy as np
import pandas as pd
import pytest

from src.base import ForestParams
from src.dare_forest import DareForest
from src.dataset import AttributeSpec, Schema, dataset_from_frame, split_dataset
from src.harness import make_planted_bias, make_synthetic


def toy_dataset(columns: dict, labels, privileged: str = "m", sensitive: str = "s"):
    """
    Small categorical dataset whose domains are inferred from the values, labels given as 0/1.
    """
    names = [name for name in columns if name != sensitive] + [sensitive]
    schema = Schema(
        attributes=tuple(AttributeSpec(name=name) for name in names),
        sensitive_attribute=sensitive,
        privileged_value=privileged,
        positive_label="yes",
        negative_label="no",
    )
    frame = pd.DataFrame({name: columns[name] for name in names})
    frame["label"] = np.where(np.asarray(labels) == 1, "yes", "no")
    return dataset_from_frame(frame, schema)


@pytest.fixture
def separable():
    """
    8 rows; x separates the labels perfectly and s carries no signal.
    """
    return toy_dataset(
        {"x": ["a"] * 4 + ["b"] * 4, "s": ["f", "m"] * 4},
        [1, 1, 1, 1, 0, 0, 0, 0],
    )


@pytest.fixture
def small_params():
    return ForestParams(n_trees=5, max_depth=6, d_rand=1, k_thresholds=3, seed=0)


@pytest.fixture
def planted():
    return make_planted_bias(n=600, seed=0)


@pytest.fixture
def planted_split(planted):
    data, _ = planted
    return split_dataset(data, 0.2, seed=0)


@pytest.fixture
def synthetic():
    return make_synthetic(300, 4, seed=1)


@pytest.fixture
def fitted(planted_split, small_params):
    train, test = planted_split
    return train, test, DareForest(small_params).fit(train)


@pytest.fixture
def precision_gap(small_params):
    """
    x='a' carries every positive training label; on the test rows the protected group is less precise.
    Unlearning x='a' leaves no predicted positive.
    """
    train = toy_dataset({"x": ["a"] * 20 + ["b"] * 20, "s": ["f", "m"] * 20}, [1] * 20 + [0] * 20)
    test = toy_dataset(
        {"x": ["a", "a", "a", "a", "b", "b"], "s": ["f", "f", "m", "m", "m", "m"]},
        [1, 0, 1, 1, 0, 0],
    )
    return train, test, DareForest(small_params).fit(train)
