import matplotlib

matplotlib.use("Agg")

import numpy as np
import pandas as pd

from src.harness import PAIR_COLUMNS
from src.plotter import plot_fidelity, plot_runtime


def test_plot_fidelity(tmp_path):
    pairs = pd.DataFrame(
        {
            "kind": ["random", "random", "coherent"],
            "unlearned": [0.1, 0.2, np.nan],
            "retrained": [0.11, 0.19, 0.3],
            "defined": [True, True, False],
        }
    )
    path = plot_fidelity(pairs, tmp_path / "fidelity.png", "statistical_parity")
    assert path.exists() and path.stat().st_size > 0, "figure not written"
    empty = plot_fidelity(pd.DataFrame(columns=PAIR_COLUMNS), tmp_path / "empty.png")
    assert empty.exists(), "an empty report still gets a figure"


def test_plot_runtime(tmp_path):
    bench = pd.DataFrame(
        {
            "n": [2000, 1000],
            "m": [5, 5],
            "fit_seconds": [2.0, 1.0],
            "delete_seconds": [0.2, 0.1],
            "retrain_seconds": [1.9, 0.9],
        }
    )
    path = plot_runtime(bench, tmp_path / "runtime.png")
    assert path.exists() and path.stat().st_size > 0, "figure not written"
