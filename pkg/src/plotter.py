from pathlib import Path
from typing import Union

import numpy as np
import matplotlib.pyplot as plt
import mplcyberpunk as mpl
import pandas as pd
import seaborn as sns

plt.style.use("cyberpunk")
COLORS = ["dodgerblue", "lime", "orangered"]


# tools
def __identity_line(ax, low: float, high: float) -> None:
    ax.plot([low, high], [low, high], color=COLORS[1], lw=1, linestyle="--", label="y = x")


def __save(fig, path: Union[str, Path]) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


# Unlearning fidelity
def plot_fidelity(pairs: pd.DataFrame, path: Union[str, Path], metric_name: str = "fairness") -> Path:
    """
    Scatter of the fairness after unlearning against the fairness after retraining, one point per subset.
    """
    fig, ax = plt.subplots(figsize=(7, 7))
    defined = pairs[pairs["defined"]] if len(pairs) else pairs
    for color, (kind, group) in zip((COLORS[0], COLORS[2]), defined.groupby("kind", sort=True)):
        sns.scatterplot(x=group["unlearned"], y=group["retrained"], ax=ax, color=color, label=f"{kind} subsets", s=18)
    if len(defined):
        values = np.concatenate([defined["unlearned"].to_numpy(float), defined["retrained"].to_numpy(float)])
        __identity_line(ax, float(values.min()), float(values.max()))
    ax.set_title(f"Unlearning fidelity ({metric_name})", fontweight="bold")
    ax.set_xlabel("Fairness after unlearning", fontweight="bold")
    ax.set_ylabel("Fairness after retraining", fontweight="bold")
    ax.legend(loc="upper left")
    ax.grid(True)
    return __save(fig, path)


# Runtime
def plot_runtime(bench: pd.DataFrame, path: Union[str, Path]) -> Path:
    """
    Fit, delete and retrain times against the number of rows times attributes.
    """
    fig, ax = plt.subplots(figsize=(9, 6))
    data = bench.assign(cells=bench["n"] * bench["m"]).sort_values("cells")
    for color, column in zip(COLORS, ("fit_seconds", "delete_seconds", "retrain_seconds")):
        ax.plot(data["cells"], data[column], marker="o", color=color, label=column.replace("_seconds", ""))
    ax.set_title("Runtime against data size", fontweight="bold")
    ax.set_xlabel("Rows x attributes", fontweight="bold")
    ax.set_ylabel("Seconds", fontweight="bold")
    ax.legend(loc="upper left")
    ax.grid(True)
    mpl.add_glow_effects(ax=ax)
    return __save(fig, path)
