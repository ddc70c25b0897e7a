"""
Resolved configuration of a command-line run.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

from src.base import ForestParams, SearchConfig
from src.errors import ConfigError
from src.report import FORMATS

DEFAULT_TEST_SPLIT = 0.2
RESOLVED_CONFIG = "resolved_config.json"


def _jsonable(value):
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


@dataclass
class RunConfig:
    """
    Dataclass gathering everything a run depends on. Attributes are:
    train_path (Path): training CSV (or the full dataset when `test_split` is used).
    schema_path (Path)
    out_dir (Path)
    test_path (Path | None)
    test_split (float | None): held-out fraction, 0.2 when no test file is given.
    bins (int): quantile bins per continuous attribute.
    forest (ForestParams)
    search (SearchConfig)
    verify (bool): verify the explanations by retraining.
    trace (bool): write the search trace.
    fmt (str): table format.
    retrain_diagnostics (bool): importance deviations by retraining instead of unlearning.
    plot (bool): write figures.
    """

    train_path: Path
    schema_path: Path
    out_dir: Path = Path("out")
    test_path: Optional[Path] = None
    test_split: Optional[float] = None
    bins: int = 4
    forest: ForestParams = field(default_factory=ForestParams)
    search: SearchConfig = field(default_factory=SearchConfig)
    verify: bool = False
    trace: bool = False
    fmt: str = "csv"
    retrain_diagnostics: bool = False
    plot: bool = False

    def validate(self) -> "RunConfig":
        if self.test_path is not None and self.test_split is not None:
            raise ConfigError("give either a test file or a test split, not both")
        if self.test_path is None and self.test_split is None:
            self.test_split = DEFAULT_TEST_SPLIT
        if self.test_split is not None and not 0 < self.test_split < 1:
            raise ConfigError("test split must lie in (0, 1)")
        if self.bins < 2:
            raise ConfigError("bins must be >= 2")
        if self.fmt not in FORMATS:
            raise ConfigError(f"unknown table format {self.fmt!r}")
        self.forest.validate()
        self.search.validate()
        return self

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    def write_resolved(self) -> Path:
        """
        Write the configuration next to the run's artifacts.
        """
        path = Path(self.out_dir) / RESOLVED_CONFIG
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path
