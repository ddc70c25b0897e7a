"""
Explanation tables and the diagnostics attached to every explanation: positive-label proportions per group inside
the subset and the shift of the forest's feature importances once the subset is removed.
"""
from __future__ import annotations

import io
import json
import logging
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from src.base import ForestParams
from src.dare_forest import DareForest
from src.dataset import Dataset, SubsetSelection
from src.errors import ConfigError

logger = logging.getLogger(__name__)

FORMATS = ("csv", "json", "markdown")
EXTENSIONS = {"csv": "csv", "json": "json", "markdown": "md"}
COLUMNS = ["Index", "Pattern", "Support %", "Parity Reduction %", "Accuracy Reduction %"]
DIAGNOSTIC_COLUMNS = ["Protected Positive %", "Privileged Positive %", "Importance Shifts"]

NEW = "new"
VANISHED = "vanished"
UNDEFINED = "undefined"

_UNESCAPED_PIPE = re.compile(r"(?<!\\)\|")


@dataclass
class ImportanceRow:
    """
    Importance of one attribute before and after removing a subset. Attributes are:
    attribute (str)
    before (float) / after (float): normalized importances.
    deviation (float | None): 100 * (after - before) / before, None when before is 0.
    flag (str | None): "new" (appeared), "vanished" (dropped to 0) or "undefined" (0 before and after).
    """

    attribute: str
    before: float
    after: float
    deviation: Optional[float] = None
    flag: Optional[str] = None

    @property
    def narrative(self) -> str:
        if self.deviation is None:
            return f"{self.attribute} {self.flag}"
        text = f"{self.attribute} {_signed(self.deviation)}%"
        return text if self.flag is None else f"{text} ({self.flag})"

    def to_dict(self) -> dict:
        return {
            "attribute": self.attribute,
            "before": self.before,
            "after": self.after,
            "deviation": self.deviation,
            "flag": self.flag,
        }


@dataclass
class DiagnosticReport:
    """
    Diagnostics of one explanation. Attributes are:
    rank (int)
    pattern (str)
    pos_rate_protected (float | None): positive-label rate of the protected members of the subset.
    pos_rate_privileged (float | None)
    counts (dict): members and positives per group inside the subset.
    importances (list[ImportanceRow]): in schema order.
    flags (list[str]): narrative remarks.
    method (str): "unlearning" or "retrain".
    """

    rank: int
    pattern: str
    pos_rate_protected: Optional[float] = None
    pos_rate_privileged: Optional[float] = None
    counts: dict = field(default_factory=dict)
    importances: list = field(default_factory=list)
    flags: list = field(default_factory=list)
    method: str = "unlearning"

    def shifts(self, top: int = 3) -> list:
        """
        Narratives of the `top` largest importance shifts; appearing and vanishing attributes come first.
        """
        def weight(row: ImportanceRow) -> tuple:
            if row.deviation is None:
                return (0 if row.flag == NEW else 2, 0.0, row.attribute)
            return (1, -abs(row.deviation), row.attribute)

        moved = [row for row in self.importances if row.flag in (NEW, VANISHED) or (row.deviation or 0.0) != 0.0]
        return [row.narrative for row in sorted(moved, key=weight)[:top]]

    def to_dict(self) -> dict:
        return {
            "rank": self.rank,
            "pattern": self.pattern,
            "pos_rate_protected": self.pos_rate_protected,
            "pos_rate_privileged": self.pos_rate_privileged,
            "counts": self.counts,
            "importances": [row.to_dict() for row in self.importances],
            "flags": list(self.flags),
            "method": self.method,
        }


def label_proportions(train: Dataset, sel: SubsetSelection) -> tuple:
    """
    Positive-label rate of each sensitive group inside the subset.

    Parameters
    ----------
    train (Dataset): The training data the subset was selected from.
    sel (SubsetSelection): The subset.

    Returns
    -------
    (pos_rate_protected, pos_rate_privileged, counts); a rate is None when its group has no member in the subset.
    """
    positions = train.positions(sel.member_ids)
    labels = train.labels[positions]
    groups = train.sensitive[positions]
    rates, counts = [], {}
    for group, name in ((0, "protected"), (1, "privileged")):
        in_group = groups == group
        members, positives = int(in_group.sum()), int(labels[in_group].sum())
        counts[f"members_{name}"], counts[f"positive_{name}"] = members, positives
        rates.append(positives / members if members else None)
    return rates[0], rates[1], counts


def _deviation(attribute: str, before: float, after: float) -> ImportanceRow:
    if before > 0:
        return ImportanceRow(attribute, before, after, 100.0 * (after - before) / before, VANISHED if after == 0 else None)
    return ImportanceRow(attribute, before, after, None, NEW if after > 0 else UNDEFINED)


def importance_deviation(
    forest: DareForest,
    train: Dataset,
    sel: SubsetSelection,
    params: Optional[ForestParams] = None,
    retrain: bool = False,
) -> list:
    """
    Percent change of every attribute's importance when the subset is removed.

    Parameters
    ----------
    forest (DareForest): The fitted forest, left unchanged.
    train (Dataset): The training data of the forest.
    sel (SubsetSelection): The subset to remove.
    params (ForestParams | None): Hyperparameters of the retrained forest, those of `forest` by default.
    retrain (bool): Fit a fresh forest without the subset instead of unlearning it from a snapshot.

    Returns
    -------
    One ImportanceRow per attribute, in schema order.
    """
    before = forest.feature_importances()
    if retrain:
        remaining = train.drop(sel.member_ids) if sel.size else train
        after = DareForest(params or forest.params).fit(remaining).feature_importances()
    else:
        working = forest.snapshot().restore()
        if sel.size:
            working.delete(sel.member_ids)
        after = working.feature_importances()
    return [_deviation(name, before[name], after[name]) for name in before]


def diagnose(
    explanations: Sequence,
    forest: DareForest,
    train: Dataset,
    params: Optional[ForestParams] = None,
    retrain: bool = False,
) -> list:
    """
    DiagnosticReport of every explanation, in rank order.
    """
    sensitive = train.schema.sensitive_attribute
    reports = []
    for explanation in explanations:
        protected, privileged, counts = label_proportions(train, explanation.selection)
        rows = importance_deviation(forest, train, explanation.selection, params, retrain)
        report = DiagnosticReport(
            rank=explanation.rank,
            pattern=str(explanation.predicate),
            pos_rate_protected=protected,
            pos_rate_privileged=privileged,
            counts=counts,
            importances=rows,
            method="retrain" if retrain else "unlearning",
        )
        if protected is not None and privileged is not None and privileged > protected:
            report.flags.append("positive labels favour the privileged group")
        for row in rows:
            if row.attribute == sensitive and row.deviation is not None and row.deviation < 0:
                report.flags.append("sensitive-attribute importance dropped")
        report.flags.extend(report.shifts(top=1))
        logger.debug("diagnostics of %s: %s", report.pattern, report.flags)
        reports.append(report)
    return reports


# Rendering
def _signed(value: float) -> str:
    text = f"{round(float(value), 2) + 0.0:.2f}"
    return text if text.startswith("-") else f"+{text}"


def _percent(value: Optional[float], scale: float = 1.0) -> str:
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return "n/a"
    return f"{round(float(value) * scale, 2) + 0.0:.2f}%"


def table_rows(explanations: Sequence, diagnostics: Optional[Sequence] = None) -> list:
    """
    Formatted table rows, one dict per explanation; diagnostic columns are added when diagnostics are given.
    """
    by_rank = {d.rank: d for d in diagnostics or ()}
    rows = []
    for explanation in explanations:
        row = {
            "Index": str(explanation.rank),
            "Pattern": str(explanation.predicate),
            "Support %": _percent(explanation.support, 100.0),
            "Parity Reduction %": _percent(explanation.bias_reduction),
            "Accuracy Reduction %": _percent(explanation.accuracy_reduction),
        }
        if diagnostics is not None:
            diag = by_rank.get(explanation.rank)
            row["Protected Positive %"] = _percent(diag.pos_rate_protected, 100.0) if diag else "n/a"
            row["Privileged Positive %"] = _percent(diag.pos_rate_privileged, 100.0) if diag else "n/a"
            row["Importance Shifts"] = "; ".join(diag.shifts()) if diag else ""
        rows.append(row)
    return rows


def render_tables(explanations: Sequence, diagnostics: Optional[Sequence] = None, fmt: str = "csv") -> str:
    """
    Explanation table as a CSV, JSON or Markdown document.

    Parameters
    ----------
    explanations (Sequence[Explanation]): Ranked explanations.
    diagnostics (Sequence[DiagnosticReport] | None): Adds label-proportion and importance-shift columns.
    fmt (str): "csv", "json" or "markdown".

    Returns
    -------
    The document; an empty explanation list gives the header only.
    """
    if fmt not in FORMATS:
        raise ConfigError(f"unknown table format {fmt!r}, expected one of {', '.join(FORMATS)}")
    columns = COLUMNS + (DIAGNOSTIC_COLUMNS if diagnostics is not None else [])
    rows = table_rows(explanations, diagnostics)
    if fmt == "csv":
        return pd.DataFrame(rows, columns=columns).to_csv(index=False, lineterminator="\n")
    if fmt == "json":
        return json.dumps({"columns": columns, "rows": rows}, indent=2, ensure_ascii=False) + "\n"
    frame = pd.DataFrame([{c: row[c].replace("|", "\\|") for c in columns} for row in rows], columns=columns)
    return frame.to_markdown(index=False, tablefmt="pipe", disable_numparse=True) + "\n"


def read_table(text: str, fmt: str) -> list:
    """
    Parse a document written by `render_tables` back into its rows.
    """
    if fmt == "csv":
        frame = pd.read_csv(io.StringIO(text), dtype=str, keep_default_na=False)
        return frame.to_dict(orient="records")
    if fmt == "json":
        return json.loads(text)["rows"]
    if fmt == "markdown":
        lines = [line for line in text.splitlines() if line.strip()]
        header = _cells(lines[0])
        return [dict(zip(header, _cells(line))) for line in lines[2:]]
    raise ConfigError(f"unknown table format {fmt!r}, expected one of {', '.join(FORMATS)}")


def _cells(line: str) -> list:
    body = line.strip()[1:-1]
    return [cell.strip().replace("\\|", "|") for cell in _UNESCAPED_PIPE.split(body)]
