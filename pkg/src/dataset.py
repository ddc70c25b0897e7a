"""
Tabular data handling: schema, ingestion, discretization, literals and predicates.
"""
from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np
import pandas as pd
from sklearn.model_selection import train_test_split

from src.errors import DatasetError, PredicateError, SchemaError

logger = logging.getLogger(__name__)

CATEGORICAL = "categorical"
CONTINUOUS = "continuous"
ROLES = ("train", "test")

OPS = ("=", "!=", "<", "<=", ">=", ">")
ORDERED_OPS = ("<", "<=", ">=", ">")
_OP_ALIASES = {"==": "=", "≠": "!=", "≤": "<=", "≥": ">="}
_COMPARISON = re.compile(r"^\s*(<=|>=|<|>)\s*(-?\d+(?:\.\d+)?)\s*$")

PROTECTED = "protected"
PRIVILEGED = "privileged"


@dataclass(frozen=True)
class AttributeSpec:
    """
    One attribute of the schema. Attributes are:
    name (str)
    kind (str): "categorical" or "continuous".
    domain (tuple): category labels, or (min, max) of a continuous attribute.
    ordered (bool): categories follow the order of `domain` (quantile bins).
    cut_points (tuple | None): bin boundaries recorded by `discretize`.
    """

    name: str
    kind: str = CATEGORICAL
    domain: tuple = ()
    ordered: bool = False
    cut_points: Optional[tuple] = None

    @property
    def is_categorical(self) -> bool:
        return self.kind == CATEGORICAL

    @property
    def supports_order(self) -> bool:
        return self.kind == CONTINUOUS or self.ordered

    def to_dict(self) -> dict:
        out = {"name": self.name, "kind": self.kind}
        if self.domain:
            out["domain"] = list(self.domain)
        if self.ordered:
            out["ordered"] = True
        if self.cut_points is not None:
            out["cut_points"] = list(self.cut_points)
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "AttributeSpec":
        try:
            name = str(raw["name"])
        except (KeyError, TypeError):
            raise SchemaError(f"attribute entry without a name: {raw!r}") from None
        kind = raw.get("kind", CATEGORICAL)
        if kind not in (CATEGORICAL, CONTINUOUS):
            raise SchemaError(f"attribute {name!r} has unknown kind {kind!r}")
        domain = raw.get("domain") or ()
        if kind == CATEGORICAL:
            domain = tuple(str(v) for v in domain)
            if len(set(domain)) != len(domain):
                raise SchemaError(f"attribute {name!r} has a duplicated domain value")
        else:
            domain = tuple(float(v) for v in domain)
        cut_points = raw.get("cut_points")
        return cls(
            name=name,
            kind=kind,
            domain=domain,
            ordered=bool(raw.get("ordered", False)),
            cut_points=None if cut_points is None else tuple(float(c) for c in cut_points),
        )


@dataclass(frozen=True)
class Schema:
    """
    Dataclass describing a tabular dataset. Attributes are:
    attributes (tuple[AttributeSpec]): ordered attribute descriptions (label column excluded).
    sensitive_attribute (str): attribute defining the two groups.
    privileged_value (str): sensitive value of the privileged group (S=1).
    positive_label (str): label value mapped to Y=1.
    label_column (str)
    negative_label (str | None): observed label value mapped to Y=0.
    sensitive_rule (str | None): comparison such as ">25" mapping a numeric sensitive column onto the two groups.
    """

    attributes: tuple
    sensitive_attribute: str
    privileged_value: str
    positive_label: str
    label_column: str = "label"
    negative_label: Optional[str] = None
    sensitive_rule: Optional[str] = None

    def __post_init__(self):
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise SchemaError("attribute names must be unique")
        if self.label_column in names:
            raise SchemaError(f"label column {self.label_column!r} is also declared as an attribute")
        if self.sensitive_attribute not in names:
            raise SchemaError(f"sensitive attribute {self.sensitive_attribute!r} is not a declared attribute")

    @property
    def names(self) -> list:
        return [a.name for a in self.attributes]

    def attribute(self, name: str) -> AttributeSpec:
        for spec in self.attributes:
            if spec.name == name:
                return spec
        raise PredicateError(f"unknown attribute {name!r}")

    def index(self, name: str) -> int:
        return self.names.index(name)

    def with_attribute(self, spec: AttributeSpec) -> "Schema":
        attributes = tuple(spec if a.name == spec.name else a for a in self.attributes)
        return replace(self, attributes=attributes)

    def to_dict(self) -> dict:
        out = {
            "attributes": [a.to_dict() for a in self.attributes],
            "sensitive_attribute": self.sensitive_attribute,
            "privileged_value": self.privileged_value,
            "positive_label": self.positive_label,
            "label_column": self.label_column,
        }
        if self.negative_label is not None:
            out["negative_label"] = self.negative_label
        if self.sensitive_rule is not None:
            out["sensitive_rule"] = self.sensitive_rule
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "Schema":
        try:
            attributes = tuple(AttributeSpec.from_dict(a) for a in raw["attributes"])
            return cls(
                attributes=attributes,
                sensitive_attribute=str(raw["sensitive_attribute"]),
                privileged_value=str(raw["privileged_value"]),
                positive_label=str(raw["positive_label"]),
                label_column=str(raw.get("label_column", "label")),
                negative_label=None if raw.get("negative_label") is None else str(raw["negative_label"]),
                sensitive_rule=raw.get("sensitive_rule"),
            )
        except KeyError as err:
            raise SchemaError(f"schema is missing key {err.args[0]!r}") from None
        except TypeError as err:
            raise SchemaError(f"malformed schema: {err}") from None

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Schema":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise SchemaError(f"schema file not found: {path}") from None
        except json.JSONDecodeError as err:
            raise SchemaError(f"cannot parse schema {path}: {err}") from None
        if not isinstance(raw, dict):
            raise SchemaError(f"schema {path} must be a JSON object")
        return cls.from_dict(raw)

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Immutable tabular data. Attributes are:
    schema (Schema)
    frame (pd.DataFrame): one column per schema attribute, categorical values as str.
    labels (np.ndarray): binary labels.
    ids (np.ndarray): sorted row identifiers, preserved by `drop` so subsets keep training-row ids.
    role (str): "train" or "test".
    dropped (int): rows discarded at ingestion.
    """

    schema: Schema
    frame: pd.DataFrame
    labels: np.ndarray
    ids: np.ndarray
    role: str = "train"
    dropped: int = 0

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def p(self) -> int:
        return len(self.schema.attributes)

    @cached_property
    def sensitive(self) -> np.ndarray:
        column = self.frame[self.schema.sensitive_attribute].to_numpy()
        return (column == self.schema.privileged_value).astype(np.int8)

    @cached_property
    def encoded(self) -> np.ndarray:
        """
        Float matrix used by the forest: category index for categorical attributes, raw value otherwise.
        """
        matrix = np.empty((self.n, self.p), dtype=np.float64)
        for j, spec in enumerate(self.schema.attributes):
            column = self.frame[spec.name]
            if spec.is_categorical:
                codes = pd.Categorical(column, categories=list(spec.domain)).codes
                matrix[:, j] = codes
            else:
                matrix[:, j] = column.to_numpy(dtype=np.float64)
        return matrix

    @property
    def ordered_mask(self) -> np.ndarray:
        return np.array([spec.supports_order for spec in self.schema.attributes], dtype=bool)

    def positions(self, ids: Iterable[int]) -> np.ndarray:
        ids = np.asarray(list(ids) if not isinstance(ids, np.ndarray) else ids, dtype=np.int64)
        pos = np.searchsorted(self.ids, ids)
        inside = pos < self.n
        if not np.all(inside) or not np.array_equal(self.ids[pos[inside]], ids):
            raise DatasetError("some ids are not rows of this dataset")
        return pos

    def take(self, positions: np.ndarray, role: Optional[str] = None, reindex: bool = False) -> "Dataset":
        positions = np.asarray(positions, dtype=np.int64)
        ids = np.arange(len(positions), dtype=np.int64) if reindex else self.ids[positions]
        return Dataset(
            schema=self.schema,
            frame=self.frame.iloc[positions].reset_index(drop=True),
            labels=self.labels[positions],
            ids=ids,
            role=role or self.role,
        )

    def drop(self, ids: Iterable[int]) -> "Dataset":
        """
        Dataset without the given rows; remaining rows keep their ids.
        """
        keep = np.ones(self.n, dtype=bool)
        keep[self.positions(ids)] = False
        return self.take(np.flatnonzero(keep))

    def to_frame(self) -> pd.DataFrame:
        out = self.frame.copy()
        negative = self.schema.negative_label or f"not {self.schema.positive_label}"
        out[self.schema.label_column] = np.where(self.labels == 1, self.schema.positive_label, negative)
        return out

    def save(self, data_path: Union[str, Path], schema_path: Optional[Union[str, Path]] = None) -> None:
        self.to_frame().to_csv(data_path, index=False)
        if schema_path is not None:
            self.schema.save(schema_path)


@dataclass(frozen=True)
class Literal:
    """
    Atom `attribute op value` of a predicate.
    """

    attribute: str
    op: str
    value: object

    def __post_init__(self):
        op = _OP_ALIASES.get(self.op, self.op)
        if op not in OPS:
            raise PredicateError(f"unknown operator {self.op!r}")
        object.__setattr__(self, "op", op)

    @property
    def sort_key(self) -> tuple:
        return self.attribute, self.op, str(self.value)

    def __str__(self) -> str:
        value = f"'{self.value}'" if isinstance(self.value, str) else f"{self.value}"
        return f"{self.attribute}{self.op}{value}"

    def to_dict(self) -> dict:
        return {"attribute": self.attribute, "op": self.op, "value": self.value}

    def mask(self, d: Dataset) -> np.ndarray:
        """
        Boolean membership of every row of `d`.
        """
        spec = d.schema.attribute(self.attribute)
        if spec.is_categorical:
            value = str(self.value)
            if value not in spec.domain:
                raise PredicateError(f"value {value!r} is outside the domain of {spec.name!r}")
            if self.op in ORDERED_OPS:
                if not spec.ordered:
                    raise PredicateError(f"operator {self.op!r} needs an ordered attribute, {spec.name!r} is nominal")
                column = d.encoded[:, d.schema.index(spec.name)]
                return _compare(column, self.op, float(spec.domain.index(value)))
            column = d.frame[spec.name].to_numpy()
            return column == value if self.op == "=" else column != value
        try:
            value = float(self.value)
        except (TypeError, ValueError):
            raise PredicateError(f"value {self.value!r} is not numeric for {spec.name!r}") from None
        return _compare(d.frame[spec.name].to_numpy(dtype=np.float64), self.op, value)


def _compare(column: np.ndarray, op: str, value: float) -> np.ndarray:
    if op == "=":
        return column == value
    if op == "!=":
        return column != value
    if op == "<":
        return column < value
    if op == "<=":
        return column <= value
    if op == ">=":
        return column >= value
    return column > value


def _as_number(value) -> Optional[float]:
    try:
        return float(value)
    except (TypeError, ValueError):
        return None


def _literals_conflict(a: Literal, b: Literal) -> bool:
    """
    True when no value can satisfy both literals on the same attribute.
    """
    if a.op in ("=", "!=") and b.op in ("=", "!="):
        if a.op == "=" and b.op == "=":
            return a.value != b.value
        if a.op != b.op:
            return a.value == b.value
        return False
    va, vb = _as_number(a.value), _as_number(b.value)
    if va is None or vb is None:
        return False
    if a.op == "=" or b.op == "=":
        eq, other, eq_value, other_value = (a, b, va, vb) if a.op == "=" else (b, a, vb, va)
        if other.op == "!=":
            return eq_value == other_value
        return not _compare(np.array([eq_value]), other.op, other_value)[0]
    if a.op == "!=" or b.op == "!=":
        return False
    low, low_open, high, high_open = -np.inf, False, np.inf, False
    for lit, v in ((a, va), (b, vb)):
        if lit.op in (">", ">=") and (v > low or (v == low and lit.op == ">")):
            low, low_open = v, lit.op == ">"
        if lit.op in ("<", "<=") and (v < high or (v == high and lit.op == "<")):
            high, high_open = v, lit.op == "<"
    return low > high or (low == high and (low_open or high_open))


@dataclass(frozen=True)
class Predicate:
    """
    Conjunction of literals identifying a coherent subset. Two literals on one attribute may not contradict.
    """

    literals: frozenset = frozenset()

    def __post_init__(self):
        literals = frozenset(self.literals)
        object.__setattr__(self, "literals", literals)
        ordered = sorted(literals, key=lambda lit: lit.sort_key)
        for i, a in enumerate(ordered):
            for b in ordered[i + 1:]:
                if a.attribute == b.attribute and _literals_conflict(a, b):
                    raise PredicateError(f"contradictory literals {a} and {b}")

    @classmethod
    def equalities(cls, assignment: dict) -> "Predicate":
        return cls(frozenset(Literal(attr, "=", value) for attr, value in assignment.items()))

    @property
    def level(self) -> int:
        return len(self.literals)

    @property
    def attributes(self) -> set:
        return {lit.attribute for lit in self.literals}

    @cached_property
    def canonical_key(self) -> str:
        parts = [f"{lit.attribute}{lit.op}{str(lit.value)!r}" for lit in sorted(self.literals, key=lambda lit: lit.sort_key)]
        return " AND ".join(parts)

    def __str__(self) -> str:
        if not self.literals:
            return "(all rows)"
        return " ∧ ".join(str(lit) for lit in sorted(self.literals, key=lambda lit: lit.sort_key))

    def to_dict(self) -> dict:
        return {"literals": [lit.to_dict() for lit in sorted(self.literals, key=lambda lit: lit.sort_key)]}

    @classmethod
    def from_dict(cls, raw: dict) -> "Predicate":
        return cls(frozenset(Literal(r["attribute"], r["op"], r["value"]) for r in raw["literals"]))


@dataclass(frozen=True, eq=False)
class SubsetSelection:
    """
    Rows of a dataset satisfying a predicate. Attributes are:
    predicate (Predicate)
    member_ids (np.ndarray): sorted ids of the matching rows.
    n_total (int): size of the dataset the support refers to.
    """

    predicate: Predicate
    member_ids: np.ndarray
    n_total: int

    @property
    def size(self) -> int:
        return len(self.member_ids)

    @property
    def support_fraction(self) -> Fraction:
        return Fraction(self.size, self.n_total)

    @property
    def support(self) -> float:
        return self.size / self.n_total


# Ingestion
def load_dataset(
    data_path: Union[str, Path],
    schema_path: Union[str, Path],
    role: str = "train",
    like: Optional[Dataset] = None,
) -> Dataset:
    """
    Read a CSV file with a JSON schema sidecar and validate it.

    Parameters
    ----------
    data_path (str | Path): CSV file with a header row.
    schema_path (str | Path): JSON schema file.
    role (str): "train" or "test".
    like (Dataset | None): Dataset whose schema (inferred domains included) is reused, e.g. the training split.

    Returns
    -------
    The validated dataset; rows with missing or out-of-domain values are dropped and counted.
    """
    if role not in ROLES:
        raise DatasetError(f"unknown role {role!r}")
    schema = like.schema if like is not None else Schema.load(schema_path)
    bad_lines = []
    try:
        raw = pd.read_csv(
            data_path,
            dtype=str,
            skipinitialspace=True,
            na_values=["?", ""],
            keep_default_na=True,
            engine="python",
            on_bad_lines=lambda line: bad_lines.append(line),
            encoding="utf-8",
        )
    except pd.errors.EmptyDataError:
        raise DatasetError("empty dataset") from None
    return _validate_frame(raw, schema, role, extra_dropped=len(bad_lines), keep_domains=like is not None)


def _validate_frame(raw: pd.DataFrame, schema: Schema, role: str, extra_dropped: int, keep_domains: bool) -> Dataset:
    raw.columns = [str(c).strip() for c in raw.columns]
    if raw.empty:
        raise DatasetError("empty dataset")
    known = set(schema.names) | {schema.label_column}
    unknown = [c for c in raw.columns if c not in known]
    if unknown:
        raise DatasetError(f"unknown column(s): {', '.join(unknown)}")
    if schema.sensitive_attribute not in raw.columns:
        raise DatasetError(f"sensitive attribute {schema.sensitive_attribute!r} missing from the data")
    missing = [c for c in schema.names + [schema.label_column] if c not in raw.columns]
    if missing:
        raise DatasetError(f"missing column(s): {', '.join(missing)}")

    frame = raw[schema.names + [schema.label_column]].apply(lambda col: col.str.strip())
    keep = frame.notna().all(axis=1).to_numpy()

    # a continuous sensitive attribute is mapped onto two groups by a comparison rule
    sensitive_spec = schema.attribute(schema.sensitive_attribute)
    rule = schema.sensitive_rule
    if sensitive_spec.kind == CONTINUOUS:
        rule = schema.privileged_value
    mapped = frame[sensitive_spec.name].dropna().isin((PROTECTED, PRIVILEGED)).all()
    if rule is not None and not (sensitive_spec.is_categorical and mapped):
        match = _COMPARISON.match(rule)
        if match is None:
            raise SchemaError(
                f"continuous sensitive attribute {sensitive_spec.name!r} needs a comparison privileged value such as '>25'"
            )
        numeric = pd.to_numeric(frame[sensitive_spec.name], errors="coerce")
        keep &= numeric.notna().to_numpy()
        privileged = _compare(numeric.to_numpy(dtype=np.float64), match.group(1), float(match.group(2)))
        frame[sensitive_spec.name] = np.where(privileged, PRIVILEGED, PROTECTED)
        schema = replace(
            schema.with_attribute(AttributeSpec(name=sensitive_spec.name, kind=CATEGORICAL, domain=(PROTECTED, PRIVILEGED))),
            privileged_value=PRIVILEGED,
            sensitive_rule=rule,
        )

    attributes = []
    for spec in schema.attributes:
        column = frame[spec.name]
        if spec.kind == CONTINUOUS:
            numeric = pd.to_numeric(column, errors="coerce")
            keep &= numeric.notna().to_numpy()
            frame[spec.name] = numeric
        elif spec.domain:
            keep &= column.isin(spec.domain).to_numpy() | column.isna().to_numpy()
        attributes.append(spec)

    frame = frame.loc[keep].reset_index(drop=True)
    dropped = int((~keep).sum()) + extra_dropped
    if frame.empty:
        raise DatasetError("empty dataset")

    label_values = sorted(frame[schema.label_column].unique())
    if len(label_values) > 2 or (len(label_values) == 2 and schema.positive_label not in label_values):
        raise DatasetError(
            f"label column {schema.label_column!r} is not binary-mappable with positive label "
            f"{schema.positive_label!r}: {label_values}"
        )
    negatives = [v for v in label_values if v != schema.positive_label]
    negative_label = schema.negative_label or (negatives[0] if negatives else None)
    labels = (frame[schema.label_column] == schema.positive_label).to_numpy().astype(np.int8)
    frame = frame.drop(columns=[schema.label_column])

    completed = []
    for spec in attributes:
        if spec.kind == CONTINUOUS:
            if not keep_domains or not spec.domain:
                values = frame[spec.name].to_numpy(dtype=np.float64)
                spec = replace(spec, domain=(float(values.min()), float(values.max())))
        elif not spec.domain:
            spec = replace(spec, domain=tuple(sorted(frame[spec.name].unique())))
        completed.append(spec)

    sensitive_spec = next(spec for spec in completed if spec.name == schema.sensitive_attribute)
    if schema.privileged_value not in sensitive_spec.domain:
        raise SchemaError(
            f"privileged value {schema.privileged_value!r} is not in the domain of {sensitive_spec.name!r}: "
            f"{list(sensitive_spec.domain)}"
        )
    schema = replace(schema, attributes=tuple(completed), negative_label=negative_label)
    if dropped:
        logger.warning("dropped %d malformed row(s) from the %s data", dropped, role)
    logger.info("loaded %s dataset with n=%d, p=%d", role, len(frame), len(completed))
    return Dataset(
        schema=schema,
        frame=frame,
        labels=labels,
        ids=np.arange(len(frame), dtype=np.int64),
        role=role,
        dropped=dropped,
    )


def dataset_from_frame(frame: pd.DataFrame, schema: Schema, role: str = "train") -> Dataset:
    """
    Validate an in-memory frame (label column included) exactly like `load_dataset` does for a CSV file.
    """
    raw = frame.astype(str).where(frame.notna(), None)
    return _validate_frame(raw, schema, role, extra_dropped=0, keep_domains=False)


# Discretization
def _bin_labels(cut_points: tuple, values: np.ndarray) -> tuple:
    if not cut_points:
        low, high = float(values.min()), float(values.max())
        if low == high:
            return (f"={_fmt(low)}",)
        return (f"[{_fmt(low)}, {_fmt(high)}]",)
    labels = [f"<={_fmt(cut_points[0])}"]
    for a, b in zip(cut_points[:-1], cut_points[1:]):
        labels.append(f"({_fmt(a)}, {_fmt(b)}]")
    labels.append(f">{_fmt(cut_points[-1])}")
    return tuple(labels)


def _fmt(value: float) -> str:
    return np.format_float_positional(value, trim="-")


def quantile_cut_points(values: np.ndarray, bins: int) -> tuple:
    """
    Interior quantile boundaries, deduplicated and strictly below the maximum so that no bin is empty.
    """
    quantiles = np.quantile(values, np.linspace(0, 1, bins + 1)[1:-1])
    cuts = np.unique(quantiles)
    return tuple(float(c) for c in cuts[cuts < values.max()])


def discretize(d: Dataset, bins_per_attribute: int = 4, reference: Optional[Schema] = None) -> Dataset:
    """
    Replace every continuous attribute by an ordinal categorical attribute of quantile bins.

    Parameters
    ----------
    d (Dataset): The dataset to be binned.
    bins_per_attribute (int): Number of quantile bins, at least 2.
    reference (Schema | None): Schema holding the training cut-points; given when binning a test split.

    Returns
    -------
    A new dataset whose schema records the cut-points. Attributes already categorical are unchanged.
    """
    if bins_per_attribute < 2:
        raise DatasetError("bins_per_attribute must be >= 2")
    frame = d.frame.copy()
    schema = d.schema
    for spec in d.schema.attributes:
        if spec.kind != CONTINUOUS:
            continue
        values = frame[spec.name].to_numpy(dtype=np.float64)
        if reference is not None:
            binned_spec = reference.attribute(spec.name)
            if binned_spec.cut_points is None:
                raise DatasetError(f"reference schema has no cut-points for {spec.name!r}")
            cut_points, domain = binned_spec.cut_points, binned_spec.domain
        else:
            cut_points = quantile_cut_points(values, bins_per_attribute)
            if not cut_points:
                logger.warning("attribute %r is constant, emitting a single bin", spec.name)
            domain = _bin_labels(cut_points, values)
        codes = np.searchsorted(np.asarray(cut_points), values, side="left")
        frame[spec.name] = np.asarray(domain, dtype=object)[codes]
        schema = schema.with_attribute(
            AttributeSpec(name=spec.name, kind=CATEGORICAL, domain=tuple(domain), ordered=True, cut_points=tuple(cut_points))
        )
    return Dataset(schema=schema, frame=frame, labels=d.labels, ids=d.ids, role=d.role, dropped=d.dropped)


def split_dataset(d: Dataset, test_fraction: float = 0.2, seed: int = 0) -> tuple:
    """
    Stratified train/test split on (label, sensitive group), falling back to the label alone when a stratum is too small.

    Returns
    -------
    (train, test) datasets, each re-indexed from 0.
    """
    if not 0 < test_fraction < 1:
        raise DatasetError("test_fraction must lie in (0, 1)")
    positions = np.arange(d.n)
    for strata in (d.labels * 2 + d.sensitive, d.labels, None):
        try:
            train_pos, test_pos = train_test_split(
                positions, test_size=test_fraction, random_state=seed, stratify=strata
            )
            break
        except ValueError:
            logger.warning("stratified split failed, retrying with coarser strata")
    return (
        d.take(np.sort(train_pos), role="train", reindex=True),
        d.take(np.sort(test_pos), role="test", reindex=True),
    )


# Subsets
def evaluate_predicate(p: Predicate, d: Dataset) -> SubsetSelection:
    """
    Rows of `d` satisfying every literal of `p`; the empty predicate selects all rows.
    """
    mask = np.ones(d.n, dtype=bool)
    for lit in p.literals:
        mask &= lit.mask(d)
    return SubsetSelection(predicate=p, member_ids=d.ids[mask], n_total=d.n)


def sensitive_masks(d: Dataset) -> tuple:
    """
    Partition of the row ids by sensitive group.

    Returns
    -------
    (protected_ids, privileged_ids), either possibly empty.
    """
    s = d.sensitive
    return d.ids[s == 0], d.ids[s == 1]


def selection_from_ids(d: Dataset, ids: Iterable[int], predicate: Optional[Predicate] = None) -> SubsetSelection:
    """
    Wrap an arbitrary id set (e.g. a random sample) as a selection of `d`.
    """
    ids = np.unique(np.asarray(list(ids), dtype=np.int64))
    d.positions(ids)
    return SubsetSelection(predicate=predicate or Predicate(), member_ids=ids, n_total=d.n)
