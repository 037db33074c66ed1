"""Datasets, feature spaces and subgroups, plus CSV ingestion.

Categorical features are stored as integer codes against a per-feature label
table. A :class:`Subgroup` is an axis-aligned region: for every constrained
feature a non-empty subset of its labels, unconstrained features matching
anything.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

EPS = 1e-6
MISSING = "__missing__"
DEFAULT_BINS = 5


class BiasScanError(Exception):
    """Base class for configuration and data problems."""


class ConfigError(BiasScanError, ValueError):
    pass


class DataError(BiasScanError, ValueError):
    pass


class EmptySubgroup(Exception):
    """Raised when a subgroup matches no rows. Not an error in itself."""


def clip_predictions(p) -> np.ndarray:
    return np.clip(np.asarray(p, dtype=np.float64), EPS, 1.0 - EPS)


@dataclass(frozen=True)
class Feature:
    name: str
    values: tuple[str, ...]

    @property
    def arity(self) -> int:
        return len(self.values)

    def index(self, label: str) -> int:
        try:
            return self.values.index(label)
        except ValueError:
            raise ConfigError(f"feature {self.name!r} has no value {label!r}") from None


@dataclass(frozen=True)
class FeatureSpace:
    features: tuple[Feature, ...]

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate feature names in {names}")
        for f in self.features:
            if f.arity < 1:
                raise ConfigError(f"feature {f.name!r} has no values")
            if len(set(f.values)) != f.arity:
                raise ConfigError(f"feature {f.name!r} has duplicate value labels")

    @classmethod
    def from_dict(cls, spec: Mapping[str, Sequence[str]]) -> "FeatureSpace":
        return cls(tuple(Feature(name, tuple(str(v) for v in vals)) for name, vals in spec.items()))

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    @property
    def arities(self) -> np.ndarray:
        return np.array([f.arity for f in self.features], dtype=np.int64)

    def __len__(self) -> int:
        return len(self.features)

    def position(self, name: str) -> int:
        for i, f in enumerate(self.features):
            if f.name == name:
                return i
        raise ConfigError(f"unknown feature {name!r}")

    def __getitem__(self, name: str) -> Feature:
        return self.features[self.position(name)]

    def subgroup_count(self) -> int:
        """Number of distinct non-empty axis-aligned subgroups."""
        return math.prod(2 ** f.arity - 1 for f in self.features)


@dataclass(frozen=True)
class Subgroup:
    """Conjunction over features of value-set constraints.

    Always normalized: value sets are stored in feature-space order and a
    feature constrained to all of its values is dropped. Build instances with
    :meth:`build` or :meth:`from_mask` so that normalization happens.
    """

    constraints: tuple[tuple[str, tuple[str, ...]], ...] = ()

    @classmethod
    def build(cls, space: FeatureSpace, constraints: Mapping[str, Iterable[str]] | None = None) -> "Subgroup":
        items = []
        constraints = constraints or {}
        for name in constraints:
            space.position(name)
        for feat in space.features:
            if feat.name not in constraints:
                continue
            wanted = {str(v) for v in constraints[feat.name]}
            if not wanted:
                raise ConfigError(f"empty value set for feature {feat.name!r}")
            for v in wanted:
                feat.index(v)
            if len(wanted) == feat.arity:
                continue
            items.append((feat.name, tuple(v for v in feat.values if v in wanted)))
        return cls(tuple(items))

    @classmethod
    def from_mask(cls, space: FeatureSpace, mask: np.ndarray) -> "Subgroup":
        """Convert a (features x max_arity) boolean membership matrix."""
        items = []
        for i, feat in enumerate(space.features):
            row = np.asarray(mask[i, : feat.arity], dtype=bool)
            if not row.any():
                raise ConfigError(f"empty value set for feature {feat.name!r}")
            if row.all():
                continue
            items.append((feat.name, tuple(v for v, keep in zip(feat.values, row) if keep)))
        return cls(tuple(items))

    def to_mask(self, space: FeatureSpace) -> np.ndarray:
        mask = np.zeros((len(space), int(space.arities.max())), dtype=np.uint8)
        for i, feat in enumerate(space.features):
            mask[i, : feat.arity] = 1
        for name, values in self.constraints:
            i = space.position(name)
            feat = space.features[i]
            mask[i, :] = 0
            for v in values:
                mask[i, feat.index(v)] = 1
        return mask

    def as_dict(self) -> dict[str, list[str]]:
        return {name: list(values) for name, values in self.constraints}

    @property
    def features(self) -> list[str]:
        return [name for name, _ in self.constraints]

    def sort_key(self, space: FeatureSpace) -> tuple:
        return tuple(
            (space.position(name), tuple(space[name].index(v) for v in values))
            for name, values in self.constraints
        )

    def __str__(self) -> str:
        if not self.constraints:
            return "<all rows>"
        return " & ".join(f"{name} in {{{', '.join(values)}}}" for name, values in self.constraints)


@dataclass(frozen=True)
class SubgroupStats:
    n: int
    sum_y: int
    sum_p: float

    @property
    def observed_rate(self) -> float:
        return self.sum_y / self.n

    @property
    def expected_rate(self) -> float:
        return self.sum_p / self.n

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "sum_y": self.sum_y,
            "sum_p": self.sum_p,
            "observed_rate": self.observed_rate,
            "expected_rate": self.expected_rate,
        }


@dataclass(frozen=True)
class CellTable:
    """Rows collapsed by (category codes, prediction).

    All scoring quantities are sums over rows, so grouping identical
    (codes, p) rows is exact and keeps the scan kernels small.
    """

    codes: np.ndarray  # (K, M) int64
    p: np.ndarray  # (K,)
    weight: np.ndarray  # (K,) row counts
    pos: np.ndarray  # (K,) positive outcomes
    inverse: np.ndarray  # (n,) row -> cell

    def with_outcomes(self, y: np.ndarray) -> "CellTable":
        pos = np.bincount(self.inverse, weights=y, minlength=len(self.p))
        return CellTable(self.codes, self.p, self.weight, pos, self.inverse)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable table of categorical codes, outcomes and predictions."""

    space: FeatureSpace
    codes: np.ndarray
    y: np.ndarray
    p: np.ndarray
    _checked: bool = field(default=False, repr=False)

    def __post_init__(self):
        codes = np.ascontiguousarray(self.codes, dtype=np.int64)
        y = np.ascontiguousarray(self.y, dtype=np.int64)
        p = clip_predictions(self.p)
        if codes.ndim != 2 or codes.shape[1] != len(self.space):
            raise DataError(f"codes must have shape (n, {len(self.space)})")
        n = codes.shape[0]
        if n < 1:
            raise DataError("dataset has no rows")
        if y.shape != (n,) or p.shape != (n,):
            raise DataError("outcomes and predictions must have one entry per row")
        if not np.isin(y, (0, 1)).all():
            raise DataError("outcomes must be 0 or 1")
        if not self._checked:
            arities = self.space.arities
            if (codes < 0).any() or (codes >= arities[None, :]).any():
                raise DataError("category code out of range")
        for arr in (codes, y, p):
            arr.setflags(write=False)
        object.__setattr__(self, "codes", codes)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "p", p)

    @classmethod
    def from_columns(
        cls,
        columns: Mapping[str, Sequence],
        y: Sequence[int],
        p: Sequence[float],
        values: Mapping[str, Sequence[str]] | None = None,
    ) -> "Dataset":
        """Build from label columns. Value order defaults to natural sort."""
        values = dict(values or {})
        feats, code_cols = [], []
        for name, col in columns.items():
            labels = [str(v) for v in col]
            order = tuple(str(v) for v in values[name]) if name in values else tuple(_natural_sorted(set(labels)))
            lookup = {v: i for i, v in enumerate(order)}
            try:
                code_cols.append([lookup[v] for v in labels])
            except KeyError as exc:
                raise DataError(f"feature {name!r}: value {exc.args[0]!r} not in declared values") from None
            feats.append(Feature(name, order))
        space = FeatureSpace(tuple(feats))
        codes = np.array(code_cols, dtype=np.int64).T.reshape(len(y), len(feats))
        return cls(space, codes, np.asarray(y), np.asarray(p))

    @property
    def n(self) -> int:
        return self.codes.shape[0]

    def replace(self, y=None, p=None) -> "Dataset":
        return Dataset(
            self.space,
            self.codes,
            self.y if y is None else y,
            self.p if p is None else p,
            _checked=True,
        )

    @cached_property
    def cells(self) -> CellTable:
        keys = np.column_stack([self.codes, self.p.view(np.int64)])
        uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        k = len(uniq)
        return CellTable(
            codes=np.ascontiguousarray(uniq[:, :-1]),
            p=np.ascontiguousarray(uniq[:, -1]).view(np.float64),
            weight=np.bincount(inverse, minlength=k).astype(np.float64),
            pos=np.bincount(inverse, weights=self.y, minlength=k),
            inverse=inverse,
        )

    def matches(self, subgroup: Subgroup) -> np.ndarray:
        keep = np.ones(self.n, dtype=bool)
        for name, values in subgroup.constraints:
            i = self.space.position(name)
            feat = self.space.features[i]
            allowed = np.zeros(feat.arity, dtype=bool)
            allowed[[feat.index(v) for v in values]] = True
            keep &= allowed[self.codes[:, i]]
        return keep

    def labels(self, name: str) -> list[str]:
        feat = self.space[name]
        return [feat.values[c] for c in self.codes[:, self.space.position(name)]]

    def to_frame(self, outcome: str = "y", prediction: str = "p") -> pd.DataFrame:
        cols = {name: self.labels(name) for name in self.space.names}
        cols[outcome] = self.y
        cols[prediction] = self.p
        return pd.DataFrame(cols)

    def to_csv(self, path, outcome: str = "y", prediction: str = "p") -> None:
        self.to_frame(outcome, prediction).to_csv(path, index=False, float_format="%.17g")


def subgroup_stats(dataset: Dataset, subgroup: Subgroup) -> SubgroupStats:
    keep = dataset.matches(subgroup)
    n = int(keep.sum())
    if n == 0:
        raise EmptySubgroup(str(subgroup))
    return SubgroupStats(n=n, sum_y=int(dataset.y[keep].sum()), sum_p=float(dataset.p[keep].sum()))


# ---------------------------------------------------------------------------
# discretization and ingestion


@dataclass(frozen=True)
class Binning:
    labels: list[str]
    values: tuple[str, ...]
    edges: tuple[float, ...]
    degenerate: bool = False


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def discretize(values: Sequence[float], bin_count: int = DEFAULT_BINS) -> Binning:
    """Quantile-bin real values.

    Values equal to a bin edge fall into the lower bin. Duplicate quantiles
    are merged and empty bins dropped, so the result may have fewer than
    ``bin_count`` categories.
    """
    if bin_count < 2:
        raise ConfigError("bin_count must be at least 2")
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        raise ConfigError("cannot discretize an empty column")
    if np.all(x == x[0]):
        label = _fmt(x[0])
        return Binning([label] * x.size, (label,), (), degenerate=True)
    edges = np.unique(np.quantile(x, np.arange(1, bin_count) / bin_count))
    bins = np.searchsorted(edges, x, side="left")
    names = []
    for b in range(len(edges) + 1):
        if b == 0:
            names.append(f"<={_fmt(edges[0])}")
        elif b == len(edges):
            names.append(f">{_fmt(edges[-1])}")
        else:
            names.append(f"({_fmt(edges[b - 1])}, {_fmt(edges[b])}]")
    present = sorted(set(bins.tolist()))
    return Binning([names[b] for b in bins], tuple(names[b] for b in present), tuple(edges.tolist()))


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    continuous: bool = False
    bins: int = DEFAULT_BINS

    @classmethod
    def parse(cls, token: str) -> "FeatureSpec":
        """Parse ``name`` or ``name:cont[:bins]``."""
        parts = token.strip().split(":")
        if not parts[0]:
            raise ConfigError(f"bad feature token {token!r}")
        if len(parts) == 1:
            return cls(parts[0])
        if parts[1] != "cont" or len(parts) > 3:
            raise ConfigError(f"bad feature token {token!r}; expected name or name:cont:<bins>")
        bins = DEFAULT_BINS
        if len(parts) == 3:
            try:
                bins = int(parts[2])
            except ValueError:
                raise ConfigError(f"bad bin count in {token!r}") from None
        return cls(parts[0], True, bins)

    def token(self) -> str:
        return f"{self.name}:cont:{self.bins}" if self.continuous else self.name


@dataclass(frozen=True)
class IngestConfig:
    outcome: str
    prediction: str
    features: tuple[FeatureSpec, ...]

    @classmethod
    def from_tokens(cls, outcome: str, prediction: str, features: Sequence[str] | str) -> "IngestConfig":
        if isinstance(features, str):
            features = [t for t in features.split(",") if t.strip()]
        if not features:
            raise ConfigError("at least one feature column is required")
        return cls(outcome, prediction, tuple(FeatureSpec.parse(t) for t in features))


def _natural_sorted(labels: Iterable[str]) -> list[str]:
    def key(v: str):
        if v == MISSING:
            return (2, 0.0, v)
        try:
            return (0, float(v), v)
        except ValueError:
            return (1, 0.0, v)

    return sorted(labels, key=key)


def _is_missing(v: str) -> bool:
    return v.strip() == ""


def ingest_csv(path, config: IngestConfig) -> Dataset:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"input file not found: {path}")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8", quoting=csv.QUOTE_MINIMAL)
    except (UnicodeDecodeError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DataError(f"cannot parse {path}: {exc}") from None
    wanted = [config.outcome, config.prediction] + [f.name for f in config.features]
    for col in wanted:
        if col not in frame.columns:
            raise ConfigError(f"column {col!r} not found in {path}")
    if len(frame) == 0:
        raise DataError(f"{path} has no data rows")

    y = np.empty(len(frame), dtype=np.int64)
    for i, raw in enumerate(frame[config.outcome]):
        v = raw.strip()
        if v in ("0", "1"):
            y[i] = int(v)
        else:
            try:
                f = float(v)
            except ValueError:
                f = None
            if f not in (0.0, 1.0):
                raise DataError(f"row {i + 1}: outcome {raw!r} is not 0 or 1")
            y[i] = int(f)

    p = np.empty(len(frame), dtype=np.float64)
    for i, raw in enumerate(frame[config.prediction]):
        try:
            p[i] = float(raw)
        except ValueError:
            raise DataError(f"row {i + 1}: prediction {raw!r} is not a number") from None
        if not 0.0 <= p[i] <= 1.0:
            raise DataError(f"row {i + 1}: prediction {raw!r} is outside [0, 1]")

    columns, values = {}, {}
    for spec in config.features:
        raw = list(frame[spec.name])
        missing = [_is_missing(v) for v in raw]
        if spec.continuous:
            present = []
            for i, (v, miss) in enumerate(zip(raw, missing)):
                if miss:
                    continue
                try:
                    present.append(float(v))
                except ValueError:
                    raise DataError(f"row {i + 1}: feature {spec.name!r} value {v!r} is not a number") from None
            if present:
                binning = discretize(present, spec.bins)
                if binning.degenerate:
                    logger.warning("feature %s is constant; kept as a single category", spec.name)
                it = iter(binning.labels)
                labels = [MISSING if miss else next(it) for miss in missing]
                order = list(binning.values)
            else:
                labels, order = [MISSING] * len(raw), []
            if any(missing):
                order.append(MISSING)
            values[spec.name] = order
        else:
            labels = [MISSING if miss else v.strip() for v, miss in zip(raw, missing)]
        columns[spec.name] = labels
    return Dataset.from_columns(columns, y, p, values=values)
