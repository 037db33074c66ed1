"""Synthetic data with injected predictive bias, and detection scoring.

Rows are spread evenly over every full feature-value combination ("cell").
Predictions come from an additive log-odds model with random per-value
coefficients; outcomes are drawn from the same model plus an extra log-odds
shift for rows inside the biased subgroup, so the classifier under-estimates
risk there by construction.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .data import ConfigError, Dataset, Feature, FeatureSpace, Subgroup


@dataclass(frozen=True)
class SyntheticSpec:
    feature_count: int = 4
    arity: int = 6
    coefficient_scale: float = 0.5
    injection_pattern: tuple[int, ...] = (2, 2, 2, 6)
    bias_log_odds: float = 1.5
    affected_count: int = 100
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "injection_pattern", tuple(int(s) for s in self.injection_pattern))
        if self.feature_count < 1 or self.arity < 1:
            raise ConfigError("feature_count and arity must be positive")
        if len(self.injection_pattern) != self.feature_count:
            raise ConfigError(f"injection pattern needs {self.feature_count} subset sizes, got {len(self.injection_pattern)}")
        for s in self.injection_pattern:
            if not 1 <= s <= self.arity:
                raise ConfigError(f"subset size {s} outside 1..{self.arity}")
        if self.affected_count < 1:
            raise ConfigError("affected_count must be positive")
        if self.coefficient_scale <= 0:
            raise ConfigError("coefficient_scale must be positive")

    @property
    def coverage(self) -> float:
        return math.prod(s / self.arity for s in self.injection_pattern)

    @property
    def n_rows(self) -> int:
        return int(round(self.affected_count / self.coverage))

    @property
    def space(self) -> FeatureSpace:
        return _space(self.feature_count, self.arity)

    def as_dict(self) -> dict:
        return {
            "feature_count": self.feature_count,
            "arity": self.arity,
            "coefficient_scale": self.coefficient_scale,
            "injection_pattern": list(self.injection_pattern),
            "bias_log_odds": self.bias_log_odds,
            "affected_count": self.affected_count,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class GroundTruth:
    biased_subgroup: Subgroup
    biased_cells: frozenset = field(repr=False)
    affected_rows: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class Detection:
    recall: float
    precision: float
    empty: bool = False


def _space(m: int, a: int) -> FeatureSpace:
    return FeatureSpace(tuple(Feature(f"x{i + 1}", tuple(f"v{k + 1}" for k in range(a))) for i in range(m)))


def _spread(total: int, cells: np.ndarray, rng) -> np.ndarray:
    """Per-cell row counts: floor(total/len) each, remainder to random cells."""
    base, extra = divmod(total, len(cells))
    counts = np.full(len(cells), base, dtype=np.int64)
    counts[rng.choice(len(cells), size=extra, replace=False)] += 1
    return counts


def _model(rng, m: int, a: int, scale: float):
    coef = rng.normal(0.0, scale, size=(m, a))
    # centre so the average cell sits at log-odds 0
    intercept = -coef.mean(axis=1).sum()
    return coef, intercept


def _assemble(space, cell_codes, counts, logit_hat, shift, rng):
    codes = np.repeat(cell_codes, counts, axis=0)
    base = np.repeat(logit_hat, counts)
    truth = base + np.repeat(shift, counts)
    y = (rng.random(len(base)) < expit(truth)).astype(np.int64)
    return Dataset(space, codes, y, expit(base))


def generate_synthetic(spec: SyntheticSpec) -> tuple[Dataset, GroundTruth]:
    rng = np.random.default_rng(spec.seed)
    m, a = spec.feature_count, spec.arity
    space = spec.space
    coef, intercept = _model(rng, m, a, spec.coefficient_scale)
    chosen = [np.sort(rng.choice(a, size=s, replace=False)) for s in spec.injection_pattern]

    cell_codes = np.array(list(itertools.product(range(a), repeat=m)), dtype=np.int64)
    inside = np.ones(len(cell_codes), dtype=bool)
    for f, vals in enumerate(chosen):
        inside &= np.isin(cell_codes[:, f], vals)
    n = spec.n_rows
    if n < spec.affected_count:
        raise ConfigError("affected_count does not fit the injection pattern")
    counts = np.zeros(len(cell_codes), dtype=np.int64)
    counts[inside] = _spread(spec.affected_count, np.flatnonzero(inside), rng)
    if (~inside).any():
        counts[~inside] = _spread(n - spec.affected_count, np.flatnonzero(~inside), rng)

    logit_hat = intercept + coef[np.arange(m)[None, :], cell_codes].sum(axis=1)
    shift = np.where(inside, spec.bias_log_odds, 0.0)
    data = _assemble(space, cell_codes, counts, logit_hat, shift, rng)

    sub = Subgroup.build(space, {space.features[f].name: [space.features[f].values[v] for v in vals] for f, vals in enumerate(chosen)})
    cells = frozenset(tuple(int(c) for c in row) for row in cell_codes[inside])
    rows = np.flatnonzero(np.repeat(inside, counts))
    return data, GroundTruth(sub, cells, rows)


def generate_null(n: int, feature_count: int = 4, arity: int = 6, coefficient_scale: float = 0.5, seed: int = 0) -> Dataset:
    """Evenly spread rows whose outcomes are drawn from the predictions themselves."""
    rng = np.random.default_rng(seed)
    coef, intercept = _model(rng, feature_count, arity, coefficient_scale)
    cell_codes = np.array(list(itertools.product(range(arity), repeat=feature_count)), dtype=np.int64)
    counts = _spread(n, np.arange(len(cell_codes)), rng)
    logit_hat = intercept + coef[np.arange(feature_count)[None, :], cell_codes].sum(axis=1)
    return _assemble(_space(feature_count, arity), cell_codes, counts, logit_hat, np.zeros(len(cell_codes)), rng)


def _value_sets(subgroup: Subgroup, space: FeatureSpace) -> list[set[str]]:
    d = subgroup.as_dict()
    return [set(d.get(f.name, f.values)) for f in space.features]


def evaluate_detection(detected: Subgroup | None, truth: GroundTruth | Subgroup, space: FeatureSpace) -> Detection:
    """Cell-level recall and precision of a detected subgroup.

    A subgroup covers the Cartesian product of its value sets, with
    unconstrained features contributing all their values.
    """
    target = truth.biased_subgroup if isinstance(truth, GroundTruth) else truth
    t_sets = _value_sets(target, space)
    t_cells = math.prod(len(s) for s in t_sets)
    if detected is None:
        return Detection(0.0, 0.0, empty=True)
    d_sets = _value_sets(detected, space)
    d_cells = math.prod(len(s) for s in d_sets)
    both = math.prod(len(ds & ts) for ds, ts in zip(d_sets, t_sets))
    return Detection(both / t_cells, both / d_cells)
