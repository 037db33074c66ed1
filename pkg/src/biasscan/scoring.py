"""Bernoulli multiplicative-odds bias score.

Under the null every prediction's odds are right; the alternative scales the
odds of every row in a subgroup by a common factor q. The log-likelihood ratio,
maximized over q, is

    score(S) = max_q  log(q) * sum_S y  -  sum_S log(1 - p + q p)

with q >= 1 when looking for under-estimated risk and q <= 1 for
over-estimated risk.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels as K
from .data import Dataset, EmptySubgroup, FeatureSpace, Subgroup, clip_predictions


class Direction(str, enum.Enum):
    UNDER = "under"
    OVER = "over"

    @property
    def sign(self) -> int:
        return K.UNDER if self is Direction.UNDER else K.OVER

    @property
    def label(self) -> str:
        return "UnderEstimated" if self is Direction.UNDER else "OverEstimated"


@dataclass(frozen=True)
class ScoreDetail:
    score: float
    q_star: float
    at_limit: bool = False

    def as_dict(self) -> dict:
        q = self.q_star
        if self.at_limit:
            q = "inf" if q > 0 else "0"
        return {
            "score": self.score,
            "q_star": q,
            "at_limit": self.at_limit,
        }


@dataclass(frozen=True)
class PenaltyConfig:
    theta: float = 0.0

    def __post_init__(self):
        if not self.theta >= 0.0:
            raise ValueError("penalty theta must be nonnegative")


@dataclass(frozen=True)
class BiasScore:
    detail: ScoreDetail
    penalty: float

    @property
    def score(self) -> float:
        return self.detail.score

    @property
    def penalized_score(self) -> float:
        return self.detail.score - self.penalty


def _detail(score: float, t: float, flag: int) -> ScoreDetail:
    if flag:
        return ScoreDetail(score, math.inf if t > 0 else 0.0, True)
    return ScoreDetail(score, math.exp(t), False)


def _arrays(predictions, weights):
    p = clip_predictions(np.atleast_1d(predictions)).copy()
    w = np.ones_like(p) if weights is None else np.asarray(weights, dtype=np.float64).copy()
    if p.size == 0:
        raise ValueError("empty prediction multiset")
    return p, (1.0 - p) / p, w


def optimal_q(sum_y: float, predictions: Sequence[float], direction: Direction = Direction.UNDER, weights=None) -> ScoreDetail:
    """Maximize the bias score over q within the direction's range."""
    p, oinv, w = _arrays(predictions, weights)
    if not 0 <= sum_y <= w.sum():
        raise ValueError("sum_y must lie between 0 and the number of rows")
    score, t, flag = K.optimal_t(p, oinv, w, p.size, float(sum_y), Direction(direction).sign)
    return _detail(score, t, flag)


def contribution(q: float, pos: float, predictions: Sequence[float], weights=None) -> float:
    """A value's additive contribution pos*log(q) - sum log(1 - p + q p) at fixed q."""
    p, _, w = _arrays(predictions, weights)
    return float(pos * math.log(q) - np.sum(w * np.log1p(p * (q - 1.0))))


def positive_q_interval(pos: float, predictions: Sequence[float], theta: float = 0.0, weights=None):
    """Open q-interval on which a value's contribution exceeds ``theta``, or None."""
    p, oinv, w = _arrays(predictions, weights)
    lo, hi, ok = K.positive_interval(p, oinv, w, p.size, float(pos), float(theta))
    if not ok:
        return None
    return math.exp(lo), math.exp(hi)


def contribution_threshold(pos: float, predictions: Sequence[float], direction: Direction = Direction.UNDER, weights=None) -> float:
    """The q at which a value's contribution stops being positive.

    For UNDER the contribution is positive exactly on (1, r); the returned r
    is +inf when every row is positive and 1 when the value never helps.
    OVER mirrors this on (r, 1), with r = 0 when no row is positive.
    """
    direction = Direction(direction)
    interval = positive_q_interval(pos, predictions, 0.0, weights)
    if direction is Direction.UNDER:
        if interval is None or interval[1] <= 1.0:
            return 1.0
        return interval[1]
    if interval is None or interval[0] >= 1.0:
        return 1.0
    return interval[0]


def complexity_penalty(subgroup: Subgroup, space: FeatureSpace, penalty: PenaltyConfig) -> float:
    """theta * (k - 1) per feature restricted to k values, free for k = 1 or all."""
    total = 0.0
    for name, values in subgroup.constraints:
        total += K.feature_penalty(len(values), space[name].arity, penalty.theta)
    return total


def score_bias(dataset: Dataset, subgroup: Subgroup, direction: Direction = Direction.UNDER, penalty: PenaltyConfig = PenaltyConfig()) -> BiasScore:
    direction = Direction(direction)
    cells = dataset.cells
    member = subgroup.to_mask(dataset.space)
    k = len(cells.p)
    bufs = [np.empty(k) for _ in range(3)]
    oinv = (1.0 - cells.p) / cells.p
    score, t, flag, n = K.pooled_score(cells.codes, cells.p, oinv, cells.weight, cells.pos, member, direction.sign, *bufs)
    if n == 0:
        raise EmptySubgroup(str(subgroup))
    return BiasScore(_detail(score, t, flag), complexity_penalty(subgroup, dataset.space, penalty))


def error_transform(dataset: Dataset, threshold: float = 0.5) -> Dataset:
    """Turn outcomes into misclassification indicators.

    With yhat = 1{p >= threshold}, the new outcome is 1{y != yhat} and the new
    prediction is the model-implied error probability (p if yhat = 0, else
    1 - p). Scanning the result finds subgroups with excess misclassification.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError("classification threshold must lie in (0, 1)")
    yhat = (dataset.p >= threshold).astype(np.int64)
    z = (dataset.y != yhat).astype(np.int64)
    e = np.where(yhat == 0, dataset.p, 1.0 - dataset.p)
    return dataset.replace(y=z, p=e)
