"""Multidimensional subset scan: exact per-feature steps inside coordinate ascent.

For a fixed q the subgroup score is a sum of per-value contributions, each
positive on a single q-interval. With a penalty of theta*(k-1) for 1 < k < arity
values, the penalty is additive too, so the best subset of one feature is one
of: the values whose intervals (at level theta) contain some q, a singleton,
or the full value set. Without a penalty the first family reduces to the
prefixes of the values ordered by their contribution threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import _kernels as K
from ._parallel import parallel_map
from .data import Dataset, EmptySubgroup, Subgroup, SubgroupStats, subgroup_stats
from .scoring import Direction, PenaltyConfig, ScoreDetail, complexity_penalty, score_bias

BOTH = "both"
CONVERGENCE_TOL = 1e-12


@dataclass(frozen=True)
class ScanConfig:
    direction: Union[Direction, str] = BOTH
    penalty: PenaltyConfig = field(default_factory=PenaltyConfig)
    restarts: int = 50
    seed: int = 0
    max_sweeps: int = 100

    def __post_init__(self):
        if self.direction != BOTH:
            object.__setattr__(self, "direction", Direction(self.direction))
        if self.restarts < 1 or self.max_sweeps < 1:
            raise ValueError("restarts and max_sweeps must be at least 1")

    @property
    def directions(self) -> list[Direction]:
        return [Direction.UNDER, Direction.OVER] if self.direction == BOTH else [self.direction]

    def as_dict(self) -> dict:
        return {
            "direction": self.direction if self.direction == BOTH else self.direction.value,
            "theta": self.penalty.theta,
            "restarts": self.restarts,
            "seed": self.seed,
            "max_sweeps": self.max_sweeps,
        }


@dataclass(frozen=True)
class ScanResult:
    subgroup: Subgroup
    detail: ScoreDetail
    penalized_score: float
    direction: Direction
    stats: SubgroupStats
    sweeps_used: int
    restart_index: int

    @property
    def score(self) -> float:
        return self.detail.score

    def as_dict(self) -> dict:
        return {
            "direction": self.direction.label,
            "subgroup": self.subgroup.as_dict(),
            "description": str(self.subgroup),
            "score": self.detail.score,
            "penalized_score": self.penalized_score,
            "q_star": self.detail.as_dict()["q_star"],
            "at_limit": self.detail.at_limit,
            "n_features": len(self.subgroup.constraints),
            "stats": self.stats.as_dict(),
            "sweeps_used": self.sweeps_used,
            "restart_index": self.restart_index,
        }


@dataclass(frozen=True)
class FeatureStep:
    feature: str
    values: tuple[str, ...]
    subgroup: Subgroup
    score: float
    penalized_score: float


class _Kernel:
    """Dataset arrays laid out for the compiled kernels."""

    def __init__(self, dataset: Dataset):
        cells = dataset.cells
        self.space = dataset.space
        self.codes = cells.codes
        self.p = cells.p
        self.oinv = (1.0 - cells.p) / cells.p
        self.w = cells.weight
        self.pos = cells.pos
        self.arities = dataset.space.arities
        self.max_arity = int(self.arities.max())
        k = len(self.p)
        self.bufs = [np.empty(k) for _ in range(6)]

    def full_member(self) -> np.ndarray:
        member = np.zeros((len(self.arities), self.max_arity), dtype=np.uint8)
        for f, a in enumerate(self.arities):
            member[f, :a] = 1
        return member

    def nonempty(self, member: np.ndarray) -> bool:
        return K.count_rows(self.codes, self.w, member) > 0

    def score(self, member: np.ndarray, direction: Direction, theta: float) -> tuple[float, float, int]:
        score, t, flag, _ = K.pooled_score(self.codes, self.p, self.oinv, self.w, self.pos, member, direction.sign, *self.bufs[:3])
        return score - K.total_penalty(member, self.arities, theta), t, flag

    def step(self, member, j, direction: Direction, theta: float):
        return K.scan_feature(
            self.codes, self.p, self.oinv, self.w, self.pos, member, self.arities,
            j, direction.sign, float(theta), *self.bufs,
        )


def scan_feature(dataset: Dataset, subgroup: Subgroup, feature: str, direction: Direction = Direction.UNDER, penalty: PenaltyConfig = PenaltyConfig()) -> FeatureStep:
    """Best value subset for ``feature`` with every other constraint held fixed."""
    direction = Direction(direction)
    kern = _Kernel(dataset)
    j = dataset.space.position(feature)
    member = subgroup.to_mask(dataset.space)
    member[j, : kern.arities[j]] = 1
    if not kern.nonempty(member):
        raise EmptySubgroup(f"constraints other than {feature!r} match no rows")
    row, score, _, _, _ = kern.step(member, j, direction, penalty.theta)
    member[j, : kern.arities[j]] = row
    new = Subgroup.from_mask(dataset.space, member)
    feat = dataset.space.features[j]
    values = tuple(v for v, keep in zip(feat.values, row) if keep)
    return FeatureStep(feature, values, new, score, score - complexity_penalty(new, dataset.space, penalty))


def restart_rng(seed: int, restart: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(restart,)))


def _initial_member(kern: _Kernel, rng: np.random.Generator) -> np.ndarray:
    valid = kern.full_member().astype(bool)
    for _ in range(1000):
        member = (rng.random(valid.shape) < 0.5) & valid
        empty = ~member.any(axis=1)
        while empty.any():
            member[empty] = (rng.random((int(empty.sum()), valid.shape[1])) < 0.5) & valid[empty]
            empty = ~member.any(axis=1)
        member = member.astype(np.uint8)
        if kern.nonempty(member):
            return member
    return kern.full_member()


def _run_restarts(kern: _Kernel, direction: Direction, config: ScanConfig, indices) -> list:
    out = []
    m = len(kern.arities)
    for r in indices:
        rng = restart_rng(config.seed, r)
        member = _initial_member(kern, rng)
        orders = np.argsort(rng.random((config.max_sweeps, m)), axis=1)
        score, sweeps = K.run_restart(
            kern.codes, kern.p, kern.oinv, kern.w, kern.pos, member, kern.arities,
            orders, direction.sign, float(config.penalty.theta), CONVERGENCE_TOL,
        )
        out.append((r, member, score, sweeps))
    return out


_WORKER = {}


def _worker_init(dataset, direction, config):
    _WORKER["kern"] = _Kernel(dataset)
    _WORKER["direction"] = direction
    _WORKER["config"] = config


def _worker_run(indices):
    return _run_restarts(_WORKER["kern"], _WORKER["direction"], _WORKER["config"], indices)


def _chunks(n: int, parts: int) -> list[list[int]]:
    parts = max(1, min(parts, n))
    return [list(range(i, n, parts)) for i in range(parts)]


def scan_direction(dataset: Dataset, config: ScanConfig, direction: Direction, jobs: int = 1, kern: _Kernel | None = None) -> ScanResult:
    direction = Direction(direction)
    if jobs > 1:
        batches = parallel_map(_worker_run, _chunks(config.restarts, jobs), jobs, _worker_init, (dataset, direction, config))
        runs = sorted((run for batch in batches for run in batch), key=lambda r: r[0])
    else:
        runs = _run_restarts(kern or _Kernel(dataset), direction, config, range(config.restarts))

    # canonical rescoring makes the reduction independent of the search path
    kern = kern or _Kernel(dataset)
    theta = config.penalty.theta
    best = None
    scored = {}
    for r, member, _, sweeps in runs:
        key = member.tobytes()
        if key not in scored:
            scored[key] = kern.score(member, direction, theta)[0]
        val = scored[key]
        if best is None or val > best[0] or (val == best[0] and _mask_key(member) < _mask_key(best[1])):
            best = (val, member, r, sweeps)
    _, member, r, sweeps = best
    sub = Subgroup.from_mask(dataset.space, member)
    bs = score_bias(dataset, sub, direction, config.penalty)
    return ScanResult(sub, bs.detail, bs.penalized_score, direction, subgroup_stats(dataset, sub), sweeps, r)


def _mask_key(member: np.ndarray) -> tuple:
    # same order as Subgroup.sort_key: constrained features by position, then value codes
    key = []
    for f, row in enumerate(member):
        vals = tuple(np.flatnonzero(row).tolist())
        key.append((f, vals))
    return tuple(key)


def scan_directions(dataset: Dataset, config: ScanConfig, jobs: int = 1) -> dict[Direction, ScanResult]:
    kern = _Kernel(dataset) if jobs <= 1 else None
    return {d: scan_direction(dataset, config, d, jobs, kern) for d in config.directions}


def best_of(results: dict[Direction, ScanResult]) -> ScanResult:
    # ties go to the first direction listed (UNDER)
    best = None
    for res in results.values():
        if best is None or res.penalized_score > best.penalized_score:
            best = res
    return best


def mdss_scan(dataset: Dataset, config: ScanConfig = ScanConfig(), jobs: int = 1) -> ScanResult:
    """Most biased subgroup found by coordinate ascent with random restarts.

    Each restart starts from a random subgroup (every value kept with
    probability 1/2), then sweeps the features in a fresh random order,
    replacing each feature's constraint with its exact best subset, until a
    sweep leaves the penalized score unchanged. Restart ``r`` draws its
    randomness from ``(seed, r)`` only, so results do not depend on ``jobs``.
    With direction ``"both"`` the higher-scoring direction is returned.
    """
    return best_of(scan_directions(dataset, config, jobs))


def is_fixed_point(dataset: Dataset, result: ScanResult, penalty: PenaltyConfig, tol: float = 1e-12) -> bool:
    """True if no single-feature step improves the penalized score by more than tol."""
    kern = _Kernel(dataset)
    base = result.penalized_score
    for j, name in enumerate(dataset.space.names):
        member = result.subgroup.to_mask(dataset.space)
        member[j, : kern.arities[j]] = 1
        row, score, _, _, _ = kern.step(member, j, result.direction, penalty.theta)
        member[j, : kern.arities[j]] = row
        if score - K.total_penalty(member, kern.arities, penalty.theta) > base + tol:
            return False
    return True


def exhaustive_scan(dataset: Dataset, direction: Direction = Direction.UNDER, penalty: PenaltyConfig = PenaltyConfig()):
    """Score every subgroup. Exponential; meant for checking small problems."""
    import itertools

    direction = Direction(direction)
    space = dataset.space
    per_feature = []
    for feat in space.features:
        subsets = []
        for k in range(1, feat.arity + 1):
            subsets.extend(itertools.combinations(feat.values, k))
        per_feature.append(subsets)
    best = (-math.inf, None)
    for combo in itertools.product(*per_feature):
        sub = Subgroup.build(space, dict(zip(space.names, combo)))
        try:
            val = score_bias(dataset, sub, direction, penalty).penalized_score
        except EmptySubgroup:
            continue
        if val > best[0]:
            best = (val, sub)
    return best
