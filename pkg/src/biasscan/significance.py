"""Parametric-bootstrap p-values for the scan statistic.

Each replicate redraws every outcome from its own prediction and reruns the
whole scan with the same configuration. The recorded statistic is the maximum
over all subgroups, so the resulting p-value already accounts for searching
the full subgroup space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._parallel import parallel_map
from .data import Dataset
from .scan import ScanConfig, ScanResult, _Kernel, best_of, scan_direction

MIN_REPLICATES = 19


@dataclass(frozen=True)
class SignificanceReport:
    observed_score: float
    null_scores: list[float] = field(repr=False)
    p_value: float
    replicates: int
    seed: int

    def as_dict(self) -> dict:
        return {
            "observed_score": self.observed_score,
            "p_value": self.p_value,
            "replicates": self.replicates,
            "seed": self.seed,
            "null_scores": list(self.null_scores),
        }


def p_value(observed: float, null_scores) -> float:
    """Add-one Monte Carlo p-value; never zero."""
    null = np.asarray(null_scores, dtype=np.float64)
    return float((1 + np.count_nonzero(null >= observed)) / (1 + null.size))


def replicate_rng(seed: int, b: int) -> np.random.Generator:
    # tag 1 keeps outcome draws apart from restart streams seeded the same way
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1, b)))


def simulate_outcomes(dataset: Dataset, seed: int, b: int) -> np.ndarray:
    return (replicate_rng(seed, b).random(dataset.n) < dataset.p).astype(np.int64)


def _replicate_score(dataset: Dataset, config: ScanConfig, seed: int, b: int) -> float:
    null = dataset.replace(y=simulate_outcomes(dataset, seed, b))
    kern = _Kernel(null)
    results = {d: scan_direction(null, config, d, kern=kern) for d in config.directions}
    return best_of(results).penalized_score


_WORKER = {}


def _init(dataset, config, seed):
    _WORKER.update(dataset=dataset, config=config, seed=seed)


def _run(indices):
    w = _WORKER
    return [_replicate_score(w["dataset"], w["config"], w["seed"], b) for b in indices]


def null_distribution(dataset: Dataset, config: ScanConfig, replicates: int, seed: int, jobs: int = 1) -> list[float]:
    parts = max(1, min(jobs, replicates))
    chunks = [list(range(i, replicates, parts)) for i in range(parts)]
    out = parallel_map(_run, chunks, jobs, _init, (dataset, config, seed))
    scores = [0.0] * replicates
    for idx, vals in zip(chunks, out):
        for b, v in zip(idx, vals):
            scores[b] = v
    return scores


def parametric_bootstrap(
    dataset: Dataset,
    config: ScanConfig,
    replicates: int = 99,
    seed: int = 0,
    jobs: int = 1,
    observed: ScanResult | float | None = None,
) -> SignificanceReport:
    """Null distribution of the maximum penalized scan score and its p-value.

    ``observed`` may be a finished scan of the real data (or its score); if
    omitted the scan is run here with the same configuration.
    """
    if replicates < MIN_REPLICATES:
        raise ValueError(f"need at least {MIN_REPLICATES} replicates for p < 0.05 to be reachable")
    if observed is None:
        kern = _Kernel(dataset)
        observed = best_of({d: scan_direction(dataset, config, d, kern=kern) for d in config.directions})
    obs = observed.penalized_score if isinstance(observed, ScanResult) else float(observed)
    null = null_distribution(dataset, config, replicates, seed, jobs)
    return SignificanceReport(obs, null, p_value(obs, null), replicates, seed)
