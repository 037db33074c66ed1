"""Repeated inject-and-detect runs over synthetic injection patterns."""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from .scan import ScanConfig, best_of, scan_directions
from .significance import parametric_bootstrap
from .synth import SyntheticSpec, evaluate_detection, generate_synthetic


def rep_seed(seed: int, pattern_index: int, rep: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(2, pattern_index, rep)).generate_state(1)[0])


def _mean_ci(values) -> dict:
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        return {"mean": None, "ci_low": None, "ci_high": None, "count": 0}
    mean = float(x.mean())
    half = 1.96 * float(x.std(ddof=1)) / math.sqrt(x.size) if x.size > 1 else 0.0
    return {"mean": mean, "ci_low": mean - half, "ci_high": mean + half, "count": int(x.size)}


def run_pattern(base: SyntheticSpec, pattern_index: int, reps: int, scan: ScanConfig, bootstrap: int, alpha: float, jobs: int = 1) -> dict:
    recalls, precisions, detected, det_recalls, det_precisions = [], [], [], [], []
    for rep in range(reps):
        spec = replace(base, seed=rep_seed(base.seed, pattern_index, rep))
        data, truth = generate_synthetic(spec)
        cfg = replace(scan, seed=spec.seed)
        best = best_of(scan_directions(data, cfg, jobs))
        det = evaluate_detection(best.subgroup, truth, data.space)
        recalls.append(det.recall)
        precisions.append(det.precision)
        if bootstrap > 0:
            sig = parametric_bootstrap(data, cfg, bootstrap, spec.seed, jobs, observed=best)
            hit = sig.p_value <= alpha
            detected.append(float(hit))
            if hit:
                det_recalls.append(det.recall)
                det_precisions.append(det.precision)
    row = {
        "pattern": "x".join(str(s) for s in base.injection_pattern),
        "n_rows": base.n_rows,
        "repetitions": reps,
        "recall": _mean_ci(recalls),
        "precision": _mean_ci(precisions),
        "detection_rate": _mean_ci(detected) if bootstrap > 0 else None,
        "recall_when_detected": _mean_ci(det_recalls) if bootstrap > 0 else None,
        "precision_when_detected": _mean_ci(det_precisions) if bootstrap > 0 else None,
    }
    return row


def run_experiment(base: SyntheticSpec, patterns, reps: int, scan: ScanConfig, bootstrap: int = 99, alpha: float = 0.05, jobs: int = 1) -> list[dict]:
    rows = []
    for i, pattern in enumerate(patterns):
        spec = replace(base, injection_pattern=tuple(pattern))
        rows.append(run_pattern(spec, i, reps, scan, bootstrap, alpha, jobs))
    return rows


def flatten(rows: list[dict]) -> list[dict]:
    """One flat record per pattern, for CSV output."""
    flat = []
    for row in rows:
        rec = {"pattern": row["pattern"], "n_rows": row["n_rows"], "repetitions": row["repetitions"]}
        for key in ("recall", "precision", "detection_rate", "recall_when_detected", "precision_when_detected"):
            stats = row[key] or {}
            for part in ("mean", "ci_low", "ci_high"):
                rec[f"{key}_{part}"] = stats.get(part)
        flat.append(rec)
    return flat
