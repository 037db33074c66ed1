"""Audit orchestration and the JSON report."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import __version__
from .data import Dataset, IngestConfig, Subgroup, subgroup_stats
from .scan import ScanConfig, best_of, scan_directions
from .scoring import PenaltyConfig, error_transform
from .significance import parametric_bootstrap

SCHEMA_NAME = "audit_report.schema.json"


@dataclass(frozen=True)
class AuditConfig:
    data: str
    ingest: IngestConfig
    scan: ScanConfig = field(default_factory=ScanConfig)
    bootstrap: int = 99
    error_scan: bool = False
    threshold: float = 0.5
    theta_sweep: tuple[float, float, int] | None = None

    def as_dict(self) -> dict:
        d = {
            "data": self.data,
            "outcome_col": self.ingest.outcome,
            "pred_col": self.ingest.prediction,
            "features": [f.token() for f in self.ingest.features],
        }
        d.update(self.scan.as_dict())
        d.update({
            "bootstrap": self.bootstrap,
            "error_scan": self.error_scan,
            "threshold": self.threshold,
            "theta_sweep": list(self.theta_sweep) if self.theta_sweep else None,
        })
        return d


def sweep_thetas(spec: tuple[float, float, int]) -> list[float]:
    lo, hi, steps = spec
    return [float(t) for t in np.linspace(lo, hi, int(steps))]


def penalty_curve(dataset: Dataset, config: ScanConfig, thetas, jobs: int = 1) -> list[dict]:
    """Best subgroup per penalty weight, for picking an elbow by eye."""
    rows = []
    for theta in thetas:
        cfg = ScanConfig(config.direction, PenaltyConfig(theta), config.restarts, config.seed, config.max_sweeps)
        res = best_of(scan_directions(dataset, cfg, jobs))
        rows.append({
            "theta": theta,
            "n_features": len(res.subgroup.constraints),
            "score": res.score,
            "penalized_score": res.penalized_score,
            "direction": res.direction.label,
            "subgroup": res.subgroup.as_dict(),
        })
    return rows


def dataset_summary(dataset: Dataset) -> dict:
    return {
        "n": dataset.n,
        "features": [{"name": f.name, "arity": f.arity, "values": list(f.values)} for f in dataset.space.features],
        "overall": subgroup_stats(dataset, Subgroup()).as_dict(),
    }


def run_audit(dataset: Dataset, config: AuditConfig, jobs: int = 1) -> dict:
    if config.error_scan:
        dataset = error_transform(dataset, config.threshold)
    results = scan_directions(dataset, config.scan, jobs)
    best = best_of(results)
    significance = None
    if config.bootstrap > 0:
        significance = parametric_bootstrap(dataset, config.scan, config.bootstrap, config.scan.seed, jobs, observed=best)
    curve = penalty_curve(dataset, config.scan, sweep_thetas(config.theta_sweep), jobs) if config.theta_sweep else []
    return {
        "tool": {"name": "biasscan", "version": __version__},
        "config": config.as_dict(),
        "dataset": dataset_summary(dataset),
        "scans": {d.label: r.as_dict() for d, r in results.items()},
        "detected": best.as_dict(),
        "scores": {"penalized": best.penalized_score, "unpenalized": best.score},
        "significance": significance.as_dict() if significance else None,
        "penalty_curve": curve,
    }


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, allow_nan=False) + "\n"


def load_schema() -> dict:
    return json.loads(resources.files("biasscan").joinpath(SCHEMA_NAME).read_text())


def summary_text(report: dict) -> str:
    det = report["detected"]
    st = det["stats"]
    lines = [
        f"rows: {report['dataset']['n']}",
        f"most biased subgroup ({det['direction']}): {det['description']}",
        f"  n={st['n']} observed={st['observed_rate']:.3f} predicted={st['expected_rate']:.3f}",
        f"  score={det['score']:.4f} penalized={det['penalized_score']:.4f} q*={det['q_star']}",
    ]
    sig = report["significance"]
    if sig:
        lines.append(f"  p-value={sig['p_value']:.4f} ({sig['replicates']} bootstrap replicates)")
    for row in report["penalty_curve"]:
        lines.append(f"  theta={row['theta']:g}: {row['n_features']} features, score={row['score']:.4f}")
    return "\n".join(lines) + "\n"
