"""Subgroup scan for systematic mis-calibration of probabilistic classifiers."""

__version__ = "0.1.0"

from .data import (  # noqa: E402
    ConfigError,
    DataError,
    Dataset,
    EmptySubgroup,
    Feature,
    FeatureSpace,
    IngestConfig,
    Subgroup,
    SubgroupStats,
    discretize,
    ingest_csv,
    subgroup_stats,
)
from .scan import ScanConfig, ScanResult, exhaustive_scan, mdss_scan, scan_direction, scan_directions  # noqa: E402
from .scoring import Direction, PenaltyConfig, ScoreDetail, error_transform, optimal_q, score_bias  # noqa: E402
from .significance import SignificanceReport, parametric_bootstrap  # noqa: E402
from .synth import SyntheticSpec, evaluate_detection, generate_null, generate_synthetic  # noqa: E402

__all__ = [
    "ConfigError", "DataError", "Dataset", "EmptySubgroup", "Feature", "FeatureSpace", "IngestConfig",
    "Subgroup", "SubgroupStats", "discretize", "ingest_csv", "subgroup_stats",
    "ScanConfig", "ScanResult", "exhaustive_scan", "mdss_scan", "scan_direction", "scan_directions",
    "Direction", "PenaltyConfig", "ScoreDetail", "error_transform", "optimal_q", "score_bias",
    "SignificanceReport", "parametric_bootstrap",
    "SyntheticSpec", "evaluate_detection", "generate_null", "generate_synthetic",
]
