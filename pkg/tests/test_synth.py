import json

import numpy as np
import pytest

from biasscan import ConfigError, IngestConfig, Subgroup, SyntheticSpec, evaluate_detection, generate_null, generate_synthetic, ingest_csv


def test_row_count_from_coverage():
    spec = SyntheticSpec()
    assert spec.coverage == pytest.approx(1 / 27)
    assert spec.n_rows == 2700
    assert SyntheticSpec(injection_pattern=(2, 2, 6, 6)).n_rows == 900


def test_exact_affected_rows_and_even_spread():
    data, truth = generate_synthetic(SyntheticSpec(seed=3))
    inside = data.matches(truth.biased_subgroup)
    assert data.n == 2700
    assert inside.sum() == 100
    assert np.array_equal(np.flatnonzero(inside), truth.affected_rows)
    _, counts = np.unique(data.codes, axis=0, return_counts=True)
    assert counts.max() - counts.min() <= 1
    assert len(truth.biased_cells) == 2 * 2 * 2 * 6


def test_ground_truth_shape():
    _, truth = generate_synthetic(SyntheticSpec(injection_pattern=(2, 2, 6, 6), seed=1))
    d = truth.biased_subgroup.as_dict()
    assert sorted(d) == ["x1", "x2"]
    assert all(len(v) == 2 for v in d.values())


def test_bias_raises_outcomes_in_region():
    data, truth = generate_synthetic(SyntheticSpec(bias_log_odds=3.0, affected_count=400, seed=2))
    inside = data.matches(truth.biased_subgroup)
    gap_in = data.y[inside].mean() - data.p[inside].mean()
    gap_out = data.y[~inside].mean() - data.p[~inside].mean()
    assert gap_in > 0.2
    assert abs(gap_out) < 0.05


def test_generation_is_seeded():
    a, _ = generate_synthetic(SyntheticSpec(seed=9))
    b, _ = generate_synthetic(SyntheticSpec(seed=9))
    c, _ = generate_synthetic(SyntheticSpec(seed=10))
    assert np.array_equal(a.y, b.y) and np.array_equal(a.p, b.p)
    assert not np.array_equal(a.p, c.p)


def test_null_is_calibrated_on_average():
    data = generate_null(20000, seed=4)
    assert abs(data.y.mean() - data.p.mean()) < 0.02


def test_csv_round_trip(tmp_path):
    data, _ = generate_synthetic(SyntheticSpec(seed=5))
    data.to_csv(tmp_path / "s.csv")
    back = ingest_csv(tmp_path / "s.csv", IngestConfig.from_tokens("y", "p", "x1,x2,x3,x4"))
    assert np.array_equal(back.codes, data.codes)
    assert np.array_equal(back.p, data.p)


@pytest.mark.parametrize(
    "kwargs",
    [dict(injection_pattern=(2, 2, 2)), dict(injection_pattern=(0, 2, 2, 6)), dict(injection_pattern=(7, 2, 2, 6)), dict(affected_count=0), dict(coefficient_scale=0)],
)
def test_spec_validation(kwargs):
    with pytest.raises(ConfigError):
        SyntheticSpec(**kwargs)


def test_detection_metrics():
    space = SyntheticSpec().space
    truth = Subgroup.build(space, {"x1": ["v1", "v2"], "x2": ["v1", "v2"]})
    assert evaluate_detection(truth, truth, space) == evaluate_detection(truth, truth, space)
    full = evaluate_detection(truth, truth, space)
    assert (full.recall, full.precision) == (1.0, 1.0)
    half = evaluate_detection(Subgroup.build(space, {"x1": ["v1"], "x2": ["v1", "v2"]}), truth, space)
    assert (half.recall, half.precision) == (0.5, 1.0)
    wide = evaluate_detection(Subgroup.build(space, {"x1": ["v1", "v2", "v3", "v4"], "x2": ["v1", "v2"]}), truth, space)
    assert (wide.recall, wide.precision) == (1.0, 0.5)
    miss = evaluate_detection(Subgroup.build(space, {"x1": ["v5"]}), truth, space)
    assert (miss.recall, miss.precision) == (0.0, 0.0)
    none = evaluate_detection(None, truth, space)
    assert none.empty and none.precision == 0.0


def test_bundled_sample_matches_truth(samples_dir):
    truth = json.loads((samples_dir / "synthetic_2226_truth.json").read_text())
    data, gt = generate_synthetic(SyntheticSpec(**{**truth["spec"], "injection_pattern": tuple(truth["spec"]["injection_pattern"])}))
    assert gt.biased_subgroup.as_dict() == truth["biased_subgroup"]
    back = ingest_csv(samples_dir / "synthetic_2226.csv", IngestConfig.from_tokens("y", "p", "x1,x2,x3,x4"))
    assert np.array_equal(back.y, data.y) and np.array_equal(back.p, data.p)
