import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from biasscan import Dataset, Direction, FeatureSpace, PenaltyConfig, Subgroup, error_transform, optimal_q, score_bias
from biasscan.scoring import complexity_penalty, contribution, contribution_threshold, positive_q_interval

import oracle

UNDER, OVER = Direction.UNDER, Direction.OVER


def test_calibrated_pair_scores_zero():
    d = optimal_q(1, [0.5, 0.5])
    assert d.q_star == pytest.approx(1.0) and d.score == pytest.approx(0.0, abs=1e-12)


def test_under_estimated_pair():
    d = optimal_q(1, [0.2, 0.2])
    assert d.q_star == pytest.approx(4.0, rel=1e-10)
    assert d.score == pytest.approx(0.4462871026284194, abs=1e-12)
    assert d.score == pytest.approx(oracle.grid_score(1, [0.2, 0.2]), abs=1e-9)


def test_all_positive_is_a_limit():
    d = optimal_q(1, [0.5])
    assert d.at_limit and math.isinf(d.q_star)
    assert d.score == pytest.approx(math.log(2), abs=1e-12)
    assert d.as_dict()["q_star"] == "inf"


def test_all_negative_over_is_a_limit():
    d = optimal_q(0, [0.3, 0.4], OVER)
    assert d.at_limit and d.q_star == 0.0
    assert d.score == pytest.approx(-math.log(0.7) - math.log(0.6), abs=1e-12)
    assert d.as_dict()["q_star"] == "0"


def test_over_estimated_pair():
    d = optimal_q(1, [0.6, 0.7], OVER)
    assert d.q_star == pytest.approx(0.5345224838248488, rel=1e-9)
    assert d.score == pytest.approx(oracle.root_score(1, [0.6, 0.7], -1)[0], abs=1e-12)


def test_wrong_direction_scores_zero():
    d = optimal_q(0, [0.5, 0.5], UNDER)
    assert d.score == 0.0 and d.q_star == 1.0
    assert optimal_q(2, [0.5, 0.5], OVER).score == 0.0


def test_sum_y_out_of_range():
    with pytest.raises(ValueError):
        optimal_q(3, [0.5, 0.5])


def test_score_bias_four_rows():
    # q* solves 2 = 4 * 0.2q / (0.8 + 0.2q), so q* = 4
    ds = Dataset(FeatureSpace.from_dict({"g": ["x"]}), np.zeros((4, 1), int), [1, 1, 0, 0], [0.2] * 4)
    s = score_bias(ds, Subgroup())
    assert s.detail.q_star == pytest.approx(4.0, rel=1e-10)
    assert s.score == pytest.approx(0.8925742052568388, abs=1e-12)
    assert s.score == pytest.approx(oracle.grid_score(2, [0.2] * 4), abs=1e-9)


def test_contribution_threshold_examples():
    assert math.isinf(contribution_threshold(2, [0.5, 0.5]))
    assert contribution_threshold(1, [0.5, 0.5]) == 1.0
    assert contribution_threshold(3, [0.5] * 4) == pytest.approx(11.4445250462408, rel=1e-10)
    r = contribution_threshold(1, [0.6, 0.7], OVER)
    assert r < 1
    assert contribution(r, 1, [0.6, 0.7]) == pytest.approx(0.0, abs=1e-10)


def test_positive_interval_with_penalty():
    lo, hi = positive_q_interval(3, [0.5] * 4, theta=0.1)
    for q in (lo, hi):
        assert contribution(q, 3, [0.5] * 4) == pytest.approx(0.1, abs=1e-9)
    assert contribution(math.sqrt(lo * hi), 3, [0.5] * 4) > 0.1
    assert positive_q_interval(2, [0.5] * 4, theta=0.1) is None


def test_interval_sign_agrees_with_direct_evaluation():
    rng = np.random.default_rng(5)
    for _ in range(200):
        n = int(rng.integers(1, 8))
        p = rng.uniform(0.05, 0.95, n)
        pos = int(rng.integers(0, n + 1))
        theta = float(rng.choice([0.0, rng.uniform(0, 1)]))
        iv = positive_q_interval(pos, p, theta)
        for q in np.exp(rng.uniform(-6, 6, 20)):
            inside = iv is not None and iv[0] < q < iv[1]
            val = contribution(q, pos, p)
            if abs(val - theta) > 1e-7:
                assert inside == (val > theta)


def test_complexity_penalty():
    space = FeatureSpace.from_dict({"a": list("xyzw"), "b": list("xy")})
    pen = PenaltyConfig(0.5)
    assert complexity_penalty(Subgroup.build(space, {"a": ["x"]}), space, pen) == 0.0
    assert complexity_penalty(Subgroup.build(space, {"a": ["x", "y", "z"]}), space, pen) == 1.0
    assert complexity_penalty(Subgroup.build(space, {"a": ["x", "y"], "b": ["y"]}), space, pen) == 0.5
    with pytest.raises(ValueError):
        PenaltyConfig(-1.0)


def test_score_is_additive_at_fixed_q():
    rng = np.random.default_rng(9)
    p = rng.uniform(0.1, 0.9, 12)
    y = (rng.random(12) < 0.6).astype(int)
    split = rng.integers(0, 3, 12)
    q = 2.5
    total = contribution(q, y.sum(), p)
    parts = sum(contribution(q, y[split == v].sum(), p[split == v]) for v in range(3) if (split == v).any())
    assert total == pytest.approx(parts, abs=1e-12)


def test_error_transform():
    ds = Dataset(FeatureSpace.from_dict({"g": ["x"]}), np.zeros((4, 1), int), [1, 0, 0, 1], [0.8, 0.7, 0.2, 0.3])
    et = error_transform(ds, 0.5)
    assert et.y.tolist() == [0, 1, 0, 1]
    assert et.p.tolist() == pytest.approx([0.2, 0.3, 0.2, 0.3])
    with pytest.raises(ValueError):
        error_transform(ds, 1.0)


@settings(max_examples=200, deadline=None)
@given(
    p=st.lists(st.floats(0.01, 0.99), min_size=1, max_size=12),
    frac=st.floats(0, 1),
    over=st.booleans(),
)
def test_matches_root_oracle(p, frac, over):
    pos = round(frac * len(p))
    sign = -1 if over else 1
    d = optimal_q(pos, p, OVER if over else UNDER)
    ref, _ = oracle.root_score(pos, p, sign)
    assert d.score == pytest.approx(ref, abs=1e-9)
    assert d.score >= -1e-15


@settings(max_examples=100, deadline=None)
@given(p=st.lists(st.floats(0.01, 0.99), min_size=1, max_size=10), frac=st.floats(0, 1))
def test_direction_mirror(p, frac):
    pos = round(frac * len(p))
    a = optimal_q(pos, p, OVER)
    b = optimal_q(len(p) - pos, [1 - x for x in p], UNDER)
    assert a.score == pytest.approx(b.score, abs=1e-10)
    assert a.at_limit == b.at_limit
