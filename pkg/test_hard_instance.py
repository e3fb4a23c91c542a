import math

import numpy as np
import pytest
from scipy import stats

from services import hard_instance
from services.geometry import separation
from services.sampling import RngStream
from utils.errors import HypothesisViolation, PreconditionError


def test_lower_bound_params_example():
    params = hard_instance.lower_bound_params(10**6, 1, 100)
    assert params.t == pytest.approx(400 * math.log(10**6))
    assert params.t == pytest.approx(5526.2, abs=0.1)
    assert params.R == pytest.approx(3.717, abs=1e-3)
    assert params.delta == pytest.approx(params.R / (6 * math.e * params.t))
    assert params.moment_order == 5526


@pytest.mark.parametrize('k, d, C', [
    (10**6, 1, 50),
    (10**6, 13, 100),
    (10**6, 5, 100),
    (2, 1, 100),
])
def test_lower_bound_params_hypotheses(k, d, C):
    with pytest.raises(HypothesisViolation):
        hard_instance.lower_bound_params(k, d, C)


def test_two_point_pair_is_antisymmetric():
    pair = hard_instance.build_moment_matched_pair(2, 1, 0.1, 1.0)
    np.testing.assert_allclose(pair.mu_p, [-0.05, 0.05], atol=1e-15)
    np.testing.assert_allclose(pair.mu_q, [-0.25, 0.25], atol=1e-15)
    assert pair.param_distance == pytest.approx(0.2)
    assert max(pair.moment_residuals) <= 1e-15


def test_moment_residuals_are_raw_sums():
    residuals = hard_instance.moment_residuals([0.0, 0.0, 0.0], [0.2, 0.2, 0.2], 2, 1.0)
    # three points at 0.2/(2R) = 0.1
    assert residuals == pytest.approx([0.3, 0.03], rel=1e-12)


def test_six_point_pair_matches_two_moments():
    pair = hard_instance.build_moment_matched_pair(6, 2, 0.05, 1.0)
    assert max(pair.moment_residuals) <= 1e-9
    assert separation(pair.mu_p.reshape(-1, 1)) >= 0.05 * (1 - 1e-12)
    assert separation(pair.mu_q.reshape(-1, 1)) >= 0.05 * (1 - 1e-12)
    assert pair.param_distance >= 0.05 * (1 - 1e-12)
    assert np.max(np.abs(np.concatenate([pair.mu_p, pair.mu_q]))) <= 2.0
    assert not pair.density_condition_met


def test_pair_json_fields():
    body = hard_instance.build_moment_matched_pair(6, 2, 0.05, 1.0).to_dict()
    assert body['N'] == 6
    assert len(body['moment_residuals']) == 2
    assert body['tv_upper_bound'] is None


def test_antipodal_direction_swaps_sets():
    base = hard_instance.base_grid(4, 0.1)
    x = np.array([0.3, -1.0, 0.2, 0.5])
    p, q = hard_instance.pair_from_direction(x, base, 0.1)
    q2, p2 = hard_instance.pair_from_direction(-x, base, 0.1)
    np.testing.assert_array_equal(p, p2)
    np.testing.assert_array_equal(q, q2)


@pytest.mark.parametrize('n, t, delta, R', [
    (3, 3, 0.05, 1.0),
    (8, 2, 0.05, 1.0),
    (1, 1, 0.05, 1.0),
])
def test_pair_preconditions(n, t, delta, R):
    with pytest.raises(PreconditionError):
        hard_instance.build_moment_matched_pair(n, t, delta, R)


@pytest.mark.slow
def test_three_moment_search_is_deterministic():
    first = hard_instance.build_moment_matched_pair(5, 3, 0.05, 1.0, rng=RngStream(3, 5), starts=8)
    second = hard_instance.build_moment_matched_pair(5, 3, 0.05, 1.0, rng=RngStream(3, 5), starts=8, threads=1)
    assert max(first.moment_residuals) <= 1e-9
    assert first.start_index == second.start_index
    np.testing.assert_array_equal(first.mu_p, second.mu_p)


def test_l2_squared_bound_example():
    expected = 4 * math.exp(-5) + 10 * 2.0 ** 40 / math.factorial(20)
    assert hard_instance.l2_squared_bound(20, 1.0) == pytest.approx(expected, rel=1e-12)


def test_tv_bound_vacuous_is_flagged():
    bound = hard_instance.tv_bound(10, 1.0, 0.1)
    assert bound.tv > 1.0
    assert bound.vacuous


def test_tv_bound_non_vacuous():
    bound = hard_instance.tv_bound(8, 0.5, 0.01)
    assert bound.tv == pytest.approx(0.651, abs=2e-3)
    assert not bound.vacuous


@pytest.mark.parametrize('eps_tail', [0.0, 1.0, 1.5])
def test_tv_bound_eps_tail_range(eps_tail):
    with pytest.raises(PreconditionError):
        hard_instance.tv_bound(20, 1.0, eps_tail)


def test_tv_upper_bound_hypothesis_fails_for_small_t():
    pair = hard_instance.build_moment_matched_pair(6, 2, 0.05, 1.0)
    with pytest.raises(HypothesisViolation):
        hard_instance.tv_upper_bound(pair, 0.01)


def test_tv_numeric_identical_and_disjoint():
    assert hard_instance.tv_numeric([0.0, 3.0], [0.0, 3.0]) == pytest.approx(0.0, abs=1e-9)
    assert hard_instance.tv_numeric([0.0], [100.0]) == pytest.approx(1.0, abs=1e-6)


def test_tv_numeric_uses_every_location_as_a_break():
    # 300 far-apart locations; each component pair contributes 2Φ(1/2) - 1
    mu_p = 30.0 * np.arange(150)
    tv = hard_instance.tv_numeric(mu_p, mu_p + 1.0)
    assert tv == pytest.approx(2.0 * stats.norm.cdf(0.5) - 1.0, abs=1e-7)


def test_tv_numeric_of_matched_pair_is_small():
    pair = hard_instance.build_moment_matched_pair(6, 2, 0.05, 1.0)
    tv = hard_instance.tv_numeric(pair)
    assert 0.0 < tv < 0.05
    assert tv < hard_instance.tv_numeric(pair.mu_p, pair.mu_p + 0.05)


@pytest.mark.slow
def test_matching_more_moments_does_not_increase_tv():
    previous = math.inf
    for t in (1, 2, 3):
        pair = hard_instance.build_moment_matched_pair(6, t, 0.05, 1.0, rng=RngStream(7, 5), starts=8)
        tv = hard_instance.tv_numeric(pair)
        assert tv <= previous + 1e-6
        previous = tv
