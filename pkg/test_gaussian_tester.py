import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from config import load_constants
from models.mixture import FamilyId, MixtureModel
from models.tester import Decision, TesterParams
from services import gaussian_tester
from services.sampling import (
    ArraySource, MixtureSource, RngStream, ShiftedSource, default_radius, generate_separated_means,
)
from utils.errors import (
    EstimatorOverflow, HypothesisViolation, InsufficientSamples, PreconditionError, SampleBudgetExceeded,
)

TESTER_SAMPLES = 20_000


def oracle_params(k, d=1, sigma=1.0, M=4.0, n=10**6):
    return TesterParams(k=k, d=d, sigma=sigma, M=M, gamma=0.0, theta=0.0, n=n, log_n=math.log(n),
                        per_term_bound_log=0.5 * d * math.log(2.0) + math.log(k) + M * M / 4.0)


def spaced_model(k, delta=4.0):
    return MixtureModel(FamilyId.GAUSSIAN, (delta * np.arange(k)).reshape(-1, 1))


def test_closed_forms_paper_example():
    forms = gaussian_tester.closed_forms(3, 1, 10.0, 0.1, 'paper')
    assert forms['a'] == pytest.approx(28.70, abs=0.01)
    assert forms['sigma2'] == pytest.approx(55.40, abs=0.02)
    assert forms['gamma'] == pytest.approx(4.484e-3, rel=1e-3)
    assert forms['M2'] == pytest.approx(2.459e3, rel=1e-3)
    assert not forms['a_clamped']
    assert forms['M2'] >= 5.0 * forms['sigma2']


def test_select_params_paper_example_exceeds_budget():
    with pytest.raises(SampleBudgetExceeded) as info:
        gaussian_tester.select_params(3, 1, 10.0, 0.1, 'paper')
    assert info.value.log_n > math.log(info.value.cap)


def test_practical_desk_fixture_needs_wider_separation():
    # Δ=2, ε=0.2 passes the ε hypothesis but not the sample budget; harnesses use Δ=4, ε=0.8
    with pytest.raises(SampleBudgetExceeded) as info:
        gaussian_tester.select_params(5, 1, 2.0, 0.2, 'practical')
    assert info.value.exit_code == 3
    params = gaussian_tester.select_params(5, 1, 4.0, 0.8, 'practical', n_override=TESTER_SAMPLES)
    assert params.n == TESTER_SAMPLES


def test_select_params_with_override_keeps_closed_forms():
    params = gaussian_tester.select_params(3, 1, 10.0, 0.1, 'paper', n_override=1000)
    assert params.n == 1000
    assert params.sigma ** 2 == pytest.approx(55.40, abs=0.02)
    assert params.a == pytest.approx(28.70, abs=0.01)


@pytest.mark.parametrize('profile', ['paper', 'practical'])
def test_eps_equal_delta_is_rejected(profile):
    with pytest.raises(PreconditionError):
        gaussian_tester.select_params(3, 1, 2.0, 2.0, profile)


def test_threshold_sits_between_accept_and_reject_levels():
    params = gaussian_tester.select_params(3, 1, 4.0, 0.8, 'practical', n_override=TESTER_SAMPLES)
    a, eps = params.a, 0.8
    assert math.exp(-a * eps ** 2 / 4.0) < params.theta < math.exp(-a * eps ** 2 / 16.0)


@settings(max_examples=50, deadline=None)
@given(k=st.integers(2, 10**6), d=st.integers(1, 5), delta=st.floats(0.5, 50.0), frac=st.floats(0.01, 1.0))
def test_paper_profile_gap_covers_error_budget(k, d, delta, frac):
    c = load_constants('paper')
    eps = frac * gaussian_tester.separation_hypothesis(k, d, delta, c['c_sep'], c['c_dim'])
    forms = gaussian_tester.closed_forms(k, d, delta, eps, 'paper')
    upper = math.exp(-forms['a'] * eps ** 2 / 16.0)
    lower = math.exp(-forms['a'] * eps ** 2 / 4.0)
    assert upper - lower >= 8.0 * forms['gamma']


def test_oracle_single_component():
    params = oracle_params(1)
    source = MixtureSource(MixtureModel(FamilyId.GAUSSIAN, [[0.0]]))
    estimate = gaussian_tester.run_estimator(source, [0.0], params, RngStream(1))
    assert abs(estimate.value.real - 1.0) <= 3.0 * (estimate.stderr + 0.0408)


def test_oracle_three_components():
    means = [[0.0], [3.0], [6.0]]
    params = oracle_params(3)
    main = gaussian_tester.analytic_main_term(means, [0.0], 1.0)
    assert main == pytest.approx(1.0 + math.exp(-3.375) + math.exp(-13.5))
    assert gaussian_tester.truncation_bound(means, [0.0], 1.0, 4.0) == pytest.approx(
        math.exp(-3.2) * (1.0 + math.exp(-2.25) + math.exp(-9.0)))
    estimate = gaussian_tester.run_estimator(MixtureSource(MixtureModel(FamilyId.GAUSSIAN, means)),
                                             [0.0], params, RngStream(2))
    assert abs(estimate.value.real - 1.03425) <= 3.0 * estimate.stderr + 0.0451
    assert estimate.max_term <= math.exp(params.per_term_bound_log)


def test_oracle_far_reference_point():
    params = oracle_params(3, n=200_000)
    source = MixtureSource(MixtureModel(FamilyId.GAUSSIAN, [[0.0], [3.0], [6.0]]))
    value = gaussian_tester.estimate_t(source, [30.0], params, RngStream(3))
    assert abs(value) <= 0.05


def test_estimator_is_independent_of_worker_count():
    params = oracle_params(3, n=50_000)
    source = MixtureSource(spaced_model(3))
    one = gaussian_tester.run_estimator(source, [0.0], params, RngStream(4), chunk_size=4096, threads=1)
    many = gaussian_tester.run_estimator(source, [0.0], params, RngStream(4), chunk_size=4096, threads=4)
    assert one.value == many.value
    assert one.stderr == many.stderr


def test_estimator_overflow_is_an_error():
    params = oracle_params(1, M=60.0)
    with pytest.raises(EstimatorOverflow):
        gaussian_tester.run_estimator(np.zeros((10, 1)), [0.0], params, RngStream(0))


def test_estimator_needs_enough_samples():
    params = oracle_params(1, n=1000)
    with pytest.raises(InsufficientSamples):
        gaussian_tester.run_estimator(ArraySource(np.zeros((100, 1))), [0.0], params, RngStream(0))


def test_estimator_accepts_plain_arrays():
    params = gaussian_tester.with_sample_count(oracle_params(1), 100)
    value = gaussian_tester.estimate_t(np.zeros((100, 1)), [0.0], params, RngStream(0))
    assert isinstance(value, complex)


def test_main_term_translation_identity():
    means = np.array([[1.0, 2.0], [4.0, 2.0], [1.0, 6.0]])
    shift = means[0]
    assert gaussian_tester.analytic_main_term(means, shift, 0.7) == pytest.approx(
        gaussian_tester.analytic_main_term(means - shift, [0.0, 0.0], 0.7))
    assert gaussian_tester.analytic_main_term([[0.0]], [0.0], 3.0) == 1.0


def _accept_rate(model, mu_star, params, trials, stream_id):
    decisions = [gaussian_tester.decide(MixtureSource(model), mu_star, params, RngStream(trial, stream_id))
                 for trial in range(trials)]
    return sum(v.decision is Decision.ACCEPT for v in decisions) / trials


@pytest.mark.parametrize('mu_star', [[0.0], [4.0], [1.3], [-2.7]])
def test_verdict_is_translation_equivariant(mu_star):
    params = gaussian_tester.select_params(3, 1, 4.0, 0.8, 'practical', n_override=5000)
    source = MixtureSource(spaced_model(3))
    direct = gaussian_tester.decide(source, mu_star, params, RngStream(21, 2))
    shifted = gaussian_tester.decide(ShiftedSource(source, -np.asarray(mu_star)), [0.0], params, RngStream(21, 2))
    assert direct.decision is shifted.decision
    assert direct.statistic == shifted.statistic


def test_accepts_at_a_true_mean():
    model = spaced_model(5)
    params = gaussian_tester.select_params(5, 1, 4.0, 0.8, 'practical', n_override=TESTER_SAMPLES)
    assert _accept_rate(model, [0.0], params, 100, 1) >= 0.9


def test_rejects_halfway_between_means():
    model = spaced_model(5)
    params = gaussian_tester.select_params(5, 1, 4.0, 0.8, 'practical', n_override=TESTER_SAMPLES)
    assert _accept_rate(model, [2.0], params, 100, 2) <= 0.1


def test_single_component_accepts_at_its_mean():
    params = gaussian_tester.select_params(1, 1, 4.0, 0.8, 'practical', n_override=TESTER_SAMPLES)
    assert _accept_rate(spaced_model(1), [0.0], params, 30, 3) >= 2.0 / 3.0


@pytest.mark.slow
def test_two_dimensional_accept_and_reject():
    model = MixtureModel(FamilyId.GAUSSIAN, [[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]])
    params = gaussian_tester.select_params(3, 2, 4.0, 0.8, 'practical', n_override=10_000)
    assert _accept_rate(model, [0.0, 0.0], params, 30, 4) >= 0.9
    assert _accept_rate(model, [2.0, 2.0], params, 30, 5) <= 0.1


def test_verdict_reports_threshold_and_budget():
    params = gaussian_tester.select_params(3, 1, 4.0, 0.8, 'practical', n_override=TESTER_SAMPLES)
    verdict = gaussian_tester.decide(MixtureSource(spaced_model(3)), [0.0], params, RngStream(6))
    body = verdict.to_dict()
    assert body['theta'] == params.theta
    assert body['gamma'] == params.gamma
    assert body['n_used'] == TESTER_SAMPLES
    assert body['decision'] in ('Accept', 'Reject')


def test_s_bounds_fixed_example():
    result = gaussian_tester.s_bounds([[0.0], [3.0], [6.0]], math.sqrt(55.4), 3.0, 1, 3)
    assert result.s1_verifiable
    assert result.s1 <= result.s1_bound
    assert result.s2 == pytest.approx(1.0 + math.exp(-2.25) + math.exp(-9.0))
    assert result.s2_holds


def test_s_bounds_single_component():
    result = gaussian_tester.s_bounds([[0.0]], 1.0, 1.0, 1, 1)
    assert result.s1 == 0.0
    assert result.s1_holds


def test_s_bounds_flags_unverifiable_hypothesis():
    result = gaussian_tester.s_bounds([[0.0], [1.0], [2.0]], 0.0, 1.0, 1, 3)
    assert not result.s1_verifiable


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.integers(2, 30), d=st.integers(1, 3),
       delta=st.floats(0.5, 10.0), slack=st.floats(1.01, 3.0))
def test_s_bounds_hold_on_random_separated_sets(seed, k, d, delta, slack):
    gen = np.random.default_rng(seed)
    means = generate_separated_means(k, d, delta, default_radius(k, d, delta), gen)
    a = max(1.0, slack * 100.0 * min(math.log(k), d) / delta ** 2)
    result = gaussian_tester.s_bounds(means, math.sqrt(2.0 * (a - 1.0)), delta, d, k, mu_star=means[0])
    assert result.s1_verifiable
    assert result.s1_holds
    assert result.s2_holds


@pytest.mark.parametrize('d, t, expected', [
    (1, 5.0, 0.025347),
    (2, 10.0, math.exp(-5.0)),
])
def test_chi_square_tail_values(d, t, expected):
    tail, bound = gaussian_tester.chi_square_tail(d, t)
    assert tail == pytest.approx(expected, rel=1e-4)
    assert tail <= bound


def test_chi_square_tail_check_three_dimensions():
    assert gaussian_tester.chi_square_tail_check(3, 15.0)


def test_chi_square_tail_needs_t_above_5d():
    with pytest.raises(HypothesisViolation):
        gaussian_tester.chi_square_tail(2, 9.0)
