import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from models.mixture import FamilyId, MixtureModel
from services.geometry import separation
from services.sampling import (
    ArraySource, MixtureSource, RngStream, ShiftedSource, base_draws, default_radius,
    generate_separated_means, sample, sample_mlr,
)
from utils.errors import InsufficientSamples, PackingInfeasible
from utils.numerics import open_uniform


@pytest.mark.parametrize('k, d, delta, radius', [
    (3, 1, 2.0, 10.0),
    (5, 2, 1.0, 10.0),
    (20, 3, 1.5, default_radius(20, 3, 1.5)),
])
def test_generated_means_are_separated(k, d, delta, radius):
    means = generate_separated_means(k, d, delta, radius, RngStream(7))
    assert means.shape == (k, d)
    assert separation(means) >= delta
    assert np.all(np.linalg.norm(means, axis=1) <= radius)


@pytest.mark.parametrize('family, distribution', [
    (FamilyId.GAUSSIAN, stats.norm),
    (FamilyId.CAUCHY, stats.cauchy),
    (FamilyId.LOGISTIC, stats.logistic),
    (FamilyId.LAPLACE, stats.laplace),
    (FamilyId.GUMBEL, stats.gumbel_r),
    (FamilyId.EXPONENTIAL, stats.expon),
])
def test_base_draws_follow_family_cdf(family, distribution):
    draws = base_draws(family, 20_000, 1, RngStream(11).generator()).ravel()
    assert stats.kstest(draws, distribution.cdf).pvalue > 1e-3


def test_mixture_draws_follow_mixture_cdf():
    model = MixtureModel(FamilyId.CAUCHY, [[-3.0], [0.0], [3.0]])
    draws = sample(model, 30_000, RngStream(12)).ravel()

    def mixture_cdf(x):
        return np.mean([stats.cauchy.cdf(x - m) for m in (-3.0, 0.0, 3.0)], axis=0)

    assert stats.kstest(draws, mixture_cdf).pvalue > 1e-3


def test_generate_packing_infeasible():
    with pytest.raises(PackingInfeasible):
        generate_separated_means(100, 1, 1.0, 10.0, RngStream(0))


def test_generate_is_deterministic_per_seed():
    first = generate_separated_means(5, 2, 1.0, 10.0, RngStream(42))
    second = generate_separated_means(5, 2, 1.0, 10.0, RngStream(42))
    other = generate_separated_means(5, 2, 1.0, 10.0, RngStream(43))
    np.testing.assert_array_equal(first, second)
    assert not np.array_equal(first, other)


def test_substreams_are_distinct_and_reproducible():
    stream = RngStream(3, 1)
    a = stream.substream(0).generator().random(4)
    b = stream.substream(1).generator().random(4)
    np.testing.assert_array_equal(a, RngStream(3, 1, (0,)).generator().random(4))
    assert not np.array_equal(a, b)


def test_sample_independent_of_worker_count(three_gaussians):
    one = sample(three_gaussians, 50_000, RngStream(11), chunk_size=4096, threads=1)
    many = sample(three_gaussians, 50_000, RngStream(11), chunk_size=4096, threads=4)
    np.testing.assert_array_equal(one, many)


def test_single_gaussian_moments():
    draws = sample(MixtureModel(FamilyId.GAUSSIAN, [[0.0]]), 10**6, RngStream(1))
    assert abs(draws.mean()) < 0.01
    assert abs(draws.var() - 1.0) < 0.02


def test_cauchy_median():
    draws = sample(MixtureModel(FamilyId.CAUCHY, [[5.0]]), 10**6, RngStream(2))
    assert abs(np.median(draws) - 5.0) < 0.05


def test_symmetric_pair_splits_evenly():
    draws = sample(MixtureModel(FamilyId.GAUSSIAN, [[-10.0], [10.0]]), 100_000, RngStream(3))
    assert abs(np.mean(draws > 0) - 0.5) < 0.01


def test_exponential_rate_from_log_location():
    draws = sample(MixtureModel(FamilyId.EXPONENTIAL, [[np.log(2.0)]]), 200_000, RngStream(4))
    assert np.all(draws > 0)
    assert draws.mean() == pytest.approx(0.5, abs=0.01)


@pytest.mark.parametrize('family', list(FamilyId))
def test_base_draws_are_finite(family, generator):
    draws = base_draws(family, 10_000, 1, generator)
    assert draws.shape == (10_000, 1)
    assert np.all(np.isfinite(draws))


@settings(max_examples=25)
@given(seed=st.integers(0, 2**32 - 1))
def test_open_uniform_avoids_endpoints(seed):
    u = open_uniform(np.random.default_rng(seed), 10_000)
    assert u.min() > 0.0 and u.max() < 1.0


def test_mlr_pure_noise():
    pairs = sample_mlr([0.0], 10**6, RngStream(5))
    assert pairs.shape == (10**6, 2)
    assert abs(pairs[:, 1].mean()) < 0.01
    assert pairs[:, 1].std() == pytest.approx(1.0, abs=0.01)


@pytest.mark.parametrize('weights, slope', [([2.0], 2.0), ([-3.0, 3.0], 0.0)])
def test_mlr_regression_slope(weights, slope):
    pairs = sample_mlr(weights, 10**6, RngStream(6))
    x, y = pairs[:, 0], pairs[:, 1]
    assert float(x @ y / (x @ x)) == pytest.approx(slope, abs=0.02)


def test_array_source_sequential_replay_and_exhaustion(generator):
    data = np.arange(10.0).reshape(-1, 1)
    source = ArraySource(data)
    np.testing.assert_array_equal(source.chunk(2, 3, generator).ravel(), [2.0, 3.0, 4.0])
    assert not source.generative
    with pytest.raises(InsufficientSamples):
        source.chunk(5, 6, generator)


def test_array_source_bootstrap_draws_rows(generator):
    data = np.arange(10.0).reshape(-1, 1)
    draws = ArraySource(data, 'bootstrap').chunk(0, 1000, generator)
    assert draws.shape == (1000, 1)
    assert set(draws.ravel()) <= set(data.ravel())


def test_shifted_source(three_gaussians):
    gen_a, gen_b = RngStream(9).generator(), RngStream(9).generator()
    plain = MixtureSource(three_gaussians).chunk(0, 100, gen_a)
    shifted = ShiftedSource(MixtureSource(three_gaussians), [2.5]).chunk(0, 100, gen_b)
    np.testing.assert_allclose(shifted, plain + 2.5)
