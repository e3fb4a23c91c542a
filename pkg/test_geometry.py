import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from services.geometry import ball_volume, epsilon_close, norm_lower_bound, separation
from utils.errors import DimensionMismatch, PreconditionError, SizeMismatch


def test_separation_on_grid():
    assert separation([[0.0], [3.0], [6.0]]) == pytest.approx(3.0)


def test_separation_single_point_is_infinite():
    assert separation([[0.0, 0.0]]) == math.inf


def test_separation_shuffled_unit_grid(generator):
    points = generator.permutation(np.arange(50.0)).reshape(-1, 1)
    assert separation(points) == pytest.approx(1.0)


def test_epsilon_close_unique_assignment():
    result = epsilon_close([[0.0], [1.0]], [[-0.02], [1.05]], 0.1)
    assert result.matched
    assert result.permutation == (0, 1)
    assert result.max_distance == pytest.approx(0.05)


def test_epsilon_close_rejects_collapsed_targets():
    result = epsilon_close([[0.0], [1.0]], [[0.5], [0.5]], 0.1)
    assert not result.matched
    assert result.max_distance == pytest.approx(0.5)


def test_epsilon_close_finds_crossed_permutation():
    result = epsilon_close([[0.0], [10.0], [20.0]], [[20.1], [0.1], [9.9]], 0.2)
    assert result.matched
    assert result.permutation == (1, 2, 0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.integers(1, 6))
def test_epsilon_close_is_the_bottleneck_optimum(seed, k):
    gen = np.random.default_rng(seed)
    a = gen.normal(size=(k, 2)) * 5
    b = gen.normal(size=(k, 2)) * 5
    brute = min(max(np.linalg.norm(a[i] - b[p[i]]) for i in range(k))
                for p in itertools.permutations(range(k)))
    result = epsilon_close(a, b, 1.0)
    assert result.max_distance == pytest.approx(brute)
    assert result.matched == (brute <= 1.0)
    assert sorted(result.permutation) == list(range(k))


def test_epsilon_close_noisy_truth_matches_identity(generator):
    truth = np.array([[0.0, 0.0], [3.0, 0.0], [0.0, 3.0], [3.0, 3.0]])
    noise = generator.normal(size=truth.shape)
    noise *= 0.1 / np.linalg.norm(noise, axis=1, keepdims=True)
    result = epsilon_close(truth, truth + noise, 0.2)
    assert result.matched
    assert result.permutation == (0, 1, 2, 3)


def test_epsilon_close_size_and_dimension_errors():
    with pytest.raises(SizeMismatch):
        epsilon_close([[0.0]], [[0.0], [1.0]], 0.1)
    with pytest.raises(DimensionMismatch):
        epsilon_close([[0.0]], [[0.0, 1.0]], 0.1)


@pytest.mark.parametrize('delta, d, j, expected', [
    (1.0, 2, 9, 0.75),
    (2.0, 1, 2, 1.0),
])
def test_norm_lower_bound(delta, d, j, expected):
    assert norm_lower_bound(delta, d, j) == pytest.approx(expected)


def test_norm_lower_bound_needs_j_at_least_two():
    with pytest.raises(PreconditionError):
        norm_lower_bound(1.0, 1, 1)


@pytest.mark.parametrize('d, r, expected', [
    (2, 1.0, math.pi),
    (3, 1.0, 4.0 * math.pi / 3.0),
    (1, 2.5, 5.0),
])
def test_ball_volume(d, r, expected):
    assert ball_volume(d, r) == pytest.approx(expected)


@given(d=st.integers(1, 30), r=st.floats(0.01, 20.0))
def test_ball_volume_below_cube(d, r):
    assert ball_volume(d, r) <= (2.0 * r) ** d * (1.0 + 1e-12)


def test_ball_volume_small_radius_high_dimension():
    assert ball_volume(7, 0.5) <= 1.0
