"""Separation and closeness geometry for point sets, plus small analytic utilities."""
import logging
import math

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching
from scipy.spatial.distance import cdist, pdist

from models.mixture import MatchingResult, as_points
from utils.errors import DimensionMismatch, PreconditionError, SizeMismatch
from utils.numerics import log_gamma

logger = logging.getLogger(__name__)


def separation(means) -> float:
    """Minimum pairwise Euclidean distance; +inf for fewer than two points."""
    points = as_points(means)
    if len(points) < 2:
        return math.inf
    return float(pdist(points).min())


def _perfect_matching(adjacency: np.ndarray):
    matching = maximum_bipartite_matching(csr_matrix(adjacency), perm_type='column')
    if np.any(matching < 0):
        return None
    return matching


def epsilon_close(a, b, eps: float) -> MatchingResult:
    """
    Exact bottleneck matching between two equal-size point sets.

    Binary-searches the sorted pairwise distances for the smallest threshold
    admitting a perfect matching, so the returned matching is optimal.

    Args:
        a: first point set (k points)
        b: second point set (k points)
        eps (float): closeness radius

    Returns:
        MatchingResult: ``permutation[i]`` is the index in ``b`` matched to ``a[i]``
    """
    if eps <= 0:
        raise PreconditionError(f"eps must be positive, got {eps}")
    pa, pb = as_points(a), as_points(b)
    if len(pa) != len(pb):
        raise SizeMismatch(f"Point sets differ in size: {len(pa)} vs {len(pb)}")
    if pa.shape[1] != pb.shape[1]:
        raise DimensionMismatch(f"Point sets differ in dimension: {pa.shape[1]} vs {pb.shape[1]}")
    if len(pa) == 0:
        return MatchingResult(matched=True, max_distance=0.0, permutation=())

    distances = cdist(pa, pb)
    candidates = np.unique(distances)
    lo, hi = 0, len(candidates) - 1
    best = _perfect_matching(distances <= candidates[hi])
    while lo < hi:
        mid = (lo + hi) // 2
        matching = _perfect_matching(distances <= candidates[mid])
        if matching is None:
            lo = mid + 1
        else:
            hi, best = mid, matching

    permutation = tuple(int(j) for j in best)
    max_distance = float(distances[np.arange(len(pa)), best].max())
    return MatchingResult(matched=max_distance <= eps, max_distance=max_distance,
                          permutation=permutation)


def norm_lower_bound(delta: float, d: int, j: int) -> float:
    """Lower bound on the j-th smallest norm in a Δ-separated set, j ≥ 2."""
    if j < 2:
        raise PreconditionError(f"norm lower bound needs j >= 2, got {j}")
    return max(delta / 2.0, delta * j ** (1.0 / d) / 4.0)


def ball_volume(d: int, r: float) -> float:
    """Volume of the d-dimensional Euclidean ball of radius r."""
    if r < 0:
        raise PreconditionError(f"radius must be nonnegative, got {r}")
    if r == 0:
        return 0.0
    return math.exp(0.5 * d * math.log(math.pi) + d * math.log(r) - log_gamma(d / 2.0 + 1.0))
