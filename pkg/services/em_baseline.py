"""Plain EM for uniform-weight, identity-covariance Gaussian mixtures.

Benchmarking baseline only: no separation guarantees.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp
from scipy.spatial.distance import cdist
from sklearn.cluster import kmeans_plusplus

from models.mixture import as_points
from services.sampling import as_generator
from utils.errors import PreconditionError

logger = logging.getLogger(__name__)


@dataclass
class EMResult:
    means: np.ndarray
    log_likelihood: float
    iterations: int
    converged: bool


def _seed_means(x, k, generator):
    # integer seed drawn from the stream
    centers, _ = kmeans_plusplus(x, k, random_state=int(generator.integers(0, 2**31 - 1)))
    return centers


def em_fit(samples, k: int, rng, max_iter: int = 500, tol: float = 1e-8) -> EMResult:
    """Fit k unit-variance components with equal weights by expectation-maximization."""
    x = as_points(samples)
    if len(x) < k:
        raise PreconditionError(f"EM needs at least k={k} samples, got {len(x)}")
    generator = as_generator(rng)
    means = _seed_means(x, k, generator)
    previous = -np.inf
    log_lik = previous
    for iteration in range(1, max_iter + 1):
        # E step: responsibilities in log space
        log_density = -0.5 * cdist(x, means, 'sqeuclidean')
        log_norm = logsumexp(log_density, axis=1, keepdims=True)
        resp = np.exp(log_density - log_norm)
        log_lik = float(log_norm.sum())
        # M step: weights and covariance are fixed
        mass = resp.sum(axis=0)
        empty = mass <= 0
        mass[empty] = 1.0
        means = np.where(empty[:, None], means, resp.T @ x / mass[:, None])
        if abs(log_lik - previous) <= tol * max(1.0, abs(log_lik)):
            logger.debug(f"EM converged after {iteration} iterations, log-likelihood {log_lik:.6g}")
            return EMResult(means=means, log_likelihood=log_lik, iterations=iteration, converged=True)
        previous = log_lik
    logger.warning(f"EM stopped after {max_iter} iterations without converging")
    return EMResult(means=means, log_likelihood=log_lik, iterations=max_iter, converged=False)
