"""Mean recovery by candidate generation, majority-voted testing and 2ε clustering."""
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from config import get_config
from models.learner import LearnerConfig, LearnResult
from models.mixture import as_points
from models.tester import Verdict
from services import gaussian_tester
from services.sampling import ArraySource, RngStream, SampleSource
from utils.errors import CandidateBudgetExceeded, ClusterCountMismatch, PreconditionError
from utils.numerics import log_gamma

logger = logging.getLogger(__name__)

# decide_fn(source, mu_star, stream) -> Verdict
DecideFn = Callable[[object, np.ndarray, RngStream], Verdict]

CANDIDATE_STREAM = 0
VOTE_STREAM = 1


def candidate_budget(k: int, d: int, eps: float, multiplier: float = 1.0,
                     candidate_cap: Optional[int] = None) -> Tuple[float, int]:
    """
    Probability that one sample lands ε/2-close to a given mean, and the candidate count.

    p = r*^d e^{-r*²/2} / (2^{d/2} k Γ(d/2+1)) with r* = min{ε/2, √d}, and
    N = ceil(2 ln k / p).

    Raises:
        CandidateBudgetExceeded: N above candidate_cap
    """
    if k < 1 or d < 1 or eps <= 0:
        raise PreconditionError(f"candidate budget needs k, d >= 1 and eps > 0, got k={k}, d={d}, eps={eps}")
    r = min(eps / 2.0, math.sqrt(d))
    log_p = (d * math.log(r) - r * r / 2.0
             - 0.5 * d * math.log(2.0) - math.log(k) - log_gamma(d / 2.0 + 1.0))
    p = math.exp(log_p)
    n = math.ceil(multiplier * 2.0 * gaussian_tester.effective_log_k(k) / p)
    cap = candidate_cap or get_config().CANDIDATE_CAP
    if n > cap:
        raise CandidateBudgetExceeded(f"{n} candidates exceed the cap {cap}", candidates=n, cap=cap)
    return p, n


def cluster(points, threshold: float) -> List[np.ndarray]:
    """
    Single-linkage clusters: i and i' share a block iff a chain of pairwise
    distances <= threshold connects them.

    Returns:
        list of index arrays, ordered by their smallest index
    """
    if threshold <= 0:
        raise PreconditionError(f"cluster threshold must be positive, got {threshold}")
    pts = as_points(points)
    n = len(pts)
    if n == 0:
        return []
    pairs = cKDTree(pts).query_pairs(threshold, output_type='ndarray')
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    blocks = {}
    for index, label in enumerate(labels):
        blocks.setdefault(label, []).append(index)
    return [np.asarray(block) for block in sorted(blocks.values(), key=lambda b: b[0])]


def learning_source(source) -> SampleSource:
    """Source the learner draws candidates and votes from.

    Every vote runs the tester on fresh samples, so finite arrays (and
    sequential ArraySources) are resampled with replacement rather than
    replayed from row 0.
    """
    if isinstance(source, ArraySource):
        return source if source.generative else ArraySource(source.data, mode='bootstrap')
    if isinstance(source, SampleSource):
        return source
    return ArraySource(source, mode='bootstrap')


def vote_count(n_candidates: int, vote_multiplier: float) -> int:
    """R = ceil(c ln N), at least one vote."""
    return max(1, math.ceil(vote_multiplier * math.log(max(n_candidates, 1))))


def learn(source, config: LearnerConfig, rng=None, decide_fn: Optional[DecideFn] = None,
          n_candidates: Optional[int] = None, threads: Optional[int] = None,
          budget_cap: Optional[int] = None, samples_per_call: Optional[int] = None) -> LearnResult:
    """
    Recover the k means of a separated mixture.

    Draws N candidate points from the source, keeps those a strict majority
    of R tester calls accept (ties reject), clusters the survivors at 2ε and
    returns the most confidently accepted member of each cluster.

    Args:
        source: SampleSource or sample array (arrays are resampled per vote)
        config (LearnerConfig): problem size and tuning
        rng: RngStream (or numpy Generator) driving every draw
        decide_fn: inner tester; defaults to the Gaussian tester at select_params
        n_candidates (int): candidate count; defaults to candidate_budget

    Returns:
        LearnResult: representatives and run accounting

    Raises:
        ClusterCountMismatch: the accepted candidates do not form k clusters
        CandidateBudgetExceeded, SampleBudgetExceeded: budgets exceeded
    """
    started = time.perf_counter()
    source = learning_source(source)
    stream = gaussian_tester._as_stream(rng)
    if source.d != config.d:
        raise PreconditionError(f"Source dimension {source.d} does not match config d={config.d}")

    if decide_fn is None:
        params = gaussian_tester.select_params(config.k, config.d, config.delta, config.eps, config.profile,
                                               config.constants, budget_cap, config.tester_samples)
        samples_per_call = params.n

        def decide_fn(src, mu_star, substream):
            return gaussian_tester.decide(src, mu_star, params, substream, threads=1)

    if n_candidates is None:
        _, n_candidates = candidate_budget(config.k, config.d, config.eps, config.candidate_multiplier,
                                           config.candidate_cap)
    elif n_candidates > config.candidate_cap:
        raise CandidateBudgetExceeded(f"{n_candidates} candidates exceed the cap {config.candidate_cap}",
                                      candidates=n_candidates, cap=config.candidate_cap)
    votes = vote_count(n_candidates, config.vote_multiplier)
    logger.info(f"Learning k={config.k} d={config.d}: {n_candidates} candidates x {votes} votes")

    candidates = source.chunk(0, n_candidates, stream.substream(CANDIDATE_STREAM).generator())

    def accept_fraction(i):
        accepts = 0
        for j in range(votes):
            verdict = decide_fn(source, candidates[i], stream.substream(VOTE_STREAM, i, j))
            accepts += verdict.accepted
        return accepts / votes

    cfg = get_config()
    workers = max(1, min(threads or cfg.THREADS, n_candidates))
    if workers == 1:
        fractions = [accept_fraction(i) for i in range(n_candidates)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            fractions = list(pool.map(accept_fraction, range(n_candidates)))
    fractions = np.asarray(fractions)

    # strict majority; exactly half rejects
    kept = np.flatnonzero(fractions > 0.5)
    accepted = candidates[kept]
    blocks = cluster(accepted, 2.0 * config.eps) if len(accepted) else []
    tester_calls = n_candidates * votes
    samples_used = n_candidates + tester_calls * int(samples_per_call or 0)
    wall_time_ms = (time.perf_counter() - started) * 1000.0

    representatives = []
    for block in blocks:
        # most confident member; ties go to the earliest candidate
        best = block[np.argmax(fractions[kept[block]])]
        representatives.append(accepted[best])
    means_hat = np.asarray(representatives).reshape(-1, config.d)

    if len(blocks) != config.k:
        logger.warning(f"Found {len(blocks)} clusters, expected {config.k}")
        raise ClusterCountMismatch(
            f"Accepted candidates form {len(blocks)} clusters, expected {config.k}",
            count=len(blocks), expected=config.k,
            cluster_sizes=[int(len(b)) for b in blocks], means_hat=means_hat.tolist(),
            candidates_drawn=n_candidates, tester_calls=tester_calls)

    logger.info(f"Learned {config.k} means from {len(accepted)} accepted candidates "
                f"in {wall_time_ms:.0f} ms")
    return LearnResult(
        means_hat=means_hat,
        clusters=[accepted[block] for block in blocks],
        candidates_drawn=n_candidates,
        tester_calls=tester_calls,
        samples_used=samples_used,
        wall_time_ms=wall_time_ms,
        accepted=accepted,
    )
