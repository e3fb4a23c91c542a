"""Moment-matched point-set pairs in one dimension and their TV certificates."""
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Tuple

import numpy as np
from scipy import integrate, optimize, stats
from scipy.linalg import null_space

from config import get_config
from models.hard_instance import HardInstancePair, LowerBoundParams, TVBound
from services.geometry import ball_volume, epsilon_close, separation
from services.sampling import RngStream, as_generator
from utils.errors import HypothesisViolation, PreconditionError, QuadratureError, SearchExhausted
from utils.numerics import log_factorial

logger = logging.getLogger(__name__)

MOMENT_TOLERANCE = 1e-9
OBJECTIVE_TOLERANCE = 1e-18
DEFAULT_STARTS = 32
QUAD_MARGIN = 10.0
QUAD_TOLERANCE = 1e-9
GEOMETRY_SLACK = 1e-12


def lower_bound_params(k: int, d: int, C: float) -> LowerBoundParams:
    """
    Parameters of the moment-matching lower bound: t = 4C ln k,
    R = √(C ln k)/10 and Δ = R d / (6 e t).

    Raises:
        HypothesisViolation: names the failing inequality
    """
    if C < 100:
        raise HypothesisViolation(f"lower bound needs C >= 100, got C={C}")
    if k < 3:
        raise HypothesisViolation(f"lower bound needs k >= 3 so that ln ln k > 0, got k={k}")
    if d < 1:
        raise HypothesisViolation(f"lower bound needs d >= 1, got d={d}")
    log_k = math.log(k)
    if d > log_k / math.log(log_k):
        raise HypothesisViolation(f"lower bound needs d <= ln k / ln ln k = {log_k / math.log(log_k):.6g}, got d={d}")
    if math.log(8 * math.e * C) > (1 - 1 / math.e) * log_k / d:
        raise HypothesisViolation(
            f"lower bound needs ln(8eC) = {math.log(8 * math.e * C):.6g} <= (1-1/e) ln k / d "
            f"= {(1 - 1 / math.e) * log_k / d:.6g}")
    t = 4.0 * C * log_k
    R = math.sqrt(C * log_k) / 10.0
    delta = R * d / (6.0 * math.e * t)
    params = LowerBoundParams(k=k, d=d, C=C, t=t, R=R, delta=delta,
                              n_points=(2.0 * math.e * t / d) ** d,
                              log_tv_target=math.log(2.0) - C * log_k)
    logger.info(f"Lower-bound params k={k} d={d} C={C}: t={t:.6g} R={R:.6g} delta={delta:.6g}")
    return params


def base_grid(n: int, delta: float) -> np.ndarray:
    """n points spaced 3Δ, centred at 0."""
    return 3.0 * delta * (np.arange(n) - (n - 1) / 2.0)


def pair_from_direction(x, base: np.ndarray, delta: float) -> Tuple[np.ndarray, np.ndarray]:
    """Antipodal perturbation μ ± Δ x / max|x|."""
    x = np.asarray(x, dtype=float)
    y = delta * x / np.max(np.abs(x))
    return base + y, base - y


def _moment_gaps(mu_p: np.ndarray, mu_q: np.ndarray, t: int, R: float) -> np.ndarray:
    p, q = mu_p / (2.0 * R), mu_q / (2.0 * R)
    orders = np.arange(1, t + 1)[:, None]
    return (p[None, :] ** orders).sum(axis=1) - (q[None, :] ** orders).sum(axis=1)


def moment_residuals(mu_p, mu_q, t: int, R: float):
    """|m_{t'}(P) - m_{t'}(Q)| for t' = 1..t, on points scaled by 1/(2R), summed exactly."""
    p = np.asarray(mu_p, dtype=float) / (2.0 * R)
    q = np.asarray(mu_q, dtype=float) / (2.0 * R)
    return [abs(math.fsum(p ** order) - math.fsum(q ** order)) for order in range(1, t + 1)]


def _local_search(x0, residual, objective):
    x = optimize.minimize(objective, x0, method='Nelder-Mead',
                          options={'maxiter': 4000 * len(x0), 'xatol': 1e-13, 'fatol': 1e-32}).x
    x = optimize.minimize(objective, x, method='Powell',
                          options={'maxiter': 4000 * len(x0), 'xtol': 1e-13, 'ftol': 1e-32}).x
    if np.max(np.abs(x)) > 0:
        x = optimize.least_squares(residual, x, method='trf', xtol=1e-15, ftol=1e-15, gtol=1e-15).x
    return x, objective(x)


def build_moment_matched_pair(n: int, t: int, delta: float, R: float, rng=None,
                              starts: int = DEFAULT_STARTS, threads: Optional[int] = None) -> HardInstancePair:
    """
    Search for two Δ-separated 1-D point sets whose first t moments agree.

    Points are a 3Δ grid perturbed by ±Δ x/max|x|. For t <= 2 the moment
    conditions are linear in x and solved directly; otherwise a multistart
    Nelder-Mead, Powell and least-squares chain minimises the squared moment
    gaps. The best start is chosen by (objective, start index).

    Args:
        n (int): points per set
        t (int): number of matched moments
        delta (float): separation
        R (float): base radius; the grid must fit N <= R/(3Δ)
        rng: RngStream or numpy Generator for the start directions

    Returns:
        HardInstancePair: verified pair

    Raises:
        PreconditionError: N < t+1 or N > R/(3Δ)
        SearchExhausted: no start reached the moment tolerance
    """
    if n < 2 or t < 1:
        raise PreconditionError(f"need N >= 2 and t >= 1, got N={n}, t={t}")
    if n < t + 1:
        raise PreconditionError(f"moment matching of order t={t} needs N >= t+1 = {t + 1}, got N={n}")
    if n > R / (3.0 * delta):
        raise PreconditionError(f"N={n} points spaced 3Δ do not fit: N <= R/(3Δ) = {R / (3.0 * delta):.6g}")

    base = base_grid(n, delta)

    def residual(x):
        if not np.any(x):
            return np.full(t, 1.0)
        mu_p, mu_q = pair_from_direction(x, base, delta)
        return _moment_gaps(mu_p, mu_q, t, R)

    def objective(x):
        r = residual(x)
        return float(r @ r)

    if t <= 2:
        constraints = np.vstack([np.ones(n), base])[:t]
        best_x = null_space(constraints)[:, 0]
        best_g, best_index = objective(best_x), 0
    else:
        stream = rng if isinstance(rng, RngStream) else RngStream(
            get_config().SEED if rng is None else int(as_generator(rng).integers(0, 2**63 - 1)))

        def run(index):
            x0 = stream.substream(index).generator().standard_normal(n)
            x, g = _local_search(x0, residual, objective)
            return g, index, x

        workers = max(1, min(threads or get_config().THREADS, starts))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(starts)))
        best_g, best_index, best_x = min(results, key=lambda item: (item[0], item[1]))
        logger.info(f"Moment search N={n} t={t}: best objective {best_g:.3g} at start {best_index}")

    if not best_g < OBJECTIVE_TOLERANCE:
        raise SearchExhausted(f"No start reached objective < {OBJECTIVE_TOLERANCE:g}; best {best_g:.3g}",
                              objective=best_g, starts=starts)

    # canonical sign: first nonzero coordinate positive
    nonzero = np.flatnonzero(best_x)
    if best_x[nonzero[0]] < 0:
        best_x = -best_x
    mu_p, mu_q = pair_from_direction(best_x, base, delta)
    residuals = moment_residuals(mu_p, mu_q, t, R)
    matching = epsilon_close(mu_p.reshape(-1, 1), mu_q.reshape(-1, 1), delta)
    floor = delta * (1.0 - GEOMETRY_SLACK)

    failures = []
    if max(residuals) > MOMENT_TOLERANCE:
        failures.append(f"moment residual {max(residuals):.3g} > {MOMENT_TOLERANCE:g}")
    if separation(mu_p.reshape(-1, 1)) < floor or separation(mu_q.reshape(-1, 1)) < floor:
        failures.append("a set is not delta-separated")
    if matching.max_distance < floor:
        failures.append(f"bottleneck distance {matching.max_distance:.6g} < delta")
    if max(np.max(np.abs(mu_p)), np.max(np.abs(mu_q))) > 2.0 * R:
        failures.append("points leave the 2R ball")
    if failures:
        raise SearchExhausted(f"Pair failed verification: {'; '.join(failures)}", objective=best_g)

    return HardInstancePair(
        mu_p=mu_p, mu_q=mu_q, t=t, delta=delta, R=R, direction=best_x,
        moment_residuals=residuals, param_distance=matching.max_distance,
        objective=best_g, start_index=best_index,
        density_condition_met=math.e * (t + 1) <= n,
    )


def l2_squared_bound(t: float, R: float, d: int = 1) -> float:
    """4 e^{-t²/(80R²)} + 2 (t/4R)^d (2R)^{2t} / t!, evaluated in log space."""
    first = 4.0 * math.exp(-t * t / (80.0 * R * R))
    log_second = (math.log(2.0) + d * math.log(t / (4.0 * R)) + 2.0 * t * math.log(2.0 * R)
                  - float(log_factorial(t)))
    return first + math.exp(log_second)


def tv_bound(t: float, R: float, eps_tail: float, d: int = 1) -> TVBound:
    """TV ≤ ε + √Vol_d(R')/2 · ‖P̃ - Q̃‖₂ with R' = 2R + √d + √(2 ln(1/ε))."""
    if not 0 < eps_tail < 1:
        raise PreconditionError(f"eps_tail must lie in (0, 1), got {eps_tail}")
    if t / (4.0 * R) < math.sqrt(5.0 * d):
        raise HypothesisViolation(f"TV bound needs t/(4R) >= sqrt(5d); got t/(4R) = {t / (4.0 * R):.6g} "
                                  f"< {math.sqrt(5.0 * d):.6g}")
    l2 = l2_squared_bound(t, R, d)
    r_prime = 2.0 * R + math.sqrt(d) + math.sqrt(2.0 * math.log(1.0 / eps_tail))
    tv = eps_tail + math.sqrt(ball_volume(d, r_prime)) / 2.0 * math.sqrt(l2)
    bound = TVBound(l2_squared=l2, tv=tv, r_prime=r_prime, eps_tail=eps_tail)
    if bound.vacuous:
        logger.warning(f"TV bound {tv:.4g} is vacuous (t={t}, R={R})")
    return bound


def tv_upper_bound(pair: HardInstancePair, eps_tail: float) -> TVBound:
    """TV certificate for a moment-matched pair."""
    if max(pair.moment_residuals) > MOMENT_TOLERANCE:
        raise HypothesisViolation(f"moments are not matched: residual {max(pair.moment_residuals):.3g}")
    return tv_bound(pair.t, pair.R, eps_tail, d=1)


def tv_numeric(mu_p, mu_q=None) -> float:
    """
    ½∫|p - q| for uniform mixtures of unit Gaussians at mu_p and mu_q, by
    adaptive quadrature over [min μ - 10, max μ + 10].

    Raises:
        QuadratureError: the integrator reports non-convergence
    """
    if isinstance(mu_p, HardInstancePair):
        mu_p, mu_q = mu_p.mu_p, mu_p.mu_q
    p_locs = np.asarray(mu_p, dtype=float).ravel()
    q_locs = np.asarray(mu_q, dtype=float).ravel()
    everything = np.concatenate([p_locs, q_locs])
    lo, hi = everything.min() - QUAD_MARGIN, everything.max() + QUAD_MARGIN

    def integrand(x):
        p = stats.norm.pdf(x - p_locs).mean()
        q = stats.norm.pdf(x - q_locs).mean()
        return 0.5 * abs(p - q)

    # one quad call per interval between consecutive locations
    edges = np.unique(np.concatenate([[lo], everything, [hi]]))
    value, abserr = 0.0, 0.0
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', integrate.IntegrationWarning)
        for a, b in zip(edges[:-1], edges[1:]):
            result = integrate.quad(integrand, a, b, limit=200, epsabs=QUAD_TOLERANCE / len(edges),
                                    epsrel=1e-8, full_output=1)
            if len(result) > 3:
                raise QuadratureError(f"TV quadrature did not converge on [{a:.6g}, {b:.6g}]: {result[3]}",
                                      abserr=result[1], interval=[float(a), float(b)])
            value += result[0]
            abserr += result[1]
    logger.debug(f"Numeric TV {value:.6g} (abserr {abserr:.2g})")
    return float(value)
