"""Gaussian-truncated Fourier tester for spherical Gaussian mixtures.

The statistic averages, over samples X and frequencies ξ ~ N(0, σ²I),

    2^{d/2} k e^{‖ξ‖²/4} e^{-‖X-μ*‖²/2} e^{iξᵀ(X-μ*)} 1{‖ξ‖ ≤ M}

whose expectation is Σ_j e^{-(σ²/2+1)‖μ_j-μ*‖²/4} up to a truncation error.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import special

from config import get_config, load_constants
from models.mixture import as_points
from models.tester import Decision, SBounds, TEstimate, TesterParams, Verdict
from services.sampling import ArraySource, RngStream, SampleSource
from utils.errors import (
    EstimatorOverflow, HypothesisViolation, PreconditionError, SampleBudgetExceeded,
)
from utils.numerics import CompensatedSum

logger = logging.getLogger(__name__)

LOG_FLOAT_MAX = math.log(np.finfo(float).max)

# kernel(diff, xi, params) -> (re, im, magnitude) per sample
Kernel = Callable[[np.ndarray, np.ndarray, object], Tuple[np.ndarray, np.ndarray, np.ndarray]]


def effective_log_k(k: int) -> float:
    """ln k with k = 1 treated as k = 2, so single-component runs stay finite."""
    return math.log(max(k, 2))


def separation_hypothesis(k: int, d: int, delta: float, c_sep: float, c_dim: float) -> float:
    """Largest admissible ε: min{Δ/c_sep, Δ/(c_dim √min{d, ln k})}."""
    m = min(d, effective_log_k(k))
    return min(delta / c_sep, delta / (c_dim * math.sqrt(m)))


def s2_hat(k: int, d: int, delta: float) -> float:
    """Closed-form upper bound 10 min{k, 1 + (32d/Δ²)^{d/2+1}} on S₂."""
    ratio = 32.0 * d / delta ** 2
    log_tail = (d / 2.0 + 1.0) * math.log(ratio)
    tail = math.inf if log_tail > LOG_FLOAT_MAX else math.exp(log_tail)
    return 10.0 * min(float(k), 1.0 + tail)


def log_sample_count(c_n: float, per_term_bound_log: float, gamma: float) -> float:
    """ln of the Hoeffding count c_N (B/γ)² for terms bounded by B = e^{per_term_bound_log}."""
    return math.log(c_n) + 2.0 * (per_term_bound_log - math.log(gamma))


def closed_forms(k: int, d: int, delta: float, eps: float, profile: str = 'practical',
                 constants: Optional[dict] = None) -> dict:
    """
    Evaluate every parameter formula without precondition or budget checks.

    Returns:
        dict: a (= σ²/2+1), sigma2, gamma, theta, s2_hat, M2, M2_reference,
              per_term_bound_log, log_n and the resolved constants
    """
    c = load_constants(profile, constants)
    log_ratio = math.log(delta / eps)
    m = min(d, effective_log_k(k))
    a_formula = c['c_sigma'] / delta ** 2 * (m + log_ratio)
    a = max(a_formula, 1.0)
    sigma2 = 2.0 * (a - 1.0)
    gamma = a * eps ** 2 / c['c_gamma']
    theta = 0.5 * (math.exp(-a * eps ** 2 / 16.0) + math.exp(-a * eps ** 2 / 4.0))
    s2 = s2_hat(k, d, delta)
    m2 = c['c_trunc'] * sigma2 * (d + math.log(s2) + math.log(c['c_gamma'] / (a * eps ** 2)))
    m2 = max(m2, 5.0 * d * sigma2)
    m2_reference = c['c_m'] / delta ** 2 * (m + log_ratio) * (d + 2.0 * log_ratio + math.log(s2))
    per_term_bound_log = 0.5 * d * math.log(2.0) + math.log(k) + m2 / 4.0
    return {
        'a': a,
        'a_clamped': a_formula < 1.0,
        'sigma2': sigma2,
        'gamma': gamma,
        'theta': theta,
        's2_hat': s2,
        'M2': m2,
        'M2_reference': m2_reference,
        'per_term_bound_log': per_term_bound_log,
        'log_n': log_sample_count(c['c_n'], per_term_bound_log, gamma),
        'constants': c,
    }


def select_params(k: int, d: int, delta: float, eps: float, profile: str = 'practical',
                  constants: Optional[dict] = None, budget_cap: Optional[int] = None,
                  n_override: Optional[int] = None) -> TesterParams:
    """
    Choose σ, M, γ, θ and the sample budget for one tester call.

    Args:
        k, d (int): component count and dimension
        delta (float): separation of the mixture means
        eps (float): closeness target
        profile (str): constants profile, 'paper' or 'practical'
        constants (dict): per-run constant overrides
        budget_cap (int): largest admissible sample count
        n_override (int): use this sample count instead of the Hoeffding one

    Returns:
        TesterParams: the selected parameters

    Raises:
        PreconditionError: ε above the separation hypothesis
        SampleBudgetExceeded: Hoeffding count above the cap
    """
    if k < 1 or d < 1:
        raise PreconditionError(f"k and d must be positive, got k={k}, d={d}")
    if not (delta > 0 and eps > 0):
        raise PreconditionError(f"delta and eps must be positive, got delta={delta}, eps={eps}")
    forms = closed_forms(k, d, delta, eps, profile, constants)
    c = forms['constants']
    bound = separation_hypothesis(k, d, delta, c['c_sep'], c['c_dim'])
    if eps > bound:
        raise PreconditionError(
            f"eps={eps} violates eps <= min(delta/{c['c_sep']:g}, delta/({c['c_dim']:g} sqrt(min(d, ln k)))) "
            f"= {bound:.6g}", bound=bound)

    cap = budget_cap or get_config().BUDGET_CAP
    log_n = forms['log_n']
    if n_override is not None:
        n = int(n_override)
    elif log_n > math.log(cap):
        raise SampleBudgetExceeded(
            f"Tester needs e^{log_n:.1f} samples, above the budget cap {cap}", log_n=log_n, cap=cap)
    else:
        n = max(1, math.ceil(math.exp(log_n)))
    if n > cap:
        raise SampleBudgetExceeded(f"Sample count {n} exceeds the budget cap {cap}",
                                   log_n=math.log(n), cap=cap)

    params = TesterParams(
        k=k, d=d,
        sigma=math.sqrt(forms['sigma2']),
        M=math.sqrt(forms['M2']),
        gamma=forms['gamma'],
        theta=forms['theta'],
        n=n,
        log_n=log_n,
        per_term_bound_log=forms['per_term_bound_log'],
        profile=profile,
        constants=c,
    )
    logger.info(f"Tester params k={k} d={d} delta={delta} eps={eps} ({profile}): "
                f"sigma={params.sigma:.4g} M={params.M:.4g} gamma={params.gamma:.4g} "
                f"theta={params.theta:.6g} N={n}")
    return params


def gaussian_kernel(diff: np.ndarray, xi: np.ndarray, params) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    xi_sq = np.einsum('ij,ij->i', xi, xi)
    x_sq = np.einsum('ij,ij->i', diff, diff)
    inside = xi_sq <= params.M ** 2
    log_mag = 0.5 * params.d * math.log(2.0) + math.log(params.k) + xi_sq / 4.0 - x_sq / 2.0
    # truncated frequencies contribute exactly zero
    mag = np.exp(np.where(inside, log_mag, -np.inf))
    phase = np.einsum('ij,ij->i', xi, diff)
    return mag * np.cos(phase), mag * np.sin(phase), mag


def _as_source(samples) -> SampleSource:
    if isinstance(samples, SampleSource):
        return samples
    return ArraySource(samples)


def _as_stream(rng) -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    if rng is None:
        return RngStream(get_config().SEED)
    return RngStream(int(rng.integers(0, 2**63 - 1)))


def run_estimator(source, mu_star, params, rng, n: Optional[int] = None,
                  kernel: Kernel = gaussian_kernel, chunk_size: Optional[int] = None,
                  threads: Optional[int] = None) -> TEstimate:
    """
    Monte Carlo estimate of the tester statistic with its standard error.

    Samples are processed in fixed chunks; chunk c draws its samples and
    frequencies from substream (c,) and partial sums are combined in chunk
    order, so the estimate is identical for any worker count.

    Raises:
        EstimatorOverflow: the per-term bound leaves double range
        InsufficientSamples: a finite source runs out
    """
    source = _as_source(source)
    stream = _as_stream(rng)
    n = int(n or params.n)
    if n < 1:
        raise PreconditionError(f"estimator needs at least one sample, got {n}")
    if params.per_term_bound_log > LOG_FLOAT_MAX:
        raise EstimatorOverflow(
            f"Per-term bound e^{params.per_term_bound_log:.1f} overflows double precision at M={params.M:.4g}",
            M=params.M)
    mu_star = np.asarray(mu_star, dtype=float).reshape(1, -1)
    if mu_star.shape[1] != source.d:
        raise PreconditionError(f"mu_star has dimension {mu_star.shape[1]}, samples have {source.d}")

    cfg = get_config()
    chunk_size = chunk_size or cfg.CHUNK_SIZE
    starts = list(range(0, n, chunk_size))

    def partial(c):
        start = starts[c]
        size = min(chunk_size, n - start)
        generator = stream.substream(c).generator()
        x = source.chunk(start, size, generator)
        xi = generator.normal(0.0, params.sigma, size=(size, source.d))
        re, im, mag = kernel(x - mu_star, xi, params)
        return (math.fsum(re), math.fsum(im), re, im, float(mag.max()))

    workers = max(1, min(threads or cfg.THREADS, len(starts)))
    if workers == 1:
        parts = [partial(c) for c in range(len(starts))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(partial, range(len(starts))))

    sum_re, sum_im = CompensatedSum(), CompensatedSum()
    sq_re, sq_im = CompensatedSum(), CompensatedSum()
    max_term = 0.0
    for s_re, s_im, re, im, peak in parts:
        sum_re.add(s_re)
        sum_im.add(s_im)
        sq_re.add_array(re * re)
        sq_im.add_array(im * im)
        max_term = max(max_term, peak)

    mean_re, mean_im = sum_re.value / n, sum_im.value / n
    var_re = max(sq_re.value / n - mean_re ** 2, 0.0)
    var_im = max(sq_im.value / n - mean_im ** 2, 0.0)
    logger.debug(f"Estimator over {n} samples in {len(starts)} chunks: "
                 f"T={mean_re:.6g}{mean_im:+.6g}i max|term|={max_term:.4g}")
    return TEstimate(value=complex(mean_re, mean_im),
                     stderr_re=math.sqrt(var_re / n),
                     stderr_im=math.sqrt(var_im / n),
                     n_used=n,
                     max_term=max_term)


def estimate_t(samples, mu_star, params: TesterParams, rng=None, **kwargs) -> complex:
    """Estimate T_μ* from samples (array or SampleSource) using params.n draws."""
    return run_estimator(samples, mu_star, params, rng, **kwargs).value


def decide(source, mu_star, params: TesterParams, rng=None, kernel: Kernel = gaussian_kernel,
           **kwargs) -> Verdict:
    """Accept iff Re T̂ ≥ θ; ties accept."""
    estimate = run_estimator(source, mu_star, params, rng, kernel=kernel, **kwargs)
    decision = Decision.ACCEPT if estimate.value.real >= params.theta else Decision.REJECT
    logger.debug(f"Verdict {decision.value}: Re T={estimate.value.real:.6g} theta={params.theta:.6g}")
    return Verdict(decision=decision, statistic=estimate.value, threshold=params.theta,
                   error_budget=params.gamma, n_used=estimate.n_used, stderr=estimate.stderr)


def analytic_main_term(means, mu_star, sigma: float) -> float:
    """Σ_j e^{-(σ²/2+1)‖μ_j-μ*‖²/4}."""
    points = as_points(means)
    shifted = points - np.asarray(mu_star, dtype=float).reshape(1, -1)
    a = sigma ** 2 / 2.0 + 1.0
    return math.fsum(np.exp(-a * np.einsum('ij,ij->i', shifted, shifted) / 4.0))


def truncation_bound(means, mu_star, sigma: float, M: float) -> float:
    """e^{-M²/(5σ²)} Σ_j e^{-‖μ_j-μ*‖²/4}: bound on the frequency-truncation bias."""
    points = as_points(means)
    shifted = points - np.asarray(mu_star, dtype=float).reshape(1, -1)
    s2 = math.fsum(np.exp(-np.einsum('ij,ij->i', shifted, shifted) / 4.0))
    if sigma == 0:
        return 0.0
    return math.exp(-M ** 2 / (5.0 * sigma ** 2)) * s2


def s_bounds(means, sigma: float, delta: float, d: int, k: int, mu_star=None) -> SBounds:
    """
    Exact S₁, S₂ around mu_star (default origin) against their closed-form bounds.

    The S₁ bound is only claimed when (σ²/2+1)Δ² ≥ 100 min{ln k, d};
    otherwise it is returned with ``s1_verifiable`` False.
    """
    points = as_points(means, d)
    if len(points) != k:
        raise PreconditionError(f"Expected {k} means, got {len(points)}")
    if mu_star is not None:
        points = points - np.asarray(mu_star, dtype=float).reshape(1, -1)
    sq_norms = np.sort(np.einsum('ij,ij->i', points, points))
    a = sigma ** 2 / 2.0 + 1.0
    s1 = math.fsum(np.exp(-a * sq_norms[1:] / 4.0))
    s2 = math.fsum(np.exp(-sq_norms / 4.0))
    s1_bound = 2.0 * math.exp(-a * delta ** 2 / 64.0) * min(k, 2 ** d)
    if delta ** 2 >= 100.0 * d:
        s2_case = 2.0
    else:
        ratio = 32.0 * d / delta ** 2
        s2_case = 1.0 + 267.0 * d / delta ** 2 * max(ratio ** (d / 2.0), 1.0)
    verifiable = a * delta ** 2 >= 100.0 * min(math.log(k), d)
    result = SBounds(s1=s1, s2=s2, s1_bound=s1_bound, s2_bound=s2_hat(k, d, delta),
                     s2_case_bound=s2_case, s1_verifiable=verifiable)
    if not verifiable:
        logger.warning(f"S1 bound hypothesis fails: (sigma^2/2+1) Delta^2 = {a * delta ** 2:.4g} "
                       f"< 100 min(ln k, d) = {100.0 * min(math.log(k), d):.4g}")
    return result


def chi_square_tail(d: int, t: float) -> Tuple[float, float]:
    """(P(χ²_d ≥ t), e^{-t/5})."""
    if t < 5 * d:
        raise HypothesisViolation(f"chi-square tail bound needs t >= 5d = {5 * d}, got t={t}")
    return float(special.gammaincc(d / 2.0, t / 2.0)), math.exp(-t / 5.0)


def chi_square_tail_check(d: int, t: float) -> bool:
    tail, bound = chi_square_tail(d, t)
    return tail <= bound


def with_sample_count(params, n: int):
    """Copy of params that consumes n samples."""
    return replace(params, n=int(n))
