"""Characteristic-function testing for general location families.

The registry below is closed: every family comes with a closed-form CF, a
CDF and a radially monotone modulus, which is what makes the modulus floor
over a frequency ball certifiable.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import numpy as np
from scipy import stats

from config import get_config, load_constants
from models.learner import LearnerConfig, LearnResult
from models.mixture import FamilyId, MixtureModel
from models.tester import Decision, GeneralTesterParams, Verdict
from services import gaussian_tester, learner
from services.sampling import MixtureSource, SampleSource, as_generator, sample_mlr
from utils.errors import (
    CandidateBudgetExceeded, DimensionMismatch, ModulusUnderflow, PreconditionError,
    SampleBudgetExceeded,
)
from utils.numerics import complex_gamma, log_sinh

logger = logging.getLogger(__name__)

LOG_FLOAT_TINY = math.log(np.finfo(float).tiny)
GRID_POINTS = 10**4
GRID_SAFETY = 0.9


def _logistic_cf(xi):
    x = math.pi * np.abs(xi)
    with np.errstate(over='ignore', invalid='ignore', divide='ignore'):
        value = np.exp(np.log(x) - log_sinh(x))
    return np.where(x == 0, 1.0, value).astype(complex)


def _logistic_log_modulus(r):
    if r == 0:
        return 0.0
    return float(math.log(math.pi * r) - log_sinh(math.pi * r))


@dataclass(frozen=True)
class FamilySpec:
    """Closed-form description of one base family."""
    family: FamilyId
    density: str
    cf_text: str
    cf: Callable[[np.ndarray], np.ndarray]
    log_modulus: Callable[[float], float]
    distribution: object
    location_family: bool = True
    reductions: tuple = ()

    def to_dict(self) -> Dict[str, object]:
        return {
            'family': self.family.value,
            'density': self.density,
            'cf': self.cf_text,
            'location_family': self.location_family,
            'reductions': list(self.reductions),
        }


REGISTRY: Dict[FamilyId, FamilySpec] = {
    FamilyId.GAUSSIAN: FamilySpec(
        FamilyId.GAUSSIAN, '(2π)^{-d/2} e^{-‖x-μ‖²/2}', 'e^{-‖ξ‖²/2}',
        lambda xi: np.exp(-0.5 * np.asarray(xi, float) ** 2).astype(complex),
        lambda r: -0.5 * r * r, stats.norm),
    FamilyId.CAUCHY: FamilySpec(
        FamilyId.CAUCHY, '1 / (π(1 + (x-μ)²))', 'e^{-|ξ|}',
        lambda xi: np.exp(-np.abs(np.asarray(xi, float))).astype(complex),
        lambda r: -r, stats.cauchy),
    FamilyId.LOGISTIC: FamilySpec(
        FamilyId.LOGISTIC, 'e^{-(x-μ)} / (1 + e^{-(x-μ)})²', 'πξ / sinh(πξ)',
        lambda xi: _logistic_cf(np.asarray(xi, float)),
        _logistic_log_modulus, stats.logistic),
    FamilyId.LAPLACE: FamilySpec(
        FamilyId.LAPLACE, '½ e^{-|x-μ|}', '1 / (1 + ξ²)',
        lambda xi: (1.0 / (1.0 + np.asarray(xi, float) ** 2)).astype(complex),
        lambda r: -math.log1p(r * r), stats.laplace),
    FamilyId.GUMBEL: FamilySpec(
        FamilyId.GUMBEL, 'e^{-(x-μ)} e^{-e^{-(x-μ)}}', 'Γ(1 - iξ)',
        lambda xi: complex_gamma(1.0 - 1j * np.asarray(xi, float)),
        lambda r: 0.5 * _logistic_log_modulus(r), stats.gumbel_r),
    FamilyId.EXPONENTIAL: FamilySpec(
        FamilyId.EXPONENTIAL, 'λ e^{-λx}, x ≥ 0 (parameter ln λ)', 'λ / (λ - iξ)',
        lambda xi: 1.0 / (1.0 - 1j * np.asarray(xi, float)),
        lambda r: -0.5 * math.log1p(r * r), stats.expon,
        location_family=False, reductions=('gumbel',)),
}


def family_spec(family) -> FamilySpec:
    return REGISTRY[FamilyId.parse(family)]


def families() -> List[Dict[str, object]]:
    """Registry listing: id, density, CF and supported reductions."""
    return [spec.to_dict() for spec in REGISTRY.values()]


def cf_evaluate(family, xi):
    """
    Characteristic function of the standard member of a family.

    Args:
        family: FamilyId or its name
        xi: frequency; scalars and 1-D arrays are scalar frequencies, and for the
            Gaussian family a 2-D array holds one d-dimensional frequency per row

    Returns:
        complex or np.ndarray of complex
    """
    spec = family_spec(family)
    arr = np.asarray(xi, dtype=float)
    if spec.family is FamilyId.GAUSSIAN:
        sq = np.sum(arr ** 2, axis=-1) if arr.ndim >= 2 else arr ** 2
        value = np.exp(-0.5 * sq).astype(complex)
    else:
        if arr.ndim >= 2 and arr.shape[-1] != 1:
            raise DimensionMismatch(f"Family '{spec.family.value}' is supported in d = 1 only")
        value = spec.cf(arr)
    return complex(value) if np.ndim(value) == 0 else value


def cf_min_modulus(family, M: float) -> float:
    """
    min_{|ξ| ≤ M} |CF(ξ)|, attained at |ξ| = M for every registry family.

    Raises:
        ModulusUnderflow: the floor is below the smallest positive double
    """
    if M <= 0:
        raise PreconditionError(f"M must be positive, got {M}")
    spec = family_spec(family)
    log_floor = spec.log_modulus(float(M))
    if log_floor < LOG_FLOAT_TINY:
        raise ModulusUnderflow(f"|CF| of '{spec.family.value}' underflows double precision at M={M:.6g}", M=M)
    return math.exp(log_floor)


def grid_min_modulus(family, M: float, points: int = GRID_POINTS) -> float:
    """Dense-grid minimum of |CF| on [0, M], scaled by the 0.9 safety factor."""
    grid = np.linspace(0.0, M, points)
    return GRID_SAFETY * float(np.min(np.abs(cf_evaluate(family, grid))))


def candidate_hit_probability(family, eps: float, d: int = 1) -> float:
    """P(‖X‖ ≤ ε/2) for the standard member of the family."""
    spec = family_spec(family)
    r = eps / 2.0
    if spec.family is FamilyId.GAUSSIAN:
        return float(stats.chi2.cdf(r * r, d))
    if spec.family is FamilyId.EXPONENTIAL:
        spec = REGISTRY[FamilyId.GUMBEL]
    dist = spec.distribution
    return float(dist.cdf(r) - dist.cdf(-r))


def general_main_term(means, mu_star, sigma: float) -> float:
    """Σ_j e^{-σ²‖μ_j-μ*‖²/2}."""
    points = np.asarray(means, dtype=float).reshape(len(means), -1)
    shifted = points - np.asarray(mu_star, dtype=float).reshape(1, -1)
    return math.fsum(np.exp(-sigma ** 2 * np.einsum('ij,ij->i', shifted, shifted) / 2.0))


def _tester_family(family) -> FamilyId:
    fid = FamilyId.parse(family)
    return FamilyId.GUMBEL if fid is FamilyId.EXPONENTIAL else fid


def general_select_params(k: int, d: int, delta: float, eps: float, family, profile: str = 'practical',
                          constants: Optional[dict] = None, budget_cap: Optional[int] = None,
                          n_override: Optional[int] = None) -> GeneralTesterParams:
    """
    σ, M, γ, θ, δ_M and sample budget for the CF-division tester.

    Exponential mixtures are tested after the −ln x reduction, so their
    parameters are those of the Gumbel family.
    """
    fid = _tester_family(family)
    if fid is not FamilyId.GAUSSIAN and d != 1:
        raise DimensionMismatch(f"Family '{fid.value}' is supported in d = 1 only")
    if not (delta > 0 and eps > 0):
        raise PreconditionError(f"delta and eps must be positive, got delta={delta}, eps={eps}")
    c = load_constants(profile, constants)
    bound = gaussian_tester.separation_hypothesis(k, d, delta, c['c_general_sep'], c['c_dim'])
    if eps > bound:
        raise PreconditionError(
            f"eps={eps} violates eps <= min(delta/{c['c_general_sep']:g}, "
            f"delta/({c['c_dim']:g} sqrt(min(d, ln k)))) = {bound:.6g}", bound=bound)

    log_ratio = math.log(delta / eps)
    log_k = gaussian_tester.effective_log_k(k)
    sigma2 = c['c_sigma'] / delta ** 2 * (min(d, log_k) + log_ratio)
    m2 = c['c_general_trunc'] * sigma2 * (d + log_k + log_ratio)
    m2 = max(m2, 5.0 * d * sigma2)
    gamma = sigma2 * eps ** 2 / c['c_general_gamma']
    theta = 0.5 * (math.exp(-sigma2 * eps ** 2 / 8.0) + math.exp(-sigma2 * eps ** 2 / 2.0))
    M = math.sqrt(m2)
    delta_m = cf_min_modulus(fid, M)
    log_n = gaussian_tester.log_sample_count(c['c_n'], math.log(k) - math.log(delta_m), gamma)

    cap = budget_cap or get_config().BUDGET_CAP
    if n_override is not None:
        n = int(n_override)
    elif log_n > math.log(cap):
        raise SampleBudgetExceeded(
            f"General tester needs e^{log_n:.1f} samples, above the budget cap {cap}", log_n=log_n, cap=cap)
    else:
        n = max(1, math.ceil(math.exp(log_n)))
    if n > cap:
        raise SampleBudgetExceeded(f"Sample count {n} exceeds the budget cap {cap}",
                                   log_n=math.log(n), cap=cap)

    # the θ gap covers 8γ only when σ²ε² ≤ 1, which the hypothesis ensures for Δ/ε ≥ 100
    params = GeneralTesterParams(
        family=fid.value, k=k, d=d, sigma=math.sqrt(sigma2), M=M, gamma=gamma, theta=theta,
        n=n, log_n=log_n, delta_M=delta_m, gap_guaranteed=sigma2 * eps ** 2 <= 1.0,
        profile=profile, constants=c,
    )
    logger.info(f"General params {fid.value} k={k} delta={delta} eps={eps} ({profile}): "
                f"sigma={params.sigma:.4g} M={M:.4g} delta_M={delta_m:.4g} gamma={gamma:.4g} N={n}")
    return params


def general_kernel(diff: np.ndarray, xi: np.ndarray, params: GeneralTesterParams):
    """k e^{iξ(X-μ*)} / CF(ξ) on the truncation ball, zero outside."""
    xi_sq = np.einsum('ij,ij->i', xi, xi)
    inside = xi_sq <= params.M ** 2
    if params.family == FamilyId.GAUSSIAN.value:
        inv_cf = np.exp(np.where(inside, xi_sq / 2.0, -np.inf)).astype(complex)
    else:
        cf = cf_evaluate(params.family, np.where(inside, xi[:, 0], 0.0))
        inv_cf = np.where(inside, 1.0 / cf, 0.0)
    phase = np.einsum('ij,ij->i', xi, diff)
    term = params.k * np.exp(1j * phase) * inv_cf
    return term.real, term.imag, np.abs(term)


class ExponentialReducedSource(SampleSource):
    """Exponential-mixture samples mapped through x ↦ −ln x (a Gumbel mixture in ln λ)."""

    def __init__(self, source: SampleSource):
        self.source = source
        self.d = 1
        self.generative = source.generative

    def chunk(self, start, n, generator):
        return exponential_reduction(self.source.chunk(start, n, generator))


class MlrReducedSource(SampleSource):
    """Unit-variance Gaussian mixture with means w_j, built from regression pairs."""

    def __init__(self, weights):
        self.weights = np.asarray(weights, dtype=float).ravel()
        self.d = 1

    def chunk(self, start, n, generator):
        out = np.empty(0)
        while out.size < n:
            # about 31.7% of pairs survive the |x| ≥ 1 filter
            batch = max(64, int(1.2 * (n - out.size) / 0.3173))
            pairs = sample_mlr(self.weights, batch, generator)
            out = np.concatenate([out, mlr_reduction(pairs, generator)])
        return out[:n].reshape(-1, 1)


def _prepare_source(source, family) -> SampleSource:
    fid = FamilyId.parse(family)
    if isinstance(source, MixtureModel):
        source = MixtureSource(source)
    source = gaussian_tester._as_source(source)
    if fid is FamilyId.EXPONENTIAL and not isinstance(source, ExponentialReducedSource):
        return ExponentialReducedSource(source)
    return source


def decide_general(source, mu_star, family, params: GeneralTesterParams, rng=None, **kwargs) -> Verdict:
    """Accept iff Re T̂ ≥ θ for the CF-division statistic; exponential sources are reduced first."""
    source = _prepare_source(source, family)
    estimate = gaussian_tester.run_estimator(source, mu_star, params, rng, kernel=general_kernel, **kwargs)
    decision = Decision.ACCEPT if estimate.value.real >= params.theta else Decision.REJECT
    logger.debug(f"General verdict {decision.value}: Re T={estimate.value.real:.6g} theta={params.theta:.6g}")
    return Verdict(decision=decision, statistic=estimate.value, threshold=params.theta,
                   error_budget=params.gamma, n_used=estimate.n_used, stderr=estimate.stderr)


def general_candidate_budget(k: int, eps: float, family, d: int = 1, multiplier: float = 1.0):
    """(δ, N) with δ = P(‖X‖ ≤ ε/2) and N = ceil(2 k ln k / δ)."""
    hit = candidate_hit_probability(family, eps, d)
    n = math.ceil(multiplier * 2.0 * k * gaussian_tester.effective_log_k(k) / hit)
    return hit, n


def general_learn(source, family, config: LearnerConfig, rng=None, budget_cap: Optional[int] = None,
                  threads: Optional[int] = None) -> LearnResult:
    """
    Learn the k locations of a location-family mixture.

    Exponential sources are reduced to Gumbel first, so the recovered
    locations are ln λ_j.
    """
    fid = FamilyId.parse(family)
    if not isinstance(source, MixtureModel):
        source = learner.learning_source(source)
    prepared = _prepare_source(source, fid)
    params = general_select_params(config.k, config.d, config.delta, config.eps, fid, config.profile,
                                   config.constants, budget_cap, config.tester_samples)
    _, n_candidates = general_candidate_budget(config.k, config.eps, fid, config.d, config.candidate_multiplier)
    if n_candidates > config.candidate_cap:
        raise CandidateBudgetExceeded(f"{n_candidates} candidates exceed the cap {config.candidate_cap}",
                                      candidates=n_candidates, cap=config.candidate_cap)

    def tester(src, mu_star, stream):
        return decide_general(src, mu_star, fid, params, stream, threads=1)

    return learner.learn(prepared, config, rng=rng, decide_fn=tester, n_candidates=n_candidates,
                         threads=threads, samples_per_call=params.n)


def exponential_reduction(samples) -> np.ndarray:
    """x ↦ −ln x; Exp(λ) becomes Gumbel with location ln λ."""
    arr = np.asarray(samples, dtype=float)
    if np.any(arr <= 0):
        raise PreconditionError("exponential reduction needs strictly positive samples")
    return -np.log(arr)


def mlr_reduction(pairs, rng) -> np.ndarray:
    """
    Turn regression pairs into a unit-variance Gaussian mixture with means w_j.

    Pairs with |x| < 1 are dropped; kept pairs emit y/x + N(0, 1 - 1/x²).
    """
    generator = as_generator(rng)
    arr = np.asarray(pairs, dtype=float).reshape(-1, 2)
    x, y = arr[:, 0], arr[:, 1]
    keep = np.abs(x) >= 1.0
    x, y = x[keep], y[keep]
    noise_var = 1.0 - 1.0 / (x * x)
    return y / x + np.sqrt(noise_var) * generator.standard_normal(x.size)

