"""Handlers behind the CLI subcommands.

Each handler takes the validated experiment config (global flags already
merged in, seed resolved) and returns a CommandResult. The config is echoed
into every payload so a run can be reproduced from its own output.
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np

import store
from config import get_config
from models.learner import LearnerConfig
from models.mixture import FamilyId, MixtureModel
from services import gaussian_tester, learner, location_family
from services.em_baseline import em_fit
from services.geometry import epsilon_close, separation
from services.hard_instance import (
    DEFAULT_STARTS, build_moment_matched_pair, lower_bound_params, tv_numeric, tv_upper_bound,
)
from services.sampling import (
    ArraySource, MixtureSource, RngStream, default_radius, generate_separated_means, sample, sample_mlr,
)
from services.verification import default_runner
from utils.errors import (
    EXIT_OK, EXIT_REJECT, ClusterCountMismatch, HypothesisViolation, PreconditionError, SpecmixError,
)

logger = logging.getLogger(__name__)

# stream ids; commands never share random streams
GENERATE_STREAM = 0
SAMPLE_STREAM = 1
TEST_STREAM = 2
LEARN_STREAM = 3
SWEEP_STREAM = 4
HARD_INSTANCE_STREAM = 5

DEFAULT_EPS_RATIO = 0.2
DEFAULT_EM_SAMPLES = 10_000

SWEEP_COLUMNS = [
    'd', 'delta', 'k', 'eps', 'family', 'method', 'trials', 'status', 'successes',
    'success_rate', 'mean_samples', 'mean_wall_time_ms', 'errors', 'error',
]


@dataclass
class CommandResult:
    payload: Dict[str, Any]
    exit_code: int = EXIT_OK
    csv_text: Optional[str] = None


def _require(cfg: Dict[str, Any], *keys: str):
    missing = [key for key in keys if cfg.get(key) is None]
    if missing:
        raise PreconditionError(f"Missing required setting(s): {', '.join(missing)}", missing=missing)
    values = tuple(cfg[key] for key in keys)
    return values[0] if len(values) == 1 else values


def _profile(cfg: Dict[str, Any], default: Optional[str] = None) -> str:
    return cfg.get('profile') or default or get_config().PROFILE


def _resolve_source(cfg: Dict[str, Any], mode: str, generator):
    """
    The sample source a tester or learner reads from.

    Returns:
        (source, family, truth): truth is the true mean array when known
    """
    if cfg.get('weights'):
        weights = np.asarray(cfg['weights'], dtype=float)
        return location_family.MlrReducedSource(weights), FamilyId.GAUSSIAN, weights.reshape(-1, 1)
    if cfg.get('model'):
        model = store.load_model(cfg['model'], cfg.get('pair_side', 'p'))
        return MixtureSource(model), model.family, model.means
    if cfg.get('samples'):
        data = store.load_samples(cfg['samples'])
        family = FamilyId.parse(cfg.get('family', 'gaussian'))
        if cfg.get('mlr'):
            data = location_family.mlr_reduction(data, generator).reshape(-1, 1)
            family = FamilyId.GAUSSIAN
        return ArraySource(data, mode), family, None
    raise PreconditionError("One of 'model', 'samples' or 'weights' is required")


def _separation_for(cfg: Dict[str, Any], truth: Optional[np.ndarray]) -> float:
    if cfg.get('delta') is not None:
        return float(cfg['delta'])
    if truth is not None and len(truth) > 1:
        return separation(truth)
    raise PreconditionError("'delta' is required when the true means are unknown or k = 1")


def _eps_for(cfg: Dict[str, Any], delta: float, default_ratio: Optional[float] = None) -> float:
    if cfg.get('eps') is not None:
        return float(cfg['eps'])
    ratio = cfg.get('eps_ratio') or default_ratio
    if ratio is None:
        raise PreconditionError("'eps' (or 'eps_ratio') is required")
    return ratio * delta


def _learner_config(cfg: Dict[str, Any], k: int, d: int, delta: float, eps: float) -> LearnerConfig:
    options = {key: cfg[key] for key in ('vote_multiplier', 'candidate_multiplier', 'candidate_cap',
                                         'tester_samples') if cfg.get(key) is not None}
    return LearnerConfig(k=k, d=d, delta=delta, eps=eps, profile=_profile(cfg),
                         constants=dict(cfg.get('constants') or {}), **options)


def _learn_once(cfg: Dict[str, Any], source, family: FamilyId, k: int, delta: float, eps: float,
                stream: RngStream, threads: Optional[int]) -> Tuple[np.ndarray, Dict[str, Any]]:
    """One learner run; returns the estimated means and the result document."""
    if cfg.get('method') == 'em':
        if family is not FamilyId.GAUSSIAN:
            raise PreconditionError(f"EM baseline supports the gaussian family only, got '{family.value}'")
        started = time.perf_counter()
        n = cfg.get('n') or DEFAULT_EM_SAMPLES
        samples = source.chunk(0, n, stream.substream(0).generator())
        fit = em_fit(samples, k, stream.substream(1))
        return fit.means, {
            'means_hat': fit.means.tolist(),
            'iterations': fit.iterations,
            'converged': fit.converged,
            'log_likelihood': fit.log_likelihood,
            'samples_used': int(n),
            'wall_time_ms': (time.perf_counter() - started) * 1000.0,
        }
    config = _learner_config(cfg, k, source.d, delta, eps)
    if family is FamilyId.GAUSSIAN and not cfg.get('general'):
        result = learner.learn(source, config, rng=stream, threads=threads, budget_cap=cfg.get('budget_cap'))
    else:
        result = location_family.general_learn(source, family, config, rng=stream,
                                               budget_cap=cfg.get('budget_cap'), threads=threads)
    return result.means_hat, result.to_dict()


def cmd_generate(cfg: Dict[str, Any]) -> CommandResult:
    """Seeded Δ-separated truth model."""
    k, d, delta = _require(cfg, 'k', 'd', 'delta')
    radius = cfg.get('radius') or default_radius(k, d, delta)
    stream = RngStream(cfg['seed'], GENERATE_STREAM)
    means = generate_separated_means(k, d, delta, radius, stream)
    model = MixtureModel(FamilyId.parse(cfg['family']), means)
    logger.info(f"Generated {model!r} with separation {separation(means):.4g}")
    return CommandResult({'config': cfg, 'model': model.to_dict(), 'radius': radius,
                          'separation': separation(means)})


def cmd_sample(cfg: Dict[str, Any]) -> CommandResult:
    """Samples of a model file, or (x, y) pairs of a mixed linear regression."""
    n = _require(cfg, 'n')
    stream = RngStream(cfg['seed'], SAMPLE_STREAM)
    if cfg.get('weights'):
        data = sample_mlr(cfg['weights'], n, stream)
        header = ['x', 'y']
    else:
        model = store.load_model(_require(cfg, 'model'), cfg.get('pair_side', 'p'))
        data = sample(model, n, stream, threads=cfg.get('threads'))
        header = [f'x{i}' for i in range(data.shape[1])]
    payload = {'config': cfg, 'samples': data}
    return CommandResult(payload, csv_text=store.samples_csv(data, header))


def cmd_test(cfg: Dict[str, Any]) -> CommandResult:
    """One tester call at mu_star; exit 0 on Accept, 1 on Reject."""
    mu_star = _require(cfg, 'mu_star')
    stream = RngStream(cfg['seed'], TEST_STREAM)
    source, family, truth = _resolve_source(cfg, 'sequential', stream.substream(0).generator())
    k = cfg.get('k') or (len(truth) if truth is not None else None)
    if k is None:
        raise PreconditionError("'k' is required when testing against a sample file")
    delta = _separation_for(cfg, truth)
    eps = _eps_for(cfg, delta)
    profile = _profile(cfg)
    tester_stream = stream.substream(1)
    if family is FamilyId.GAUSSIAN and not cfg.get('general'):
        params = gaussian_tester.select_params(k, source.d, delta, eps, profile, cfg.get('constants'),
                                               cfg.get('budget_cap'), cfg.get('tester_samples'))
        verdict = gaussian_tester.decide(source, mu_star, params, tester_stream, threads=cfg.get('threads'))
    else:
        params = location_family.general_select_params(k, source.d, delta, eps, family, profile,
                                                       cfg.get('constants'), cfg.get('budget_cap'),
                                                       cfg.get('tester_samples'))
        verdict = location_family.decide_general(source, mu_star, family, params, tester_stream,
                                                 threads=cfg.get('threads'))
    logger.info(f"Tester verdict at mu*={mu_star}: {verdict.decision.value}")
    payload = {'config': cfg, 'family': family.value, 'delta': delta, 'eps': eps,
               'params': params.to_dict(), 'verdict': verdict.to_dict()}
    return CommandResult(payload, EXIT_OK if verdict.accepted else EXIT_REJECT)


def cmd_learn(cfg: Dict[str, Any]) -> CommandResult:
    """
    Learn the means; with known truth the result carries an ε-closeness report
    and a mismatch exits 1.
    """
    stream = RngStream(cfg['seed'], LEARN_STREAM)
    source, family, truth = _resolve_source(cfg, 'bootstrap', stream.substream(0).generator())
    if cfg.get('truth'):
        truth = store.load_model(cfg['truth'], cfg.get('pair_side', 'p')).means
    k = cfg.get('k') or (len(truth) if truth is not None else None)
    if k is None:
        raise PreconditionError("'k' is required when learning from a sample file without 'truth'")
    delta = _separation_for(cfg, truth)
    eps = _eps_for(cfg, delta)
    means_hat, result = _learn_once(cfg, source, family, k, delta, eps, stream.substream(1), cfg.get('threads'))

    payload = {'config': cfg, 'family': family.value, 'delta': delta, 'eps': eps,
               'method': cfg.get('method', 'fourier'), 'result': result}
    if cfg.get('model_out'):
        store.save_model(cfg['model_out'], MixtureModel(family, means_hat))
        payload['model_out'] = cfg['model_out']
    exit_code = EXIT_OK
    if truth is not None:
        matching = epsilon_close(means_hat, truth, eps)
        payload['truth_check'] = matching.to_dict()
        if not matching.matched:
            logger.warning(f"Learned means are {matching.max_distance:.4g} from the truth, above eps={eps}")
            exit_code = EXIT_REJECT
    return CommandResult(payload, exit_code)


def _sweep_gate(cfg: Dict[str, Any], family: FamilyId, k: int, d: int, delta: float, eps: float):
    """Raises PreconditionError when the cell's tester hypotheses fail."""
    if cfg.get('method') == 'em':
        return
    args = (k, d, delta, eps)
    if family is FamilyId.GAUSSIAN and not cfg.get('general'):
        gaussian_tester.select_params(*args, _profile(cfg), cfg.get('constants'), cfg.get('budget_cap'),
                                      cfg.get('tester_samples'))
    else:
        location_family.general_select_params(*args, family, _profile(cfg), cfg.get('constants'),
                                              cfg.get('budget_cap'), cfg.get('tester_samples'))


def cmd_sweep(cfg: Dict[str, Any]) -> CommandResult:
    """
    Success-rate map over a (Δ, d) grid at fixed k.

    Cells run in a worker pool and are reported in grid order (d outer, Δ
    inner). A cell whose tester hypotheses fail is marked skipped, a cell over
    budget is marked error; errors in individual trials are counted and the
    sweep continues.
    """
    k = _require(cfg, 'k')
    deltas = cfg.get('deltas') or [_require(cfg, 'delta')]
    dims = cfg.get('dims') or [_require(cfg, 'd')]
    family = FamilyId.parse(cfg['family'])
    trials = cfg.get('trials') or 1
    cells = [(d, delta) for d in dims for delta in deltas]

    def run_cell(index: int) -> Dict[str, Any]:
        d, delta = cells[index]
        eps = _eps_for(cfg, delta, DEFAULT_EPS_RATIO)
        row = {'d': d, 'delta': delta, 'k': k, 'eps': eps, 'family': family.value,
               'method': cfg.get('method', 'fourier'), 'trials': trials, 'successes': 0, 'errors': 0}
        try:
            _sweep_gate(cfg, family, k, d, delta, eps)
        except PreconditionError as exc:
            logger.info(f"Skipping cell d={d} delta={delta}: {exc.message}")
            return {**row, 'status': 'skipped', 'error': exc.message}
        except SpecmixError as exc:
            logger.warning(f"Cell d={d} delta={delta} cannot run: {exc.message}")
            return {**row, 'status': 'error', 'errors': trials, 'error': f"{type(exc).__name__}: {exc.message}"}

        samples, times = [], []
        for trial in range(trials):
            trial_stream = RngStream(cfg['seed'], SWEEP_STREAM, (index, trial))
            try:
                radius = cfg.get('radius') or default_radius(k, d, delta)
                truth = generate_separated_means(k, d, delta, radius, trial_stream.substream(0))
                source = MixtureSource(MixtureModel(family, truth))
                means_hat, result = _learn_once(cfg, source, family, k, delta, eps, trial_stream.substream(1), 1)
                samples.append(result['samples_used'])
                times.append(result['wall_time_ms'])
                if epsilon_close(means_hat, truth, eps).matched:
                    row['successes'] += 1
            except ClusterCountMismatch as exc:
                logger.debug(f"Cell d={d} delta={delta} trial {trial}: {exc.message}")
            except SpecmixError as exc:
                row['errors'] += 1
                row['error'] = f"{type(exc).__name__}: {exc.message}"
                logger.warning(f"Cell d={d} delta={delta} trial {trial} failed: {row['error']}")

        status = 'ok' if row['errors'] == 0 else ('error' if row['errors'] == trials else 'partial')
        return {**row, 'status': status,
                'success_rate': row['successes'] / trials,
                'mean_samples': float(np.mean(samples)) if samples else None,
                'mean_wall_time_ms': float(np.mean(times)) if times else None}

    workers = max(1, min(cfg.get('threads') or get_config().THREADS, len(cells)))
    logger.info(f"Sweeping {len(cells)} cells x {trials} trials on {workers} workers")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(run_cell, range(len(cells))))
    payload = {'config': cfg, 'columns': SWEEP_COLUMNS, 'rows': rows}
    return CommandResult(payload, csv_text=store.rows_csv(rows, SWEEP_COLUMNS))


def cmd_hard_instance(cfg: Dict[str, Any]) -> CommandResult:
    """Moment-matched pair with its numeric TV and, when the hypothesis holds, the TV upper bound."""
    n, t, delta, R = _require(cfg, 'N', 't', 'delta', 'R')
    pair = build_moment_matched_pair(n, t, delta, R, RngStream(cfg['seed'], HARD_INSTANCE_STREAM),
                                     starts=cfg.get('starts') or DEFAULT_STARTS, threads=cfg.get('threads'))
    pair.tv_numeric = tv_numeric(pair)
    try:
        pair.tv_bound = tv_upper_bound(pair, cfg.get('eps_tail') or 0.01)
    except HypothesisViolation as exc:
        pair.tv_bound_unavailable = exc.message
        logger.info(f"TV upper bound unavailable: {exc.message}")
    payload = {'config': cfg, **pair.to_dict()}
    if cfg.get('C') is not None and cfg.get('k') is not None:
        payload['lower_bound_params'] = lower_bound_params(cfg['k'], cfg.get('d') or 1, cfg['C']).to_dict()
    return CommandResult(payload)


def cmd_families(cfg: Dict[str, Any]) -> CommandResult:
    listing = location_family.families()
    rows = [{**entry, 'reductions': ' '.join(entry['reductions'])} for entry in listing]
    columns = ['family', 'density', 'cf', 'location_family', 'reductions']
    return CommandResult({'config': cfg, 'families': listing}, csv_text=store.rows_csv(rows, columns))


def cmd_verify(cfg: Dict[str, Any]) -> CommandResult:
    """Run the verification suites; exit 0 iff every check passes."""
    options = {key: cfg[key] for key in ('oracle_runs', 'oracle_samples', 'cf_samples')
               if cfg.get(key) is not None}
    runner = default_runner(cfg['seed'], cfg.get('fixtures'), profile=_profile(cfg, 'paper'),
                            constants=dict(cfg.get('constants') or {}), **options)
    report = runner.run(cfg.get('suites'))
    rows = [{'suite': name, **check} for name, suite in report['suites'].items() for check in suite['checks']]
    columns = ['suite', 'check', 'passed', 'fixtures', 'violations', 'allowed_violations',
               'worst_measured', 'worst_bound', 'note']
    return CommandResult({'config': cfg, **report}, EXIT_OK if report['passed'] else EXIT_REJECT,
                         csv_text=store.rows_csv(rows, columns))


COMMANDS: Dict[str, Callable[[Dict[str, Any]], CommandResult]] = {
    'generate': cmd_generate,
    'sample': cmd_sample,
    'test': cmd_test,
    'learn': cmd_learn,
    'sweep': cmd_sweep,
    'hard-instance': cmd_hard_instance,
    'families': cmd_families,
    'verify': cmd_verify,
}
