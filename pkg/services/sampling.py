"""Seeded generation of separated truth models and mixture samples."""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from config import get_config
from models.mixture import FamilyId, MixtureModel, as_points
from utils.errors import InsufficientSamples, PackingInfeasible, PreconditionError, RetryCapExceeded
from utils.numerics import open_uniform

logger = logging.getLogger(__name__)

MAX_PROPOSALS = 10**6


@dataclass(frozen=True)
class RngStream:
    """Addressable random stream.

    A stream is identified by ``(seed, stream_id, path)``; ``substream``
    extends the path, so any worker can rebuild the exact generator of any
    chunk, candidate or vote without coordination.
    """
    seed: int
    stream_id: int = 0
    path: Tuple[int, ...] = ()

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of this stream."""
        seq = np.random.SeedSequence(entropy=int(self.seed), spawn_key=(int(self.stream_id), *self.path))
        return np.random.Generator(np.random.PCG64(seq))

    def substream(self, *index: int) -> 'RngStream':
        return RngStream(self.seed, self.stream_id, self.path + tuple(int(i) for i in index))


RngLike = Union[RngStream, np.random.Generator]


def as_generator(rng: RngLike) -> np.random.Generator:
    return rng.generator() if isinstance(rng, RngStream) else rng


def base_draws(family: FamilyId, n: int, d: int, generator: np.random.Generator) -> np.ndarray:
    """Draws from the standard (location 0) member of a family, shape (n, d)."""
    if family is FamilyId.GAUSSIAN:
        return generator.standard_normal((n, d))
    u = open_uniform(generator, (n, d))
    if family is FamilyId.CAUCHY:
        return np.tan(math.pi * (u - 0.5))
    if family is FamilyId.LOGISTIC:
        return np.log(u / (1.0 - u))
    if family is FamilyId.LAPLACE:
        return np.where(u < 0.5, np.log(2.0 * u), -np.log(2.0 * (1.0 - u)))
    if family is FamilyId.GUMBEL:
        return -np.log(-np.log(u))
    if family is FamilyId.EXPONENTIAL:
        return -np.log(u)
    raise PreconditionError(f"No sampler for family {family}")


def _draw_model(model: MixtureModel, n: int, generator: np.random.Generator) -> np.ndarray:
    labels = generator.integers(0, model.k, size=n)
    base = base_draws(model.family, n, model.d, generator)
    if model.family is FamilyId.EXPONENTIAL:
        # stored location is ln λ and Exp(λ) = Exp(1) / λ
        return base / np.exp(model.means[labels])
    return base + model.means[labels]


def sample(model: MixtureModel, n: int, rng: RngLike, chunk_size: Optional[int] = None,
           threads: Optional[int] = None) -> np.ndarray:
    """
    Draw n i.i.d. samples from a uniform mixture.

    With an RngStream the draw is split into fixed-size chunks, chunk c using
    substream (c,); chunks are concatenated in index order, so the output does
    not depend on the worker count.

    Args:
        model (MixtureModel): mixture to sample
        n (int): number of samples
        rng: RngStream or numpy Generator

    Returns:
        np.ndarray: samples of shape (n, d)
    """
    if n < 1:
        raise PreconditionError(f"sample count must be >= 1, got {n}")
    if not isinstance(rng, RngStream):
        return _draw_model(model, n, rng)

    cfg = get_config()
    chunk_size = chunk_size or cfg.CHUNK_SIZE
    starts = list(range(0, n, chunk_size))

    def draw(c):
        size = min(chunk_size, n - starts[c])
        return _draw_model(model, size, rng.substream(c).generator())

    workers = max(1, min(threads or cfg.THREADS, len(starts)))
    if workers == 1:
        parts = [draw(c) for c in range(len(starts))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(draw, range(len(starts))))
    return np.concatenate(parts, axis=0)


def sample_mlr(weights, n: int, rng: RngLike) -> np.ndarray:
    """(x, y) pairs of a mixed linear regression with unit-variance noise, shape (n, 2)."""
    generator = as_generator(rng)
    w = np.asarray(weights, dtype=float).ravel()
    x = generator.standard_normal(n)
    labels = generator.integers(0, len(w), size=n)
    y = w[labels] * x + generator.standard_normal(n)
    return np.column_stack([x, y])


def default_radius(k: int, d: int, delta: float) -> float:
    """A ball radius that packs k Δ-separated points comfortably: Δ(1.5 k^{1/d} + 1)."""
    return delta * (1.5 * k ** (1.0 / d) + 1.0)


def _uniform_in_ball(generator, size, d, radius):
    direction = generator.standard_normal((size, d))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    r = radius * generator.random(size) ** (1.0 / d)
    return direction * r[:, None]


def generate_separated_means(k: int, d: int, delta: float, radius: float, rng: RngLike,
                             max_proposals: int = MAX_PROPOSALS) -> np.ndarray:
    """
    Rejection-sample k points in the radius ball with pairwise distance >= delta.

    Raises:
        PackingInfeasible: k (Δ/2)^d exceeds (radius + Δ/2)^d
        RetryCapExceeded: no valid set after max_proposals proposals
    """
    if k < 1 or d < 1:
        raise PreconditionError(f"k and d must be positive, got k={k}, d={d}")
    if k * (delta / 2.0) ** d > (radius + delta / 2.0) ** d:
        raise PackingInfeasible(
            f"{k} points with separation {delta} cannot fit in a radius-{radius} ball in d={d}: "
            f"k(Δ/2)^d = {k * (delta / 2.0) ** d:.6g} > (r+Δ/2)^d = {(radius + delta / 2.0) ** d:.6g}"
        )
    generator = as_generator(rng)
    accepted = np.empty((0, d))
    proposals = 0
    batch = 1024
    while len(accepted) < k:
        if proposals >= max_proposals:
            raise RetryCapExceeded(f"Placed {len(accepted)} of {k} points after {proposals} proposals",
                                   placed=len(accepted), proposals=proposals)
        for point in _uniform_in_ball(generator, batch, d, radius):
            proposals += 1
            if len(accepted) == 0 or np.min(np.linalg.norm(accepted - point, axis=1)) >= delta:
                accepted = np.vstack([accepted, point])
                if len(accepted) == k:
                    break
            if proposals >= max_proposals:
                break
    logger.debug(f"Placed {k} separated means in d={d} after {proposals} proposals")
    return accepted


class SampleSource:
    """Anything the testers can pull sample chunks from.

    ``chunk(start, n, generator)`` returns rows ``start .. start+n`` of the
    source's sample sequence; generative sources ignore ``start`` and draw
    from ``generator``.
    """
    d = 1
    generative = True

    def chunk(self, start: int, n: int, generator: np.random.Generator) -> np.ndarray:
        raise NotImplementedError


class MixtureSource(SampleSource):
    def __init__(self, model: MixtureModel):
        self.model = model
        self.d = model.d

    def chunk(self, start, n, generator):
        return _draw_model(self.model, n, generator)

    def __repr__(self):
        return f'<MixtureSource {self.model!r}>'


class ArraySource(SampleSource):
    """A finite sample set.

    ``sequential`` replays rows in order and fails once they run out;
    ``bootstrap`` resamples rows with replacement from the chunk generator.
    """

    def __init__(self, data, mode: str = 'sequential'):
        if mode not in ('sequential', 'bootstrap'):
            raise PreconditionError(f"Unknown replay mode '{mode}'")
        self.data = as_points(data)
        self.d = self.data.shape[1]
        self.mode = mode
        self.generative = mode == 'bootstrap'

    def chunk(self, start, n, generator):
        if self.mode == 'bootstrap':
            return self.data[generator.integers(0, len(self.data), size=n)]
        if start + n > len(self.data):
            raise InsufficientSamples(f"Need samples up to row {start + n}, only {len(self.data)} available",
                                      available=len(self.data), needed=start + n)
        return self.data[start:start + n]


class ShiftedSource(SampleSource):
    """Translates every sample of another source by a fixed offset."""

    def __init__(self, source: SampleSource, shift):
        self.source = source
        self.shift = np.asarray(shift, dtype=float).reshape(1, -1)
        self.d = source.d
        self.generative = source.generative

    def chunk(self, start, n, generator):
        return self.source.chunk(start, n, generator) + self.shift
