from .errors import (
    SpecmixError, PreconditionError, DimensionMismatch, SizeMismatch, UnknownFamily,
    PackingInfeasible, InsufficientSamples, EstimatorOverflow, ModulusUnderflow,
    HypothesisViolation, SampleBudgetExceeded, CandidateBudgetExceeded, RetryCapExceeded,
    ClusterCountMismatch, SearchExhausted, QuadratureError,
)
from .numerics import CompensatedSum, open_uniform

__all__ = [
    'SpecmixError', 'PreconditionError', 'DimensionMismatch', 'SizeMismatch', 'UnknownFamily',
    'PackingInfeasible', 'InsufficientSamples', 'EstimatorOverflow', 'ModulusUnderflow',
    'HypothesisViolation', 'SampleBudgetExceeded', 'CandidateBudgetExceeded', 'RetryCapExceeded',
    'ClusterCountMismatch', 'SearchExhausted', 'QuadratureError',
    'CompensatedSum', 'open_uniform',
]
