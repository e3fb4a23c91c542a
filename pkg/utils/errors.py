"""Exception hierarchy shared by every specmix service.

Each error carries the process exit code the CLI maps it to and renders
itself as the same ``{'error', 'message'}`` body the command layer prints.
"""
from typing import Any, Dict

EXIT_OK = 0
EXIT_REJECT = 1
EXIT_USAGE = 2
EXIT_BUDGET = 3
EXIT_CLUSTER_MISMATCH = 4


class SpecmixError(Exception):
    """Base class for all specmix errors."""
    exit_code = EXIT_USAGE

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> Dict[str, Any]:
        body = {'error': type(self).__name__, 'message': self.message}
        if self.details:
            body['details'] = self.details
        return body


class PreconditionError(SpecmixError, ValueError):
    """An input violates a documented hypothesis; the message names the bound."""


class DimensionMismatch(PreconditionError):
    pass


class SizeMismatch(PreconditionError):
    pass


class UnknownFamily(PreconditionError):
    pass


class PackingInfeasible(PreconditionError):
    pass


class InsufficientSamples(PreconditionError):
    pass


class EstimatorOverflow(PreconditionError):
    """A per-sample term would exceed the double-precision range."""


class ModulusUnderflow(PreconditionError):
    """A characteristic-function modulus floor underflows to zero."""


class HypothesisViolation(PreconditionError):
    pass


class SampleBudgetExceeded(SpecmixError):
    exit_code = EXIT_BUDGET

    def __init__(self, message: str, log_n: float, cap: int, **details: Any):
        super().__init__(message, log_n=log_n, cap=cap, **details)
        self.log_n = log_n
        self.cap = cap


class CandidateBudgetExceeded(SpecmixError):
    exit_code = EXIT_BUDGET


class RetryCapExceeded(SpecmixError):
    exit_code = EXIT_BUDGET


class ClusterCountMismatch(SpecmixError):
    exit_code = EXIT_CLUSTER_MISMATCH

    def __init__(self, message: str, count: int, expected: int, **details: Any):
        super().__init__(message, count=count, expected=expected, **details)
        self.count = count
        self.expected = expected


class SearchExhausted(SpecmixError):
    exit_code = EXIT_REJECT


class QuadratureError(SpecmixError):
    exit_code = EXIT_REJECT
