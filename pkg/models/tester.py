import enum
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Optional


class Profile(enum.Enum):
    """Constants profile a parameter set was derived with."""
    PAPER = "paper"
    PRACTICAL = "practical"


class Decision(enum.Enum):
    ACCEPT = "Accept"
    REJECT = "Reject"


@dataclass(frozen=True)
class TesterParams:
    """Everything the Gaussian-truncated Fourier tester needs for one call.

    ``log_n`` is the natural log of the Hoeffding sample count before it is
    rounded; ``n`` is the budget actually consumed (it may be overridden).
    """
    k: int
    d: int
    sigma: float
    M: float
    gamma: float
    theta: float
    n: int
    log_n: float
    per_term_bound_log: float
    profile: str = 'practical'
    constants: Dict[str, float] = field(default_factory=dict)

    @property
    def a(self) -> float:
        """The recurring quantity σ²/2 + 1."""
        return self.sigma ** 2 / 2.0 + 1.0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TesterParams':
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass(frozen=True)
class GeneralTesterParams:
    """Parameters of the CF-division tester for a location family."""
    family: str
    k: int
    d: int
    sigma: float
    M: float
    gamma: float
    theta: float
    n: int
    log_n: float
    delta_M: float
    gap_guaranteed: bool
    profile: str = 'practical'
    constants: Dict[str, float] = field(default_factory=dict)

    @property
    def per_term_bound_log(self) -> float:
        return math.log(self.k) - math.log(self.delta_M)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'GeneralTesterParams':
        return cls(**data)


@dataclass(frozen=True)
class TEstimate:
    """Monte Carlo estimate of the tester statistic."""
    value: complex
    stderr_re: float
    stderr_im: float
    n_used: int
    max_term: float

    @property
    def stderr(self) -> float:
        return math.hypot(self.stderr_re, self.stderr_im)


@dataclass(frozen=True)
class Verdict:
    decision: Decision
    statistic: complex
    threshold: float
    error_budget: float
    n_used: int
    stderr: Optional[float] = None

    @property
    def accepted(self) -> bool:
        return self.decision is Decision.ACCEPT

    def to_dict(self) -> Dict[str, Any]:
        """Convert verdict to dictionary."""
        return {
            'decision': self.decision.value,
            're_statistic': self.statistic.real,
            'im_statistic': self.statistic.imag,
            'theta': self.threshold,
            'gamma': self.error_budget,
            'n_used': self.n_used,
        }


@dataclass(frozen=True)
class SBounds:
    """Exact tail sums around a reference point and their closed-form bounds."""
    s1: float
    s2: float
    s1_bound: float
    s2_bound: float
    s2_case_bound: float
    s1_verifiable: bool

    @property
    def s1_holds(self) -> bool:
        return self.s1 <= self.s1_bound

    @property
    def s2_holds(self) -> bool:
        return self.s2 <= self.s2_bound and self.s2 <= self.s2_case_bound

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)
