from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np


@dataclass(frozen=True)
class LearnerConfig:
    """Inputs of the candidate/vote/cluster learner.

    ``candidate_multiplier`` scales the 2 ln k coverage term of the candidate
    budget (1.0 reproduces it); ``tester_samples`` overrides the Hoeffding
    sample count of every inner tester call.
    """
    k: int
    d: int
    delta: float
    eps: float
    vote_multiplier: float = 5.0
    profile: str = 'practical'
    candidate_cap: int = 10**6
    candidate_multiplier: float = 1.0
    tester_samples: Optional[int] = None
    constants: Dict[str, float] = field(default_factory=dict)


@dataclass
class LearnResult:
    """Outcome of a learner run."""
    means_hat: np.ndarray
    clusters: List[np.ndarray]
    candidates_drawn: int
    tester_calls: int
    samples_used: int
    wall_time_ms: float
    accepted: np.ndarray = field(default_factory=lambda: np.empty((0, 1)))

    @property
    def cluster_sizes(self) -> List[int]:
        return [int(len(c)) for c in self.clusters]

    def to_dict(self) -> Dict[str, Any]:
        """Convert result to dictionary."""
        return {
            'means_hat': np.asarray(self.means_hat).tolist(),
            'cluster_sizes': self.cluster_sizes,
            'candidates_drawn': self.candidates_drawn,
            'tester_calls': self.tester_calls,
            'samples_used': self.samples_used,
            'wall_time_ms': self.wall_time_ms,
        }
