import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np


@dataclass(frozen=True)
class LowerBoundParams:
    """Derived quantities of the moment-matching lower-bound construction."""
    k: int
    d: int
    C: float
    t: float
    R: float
    delta: float
    n_points: float
    log_tv_target: float

    @property
    def moment_order(self) -> int:
        return int(math.floor(self.t))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'k': self.k, 'd': self.d, 'C': self.C, 't': self.t, 'R': self.R,
            'delta': self.delta, 'n_points': self.n_points, 'log_tv_target': self.log_tv_target,
            'moment_order': self.moment_order,
        }


@dataclass(frozen=True)
class TVBound:
    l2_squared: float
    tv: float
    r_prime: float
    eps_tail: float

    @property
    def vacuous(self) -> bool:
        return not self.tv < 1.0

    def to_dict(self) -> Dict[str, Any]:
        return {'l2_squared': self.l2_squared, 'tv': self.tv, 'r_prime': self.r_prime,
                'eps_tail': self.eps_tail, 'vacuous': self.vacuous}


@dataclass
class HardInstancePair:
    """Two Δ-separated 1-D point sets whose first t moments agree."""
    mu_p: np.ndarray
    mu_q: np.ndarray
    t: int
    delta: float
    R: float
    direction: np.ndarray
    moment_residuals: List[float]
    param_distance: float
    objective: float
    start_index: int
    density_condition_met: bool
    tv_numeric: Optional[float] = None
    tv_bound: Optional[TVBound] = None
    tv_bound_unavailable: Optional[str] = field(default=None)

    @property
    def n(self) -> int:
        return int(len(self.mu_p))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'mu_p': np.asarray(self.mu_p).tolist(),
            'mu_q': np.asarray(self.mu_q).tolist(),
            'N': self.n,
            't': self.t,
            'delta': self.delta,
            'R': self.R,
            'moment_residuals': list(self.moment_residuals),
            'param_distance': self.param_distance,
            'objective': self.objective,
            'start_index': self.start_index,
            'density_condition_met': self.density_condition_met,
            'tv_numeric': self.tv_numeric,
            'tv_upper_bound': self.tv_bound.to_dict() if self.tv_bound else None,
            'tv_upper_bound_unavailable': self.tv_bound_unavailable,
        }
