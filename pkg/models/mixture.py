import enum
import json
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence

import numpy as np

from utils.errors import DimensionMismatch, PreconditionError, UnknownFamily


class FamilyId(enum.Enum):
    """Enumeration of the supported base families."""
    GAUSSIAN = "gaussian"
    CAUCHY = "cauchy"
    LOGISTIC = "logistic"
    LAPLACE = "laplace"
    GUMBEL = "gumbel"
    EXPONENTIAL = "exponential"

    @classmethod
    def parse(cls, value) -> 'FamilyId':
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise UnknownFamily(f"Unknown family '{value}'; expected one of "
                                f"{', '.join(f.value for f in cls)}")


def as_points(points, d: Optional[int] = None) -> np.ndarray:
    """Coerce a point sequence into a (n, d) float array, checking dimensions."""
    if isinstance(points, np.ndarray):
        arr = points.astype(float, copy=False)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
    else:
        rows = [np.atleast_1d(np.asarray(p, dtype=float)) for p in points]
        dims = {row.shape for row in rows}
        if len(dims) > 1:
            raise DimensionMismatch(f"Points have mixed dimensions: {sorted(s[0] for s in dims)}")
        arr = np.vstack(rows) if rows else np.empty((0, d or 1))
    if arr.ndim != 2:
        raise DimensionMismatch(f"Expected a 2-D point array, got shape {arr.shape}")
    if d is not None and arr.shape[0] and arr.shape[1] != d:
        raise DimensionMismatch(f"Expected points of dimension {d}, got {arr.shape[1]}")
    return arr


@dataclass(frozen=True, eq=False)
class MixtureModel:
    """Uniform-weight mixture of k translates of a base family.

    For the exponential family the stored location is ln λ.
    """
    family: FamilyId
    means: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'family', FamilyId.parse(self.family))
        means = as_points(self.means).copy()
        if means.shape[0] < 1:
            raise PreconditionError("A mixture needs at least one component")
        if self.family is not FamilyId.GAUSSIAN and means.shape[1] != 1:
            raise DimensionMismatch(f"Family '{self.family.value}' is supported in d = 1 only")
        means.setflags(write=False)
        object.__setattr__(self, 'means', means)

    @property
    def k(self) -> int:
        return self.means.shape[0]

    @property
    def d(self) -> int:
        return self.means.shape[1]

    def to_dict(self) -> Dict[str, Any]:
        """Convert model to dictionary."""
        return {
            'family': self.family.value,
            'd': self.d,
            'k': self.k,
            'means': self.means.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'MixtureModel':
        model = cls(family=data['family'], means=as_points(data['means']))
        if 'k' in data and int(data['k']) != model.k:
            raise PreconditionError(f"Model declares k={data['k']} but lists {model.k} means")
        if 'd' in data and int(data['d']) != model.d:
            raise DimensionMismatch(f"Model declares d={data['d']} but means have dimension {model.d}")
        return model

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> 'MixtureModel':
        return cls.from_dict(json.loads(text))

    def __repr__(self):
        return f'<MixtureModel {self.family.value} k={self.k} d={self.d}>'


@dataclass(frozen=True)
class MatchingResult:
    """Bottleneck matching between two point sets of equal size."""
    matched: bool
    max_distance: float
    permutation: Optional[Sequence[int]] = field(default=None)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'matched': self.matched,
            'max_distance': self.max_distance,
            'permutation': list(self.permutation) if self.permutation is not None else None,
        }
