"""Estimate containers shared by the estimators, the bootstrap and the command line."""
import json
from typing import Optional, Sequence

import attr
import numpy as np
import pandas as pd

from .util import atomic_write


@attr.s(frozen=True)
class PointEstimate:
    method: str = attr.ib()
    tau: float = attr.ib(converter=float)
    estimate: float = attr.ib(converter=float)
    n_contributing_one_course: Optional[int] = attr.ib(default=None)
    n_contributing_two_course: Optional[int] = attr.ib(default=None)

    def __float__(self):
        return self.estimate

    def to_dict(self):
        return attr.asdict(self)


def _array(values):
    return np.asarray(values, dtype=float)


@attr.s(frozen=True, eq=False)
class SurvivalCurveEstimate:
    """Point estimates of P(T^{a1,a2} > tau) over a grid, with optional bootstrap bounds."""
    method: str = attr.ib()
    taus: np.ndarray = attr.ib(converter=_array)
    estimates: np.ndarray = attr.ib(converter=_array)
    lo: Optional[np.ndarray] = attr.ib(default=None, converter=attr.converters.optional(_array))
    hi: Optional[np.ndarray] = attr.ib(default=None, converter=attr.converters.optional(_array))
    level: Optional[float] = attr.ib(default=None)
    replicates: int = attr.ib(default=0)
    n_failed: int = attr.ib(default=0)
    points: Sequence[PointEstimate] = attr.ib(factory=tuple, converter=tuple)

    def at(self, tau: float) -> float:
        matches = np.flatnonzero(self.taus == tau)
        if not len(matches):
            raise KeyError(tau)
        return float(self.estimates[matches[0]])

    def to_frame(self) -> pd.DataFrame:
        n = len(self.taus)
        return pd.DataFrame({
            'tau': self.taus,
            'estimate': self.estimates,
            'lo': self.lo if self.lo is not None else np.full(n, np.nan),
            'hi': self.hi if self.hi is not None else np.full(n, np.nan),
            'method': self.method,
        })

    def to_dict(self):
        estimates = []
        for i, tau in enumerate(self.taus):
            point = self.points[i].to_dict() if self.points else {'method': self.method, 'tau': float(tau),
                                                                  'estimate': float(self.estimates[i])}
            if self.lo is not None:
                point.update(lo=float(self.lo[i]), hi=float(self.hi[i]))
            estimates.append(point)
        return {
            'method': self.method,
            'level': self.level,
            'replicates': self.replicates,
            'n_failed': self.n_failed,
            'estimates': estimates,
        }


def _nan_to_none(obj):
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _nan_to_none(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_nan_to_none(v) for v in obj]
    return obj


def write_json(data, path):
    """Write *data* as JSON, with NaN written as ``null``."""
    with atomic_write(path) as f:
        json.dump(_nan_to_none(data), f, indent=2, sort_keys=True)
        f.write('\n')


def write_curve_csv(curves: Sequence[SurvivalCurveEstimate], path):
    """Write ``tau,estimate,lo,hi,method`` rows for each of *curves*."""
    frame = pd.concat([c.to_frame() for c in curves], ignore_index=True)
    with atomic_write(path, newline='') as f:
        frame.to_csv(f, index=False)
