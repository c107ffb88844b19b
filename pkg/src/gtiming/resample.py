"""Subject-level percentile bootstrap."""
from concurrent.futures import ThreadPoolExecutor
import logging
from typing import Callable, Optional, Union

import attr
import numpy as np

from .cohort import CohortDataset
from .errors import BootstrapDegenerateError, GTimingError
from .util import replicate_rng


LOG = logging.getLogger(__name__)

Estimate = Union[float, np.ndarray]


@attr.s(frozen=True, eq=False)
class BootstrapResult:
    """Percentile interval ``[lo, hi]`` from the successful replicates.

    For an estimator returning a vector, ``point``, ``lo`` and ``hi`` are vectors and
    ``replicates`` has one row per successful replicate.
    """
    point: Estimate = attr.ib()
    replicates: np.ndarray = attr.ib()
    lo: Estimate = attr.ib()
    hi: Estimate = attr.ib()
    level: float = attr.ib()
    n_failed: int = attr.ib()
    requested: int = attr.ib()


def percentile_bounds(replicates: np.ndarray, level: float):
    """Nearest-rank percentiles ``(1 - level) / 2`` and ``(1 + level) / 2`` of *replicates* along axis 0."""
    alpha = 1 - level
    # 1 - 0.95 is 0.050000000000000044, which would move the rank up by one
    q = np.round([100 * alpha / 2, 100 * (1 - alpha / 2)], 9)
    lo, hi = np.percentile(replicates, q, axis=0, method='inverted_cdf')
    return lo, hi


def _replicate(dataset: CohortDataset, estimator, seed: int, b: int) -> Optional[np.ndarray]:
    rng = replicate_rng(seed, b)
    indices = rng.integers(0, dataset.n, size=dataset.n)
    try:
        return np.asarray(estimator(dataset.take(indices)), dtype=float)
    except GTimingError as e:
        LOG.debug("bootstrap replicate %d failed: %s", b, e)
        return None


def bootstrap(dataset: CohortDataset, estimator: Callable[[CohortDataset], Estimate], B: int,
              level: float = 0.95, seed: int = 0, threads: int = 1) -> BootstrapResult:
    """Resample whole subjects with replacement *B* times and re-run *estimator* on each resample.

    Replicate ``b`` draws from a stream derived from ``(seed, b)``, so results do not depend on
    *threads*. Replicates failing with a :exc:`GTimingError` are dropped and counted.
    """
    if B < 2:
        raise ValueError(f"B must be at least 2 (got {B})")
    if not 0 < level < 1:
        raise ValueError(f"level must be in (0, 1) (got {level})")
    point = np.asarray(estimator(dataset), dtype=float)

    def run(b):
        return _replicate(dataset, estimator, seed, b)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            outcomes = list(executor.map(run, range(B)))
    else:
        outcomes = [run(b) for b in range(B)]

    successes = [o for o in outcomes if o is not None]
    n_failed = B - len(successes)
    if n_failed > B / 2:
        raise BootstrapDegenerateError(n_failed, B)
    if n_failed:
        LOG.warning("%d of %d bootstrap replicates failed", n_failed, B)

    replicates = np.array(successes, dtype=float).reshape((len(successes),) + point.shape)
    lo, hi = percentile_bounds(replicates, level)
    if point.ndim == 0:
        point, lo, hi = float(point), float(lo), float(hi)
    return BootstrapResult(point, replicates, lo, hi, level, n_failed, B)
