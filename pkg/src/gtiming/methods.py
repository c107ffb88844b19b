"""Named end-to-end estimation pipelines, as selected by ``gtiming estimate --method``.

Each pipeline maps a cohort and a list of tau values to one :class:`~gtiming.results.PointEstimate`
per tau, refitting every model it needs from the cohort.
"""
import logging
from typing import Callable, List, Optional, Sequence

import attr
import numpy as np

from . import ipw, msm
from .cohort import CohortDataset, EstimandSpec
from .results import PointEstimate
from .util import positive_validator, type_validator


LOG = logging.getLogger(__name__)

Pipeline = Callable[[CohortDataset, Sequence[float]], List[PointEstimate]]


@attr.s(frozen=True)
class PipelineOptions:
    a1_target: int = attr.ib(default=1)
    a2_target: int = attr.ib(default=1)
    #: Weight truncation quantile for the weighted continuous-time methods
    truncate: Optional[float] = attr.ib(default=None, validator=type_validator)
    mc_draws: int = attr.ib(default=10 ** 5, validator=positive_validator)
    mc_seed: int = attr.ib(default=0)
    width: float = attr.ib(default=msm.DEFAULT_WIDTH, validator=positive_validator)
    J: int = attr.ib(default=msm.DEFAULT_J, validator=positive_validator)

    def target(self, tau: float = 0.0) -> EstimandSpec:
        return EstimandSpec(self.a1_target, self.a2_target, tau)


def _iptw(method: str, adjustment: ipw.Adjustment, options: PipelineOptions) -> Pipeline:
    def pipeline(dataset, taus):
        target = options.target()
        censoring = ipw.has_censoring(dataset)
        bundle = ipw.fit_models(dataset, adjustment, censoring=censoring)
        weights = ipw.compute_weights(dataset, bundle, target, truncate=options.truncate)
        estimator = ipw.hajek_censoring if censoring else ipw.hajek_no_censoring
        return ipw.survival_curve_continuous(dataset, weights, target, taus, estimator, method=method)
    return pipeline


def _cc_iptw(options: PipelineOptions) -> Pipeline:
    def pipeline(dataset, taus):
        target = options.target()
        complete = dataset.subset(ipw.uncensored(dataset))
        bundle = ipw.fit_models(complete, ipw.Adjustment.ADJUSTED, censoring=False)
        weights = ipw.compute_weights(complete, bundle, target, truncate=options.truncate)
        return [ipw.cc_iptw(complete, weights, target.at(tau)) for tau in taus]
    return pipeline


def _naive(options: PipelineOptions) -> Pipeline:
    def pipeline(dataset, taus):
        return [ipw.naive_estimate(dataset, options.target(tau)) for tau in taus]
    return pipeline


def _gcomp(options: PipelineOptions) -> Pipeline:
    def pipeline(dataset, taus):
        return ipw.gcomputation_curve(dataset, options.target(), taus, options.mc_draws, options.mc_seed)
    return pipeline


def _msm(adjustment: ipw.Adjustment, method: str, options: PipelineOptions) -> Pipeline:
    def pipeline(dataset, taus):
        curve = msm.survival_curve_discrete(dataset, options.target(), options.width, options.J, adjustment,
                                            taus=taus, method=method)
        return list(curve.points)
    return pipeline


METHODS = ('ipw', 'ipw-unadj', 'naive', 'cc-ipw', 'gcomp', 'msm', 'msm-unadj')


def get_pipeline(method: str, options: PipelineOptions = None) -> Pipeline:
    options = options or PipelineOptions()
    if method == 'ipw':
        return _iptw(method, ipw.Adjustment.ADJUSTED, options)
    elif method == 'ipw-unadj':
        return _iptw(method, ipw.Adjustment.UNADJUSTED, options)
    elif method == 'naive':
        return _naive(options)
    elif method == 'cc-ipw':
        return _cc_iptw(options)
    elif method == 'gcomp':
        return _gcomp(options)
    elif method == 'msm':
        return _msm(ipw.Adjustment.ADJUSTED, method, options)
    elif method == 'msm-unadj':
        return _msm(ipw.Adjustment.UNADJUSTED, method, options)
    raise ValueError(f"unknown method {method!r}, expected one of {', '.join(METHODS)}")


def as_vector(pipeline: Pipeline, taus: Sequence[float]) -> Callable[[CohortDataset], np.ndarray]:
    """Adapt *pipeline* into an estimator of the vector of estimates at *taus*, for bootstrapping."""
    def estimator(dataset):
        return np.array([p.estimate for p in pipeline(dataset, taus)])
    return estimator
