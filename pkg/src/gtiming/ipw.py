"""Continuous-time estimators of P(T^{a1,a2} > tau).

Hájek inverse probability weighted estimators with and without censoring, the naive and
complete-case comparators, and parametric g-computation.
"""
import enum
import logging
from typing import Optional, Sequence

import attr
import numpy as np

from . import dgp
from .cohort import CohortDataset, EstimandSpec, FirstEvent
from .errors import NoConsistentSubjectsError, PositivityError
from .fitglm import (
    CovariateSpec,
    FittedExpPH,
    FittedLogit,
    Term,
    fit_exp_ph,
    fit_logit,
)
from .results import PointEstimate


LOG = logging.getLogger(__name__)

#: How waiting time to the second course enters adjusted models
W1_TERM = Term.threshold('w1', 15.0)

A1_SPEC = CovariateSpec.of(Term.intercept(), Term.raw('l1'))
C1_SPEC = CovariateSpec.of(Term.intercept(), Term.raw('a1'), Term.raw('l1'))


class Adjustment(enum.Enum):
    ADJUSTED = 'adjusted'
    UNADJUSTED = 'unadjusted'


def _w1(adjustment: Adjustment, w1_term: Term) -> CovariateSpec:
    return CovariateSpec.of(w1_term) if adjustment is Adjustment.ADJUSTED else CovariateSpec.of()


def a2_spec(adjustment: Adjustment, w1_term: Term = W1_TERM) -> CovariateSpec:
    return CovariateSpec.of(Term.intercept(), Term.raw('l1'), Term.raw('l2')) + _w1(adjustment, w1_term)


def c2_spec(adjustment: Adjustment, w1_term: Term = W1_TERM) -> CovariateSpec:
    base = CovariateSpec.of(Term.intercept(), Term.raw('a1'), Term.raw('a2'), Term.raw('l1'), Term.raw('l2'))
    return base + _w1(adjustment, w1_term)


def has_censoring(dataset: CohortDataset) -> bool:
    c = dataset.columns
    return bool(np.any(c.delta1 == FirstEvent.CENSORED) or np.any(c.course2 & (c.delta2 == 0)))


@attr.s(frozen=True)
class ModelBundle:
    """Fitted treatment and censoring models.

    With censoring, a stage without any censoring event has no model; its censoring
    survival factor is 1.
    """
    adjustment: Adjustment = attr.ib()
    a1_model: FittedLogit = attr.ib()
    a2_model: FittedLogit = attr.ib()
    censoring: bool = attr.ib(default=False)
    c1_model: Optional[FittedExpPH] = attr.ib(default=None)
    c2_model: Optional[FittedExpPH] = attr.ib(default=None)

    def to_dict(self):
        return {
            'adjustment': self.adjustment.value,
            'censoring': self.censoring,
            'models': {name: m.to_dict() for name, m in (('a1', self.a1_model), ('a2', self.a2_model),
                                                         ('c1', self.c1_model), ('c2', self.c2_model))
                       if m is not None},
        }


def fit_models(dataset: CohortDataset, adjustment: Adjustment = Adjustment.ADJUSTED, censoring: bool = True,
               w1_term: Term = W1_TERM) -> ModelBundle:
    c = dataset.columns
    fields = dataset.fields()
    a1_model = fit_logit(A1_SPEC, fields, c.a1)

    course2 = dataset.subset(c.course2)
    fields2 = course2.fields()
    c2 = course2.columns
    a2_model = fit_logit(a2_spec(adjustment, w1_term), fields2, c2.a2)

    c1_model = c2_model = None
    if censoring:
        censored1 = c.delta1 == FirstEvent.CENSORED
        if censored1.any():
            c1_model = fit_exp_ph(C1_SPEC, fields, c.w1, censored1)
        else:
            LOG.info("no censoring before the second course, not fitting a model for it")
        censored2 = c2.delta2 == 0
        if censored2.any():
            c2_model = fit_exp_ph(c2_spec(adjustment, w1_term), fields2, c2.w2, censored2)
        else:
            LOG.info("no censoring after the second course, not fitting a model for it")
    return ModelBundle(adjustment, a1_model, a2_model, censoring, c1_model, c2_model)


def _frozen(a):
    a = np.asarray(a)
    a.setflags(write=False)
    return a


@attr.s(frozen=True, eq=False)
class WeightTable:
    """Per-subject weights ``omega = 1 / (pi_hat * eta_hat)`` for one target sequence.

    ``one_course`` marks consistent subjects who died before a second course, ``two_course`` those
    who died after it; censoring-free estimators select subjects through ``consistent`` themselves.
    """
    id: np.ndarray = attr.ib(converter=_frozen)
    pi_hat: np.ndarray = attr.ib(converter=_frozen)
    eta_hat: np.ndarray = attr.ib(converter=_frozen)
    omega: np.ndarray = attr.ib(converter=_frozen)
    consistent: np.ndarray = attr.ib(converter=_frozen)
    one_course: np.ndarray = attr.ib(converter=_frozen)
    two_course: np.ndarray = attr.ib(converter=_frozen)

    def scaled(self, factor: float) -> "WeightTable":
        return attr.evolve(self, omega=self.omega * factor)


def _target_fields(dataset: CohortDataset, target: EstimandSpec):
    fields = dict(dataset.fields())
    fields['a1'] = np.full(dataset.n, float(target.a1_target))
    fields['a2'] = np.where(dataset.columns.course2, float(target.a2_target), np.nan)
    return fields


def _prob(p, value):
    return p if value == 1 else 1.0 - p


def compute_weights(dataset: CohortDataset, bundle: ModelBundle, target: EstimandSpec,
                    truncate: float = None) -> WeightTable:
    """Weights for every subject under *target*, with treatments set to their target values.

    *truncate*, if given, caps ``omega`` at that quantile of the consistent subjects' weights.
    """
    c = dataset.columns
    course2 = c.course2
    fields = _target_fields(dataset, target)
    fields2 = {k: v[course2] for k, v in fields.items()}

    pi_hat = _prob(bundle.a1_model.predict_prob(fields, dataset.n), target.a1_target)
    pi_hat[course2] *= _prob(bundle.a2_model.predict_prob(fields2, int(course2.sum())), target.a2_target)

    eta_hat = np.ones(dataset.n)
    if bundle.c1_model is not None:
        eta_hat *= bundle.c1_model.predict_surv(fields, c.w1)
    if bundle.c2_model is not None:
        eta_hat[course2] *= bundle.c2_model.predict_surv(fields2, c.w2[course2])

    consistent = (c.a1 == target.a1_target) & (~course2 | (c.a2 == target.a2_target))
    one_course = consistent & (c.delta1 == FirstEvent.DEATH)
    two_course = consistent & course2 & (c.delta2 == 1)

    degenerate = consistent & ~(pi_hat * eta_hat > 0)
    if degenerate.any():
        i = np.flatnonzero(degenerate)[0]
        raise PositivityError(f"estimated probability of the observed history is zero "
                              f"(pi_hat={pi_hat[i]:g}, eta_hat={eta_hat[i]:g})", subject=c.id[i])

    with np.errstate(divide='ignore'):
        omega = 1.0 / (pi_hat * eta_hat)
    if truncate is not None:
        if not 0 < truncate <= 1:
            raise ValueError(f"truncate must be in (0, 1] (got {truncate!r})")
        if consistent.any():
            cap = np.quantile(omega[consistent], truncate)
            LOG.debug("truncating %d weights at %g", int((omega[consistent] > cap).sum()), cap)
            omega = np.minimum(omega, cap)
    return WeightTable(c.id, pi_hat, eta_hat, omega, consistent, one_course, two_course)


def _hajek(method, dataset, weights, target, one, two):
    c = dataset.columns
    omega = weights.omega
    denominator = omega[one].sum() + omega[two].sum()
    if not denominator > 0:
        raise NoConsistentSubjectsError(f"{method}: no subjects consistent with ({target.a1_target}, "
                                        f"{target.a2_target})", tau=target.tau)
    time = dataset.total_time
    numerator = omega[one & (c.w1 > target.tau)].sum() + omega[two & (time > target.tau)].sum()
    return PointEstimate(method, target.tau, numerator / denominator, int(one.sum()), int(two.sum()))


def hajek_no_censoring(dataset: CohortDataset, weights: WeightTable, target: EstimandSpec,
                       method: str = 'hajek') -> PointEstimate:
    """Hájek estimate over consistent subjects who died before a second course or had one."""
    c = dataset.columns
    one = weights.consistent & (c.delta1 == FirstEvent.DEATH)
    two = weights.consistent & c.course2
    return _hajek(method, dataset, weights, target, one, two)


def hajek_censoring(dataset: CohortDataset, weights: WeightTable, target: EstimandSpec,
                    method: str = 'hajek-censoring') -> PointEstimate:
    """Hájek estimate over consistent subjects with an observed death."""
    return _hajek(method, dataset, weights, target, weights.one_course, weights.two_course)


def naive_estimate(dataset: CohortDataset, target: EstimandSpec, method: str = 'naive') -> PointEstimate:
    """Unweighted survival fraction among uncensored subjects treated with both target treatments."""
    c = dataset.columns
    selected = c.course2 & (c.a1 == target.a1_target) & (c.a2 == target.a2_target) & (c.delta2 == 1)
    if not selected.any():
        raise NoConsistentSubjectsError(f"{method}: no uncensored subjects treated with ({target.a1_target}, "
                                        f"{target.a2_target})", tau=target.tau)
    estimate = np.mean(dataset.total_time[selected] > target.tau)
    return PointEstimate(method, target.tau, estimate, 0, int(selected.sum()))


def uncensored(dataset: CohortDataset) -> np.ndarray:
    c = dataset.columns
    return (c.delta1 == FirstEvent.DEATH) | (c.course2 & (c.delta2 == 1))


def cc_iptw(dataset: CohortDataset, weights: WeightTable, target: EstimandSpec,
            method: str = 'cc-ipw') -> PointEstimate:
    """:func:`hajek_no_censoring` over uncensored subjects only, with ``eta_hat`` taken as 1."""
    keep = uncensored(dataset)
    subset = dataset.subset(keep)
    cc_weights = WeightTable(
        weights.id[keep], weights.pi_hat[keep], np.ones(keep.sum()), 1.0 / weights.pi_hat[keep],
        weights.consistent[keep], weights.one_course[keep], weights.two_course[keep],
    )
    return hajek_no_censoring(subset, cc_weights, target, method)


def survival_curve_continuous(dataset: CohortDataset, weights: WeightTable, target: EstimandSpec,
                              taus: Sequence[float], estimator=hajek_censoring, **kwargs):
    return [estimator(dataset, weights, target.at(tau), **kwargs) for tau in taus]


@attr.s(frozen=True)
class GFormulaComponents:
    """Parametric pieces of the g-formula.

    ``death1``/``next1`` are the cause-specific hazards of death and of the second course, ``l2``
    the distribution of L2 among those reaching course 2, and ``w2`` the hazard of death after it.
    """
    p_l1: float = attr.ib()
    death1: FittedExpPH = attr.ib()
    next1: FittedExpPH = attr.ib()
    l2: FittedLogit = attr.ib()
    w2: FittedExpPH = attr.ib()

    DEATH1_SPEC = C1_SPEC
    NEXT1_SPEC = C1_SPEC

    @staticmethod
    def l2_spec(w1_term: Term = W1_TERM) -> CovariateSpec:
        return CovariateSpec.of(Term.intercept(), Term.raw('l1'), Term.raw('a1'), w1_term)

    @staticmethod
    def w2_spec(w1_term: Term = W1_TERM) -> CovariateSpec:
        return c2_spec(Adjustment.ADJUSTED, w1_term)

    @classmethod
    def fit(cls, dataset: CohortDataset, w1_term: Term = W1_TERM) -> "GFormulaComponents":
        c = dataset.columns
        fields = dataset.fields()
        course2 = dataset.subset(c.course2)
        fields2 = course2.fields()
        return cls(
            p_l1=float(np.mean(c.l1)),
            death1=fit_exp_ph(cls.DEATH1_SPEC, fields, c.w1, c.delta1 == FirstEvent.DEATH),
            next1=fit_exp_ph(cls.NEXT1_SPEC, fields, c.w1, c.course2),
            l2=fit_logit(cls.l2_spec(w1_term), fields2, course2.columns.l2),
            w2=fit_exp_ph(cls.w2_spec(w1_term), fields2, course2.columns.w2, course2.columns.delta2 == 1),
        )

    @classmethod
    def from_params(cls, params: "dgp.DgpParams") -> "GFormulaComponents":
        """Components set to the data-generating coefficients."""
        w1_term = Term.threshold('w1', params.w1_cutoff)
        b_l2, r_t2 = params.beta_l2, params.rate_t2
        return cls(
            p_l1=params.p_l1,
            death1=FittedExpPH(cls.DEATH1_SPEC, params.rate_t1),
            next1=FittedExpPH(cls.NEXT1_SPEC, params.rate_a1),
            l2=FittedLogit(cls.l2_spec(w1_term), [b_l2[0], b_l2[1], 0.0, b_l2[2]]),
            w2=FittedExpPH(cls.w2_spec(w1_term), [r_t2[0], 0.0, r_t2[1], 0.0, r_t2[2], r_t2[3]]),
        )


def _exponential(rng, rate):
    return rng.exponential(size=len(rate)) / rate


def gcomputation_curve(dataset: Optional[CohortDataset], target: EstimandSpec, taus: Sequence[float],
                       mc_draws: int, seed: int, components: GFormulaComponents = None,
                       method: str = 'gcomp') -> Sequence[PointEstimate]:
    """Plug-in g-formula estimates at each of *taus* from one set of Monte Carlo draws.

    Components are fitted to *dataset* unless given.
    """
    if components is None:
        components = GFormulaComponents.fit(dataset)
    rng = np.random.default_rng(seed)
    m = mc_draws
    a1 = np.full(m, float(target.a1_target))
    a2 = np.full(m, float(target.a2_target))
    l1 = (rng.random(m) < components.p_l1).astype(float)
    stage1 = {'a1': a1, 'l1': l1}
    wt1 = _exponential(rng, components.death1.rate(stage1, m))
    wa1 = _exponential(rng, components.next1.rate(stage1, m))
    stage2 = dict(stage1, w1=wa1, a2=a2)
    stage2['l2'] = (rng.random(m) < components.l2.predict_prob(stage2, m)).astype(float)
    w2 = _exponential(rng, components.w2.rate(stage2, m))
    t = np.where(wt1 <= wa1, wt1, wa1 + w2)
    return [PointEstimate(method, tau, np.mean(t > tau)) for tau in taus]


def gcomputation(dataset: Optional[CohortDataset], target: EstimandSpec, mc_draws: int, seed: int,
                 components: GFormulaComponents = None) -> PointEstimate:
    return gcomputation_curve(dataset, target, [target.tau], mc_draws, seed, components)[0]
