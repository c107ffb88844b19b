"""Discrete-time analysis on a grid of equal-width intervals.

A cohort is expanded into person-interval rows, weighted by the inverse of the time-varying
treatment probability times the probability of remaining uncensored, and the weighted discrete-time
hazard of death is estimated interval by interval.

Interval conventions: an event at time ``t`` falls in interval ``ceil(t / width)``. The second course
falls in interval ``S = max(2, ceil(w1 / width))``, or ``S = J + 1`` if that is past the grid; later
events fall no earlier than ``S``. Events past the grid are not recorded.
"""
import logging
import math
from typing import Optional, Sequence

import attr
import numpy as np
import pandas as pd

from .cohort import CohortDataset, EstimandSpec, FirstEvent
from .errors import PositivityError
from .fitglm import CovariateSpec, FittedLogit, Term, fit_logit
from .ipw import A1_SPEC, Adjustment
from .results import PointEstimate, SurvivalCurveEstimate
from .util import atomic_write


LOG = logging.getLogger(__name__)

DEFAULT_WIDTH = 1.0
DEFAULT_J = 20
#: Cutoff, in months, of the second-course timing term
S_CUTOFF = 15.0

EXPORT_COLUMNS = ['id', 'j', 'v', 'd', 'x', 'y', 'c', 'weight']


@attr.s(frozen=True, eq=False)
class PersonIntervalTable:
    """One row per subject per interval at risk, sorted by ``(id, j)``.

    ``d``/``x`` (decision and covariate) are NaN where no course starts. Subject-level columns
    ``s``, ``a1``, ``l1``, ``a2``, ``l2`` are repeated on every row; ``a2``/``l2`` are NaN if ``S = J + 1``.
    """
    frame: pd.DataFrame = attr.ib()
    width: float = attr.ib()
    J: int = attr.ib()

    def __len__(self):
        return len(self.frame)

    def with_weights(self, weight) -> "PersonIntervalTable":
        return attr.evolve(self, frame=self.frame.assign(weight=np.asarray(weight, dtype=float)))

    def write_csv(self, path):
        """Export ``id,j,v,d,x,y,c,weight``, with empty cells where there is no decision or covariate."""
        frame = self.frame[EXPORT_COLUMNS].astype({'d': 'Int64', 'x': 'Int64'})
        with atomic_write(path, newline='') as f:
            frame.to_csv(f, index=False)


def discretize(dataset: CohortDataset, width: float = DEFAULT_WIDTH, J: int = DEFAULT_J) -> PersonIntervalTable:
    if not width > 0:
        raise ValueError(f"interval width must be positive (got {width!r})")
    if J < 1:
        raise ValueError(f"J must be at least 1 (got {J!r})")
    c = dataset.columns

    k1 = np.ceil(c.w1 / width).astype(np.int64)
    s = np.where(c.course2, np.where(k1 > J, J + 1, np.maximum(2, k1)), J + 1)
    second = s <= J
    k_total = np.ceil(dataset.total_time / width).astype(np.int64)
    k_end = np.where(second, np.maximum(k_total, s), np.where(c.course2, J + 1, k1))
    died = (c.delta1 == FirstEvent.DEATH) | (c.course2 & (c.delta2 == 1))
    censored = (c.delta1 == FirstEvent.CENSORED) | (c.course2 & (c.delta2 == 0))
    rows = np.minimum(k_end, J)

    subject = np.repeat(np.arange(dataset.n), rows)
    starts = np.repeat(np.cumsum(rows) - rows, rows)
    j = np.arange(len(subject)) - starts + 1
    end = j == k_end[subject]
    at_s = j == s[subject]
    a2 = np.where(second, c.a2, np.nan)[subject]
    l2 = np.where(second, c.l2, np.nan)[subject]

    frame = pd.DataFrame({
        'id': c.id[subject],
        'j': j,
        'v': ((j == 1) | at_s).astype(np.int8),
        'd': np.where(j == 1, c.a1[subject], np.where(at_s, a2, np.nan)),
        'x': np.where(j == 1, c.l1[subject], np.where(at_s, l2, np.nan)),
        'y': (end & died[subject]).astype(np.int8),
        'c': (end & censored[subject]).astype(np.int8),
        's': s[subject],
        'a1': c.a1[subject].astype(float),
        'l1': c.l1[subject].astype(float),
        'a2': a2,
        'l2': l2,
        'weight': np.nan,
    })
    LOG.debug("discretized %d subjects into %d person-intervals (width %g, J %d)",
              dataset.n, len(frame), width, J)
    return PersonIntervalTable(frame, float(width), int(J))


def rule_consistent(v, d, j, target: EstimandSpec):
    """Decision ``d`` at interval ``j`` agrees with the rule: ``a1`` at ``j = 1``, ``a2`` at a later course,
    no decision where ``v = 0``."""
    v, d, j = np.asarray(v), np.asarray(d, dtype=float), np.asarray(j)
    expected = np.where(j == 1, target.a1_target, target.a2_target)
    return np.where(v == 0, np.isnan(d), d == expected)


def history_consistent(table: PersonIntervalTable, target: EstimandSpec) -> np.ndarray:
    """Every decision up to and including each row agrees with the rule."""
    f = table.frame
    ok = pd.Series(rule_consistent(f.v, f.d, f.j, target).astype(np.int8), index=f.index)
    return ok.groupby(f.id, sort=False).cummin().to_numpy(dtype=bool)


def _s_spec(adjustment: Adjustment) -> CovariateSpec:
    if adjustment is Adjustment.ADJUSTED:
        return CovariateSpec.of(Term.threshold('s_time', S_CUTOFF))
    return CovariateSpec.of()


def a2_spec(adjustment: Adjustment) -> CovariateSpec:
    base = CovariateSpec.of(Term.intercept(), Term.raw('a1'), Term.raw('l1'), Term.raw('l2'))
    return base + _s_spec(adjustment)


@attr.s(frozen=True)
class CensoringModel:
    """Pooled logistic model of the censoring hazard.

    Intervals with no censoring event have hazard 0 and no intercept of their own.
    """
    model: Optional[FittedLogit] = attr.ib()
    intervals: Sequence[int] = attr.ib(converter=tuple)
    width: float = attr.ib(default=DEFAULT_WIDTH)

    def hazard(self, frame: pd.DataFrame) -> np.ndarray:
        out = np.zeros(len(frame))
        if self.model is None:
            return out
        rows = frame.j.isin(self.intervals).to_numpy()
        if rows.any():
            out[rows] = self.model.predict_prob(_censor_fields(frame[rows], self.intervals, self.width))
        return out


def _censor_fields(frame: pd.DataFrame, intervals, width: float):
    post = (frame.j >= frame.s).to_numpy(dtype=float)
    fields = {f'j{k}': (frame.j == k).to_numpy(dtype=float) for k in intervals}
    fields.update(
        a1=frame.a1.to_numpy(),
        l1=frame.l1.to_numpy(),
        post=post,
        post_a2=post * np.nan_to_num(frame.a2.to_numpy()),
        post_l2=post * np.nan_to_num(frame.l2.to_numpy()),
        post_s=post * (frame.s.to_numpy() * width > S_CUTOFF),
    )
    return fields


def censor_spec(intervals, adjustment: Adjustment) -> CovariateSpec:
    terms = [Term.raw(f'j{k}') for k in intervals]
    terms += [Term.raw('a1'), Term.raw('l1'), Term.raw('post'), Term.raw('post_a2'), Term.raw('post_l2')]
    if adjustment is Adjustment.ADJUSTED:
        terms.append(Term.raw('post_s'))
    return CovariateSpec(terms)


def _identifiable(spec: CovariateSpec, fields, y: np.ndarray, model: str) -> CovariateSpec:
    """Keep terms in order while each adds a linearly independent column.

    A term whose rows all share one outcome is dropped too, its coefficient has no finite MLE.
    """
    n = len(y)
    kept = []
    for term in spec.terms:
        column = term.column(fields, n)
        touched = y[column != 0]
        if touched.size and touched.min() == touched.max():
            LOG.debug("dropping %s from %s model: no outcome variation on its rows", term.name, model)
            continue
        candidate = CovariateSpec(kept + [term])
        if np.linalg.matrix_rank(candidate.design(fields, n)) == len(candidate):
            kept.append(term)
        else:
            LOG.debug("dropping %s from %s model: not identifiable from these rows", term.name, model)
    return CovariateSpec(kept)


def fit_censor_model(table: PersonIntervalTable, adjustment: Adjustment = Adjustment.ADJUSTED) -> CensoringModel:
    f = table.frame
    intervals = sorted(f.j[f.c == 1].unique().tolist())
    if not intervals:
        LOG.info("no censoring events, censoring hazard is 0 in every interval")
        return CensoringModel(None, (), table.width)
    rows = f[f.j.isin(intervals)]
    fields = _censor_fields(rows, intervals, table.width)
    # e.g. post-course terms when nobody in these intervals has had a second course
    c = rows.c.to_numpy()
    spec = _identifiable(censor_spec(intervals, adjustment), fields, c, "censoring")
    model = fit_logit(spec, fields, c)
    return CensoringModel(model, intervals, table.width)


@attr.s(frozen=True)
class DiscreteModels:
    a1_model: FittedLogit = attr.ib()
    a2_model: Optional[FittedLogit] = attr.ib()
    censor_model: CensoringModel = attr.ib()


def _a2_fields(frame: pd.DataFrame, width: float):
    return {
        'a1': frame.a1.to_numpy(),
        'l1': frame.l1.to_numpy(),
        'l2': frame.l2.to_numpy(),
        's_time': frame.s.to_numpy() * width,
    }


def fit_discrete_models(table: PersonIntervalTable, adjustment: Adjustment = Adjustment.ADJUSTED) -> DiscreteModels:
    f = table.frame
    first = f[f.j == 1]
    a1_model = fit_logit(A1_SPEC, {'l1': first.l1.to_numpy()}, first.d.to_numpy())
    at_s = f[(f.j == f.s)]
    a2_model = None
    if len(at_s):
        fields, d = _a2_fields(at_s, table.width), at_s.d.to_numpy()
        # I(s_time > 15) is constant when the grid ends by month 15
        a2_model = fit_logit(_identifiable(a2_spec(adjustment), fields, d, "second course"), fields, d)
    return DiscreteModels(a1_model, a2_model, fit_censor_model(table, adjustment))


def _treatment_factors(table: PersonIntervalTable, models: DiscreteModels, target: EstimandSpec):
    """P(A1 = a1 | L1) for every row, and P(A2 = a2 | history) for rows at or after S (else 1)."""
    f = table.frame
    p1 = models.a1_model.predict_prob({'l1': f.l1.to_numpy()}, len(f))
    f1 = p1 if target.a1_target == 1 else 1 - p1
    f2 = np.ones(len(f))
    post = (f.j >= f.s).to_numpy()
    if post.any():
        fields = _a2_fields(f[post], table.width)
        fields['a1'] = np.full(int(post.sum()), float(target.a1_target))
        p2 = models.a2_model.predict_prob(fields)
        f2[post] = p2 if target.a2_target == 1 else 1 - p2
    return f1, f2


def uncensored_probability(table: PersonIntervalTable, models: DiscreteModels) -> np.ndarray:
    """Product over intervals ``u <= j`` of one minus the censoring hazard."""
    f = table.frame
    survive = pd.Series(1.0 - models.censor_model.hazard(f), index=f.index)
    return survive.groupby(f.id, sort=False).cumprod().to_numpy()


def treatment_probability_full(table: PersonIntervalTable, models: DiscreteModels,
                               target: EstimandSpec) -> np.ndarray:
    """Time-varying treatment probability as the product over every interval ``u <= j``,
    with factor 1 wherever no course starts."""
    f = table.frame
    f1, f2 = _treatment_factors(table, models, target)
    factor = np.where(f.j == 1, f1, np.where(f.j == f.s, f2, 1.0))
    return pd.Series(factor, index=f.index).groupby(f.id, sort=False).cumprod().to_numpy()


def discrete_weights(table: PersonIntervalTable, models: DiscreteModels, target: EstimandSpec) -> PersonIntervalTable:
    f1, f2 = _treatment_factors(table, models, target)
    probability = f1 * f2 * uncensored_probability(table, models)
    consistent = history_consistent(table, target)
    zero = consistent & ~(probability > 0)
    if zero.any():
        i = np.flatnonzero(zero)[0]
        raise PositivityError("estimated treatment and censoring probability is zero",
                              subject=table.frame.id.iat[i])
    with np.errstate(divide='ignore'):
        return table.with_weights(1.0 / probability)


@attr.s(frozen=True, eq=False)
class DiscreteHazardCurve:
    """Hazard per interval ``1..J`` and survival at the end of intervals ``0..J``.

    Where nobody is at risk the hazard is NaN, the interval is flagged in ``undefined`` and
    survival is carried forward.
    """
    hazard: np.ndarray = attr.ib()
    survival: np.ndarray = attr.ib()
    undefined: np.ndarray = attr.ib()
    width: float = attr.ib(default=DEFAULT_WIDTH)

    @classmethod
    def from_hazard(cls, hazard, width=DEFAULT_WIDTH) -> "DiscreteHazardCurve":
        hazard = np.asarray(hazard, dtype=float)
        undefined = np.isnan(hazard)
        survival = np.concatenate([[1.0], np.cumprod(np.where(undefined, 1.0, 1.0 - np.nan_to_num(hazard)))])
        return cls(hazard, survival, undefined, width)

    @property
    def J(self) -> int:
        return len(self.hazard)

    def at(self, tau: float) -> float:
        """Survival probability at *tau*, constant within each interval."""
        if not 0 <= tau / self.width <= self.J + 1e-9:
            raise ValueError(f"tau={tau:g} outside the grid [0, {self.J * self.width:g}]")
        k = min(int(math.floor(tau / self.width + 1e-9)), self.J)
        return float(self.survival[k])


def _msm_rows(table: PersonIntervalTable, target: EstimandSpec):
    f = table.frame
    if f.weight.isna().all():
        raise ValueError("person-interval table has no weights")
    keep = history_consistent(table, target) & (f.c == 0).to_numpy()
    return f[keep]


def fit_msm(table: PersonIntervalTable, target: EstimandSpec, method: str = 'ratio') -> DiscreteHazardCurve:
    """Weighted discrete-time hazard of death, per interval.

    ``ratio`` computes the weighted ratio of deaths to rows at risk directly; ``logistic`` fits the
    saturated pooled logistic model with one intercept per interval.
    """
    rows = _msm_rows(table, target)
    index = rows.j.to_numpy() - 1
    at_risk = np.bincount(index, weights=rows.weight.to_numpy(), minlength=table.J)[:table.J]
    deaths = np.bincount(index, weights=(rows.weight * rows.y).to_numpy(), minlength=table.J)[:table.J]
    with np.errstate(invalid='ignore', divide='ignore'):
        hazard = np.where(at_risk > 0, deaths / at_risk, np.nan)

    if method == 'logistic':
        # Intervals with no deaths or only deaths have their hazard at the boundary, outside the model
        interior = [k for k in range(1, table.J + 1) if 0 < deaths[k - 1] < at_risk[k - 1]]
        if interior:
            fitted = rows[rows.j.isin(interior)]
            spec = CovariateSpec([Term.raw(f'j{k}') for k in interior])
            fields = {f'j{k}': (fitted.j == k).to_numpy(dtype=float) for k in interior}
            model = fit_logit(spec, fields, fitted.y.to_numpy(), fitted.weight.to_numpy())
            # Row i of the identity design is interval interior[i]
            identity = {f'j{k}': np.eye(len(interior))[i] for i, k in enumerate(interior)}
            hazard[np.asarray(interior) - 1] = model.predict_prob(identity, len(interior))
    elif method != 'ratio':
        raise ValueError(f"unknown method {method!r}, expected 'ratio' or 'logistic'")

    curve = DiscreteHazardCurve.from_hazard(hazard, table.width)
    if curve.undefined.any():
        LOG.warning("no weighted person-time at risk in intervals %s; survival carried forward",
                    (np.flatnonzero(curve.undefined) + 1).tolist())
    return curve


def grid_size(taus: Sequence[float], width: float = DEFAULT_WIDTH, J: int = DEFAULT_J) -> int:
    """Smallest grid of at least *J* intervals covering every tau."""
    return max(J, int(math.ceil(max(taus, default=0) / width - 1e-9)))


def survival_curve_discrete(dataset: CohortDataset, target: EstimandSpec, width: float = DEFAULT_WIDTH,
                            J: int = DEFAULT_J, adjustment: Adjustment = Adjustment.ADJUSTED,
                            taus: Sequence[float] = None, method: str = 'msm') -> SurvivalCurveEstimate:
    """Discretize, weight, fit and read the survival curve at each of *taus* (default: every interval end)."""
    if taus is None:
        taus = [k * width for k in range(J + 1)]
    J = grid_size(taus, width, J)
    table = discretize(dataset, width, J)
    models = fit_discrete_models(table, adjustment)
    weighted = discrete_weights(table, models, target)
    curve = fit_msm(weighted, target)
    points = [PointEstimate(method, tau, curve.at(tau)) for tau in taus]
    return SurvivalCurveEstimate(method, taus, [p.estimate for p in points], points=points)
