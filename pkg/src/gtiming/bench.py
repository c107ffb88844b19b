"""Simulation study and worked example.

:func:`run_table1` repeatedly generates cohorts from one scenario, estimates P(T^{1,1} > tau) with each
method and a bootstrap interval, and summarizes bias, MSE, interval width and coverage against the
exact truth. :func:`run_worked_example` analyses one 600-subject cohort.
"""
import logging
from typing import List, Mapping, Optional, Sequence

import attr
from lifelines import KaplanMeierFitter
import numpy as np
import pandas as pd

from . import dgp, methods, resample
from .cohort import CohortDataset, FirstEvent, write_csv
from .errors import GTimingError
from .results import SurvivalCurveEstimate, write_curve_csv, write_json
from .util import atomic_write, replicate_rng


LOG = logging.getLogger(__name__)

#: Methods compared in each scenario, reference method first
SCENARIO_METHODS = {
    1: [('Adjusted IPTW', 'ipw'), ('Unadjusted IPTW', 'ipw-unadj'), ('Naive', 'naive')],
    2: [('Adjusted IPTW', 'ipw'), ('Unadjusted IPTW', 'ipw-unadj'), ('CC-IPTW', 'cc-ipw')],
}
REPLICATE_COLUMNS = ['rep', 'method', 'estimate', 'lo', 'hi']


@attr.s(frozen=True)
class MethodMetrics:
    method: str = attr.ib()
    bias: float = attr.ib()
    #: 100 * |bias| / truth
    pct_bias: float = attr.ib()
    mse: float = attr.ib()
    #: MSE relative to the first (reference) method's
    rel_mse: float = attr.ib()
    mean_ci_width: float = attr.ib()
    coverage: float = attr.ib()
    n_ok: int = attr.ib()
    n_failed: int = attr.ib()


def summarize_replicates(replicates: pd.DataFrame, truth: float, order: Sequence[str]) -> List[MethodMetrics]:
    """Metrics per method from per-replicate rows ``rep,method,estimate,lo,hi`` (NaN where a replicate failed)."""
    stats = {}
    for method in order:
        rows = replicates[replicates.method == method]
        ok = rows.dropna(subset=['estimate', 'lo', 'hi'])
        error = ok.estimate.to_numpy() - truth
        stats[method] = dict(
            bias=float(np.mean(error)) if len(ok) else np.nan,
            mse=float(np.mean(error ** 2)) if len(ok) else np.nan,
            mean_ci_width=float(np.mean(ok.hi - ok.lo)) if len(ok) else np.nan,
            coverage=float(np.mean((ok.lo <= truth) & (truth <= ok.hi))) if len(ok) else np.nan,
            n_ok=len(ok),
            n_failed=len(rows) - len(ok),
        )
    reference = stats[order[0]]['mse']
    return [MethodMetrics(method=m, pct_bias=100 * abs(s['bias']) / truth, rel_mse=s['mse'] / reference, **s)
            for m, s in stats.items()]


@attr.s(frozen=True, eq=False)
class SimStudyReport:
    scenario: int = attr.ib()
    truth: float = attr.ib()
    tau: float = attr.ib()
    n: int = attr.ib()
    reps: int = attr.ib()
    B: int = attr.ib()
    level: float = attr.ib()
    seed: int = attr.ib()
    metrics: List[MethodMetrics] = attr.ib()
    replicates: pd.DataFrame = attr.ib()

    def to_dict(self):
        return {
            'scenario': self.scenario,
            'truth': self.truth,
            'tau': self.tau,
            'n': self.n,
            'reps': self.reps,
            'B': self.B,
            'level': self.level,
            'seed': self.seed,
            'methods': [attr.asdict(m) for m in self.metrics],
        }

    def to_markdown(self) -> str:
        lines = [
            f"Scenario {self.scenario}: P(T^{{1,1}} > {self.tau:g}), truth {self.truth:.6f}, "
            f"n = {self.n}, {self.reps} data sets, {self.B} bootstrap replicates",
            "",
            "| Method | Bias | %Bias | rel. MSE | Mean width | Coverage | Failed |",
            "|---|---:|---:|---:|---:|---:|---:|",
        ]
        for m in self.metrics:
            lines.append(f"| {m.method} | {m.bias:.4f} | {m.pct_bias:.2f} | {m.rel_mse:.2f} | "
                         f"{m.mean_ci_width:.3f} | {m.coverage:.3f} | {m.n_failed} |")
        return "\n".join(lines) + "\n"

    def write(self, prefix: str):
        """Write ``<prefix>.json``, ``<prefix>.md`` and the per-replicate ``<prefix>.csv``."""
        write_json(self.to_dict(), f'{prefix}.json')
        with atomic_write(f'{prefix}.md') as f:
            f.write(self.to_markdown())
        with atomic_write(f'{prefix}.csv', newline='') as f:
            self.replicates[REPLICATE_COLUMNS].to_csv(f, index=False)


def _seeds(seed: int, rep: int):
    rng = replicate_rng(seed, rep)
    return int(rng.integers(2 ** 32)), int(rng.integers(2 ** 32))


def run_table1(scenario: int, reps: int = 200, n: int = dgp.DEFAULT_N, B: int = 200, tau: float = 15.0,
               seed: int = 0, params: dgp.DgpParams = None, level: float = 0.95, threads: int = 1,
               truth: float = None) -> SimStudyReport:
    """Simulation study for one scenario.

    Every method is bootstrapped with the same resamples of each data set. The truth defaults to
    the exact value from :func:`~gtiming.dgp.truth_closed_form`.
    """
    params = dgp.scenario_params(scenario, params)
    if truth is None:
        truth = dgp.truth_closed_form(params, 1, 1, tau)
    labelled = SCENARIO_METHODS[scenario]
    rows = []
    for rep in range(reps):
        data_seed, boot_seed = _seeds(seed, rep)
        dataset = dgp.generate(params, n, data_seed)
        for label, name in labelled:
            estimator = methods.as_vector(methods.get_pipeline(name), [tau])
            try:
                result = resample.bootstrap(dataset, estimator, B, level, boot_seed, threads)
                rows.append((rep, label, result.point[0], result.lo[0], result.hi[0]))
            except GTimingError as e:
                LOG.warning("data set %d, %s failed: %s", rep, label, e)
                rows.append((rep, label, np.nan, np.nan, np.nan))
        if (rep + 1) % 10 == 0 or rep + 1 == reps:
            LOG.info("scenario %d: %d of %d data sets done", scenario, rep + 1, reps)

    replicates = pd.DataFrame(rows, columns=REPLICATE_COLUMNS)
    metrics = summarize_replicates(replicates, truth, [label for label, _ in labelled])
    return SimStudyReport(scenario, truth, tau, n, reps, B, level, seed, metrics, replicates)


@attr.s(frozen=True)
class CourseCounts:
    at_risk: int = attr.ib()
    treated: int = attr.ib()
    untreated: int = attr.ib()
    low_ef: int = attr.ib()
    normal_ef: int = attr.ib()

    def to_dict(self):
        pct = (lambda k: 100.0 * k / self.at_risk) if self.at_risk else (lambda k: float('nan'))
        return {
            'at_risk': self.at_risk,
            'treated': self.treated, 'treated_pct': pct(self.treated),
            'untreated': self.untreated, 'untreated_pct': pct(self.untreated),
            'low_ef': self.low_ef, 'low_ef_pct': pct(self.low_ef),
            'normal_ef': self.normal_ef, 'normal_ef_pct': pct(self.normal_ef),
        }


@attr.s(frozen=True)
class CohortSummary:
    """Course-level counts and medians of a cohort.

    Percentages are of each course's at-risk set.
    """
    n: int = attr.ib()
    second_course: int = attr.ib()
    died_before: int = attr.ib()
    censored_before: int = attr.ib()
    course1: CourseCounts = attr.ib()
    course2: CourseCounts = attr.ib()
    median_w1: float = attr.ib()
    median_survival: float = attr.ib()

    def to_dict(self):
        d = attr.asdict(self, recurse=False)
        d.update(course1=self.course1.to_dict(), course2=self.course2.to_dict())
        return d


def summarize(dataset: CohortDataset) -> CohortSummary:
    c = dataset.columns
    second = c.course2

    def counts(a, ef):
        return CourseCounts(len(a), int((a == 1).sum()), int((a == 0).sum()), int((ef == 1).sum()),
                            int((ef == 0).sum()))

    died = (c.delta1 == FirstEvent.DEATH) | (second & (c.delta2 == 1))
    km = KaplanMeierFitter().fit(dataset.total_time, event_observed=died)
    return CohortSummary(
        n=dataset.n,
        second_course=int(second.sum()),
        died_before=int((c.delta1 == FirstEvent.DEATH).sum()),
        censored_before=int((c.delta1 == FirstEvent.CENSORED).sum()),
        course1=counts(c.a1, c.l1),
        course2=counts(c.a2[second], c.l2[second]),
        median_w1=float(np.median(c.w1[second])) if second.any() else np.nan,
        median_survival=float(km.median_survival_time_),
    )


@attr.s(frozen=True, eq=False)
class WorkedExample:
    dataset: CohortDataset = attr.ib()
    summary: CohortSummary = attr.ib()
    curves: Mapping[str, SurvivalCurveEstimate] = attr.ib()

    def write(self, prefix: str):
        """Write the cohort, ``<prefix>.summary.json``, and one ``<prefix>.<method>.csv`` per curve."""
        write_csv(self.dataset, f'{prefix}.cohort.csv')
        write_json({'summary': self.summary.to_dict(),
                    'curves': {name: c.to_dict() for name, c in self.curves.items()}},
                   f'{prefix}.summary.json')
        for name, curve in self.curves.items():
            write_curve_csv([curve], f'{prefix}.{name}.csv')


WORKED_EXAMPLE_METHODS = ('ipw', 'ipw-unadj', 'msm')


def run_worked_example(seed: int, B: int = 300, taus: Sequence[float] = tuple(range(21)),
                       params: dgp.DgpParams = None, level: float = 0.95, threads: int = 1,
                       options: Optional[methods.PipelineOptions] = None) -> WorkedExample:
    """Adjusted and unadjusted continuous-time curves and the adjusted discrete-time curve, with bootstrap bands."""
    dataset = dgp.generate_worked_example(seed, params)
    summary = summarize(dataset)
    LOG.info("worked example: %d reach course 2, %d die and %d are censored before it",
             summary.second_course, summary.died_before, summary.censored_before)
    curves = {}
    for name in WORKED_EXAMPLE_METHODS:
        pipeline = methods.get_pipeline(name, options)
        points = pipeline(dataset, taus)
        result = resample.bootstrap(dataset, methods.as_vector(pipeline, taus), B, level, seed, threads)
        curves[name] = SurvivalCurveEstimate(name, taus, [p.estimate for p in points], result.lo, result.hi,
                                             level, B - result.n_failed, result.n_failed, points)
    return WorkedExample(dataset, summary, curves)
