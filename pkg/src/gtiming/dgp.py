"""Synthetic cohorts for the two-course template, and the interventional truth.

Each subject is generated as follows (all rates are ``exp`` of a linear predictor):

1. ``L1 ~ Ber(p_l1)``, ``A1 | L1 ~ Ber(expit(beta_a1 . (1, L1)))``
2. competing times to death ``W_T1`` and to the next course ``W_A1`` with rates
   ``exp(rate_t1 . (1, A1, L1))`` and ``exp(rate_a1 . (1, A1, L1))``, plus time to censoring ``C1``
   (rate ``exp(rate_c1 . (1, A1, L1))``) if censoring is enabled
3. subjects reaching course 2 get, with ``I = I(W1 > w1_cutoff)``,
   ``L2 ~ Ber(expit(beta_l2 . (1, L1, I)))``, ``A2 ~ Ber(expit(beta_a2 . (1, L2, I)))``, time to death
   ``W_T2`` with rate ``exp(rate_t2 . (1, A2, L2, I))`` and, with censoring, ``C2`` with rate
   ``exp(rate_c2 . (1, A2, L2, I))``
"""
import logging
import math

import attr
import numpy as np
from scipy.special import expit
from schematics.exceptions import ValidationError

from . import config
from .cohort import CohortColumns, CohortDataset, CohortMeta, FirstEvent


LOG = logging.getLogger(__name__)

#: Uniform draws consumed per subject by :func:`generate`
DRAWS_PER_SUBJECT = 9
#: Smallest number of draws accepted by :func:`simulate_truth`
MIN_TRUTH_DRAWS = 10 ** 5
#: Seed the committed truth constant was checked against
TRUTH_SEED = 20240101
#: P(T^{1,1} > 15) under the default parameters, from :func:`truth_closed_form`
TRUTH_P11_TAU15 = 0.147725021328
WORKED_EXAMPLE_N = 600
DEFAULT_N = 2000

_CHUNK = 10 ** 6


def _finite(values):
    if not all(math.isfinite(v) for v in values):
        raise ValidationError("coefficients must be finite")


class DgpParams(config.Config):
    p_l1 = config.option(float, default=0.5, min_value=0.0, max_value=1.0, help="P(L1 = 1)")
    beta_a1 = config.option_list(float, default=lambda: [1.0, -1.0], size=2, validators=[_finite],
                                 help="Logit of P(A1 = 1) on (1, L1)")
    rate_t1 = config.option_list(float, default=lambda: [-3.0, -1.0, 1.0], size=3, validators=[_finite],
                                 help="Log-rate of death before course 2 on (1, A1, L1)")
    rate_a1 = config.option_list(float, default=lambda: [-3.0, 1.0, 1.0], size=3, validators=[_finite],
                                 help="Log-rate of starting course 2 on (1, A1, L1)")
    rate_c1 = config.option_list(float, default=lambda: [-4.0, -1.0, 1.0], size=3, validators=[_finite],
                                 help="Log-rate of censoring before course 2 on (1, A1, L1)")
    beta_l2 = config.option_list(float, default=lambda: [0.5, 0.15, -0.15], size=3, validators=[_finite],
                                 help="Logit of P(L2 = 1) on (1, L1, I(W1 > cutoff))")
    beta_a2 = config.option_list(float, default=lambda: [1.0, -1.0, 1.5], size=3, validators=[_finite],
                                 help="Logit of P(A2 = 1) on (1, L2, I(W1 > cutoff))")
    rate_t2 = config.option_list(float, default=lambda: [-3.0, 1.0, 1.0, -2.0], size=4, validators=[_finite],
                                 help="Log-rate of death after course 2 on (1, A2, L2, I(W1 > cutoff))")
    rate_c2 = config.option_list(float, default=lambda: [-4.0, 1.0, 1.0, -2.0], size=4, validators=[_finite],
                                 help="Log-rate of censoring after course 2 on (1, A2, L2, I(W1 > cutoff))")
    censoring_enabled = config.option(bool, default=True, help="Generate censoring times")
    w1_cutoff = config.option(float, default=15.0, help="Cutoff of the I(W1 > cutoff) terms, in months")

    def evolve(self, **changes) -> "DgpParams":
        return config.structure({**config.unstructure(self), **changes}, DgpParams)


def default_params() -> DgpParams:
    return config.structure({}, DgpParams)


def scenario_params(scenario: int, params: DgpParams = None) -> DgpParams:
    """Parameters for simulation scenario 1 (no censoring) or 2 (censoring)."""
    if scenario not in (1, 2):
        raise ValueError(f"scenario must be 1 or 2 (got {scenario!r})")
    return (params or default_params()).evolve(censoring_enabled=(scenario == 2))


def _lp(coef, *covariates):
    out = coef[0]
    for c, x in zip(coef[1:], covariates):
        out = out + c * x
    return out


def _exponential(u, rate):
    # Inverse transform; clipping keeps every waiting time strictly positive and finite
    return -np.log(np.maximum(u, np.finfo(float).tiny)) / rate


def generate(params: DgpParams, n: int, seed: int) -> CohortDataset:
    """Generate a cohort of *n* subjects.

    Subject ``i`` uses only row ``i`` of one ``(n, 9)`` uniform matrix drawn from *seed*, so its record
    does not depend on how the cohort is processed. Ties between competing times break as
    death < next course < censoring.
    """
    if n < 1:
        raise ValueError(f"n must be at least 1 (got {n})")
    u = np.random.default_rng(seed).random((n, DRAWS_PER_SUBJECT))
    p = params

    l1 = (u[:, 0] < p.p_l1).astype(np.int8)
    a1 = (u[:, 1] < expit(_lp(p.beta_a1, l1))).astype(np.int8)
    wt1 = _exponential(u[:, 2], np.exp(_lp(p.rate_t1, a1, l1)))
    wa1 = _exponential(u[:, 3], np.exp(_lp(p.rate_a1, a1, l1)))
    if p.censoring_enabled:
        c1 = _exponential(u[:, 4], np.exp(_lp(p.rate_c1, a1, l1)))
    else:
        c1 = np.full(n, np.inf)

    died = (wt1 <= wa1) & (wt1 <= c1)
    course2 = ~died & (wa1 <= c1)
    delta1 = np.where(died, FirstEvent.DEATH, np.where(course2, FirstEvent.NEXT_COURSE, FirstEvent.CENSORED))
    w1 = np.minimum(np.minimum(wt1, wa1), c1)

    late = (w1 > p.w1_cutoff).astype(float)
    l2 = (u[:, 5] < expit(_lp(p.beta_l2, l1, late))).astype(np.int8)
    a2 = (u[:, 6] < expit(_lp(p.beta_a2, l2, late))).astype(np.int8)
    wt2 = _exponential(u[:, 7], np.exp(_lp(p.rate_t2, a2, l2, late)))
    if p.censoring_enabled:
        c2 = _exponential(u[:, 8], np.exp(_lp(p.rate_c2, a2, l2, late)))
    else:
        c2 = np.full(n, np.inf)

    columns = CohortColumns(
        id=np.arange(n),
        l1=l1,
        a1=a1,
        w1=w1,
        delta1=delta1,
        course2=course2,
        l2=np.where(course2, l2, 0),
        a2=np.where(course2, a2, 0),
        w2=np.where(course2, np.minimum(wt2, c2), np.nan),
        delta2=np.where(course2, wt2 <= c2, 0),
    )
    scenario = '2' if p.censoring_enabled else '1'
    LOG.debug("generated %d subjects (scenario %s, seed %s): %d reached course 2",
              n, scenario, seed, int(course2.sum()))
    return CohortDataset(columns, CohortMeta(scenario=scenario, seed=seed))


def generate_worked_example(seed: int, params: DgpParams = None) -> CohortDataset:
    """The 600-subject scenario 2 cohort analysed in the worked example."""
    return generate(scenario_params(2, params), WORKED_EXAMPLE_N, seed)


@attr.s(frozen=True)
class TruthEstimate:
    value: float = attr.ib()
    mc_draws: int = attr.ib()
    mc_std_error: float = attr.ib()


def simulate_truth(params: DgpParams, a1: int, a2: int, tau: float, draws: int, seed: int) -> TruthEstimate:
    """Monte Carlo estimate of P(T^{a1,a2} > tau) with both treatments forced and censoring disabled."""
    if draws < MIN_TRUTH_DRAWS:
        raise ValueError(f"draws must be at least {MIN_TRUTH_DRAWS} (got {draws})")
    p = params
    rng = np.random.default_rng(seed)
    survivors = 0
    remaining = draws
    while remaining > 0:
        m = min(remaining, _CHUNK)
        u = rng.random((m, 5))
        l1 = (u[:, 0] < p.p_l1).astype(float)
        wt1 = _exponential(u[:, 1], np.exp(_lp(p.rate_t1, a1, l1)))
        wa1 = _exponential(u[:, 2], np.exp(_lp(p.rate_a1, a1, l1)))
        late = (wa1 > p.w1_cutoff).astype(float)
        l2 = (u[:, 3] < expit(_lp(p.beta_l2, l1, late))).astype(float)
        wt2 = _exponential(u[:, 4], np.exp(_lp(p.rate_t2, a2, l2, late)))
        t = np.where(wt1 <= wa1, wt1, wa1 + wt2)
        survivors += int(np.count_nonzero(t > tau))
        remaining -= m
    value = survivors / draws
    return TruthEstimate(value=value, mc_draws=draws, mc_std_error=math.sqrt(value * (1 - value) / draws))


def _segment(lam_a, lam, r, tau, a, b):
    """Integral over w in [a, b] of ``lam_a exp(-lam w) exp(-r (tau - w))``."""
    if b <= a:
        return 0.0
    d = lam - r
    if abs(d) < 1e-12:
        return lam_a * math.exp(-r * tau) * (b - a)
    # Exponents kept non-positive for large tau
    return lam_a * (math.exp(-lam * a - r * (tau - a)) - math.exp(-lam * b - r * (tau - b))) / d


def truth_closed_form(params: DgpParams, a1: int, a2: int, tau: float) -> float:
    """Exact P(T^{a1,a2} > tau), integrating over the time of the second course piecewise around the cutoff."""
    p = params
    if tau <= 0:
        return 1.0
    total = 0.0
    for l1, p_cell in ((1, p.p_l1), (0, 1.0 - p.p_l1)):
        lam_t = math.exp(_lp(p.rate_t1, a1, l1))
        lam_a = math.exp(_lp(p.rate_a1, a1, l1))
        lam = lam_t + lam_a
        value = math.exp(-lam * tau)
        segments = ((0, 0.0, min(tau, p.w1_cutoff)), (1, p.w1_cutoff, tau))
        for late, a, b in segments:
            p_l2 = float(expit(_lp(p.beta_l2, l1, late)))
            for l2, q in ((1, p_l2), (0, 1.0 - p_l2)):
                r = math.exp(_lp(p.rate_t2, a2, l2, late))
                value += q * _segment(lam_a, lam, r, tau, a, b)
        total += p_cell * value
    return total


@attr.s(frozen=True)
class EventProbabilities:
    next_course: float = attr.ib()
    death: float = attr.ib()
    censored: float = attr.ib()


def event_probabilities(params: DgpParams) -> EventProbabilities:
    """Exact marginal probabilities of each first-course event code under the observational process."""
    p = params
    out = np.zeros(3)
    for l1, p_cell in ((1, p.p_l1), (0, 1.0 - p.p_l1)):
        p_a1 = float(expit(_lp(p.beta_a1, l1)))
        for a1, q in ((1, p_a1), (0, 1.0 - p_a1)):
            rates = np.exp([_lp(p.rate_a1, a1, l1), _lp(p.rate_t1, a1, l1),
                            _lp(p.rate_c1, a1, l1) if p.censoring_enabled else -np.inf])
            out += p_cell * q * rates / rates.sum()
    return EventProbabilities(*map(float, out))
