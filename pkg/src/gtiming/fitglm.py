"""Maximum likelihood fitting of logistic and exponential proportional hazards models.

Both fits use Newton's method with step-halving on the log-likelihood. Covariates are
described by a :class:`CovariateSpec`, which turns a mapping of named fields into a design
matrix both when fitting and when predicting.
"""
import logging
from typing import ClassVar, Mapping, Optional, Tuple

import attr
import numpy as np
from scipy.special import expit

from .errors import (
    MissingFieldError,
    NoEventsError,
    NotConvergedError,
    NumericalError,
    SeparationError,
    SingularDesignError,
)


LOG = logging.getLogger(__name__)

#: Convergence tolerance on the max-norm of the score
TOL = 1e-8
MAX_ITER = 100
#: Any coefficient beyond this magnitude means the likelihood has no finite maximum
SEPARATION_BOUND = 30.0
#: A converged logit fit with a fitted probability this close to 0 or 1 is treated as quasi-separated
FITTED_PROB_EPS = 1e-8


@attr.s(frozen=True)
class Term:
    kind: str = attr.ib(validator=attr.validators.in_(['intercept', 'raw', 'threshold']))
    field: Optional[str] = attr.ib(default=None)
    cutoff: Optional[float] = attr.ib(default=None)

    @classmethod
    def intercept(cls) -> "Term":
        return cls('intercept')

    @classmethod
    def raw(cls, field: str) -> "Term":
        return cls('raw', field)

    @classmethod
    def threshold(cls, field: str, cutoff: float) -> "Term":
        """Indicator ``I(field > cutoff)``."""
        return cls('threshold', field, float(cutoff))

    @property
    def name(self) -> str:
        if self.kind == 'intercept':
            return '(intercept)'
        elif self.kind == 'raw':
            return self.field
        return f'I({self.field}>{self.cutoff:g})'

    def column(self, data: Mapping[str, np.ndarray], n: int) -> np.ndarray:
        if self.kind == 'intercept':
            return np.ones(n)
        try:
            values = np.asarray(data[self.field], dtype=float)
        except KeyError:
            raise MissingFieldError(self.field) from None
        if np.isnan(values).any():
            raise MissingFieldError(self.field)
        values = np.broadcast_to(values, (n,))
        if self.kind == 'threshold':
            return (values > self.cutoff).astype(float)
        return values.astype(float)


def _check_terms(instance, attrib, terms):
    if sum(t.kind == 'intercept' for t in terms) > 1:
        raise ValueError("at most one intercept term allowed")
    if len(set(terms)) != len(terms):
        raise ValueError("duplicate covariate terms")


@attr.s(frozen=True)
class CovariateSpec:
    """Ordered list of design matrix terms."""
    terms: Tuple[Term, ...] = attr.ib(converter=tuple, validator=_check_terms)

    @classmethod
    def of(cls, *terms: Term) -> "CovariateSpec":
        return cls(terms)

    def __add__(self, other: "CovariateSpec") -> "CovariateSpec":
        return CovariateSpec(self.terms + other.terms)

    def __len__(self):
        return len(self.terms)

    @property
    def names(self):
        return [t.name for t in self.terms]

    @property
    def has_intercept(self) -> bool:
        return any(t.kind == 'intercept' for t in self.terms)

    def design(self, data: Mapping[str, np.ndarray], n: int = None) -> np.ndarray:
        """Design matrix for *data*; *n* rows, or as many as the fields have."""
        if n is None:
            lengths = {np.size(data[t.field]) for t in self.terms if t.kind != 'intercept' and t.field in data}
            n = max(lengths, default=1)
        if not self.terms:
            return np.zeros((n, 0))
        return np.column_stack([t.column(data, n) for t in self.terms])


@attr.s(frozen=True, eq=False)
class FittedModel:
    kind: ClassVar[str] = ''

    spec: CovariateSpec = attr.ib()
    coef: np.ndarray = attr.ib(converter=lambda c: np.array(c, dtype=float))
    converged: bool = attr.ib(default=True)
    iterations: int = attr.ib(default=0)
    max_grad_norm: float = attr.ib(default=0.0)
    loglik: float = attr.ib(default=np.nan)

    def linear_predictor(self, data: Mapping[str, np.ndarray], n: int = None) -> np.ndarray:
        if not self.converged:
            raise NotConvergedError(f"{self.kind} model did not converge after {self.iterations} iterations",
                                    terms=self.spec.names)
        return self.spec.design(data, n) @ self.coef

    def to_dict(self):
        return {
            'model': self.kind,
            'terms': self.spec.names,
            'coef': self.coef.tolist(),
            'converged': self.converged,
            'iterations': self.iterations,
            'max_grad_norm': self.max_grad_norm,
            'loglik': self.loglik,
        }


class FittedLogit(FittedModel):
    kind = 'logit'

    def predict_prob(self, data: Mapping[str, np.ndarray], n: int = None) -> np.ndarray:
        """P(y = 1 | fields)."""
        return expit(self.linear_predictor(data, n))


class FittedExpPH(FittedModel):
    kind = 'exp-ph'

    def rate(self, data: Mapping[str, np.ndarray], n: int = None) -> np.ndarray:
        return np.exp(self.linear_predictor(data, n))

    def predict_surv(self, data: Mapping[str, np.ndarray], t) -> np.ndarray:
        """``exp(-t * rate)``: probability of no event by time *t*."""
        t = np.asarray(t, dtype=float)
        if (t < 0).any():
            raise ValueError("t must be non-negative")
        return np.exp(-t * self.rate(data, np.size(t) if t.ndim else None))


def predict_prob(model: FittedLogit, data: Mapping[str, np.ndarray]) -> np.ndarray:
    return model.predict_prob(data)


def predict_surv(model: FittedExpPH, data: Mapping[str, np.ndarray], t) -> np.ndarray:
    return model.predict_surv(data, t)


def logit_loglik(coef, x, y, weights=None) -> float:
    eta = x @ coef
    w = 1.0 if weights is None else weights
    return float(np.sum(w * (y * eta - np.logaddexp(0.0, eta))))


def logit_score(coef, x, y, weights=None) -> np.ndarray:
    w = 1.0 if weights is None else weights
    return x.T @ (w * (y - expit(x @ coef)))


def exp_ph_loglik(coef, x, time, event) -> float:
    eta = x @ coef
    return float(np.sum(event * eta - time * np.exp(eta)))


def _newton(x, objective, coef, tol, max_iter, label):
    """Maximize a concave log-likelihood.

    *objective* maps coefficients to ``(loglik, score, negative hessian)``.
    Returns ``(coef, converged, iterations, max_grad_norm, loglik)``.
    """
    p = x.shape[1]
    if p and np.linalg.matrix_rank(x) < p:
        raise SingularDesignError(f"{label}: design matrix is rank deficient ({p} columns)")

    ll, score, info = objective(coef)
    if not np.isfinite(ll):
        raise NumericalError(f"{label}: non-finite log-likelihood at starting values")
    grad_norm = float(np.max(np.abs(score), initial=0.0))
    iterations = 0
    while grad_norm > tol and iterations < max_iter:
        iterations += 1
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError:
            raise SingularDesignError(f"{label}: information matrix is singular") from None
        t = 1.0
        while True:
            candidate = coef + t * step
            c_ll, c_score, c_info = objective(candidate)
            if np.isfinite(c_ll) and c_ll >= ll - 1e-12 * abs(ll):
                break
            t /= 2
            if t < 1e-10:
                raise NumericalError(f"{label}: step-halving failed to increase the log-likelihood")
        coef, ll, score, info = candidate, c_ll, c_score, c_info
        grad_norm = float(np.max(np.abs(score), initial=0.0))
        LOG.debug("%s: iteration %d, loglik %.10g, max |score| %.3g", label, iterations, ll, grad_norm)
        if np.max(np.abs(coef), initial=0.0) > SEPARATION_BOUND:
            raise SeparationError(f"{label}: coefficients diverge (max |coef| > {SEPARATION_BOUND:g})",
                                  coef=coef.tolist())

    converged = grad_norm <= tol
    if converged:
        # One more Newton step at the optimum, kept if the score doesn't grow
        try:
            candidate = coef + np.linalg.solve(info, score)
            c_ll, c_score, _ = objective(candidate)
            c_norm = float(np.max(np.abs(c_score), initial=0.0))
            if np.isfinite(c_ll) and c_norm <= grad_norm:
                coef, ll, grad_norm = candidate, c_ll, c_norm
        except np.linalg.LinAlgError:
            pass
        LOG.debug("%s: converged after %d iterations (loglik %.10g)", label, iterations, ll)
    else:
        LOG.warning("%s: not converged after %d iterations (max |score| %.3g)", label, iterations, grad_norm)
    return coef, converged, iterations, grad_norm, ll


def fit_logit(spec: CovariateSpec, data: Mapping[str, np.ndarray], y, weights=None, *,
              tol: float = TOL, max_iter: int = MAX_ITER) -> FittedLogit:
    """Weighted logistic regression of binary *y* on the design given by *spec* and *data*."""
    y = np.asarray(y, dtype=float)
    x = spec.design(data, len(y))
    w = np.ones(len(y)) if weights is None else np.asarray(weights, dtype=float)
    if (w < 0).any() or not np.isfinite(w).all():
        raise ValueError("weights must be finite and non-negative")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("y must be binary")

    def objective(coef):
        eta = x @ coef
        mu = expit(eta)
        ll = float(np.sum(w * (y * eta - np.logaddexp(0.0, eta))))
        return ll, x.T @ (w * (y - mu)), (x * (w * mu * (1 - mu))[:, None]).T @ x

    coef = np.zeros(x.shape[1])
    if spec.has_intercept and w.sum() > 0:
        mean = np.sum(w * y) / w.sum()
        if 0 < mean < 1:
            coef[[t.kind for t in spec.terms].index('intercept')] = np.log(mean / (1 - mean))
    label = f"logit({', '.join(spec.names)})"
    result = _newton(x, objective, coef, tol, max_iter, label)
    mu = expit(x[w > 0] @ result[0])
    if mu.size and np.min(np.minimum(mu, 1 - mu)) < FITTED_PROB_EPS:
        raise SeparationError(f"{label}: fitted probabilities numerically 0 or 1", coef=result[0].tolist())
    return FittedLogit(spec, *result)


def fit_exp_ph(spec: CovariateSpec, data: Mapping[str, np.ndarray], time, event, *,
               tol: float = TOL, max_iter: int = MAX_ITER) -> FittedExpPH:
    """Exponential proportional hazards regression with right censoring.

    Maximizes ``sum(event * eta - time * exp(eta))`` where ``eta`` is the linear predictor.
    """
    time = np.asarray(time, dtype=float)
    event = np.asarray(event, dtype=float)
    if not (time > 0).all():
        raise ValueError("times must be positive")
    if not event.any():
        raise NoEventsError(f"no events among {len(time)} rows", terms=spec.names)
    x = spec.design(data, len(time))

    def objective(coef):
        eta = x @ coef
        with np.errstate(over='ignore'):
            mu = time * np.exp(eta)
        ll = float(np.sum(event * eta - mu))
        return ll, x.T @ (event - mu), (x * mu[:, None]).T @ x

    coef = np.zeros(x.shape[1])
    if spec.has_intercept:
        coef[[t.kind for t in spec.terms].index('intercept')] = np.log(event.sum() / time.sum())
    result = _newton(x, objective, coef, tol, max_iter, f"exp-ph({', '.join(spec.names)})")
    return FittedExpPH(spec, *result)
