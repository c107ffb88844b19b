import math

import numpy as np
import pytest

from gtiming import fitglm
from gtiming.errors import MissingFieldError, NoEventsError, NotConvergedError, SeparationError, SingularDesignError
from gtiming.fitglm import CovariateSpec, FittedExpPH, Term, fit_exp_ph, fit_logit


INTERCEPT = CovariateSpec.of(Term.intercept())


def test_term_names():
    assert Term.intercept().name == '(intercept)'
    assert Term.raw('l1').name == 'l1'
    assert Term.threshold('w1', 15).name == 'I(w1>15)'


def test_threshold_column():
    column = Term.threshold('w1', 15.0).column({'w1': np.array([3.0, 15.0, 15.5])}, 3)
    assert column.tolist() == [0.0, 0.0, 1.0]


def test_missing_field():
    spec = CovariateSpec.of(Term.intercept(), Term.raw('l2'))
    with pytest.raises(MissingFieldError) as excinfo:
        spec.design({'l1': np.zeros(3)}, 3)
    assert excinfo.value.field == 'l2'
    with pytest.raises(MissingFieldError):
        spec.design({'l2': np.array([0.0, np.nan])}, 2)


def test_spec_rejects_duplicates():
    with pytest.raises(ValueError):
        CovariateSpec.of(Term.intercept(), Term.intercept())
    with pytest.raises(ValueError):
        CovariateSpec.of(Term.raw('l1'), Term.raw('l1'))


def test_spec_concatenation():
    spec = CovariateSpec.of(Term.intercept()) + CovariateSpec.of(Term.raw('a1'))
    assert spec.names == ['(intercept)', 'a1']
    assert len(spec) == 2
    assert spec.has_intercept


def test_logit_intercept_only():
    model = fit_logit(INTERCEPT, {}, [1, 1, 1, 0])
    assert model.converged
    assert model.coef[0] == pytest.approx(math.log(3), abs=1e-8)
    assert model.coef[0] == pytest.approx(1.098612, abs=1e-6)


def test_logit_weighted_intercept_only():
    model = fit_logit(INTERCEPT, {}, [1, 0], weights=[2, 1])
    assert model.coef[0] == pytest.approx(math.log(2), abs=1e-8)
    assert model.predict_prob({}, 1)[0] == pytest.approx(2 / 3, abs=1e-8)


def test_logit_saturated_binary_covariate():
    x = np.array([0, 0, 0, 0, 1, 1, 1, 1, 1])
    y = np.array([1, 0, 0, 0, 1, 1, 0, 1, 1])
    model = fit_logit(CovariateSpec.of(Term.intercept(), Term.raw('x')), {'x': x}, y)
    p = model.predict_prob({'x': np.array([0.0, 1.0])}, 2)
    np.testing.assert_allclose(p, [0.25, 0.8], atol=1e-8)


def test_logit_score_matches_finite_differences():
    rng = np.random.default_rng(0)
    x = np.column_stack([np.ones(50), rng.normal(size=50), rng.integers(0, 2, size=50)])
    y = rng.integers(0, 2, size=50).astype(float)
    w = rng.uniform(0.5, 2.0, size=50)
    coef = np.array([0.2, -0.4, 0.7])
    h = 1e-5

    def loglik(c):
        return fitglm.logit_loglik(c, x, y, w)

    numeric = [(loglik(coef + step) - loglik(coef - step)) / (2 * h) for step in np.eye(3) * h]
    np.testing.assert_allclose(fitglm.logit_score(coef, x, y, w), numeric, rtol=1e-6, atol=1e-8)


def test_logit_separation():
    spec = CovariateSpec.of(Term.intercept(), Term.raw('x'))
    with pytest.raises(SeparationError):
        fit_logit(spec, {'x': np.array([0.0, 0.0, 1.0, 1.0])}, [0, 0, 1, 1])


def test_logit_quasi_separation():
    # y is 1 wherever x is 1, with both outcomes where x is 0
    spec = CovariateSpec.of(Term.intercept(), Term.raw('x'))
    x = np.array([0.0, 0.0, 0.0, 1.0, 1.0, 1.0])
    with pytest.raises(SeparationError, match='numerically 0 or 1'):
        fit_logit(spec, {'x': x}, [0, 1, 0, 1, 1, 1])


def test_logit_extreme_fit_on_zero_weight_row():
    spec = CovariateSpec.of(Term.intercept(), Term.raw('x'))
    x = np.array([0.0, 0.0, 1.0, 1.0, 1.0, 100.0])
    model = fit_logit(spec, {'x': x}, [0, 1, 0, 1, 1, 1], weights=[1, 1, 1, 1, 1, 0])
    assert model.converged
    assert model.coef[1] == pytest.approx(math.log(2))


def test_logit_singular_design():
    spec = CovariateSpec.of(Term.intercept(), Term.raw('x'), Term.raw('z'))
    x = np.array([0.0, 1.0, 0.0, 1.0, 1.0])
    with pytest.raises(SingularDesignError):
        fit_logit(spec, {'x': x, 'z': x}, [0, 1, 1, 0, 1])


def test_logit_not_converged():
    spec = CovariateSpec.of(Term.intercept(), Term.raw('x'))
    x = np.array([0.0, 1.0, 2.0, 3.0, 4.0, 5.0])
    model = fit_logit(spec, {'x': x}, [0, 0, 1, 0, 1, 1], max_iter=1)
    assert not model.converged
    with pytest.raises(NotConvergedError):
        model.predict_prob({'x': x})


def test_logit_rejects_non_binary():
    with pytest.raises(ValueError):
        fit_logit(INTERCEPT, {}, [0, 2])


def test_exp_ph_intercept_only():
    model = fit_exp_ph(INTERCEPT, {}, [1.0, 2.0], [1, 1])
    assert model.coef[0] == pytest.approx(math.log(2 / 3), abs=1e-10)
    assert model.rate({}, 1)[0] == pytest.approx(2 / 3, abs=1e-10)

    model = fit_exp_ph(INTERCEPT, {}, [1.0, 2.0], [1, 0])
    assert model.rate({}, 1)[0] == pytest.approx(1 / 3, abs=1e-10)


def test_exp_ph_indicator_design():
    """Each covariate cell's rate is its events over its exposure."""
    spec = CovariateSpec.of(Term.intercept(), Term.raw('x'))
    x = np.array([0.0, 0.0, 0.0, 1.0, 1.0, 1.0])
    model = fit_exp_ph(spec, {'x': x}, [1.0, 2.0, 3.0, 1.0, 1.0, 2.0], [1, 0, 1, 1, 1, 0])
    rates = model.rate({'x': np.array([0.0, 1.0])}, 2)
    np.testing.assert_allclose(rates, [2 / 6, 2 / 4], atol=1e-10)


def test_exp_ph_no_events():
    with pytest.raises(NoEventsError):
        fit_exp_ph(INTERCEPT, {}, [1.0, 2.0], [0, 0])


def test_exp_ph_rejects_non_positive_time():
    with pytest.raises(ValueError):
        fit_exp_ph(INTERCEPT, {}, [0.0, 2.0], [1, 1])


def test_predict_surv():
    model = FittedExpPH(INTERCEPT, [-5.0])
    assert fitglm.predict_surv(model, {}, 10.0)[0] == pytest.approx(math.exp(-10 * math.exp(-5)), abs=1e-12)
    assert fitglm.predict_surv(model, {}, 10.0)[0] == pytest.approx(0.93484, abs=1e-5)
    assert model.predict_surv({}, 0.0)[0] == 1.0
    with pytest.raises(ValueError):
        model.predict_surv({}, -1.0)


def test_predict_surv_per_subject():
    spec = CovariateSpec.of(Term.intercept(), Term.raw('l1'))
    model = FittedExpPH(spec, [-2.0, 1.0])
    surv = model.predict_surv({'l1': np.array([0.0, 1.0])}, np.array([1.0, 2.0]))
    np.testing.assert_allclose(surv, [math.exp(-math.exp(-2)), math.exp(-2 * math.exp(-1))])


def test_to_dict():
    model = fit_logit(INTERCEPT, {}, [1, 1, 1, 0])
    d = model.to_dict()
    assert d['model'] == 'logit'
    assert d['terms'] == ['(intercept)']
    assert d['converged'] is True
