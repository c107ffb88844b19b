import numpy as np
import pytest

from gtiming import ipw, methods
from gtiming.cohort import EstimandSpec


@pytest.mark.parametrize('method', methods.METHODS)
def test_every_method(scenario2_cohort, method):
    pipeline = methods.get_pipeline(method, methods.PipelineOptions(mc_draws=10 ** 4))
    points = pipeline(scenario2_cohort, [0.0, 15.0])
    assert [p.tau for p in points] == [0.0, 15.0]
    assert all(p.method == method for p in points)
    assert points[0].estimate == 1.0
    assert 0.0 <= points[1].estimate <= 1.0


def test_unknown_method():
    with pytest.raises(ValueError):
        methods.get_pipeline('aipw')


def test_ipw_without_censoring_uses_plain_hajek(scenario1_cohort):
    target = EstimandSpec(1, 1, 15.0)
    bundle = ipw.fit_models(scenario1_cohort, ipw.Adjustment.ADJUSTED, censoring=False)
    weights = ipw.compute_weights(scenario1_cohort, bundle, target)
    expected = ipw.hajek_no_censoring(scenario1_cohort, weights, target).estimate
    [point] = methods.get_pipeline('ipw')(scenario1_cohort, [15.0])
    assert point.estimate == pytest.approx(expected, abs=1e-12)


def test_ipw_with_censoring(scenario2_cohort):
    target = EstimandSpec(1, 1, 15.0)
    bundle = ipw.fit_models(scenario2_cohort, ipw.Adjustment.UNADJUSTED)
    weights = ipw.compute_weights(scenario2_cohort, bundle, target)
    expected = ipw.hajek_censoring(scenario2_cohort, weights, target).estimate
    [point] = methods.get_pipeline('ipw-unadj')(scenario2_cohort, [15.0])
    assert point.estimate == pytest.approx(expected, abs=1e-12)


def test_pipeline_options_target():
    options = methods.PipelineOptions(a1_target=0, a2_target=1)
    assert options.target(3.0) == EstimandSpec(0, 1, 3.0)


def test_gcomp_is_seeded(scenario2_cohort):
    options = methods.PipelineOptions(mc_draws=10 ** 4, mc_seed=8)
    a = methods.get_pipeline('gcomp', options)(scenario2_cohort, [15.0])
    b = methods.get_pipeline('gcomp', options)(scenario2_cohort, [15.0])
    assert a == b


def test_as_vector(scenario2_cohort):
    estimator = methods.as_vector(methods.get_pipeline('naive'), [0.0, 10.0, 20.0])
    values = estimator(scenario2_cohort)
    assert values.shape == (3,)
    assert values[0] == 1.0
    assert (np.diff(values) <= 0).all()
