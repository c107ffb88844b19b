import pytest

from gtiming import dgp


@pytest.fixture(scope='session')
def default_params():
    return dgp.default_params()


@pytest.fixture(scope='session')
def scenario1_cohort():
    """A scenario 1 (no censoring) cohort at simulation-study size."""
    return dgp.generate(dgp.scenario_params(1), dgp.DEFAULT_N, seed=11)


@pytest.fixture(scope='session')
def scenario2_cohort():
    """A scenario 2 (censoring) cohort at simulation-study size."""
    return dgp.generate(dgp.scenario_params(2), dgp.DEFAULT_N, seed=12)


@pytest.fixture(scope='session')
def worked_example_cohort():
    return dgp.generate_worked_example(seed=2024)
