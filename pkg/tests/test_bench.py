import json
import os

from click.testing import CliRunner
import numpy as np
import pandas as pd
import pytest

from gtiming import bench, dgp
from . import load_script


def test_summarize_replicates():
    replicates = pd.DataFrame([
        (0, 'A', 0.4, 0.3, 0.5),
        (1, 'A', 0.6, 0.55, 0.7),
        (0, 'B', 0.6, 0.5, 0.7),
        (1, 'B', 0.6, 0.5, 0.7),
        (2, 'B', np.nan, np.nan, np.nan),
    ], columns=bench.REPLICATE_COLUMNS)
    a, b = bench.summarize_replicates(replicates, 0.5, ['A', 'B'])

    assert a.method == 'A'
    assert a.bias == pytest.approx(0.0, abs=1e-12)
    assert a.mse == pytest.approx(0.01)
    assert a.rel_mse == 1.0
    assert a.mean_ci_width == pytest.approx(0.175)
    assert a.coverage == 0.5

    assert b.bias == pytest.approx(0.1)
    assert b.pct_bias == pytest.approx(20.0)
    assert b.rel_mse == pytest.approx(1.0)
    assert b.coverage == 1.0
    assert (b.n_ok, b.n_failed) == (2, 1)


@pytest.fixture(scope='module')
def table1_report():
    return bench.run_table1(1, reps=2, n=800, B=5, seed=1)


def test_run_table1(table1_report):
    report = table1_report
    assert [m.method for m in report.metrics] == ['Adjusted IPTW', 'Unadjusted IPTW', 'Naive']
    assert report.truth == pytest.approx(dgp.TRUTH_P11_TAU15)
    assert report.metrics[0].rel_mse == 1.0
    for m in report.metrics:
        assert np.isfinite([m.bias, m.pct_bias, m.mse, m.rel_mse, m.mean_ci_width, m.coverage]).all()
        assert 0.0 <= m.coverage <= 1.0
        assert m.n_ok + m.n_failed == 2
    assert len(report.replicates) == 2 * 3


def test_run_table1_scenario2_methods():
    assert [label for label, _ in bench.SCENARIO_METHODS[2]] == ['Adjusted IPTW', 'Unadjusted IPTW', 'CC-IPTW']


def test_run_table1_is_deterministic(table1_report):
    again = bench.run_table1(1, reps=2, n=800, B=5, seed=1, threads=2)
    pd.testing.assert_frame_equal(again.replicates, table1_report.replicates)


def test_table1_report_files(tmp_path, table1_report):
    prefix = str(tmp_path / 'scenario1')
    table1_report.write(prefix)
    data = json.loads((tmp_path / 'scenario1.json').read_text())
    assert data['scenario'] == 1
    assert [m['method'] for m in data['methods']] == ['Adjusted IPTW', 'Unadjusted IPTW', 'Naive']
    markdown = (tmp_path / 'scenario1.md').read_text()
    assert '| Adjusted IPTW |' in markdown
    replicates = pd.read_csv(tmp_path / 'scenario1.csv')
    assert list(replicates.columns) == bench.REPLICATE_COLUMNS


def test_recomputed_metrics_match_report(tmp_path, table1_report):
    table1_report.write(str(tmp_path / 'scenario1'))
    replicates = pd.read_csv(tmp_path / 'scenario1.csv', float_precision='round_trip')
    recomputed = load_script('recompute_table1').recompute(replicates, table1_report.truth)
    assert recomputed.index.tolist() == [m.method for m in table1_report.metrics]
    for m in table1_report.metrics:
        row = recomputed.loc[m.method]
        for name in ('bias', 'pct_bias', 'mse', 'rel_mse', 'mean_ci_width', 'coverage'):
            assert row[name] == pytest.approx(getattr(m, name), abs=1e-10), (m.method, name)
        assert (row.n_ok, row.n_failed) == (m.n_ok, m.n_failed)


def test_recompute_script_output(tmp_path, table1_report):
    table1_report.write(str(tmp_path / 'scenario1'))
    script = load_script('recompute_table1')
    result = CliRunner().invoke(script.main, ['--truth', repr(table1_report.truth), str(tmp_path / 'scenario1.csv')])
    assert result.exit_code == 0, result.output
    assert result.output.startswith(f'truth = {table1_report.truth:.12f}')
    assert 'Adjusted IPTW' in result.output


def test_summarize_partition(worked_example_cohort):
    summary = bench.summarize(worked_example_cohort)
    assert summary.n == 600
    assert summary.second_course + summary.died_before + summary.censored_before == 600
    assert summary.course1.at_risk == 600
    assert summary.course2.at_risk == summary.second_course
    assert summary.course1.treated + summary.course1.untreated == 600
    assert summary.course2.low_ef + summary.course2.normal_ef == summary.second_course
    assert summary.median_w1 > 0
    assert summary.median_survival > 0
    d = summary.to_dict()
    assert d['course1']['treated_pct'] == pytest.approx(100 * summary.course1.treated / 600)


def test_run_worked_example(tmp_path):
    example = bench.run_worked_example(seed=3, B=4, taus=range(0, 21, 5))
    assert set(example.curves) == {'ipw', 'ipw-unadj', 'msm'}
    for curve in example.curves.values():
        assert curve.taus.tolist() == [0, 5, 10, 15, 20]
        assert curve.estimates[0] == 1.0
        assert (curve.lo <= curve.hi).all()
        assert curve.replicates + curve.n_failed == 4

    prefix = str(tmp_path / 'example')
    example.write(prefix)
    for suffix in ('cohort.csv', 'summary.json', 'ipw.csv', 'ipw-unadj.csv', 'msm.csv'):
        assert (tmp_path / f'example.{suffix}').exists()


@pytest.mark.slow
def test_worked_example_curves():
    example = bench.run_worked_example(seed=2024, B=50)
    adjusted = example.curves['ipw'].estimates
    assert np.max(np.abs(example.curves['msm'].estimates - adjusted)) <= 0.05
    assert np.max(np.abs(example.curves['ipw-unadj'].estimates - adjusted)) > 0.05


def _metrics(report):
    return {m.method: m for m in report.metrics}


@pytest.mark.slow
def test_table1_scenario1_bands():
    metrics = _metrics(bench.run_table1(1, reps=200, n=2000, B=200, seed=0, threads=os.cpu_count() or 1))
    adjusted, unadjusted, naive = metrics['Adjusted IPTW'], metrics['Unadjusted IPTW'], metrics['Naive']
    assert adjusted.pct_bias <= 2
    assert 0.90 <= adjusted.coverage <= 0.98
    assert 5 <= unadjusted.pct_bias <= 13
    assert unadjusted.coverage < 0.90
    assert 38 <= naive.pct_bias <= 53
    assert naive.coverage < 0.20


@pytest.mark.slow
def test_table1_scenario2_bands():
    metrics = _metrics(bench.run_table1(2, reps=200, n=2000, B=200, seed=0, threads=os.cpu_count() or 1))
    adjusted, unadjusted, complete_case = metrics['Adjusted IPTW'], metrics['Unadjusted IPTW'], metrics['CC-IPTW']
    assert adjusted.pct_bias <= 2
    assert 0.90 <= adjusted.coverage <= 0.98
    assert unadjusted.pct_bias > 100
    # Dropping every censored subject biases the estimate down, by about 30% with these parameters
    assert complete_case.bias < 0
    assert 15 <= complete_case.pct_bias <= 35
    assert complete_case.coverage < 0.10
