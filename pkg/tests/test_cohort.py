import numpy as np
import pytest

from gtiming import cohort as cohort_, dgp
from gtiming.cohort import EstimandSpec, FirstEvent, read_csv, validate, write_csv
from gtiming.errors import CohortParseError, CohortValidationError
from . import cohort, fixture_file, subject


def test_validate_course2_forbidden():
    dataset = cohort(subject(1, delta1=0, course2=(0, 1, 2.0, 1)))
    assert [v.message for v in validate(dataset)] == ["course2 forbidden"]


def test_validate_course2_required():
    dataset = cohort(subject(1, delta1=1))
    assert [v.message for v in validate(dataset)] == ["course2 required"]


def test_validate_well_formed():
    dataset = cohort(subject(1, delta1=1, w1=4.2, course2=(0, 1, 3.0, 1)))
    assert validate(dataset) == []


def test_validate_duplicate_ids():
    dataset = cohort(subject(1, w1=2.0), subject(1, w1=3.0))
    assert [str(v) for v in validate(dataset)] == ["subject 1: duplicate id"]


def test_read_csv():
    dataset = read_csv(fixture_file('cohort.csv'))
    assert dataset.n == 3
    first, second, third = dataset.records

    assert first.id == 7
    assert (first.l1, first.a1, first.w1, first.delta1) == (1, 1, 3.7, FirstEvent.NEXT_COURSE)
    assert (first.course2.l2, first.course2.a2, first.course2.w2, first.course2.delta2) == (0, 1, 3.5, 1)
    assert first.total_time == pytest.approx(7.2)
    assert first.died

    assert second.total_time == pytest.approx(4.5)
    assert not second.died
    assert second.observed_event

    assert third.course2 is None
    assert third.total_time == 5.5
    assert third.died


def test_read_csv_parse_error():
    with pytest.raises(CohortParseError) as excinfo:
        read_csv(fixture_file('malformed.csv'))
    assert excinfo.value.row == 2
    assert excinfo.value.column == 'a1'
    assert excinfo.value.to_dict()['error'] == 'CohortParseError'


def test_read_csv_bad_header(tmp_path):
    path = tmp_path / 'bad.csv'
    path.write_text("id,l1,a1,w1,delta1,l2,a2,w2\n1,0,1,3.0,0,,,\n")
    with pytest.raises(CohortParseError) as excinfo:
        read_csv(path)
    assert excinfo.value.row == 0
    assert excinfo.value.column == 'delta2'


@pytest.mark.parametrize('extra_row', [1, 2])
def test_read_csv_extra_field(tmp_path, extra_row):
    rows = ["1,0,1,3.0,0,,,,", "2,1,0,2.0,0,,,,"]
    rows[extra_row - 1] += ",7"
    path = tmp_path / 'extra.csv'
    path.write_text('\n'.join([','.join(cohort_.COLUMNS)] + rows) + '\n')
    with pytest.raises(CohortParseError) as excinfo:
        read_csv(path)
    assert (excinfo.value.row, excinfo.value.column) == (extra_row, None)


def test_read_csv_partial_second_course(tmp_path):
    path = tmp_path / 'partial.csv'
    path.write_text("id,l1,a1,w1,delta1,l2,a2,w2,delta2\n1,0,1,3.0,1,0,1,,1\n")
    with pytest.raises(CohortParseError) as excinfo:
        read_csv(path)
    assert (excinfo.value.row, excinfo.value.column) == (1, 'w2')


def test_read_csv_invariant_violation(tmp_path):
    path = tmp_path / 'invalid.csv'
    path.write_text("id,l1,a1,w1,delta1,l2,a2,w2,delta2\n1,0,1,3.0,1,,,,\n2,0,1,1.0,0,,,,\n")
    with pytest.raises(CohortValidationError) as excinfo:
        read_csv(path)
    assert excinfo.value.to_dict()['violations'] == ["subject 1: course2 required"]


def test_csv_round_trip(tmp_path, default_params):
    dataset = dgp.generate(default_params, 300, seed=3)
    path = tmp_path / 'cohort.csv'
    write_csv(dataset, path)
    reread = read_csv(path)
    for name in ('id', 'l1', 'a1', 'w1', 'delta1', 'course2', 'l2', 'a2', 'w2', 'delta2'):
        np.testing.assert_array_equal(getattr(reread.columns, name), getattr(dataset.columns, name))


def test_write_csv_leaves_missing_cells_empty(tmp_path):
    path = tmp_path / 'cohort.csv'
    write_csv(cohort(subject(3, a1=0, w1=5.5, delta1=0)), path)
    assert path.read_text().splitlines() == [
        ','.join(cohort_.COLUMNS),
        '3,0,0,5.5,0,,,,',
    ]


def test_generated_cohorts_validate(scenario1_cohort, scenario2_cohort):
    assert validate(scenario1_cohort) == []
    assert validate(scenario2_cohort) == []


def test_take_renumbers_ids():
    dataset = cohort(subject(10, w1=1.0), subject(20, w1=2.0), subject(30, w1=3.0))
    resampled = dataset.take([2, 2, 0])
    assert resampled.columns.id.tolist() == [0, 1, 2]
    assert resampled.columns.w1.tolist() == [3.0, 3.0, 1.0]


def test_subset_keeps_ids():
    dataset = cohort(subject(10, w1=1.0), subject(20, w1=2.0), subject(30, w1=3.0))
    assert dataset.subset(np.array([False, True, True])).columns.id.tolist() == [20, 30]


def test_columns_are_read_only(scenario2_cohort):
    with pytest.raises(ValueError):
        scenario2_cohort.columns.w1[0] = 1.0


def test_fields_missing_second_course():
    dataset = cohort(subject(1, w1=2.0), subject(2, delta1=1, course2=(1, 0, 3.0, 0)))
    fields = dataset.fields()
    assert np.isnan(fields['l2'][0]) and fields['l2'][1] == 1
    assert np.isnan(fields['a2'][0]) and fields['a2'][1] == 0


@pytest.mark.parametrize('tau', [-1.0, float('inf'), float('nan')])
def test_estimand_rejects_bad_tau(tau):
    with pytest.raises(ValueError):
        EstimandSpec(1, 1, tau)


def test_estimand_at():
    target = EstimandSpec(1, 0, 15.0)
    assert target.at(3.0) == EstimandSpec(1, 0, 3.0)
