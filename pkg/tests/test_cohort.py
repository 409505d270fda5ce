"""Cohort validation, counting-process expansion, CSV round trips."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from survhte import (Cohort, expand_counting_process, read_cohort_csv,
                     validate_cohort, write_cohort_csv)
from survhte.cohort import collapse_person_periods
from survhte.exceptions import CohortValidationError


def rows3():
    return [
        ("a", [0.1, 0.2], 1, 3, 1),
        ("b", [0.5, 0.9], 0, 2, 0),
        ("c", [0.0, 1.0], 1, 1, 1),
    ]


def test_validate_well_formed():
    cohort = validate_cohort(rows3(), horizon=12)
    assert cohort.n == 3
    assert cohort.dim == 2
    assert cohort.feature_names == ("x1", "x2")


def test_validate_t_obs_zero():
    bad = rows3()
    bad[1] = ("b", [0.5, 0.9], 0, 0, 0)
    with pytest.raises(CohortValidationError) as err:
        validate_cohort(bad, horizon=12)
    assert any(rule == "t_obs >= 1" and i == 1 for i, rule in err.value.violations)


def test_validate_duplicate_ids():
    bad = rows3() + [("a", [0.3, 0.4], 1, 2, 0)]
    with pytest.raises(CohortValidationError) as err:
        validate_cohort(bad, horizon=12)
    assert any(rule == "ids unique" for _, rule in err.value.violations)


def test_validate_collects_multiple_violations():
    bad = [("a", [0.1, 0.2], 2, 3, 1), ("a", [0.1], 1, 0, 5)]
    with pytest.raises(CohortValidationError) as err:
        validate_cohort(bad, horizon=12)
    rules = {rule for _, rule in err.value.violations}
    assert {"a in {0,1}", "ids unique", "t_obs >= 1", "y in {0,1}",
            "covariate length equals cohort dimension"} <= rules


def test_expand_event_subject():
    cohort = validate_cohort([("a", [0.1], 1, 3, 1)], horizon=12)
    table = expand_counting_process(cohort)
    assert table.n_rows == 3
    assert list(table.t) == [1, 2, 3]
    assert list(table.event) == [0, 0, 1]


def test_expand_censored_subject():
    cohort = validate_cohort([("a", [0.1], 0, 2, 0)], horizon=12)
    table = expand_counting_process(cohort)
    assert table.n_rows == 2
    assert list(table.event) == [0, 0]


def test_expand_truncates_at_horizon():
    cohort = validate_cohort([("a", [0.1], 1, 9, 1)], horizon=3)
    table = expand_counting_process(cohort, horizon=3)
    assert table.n_rows == 3
    assert list(table.event) == [0, 0, 0]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 20), st.integers(0, 1)),
                min_size=1, max_size=30),
       st.integers(1, 15))
def test_expansion_round_trip(subjects, horizon):
    rows = [(f"s{i}", [0.5], 1, t, y) for i, (t, y) in enumerate(subjects)]
    cohort = validate_cohort(rows, horizon=horizon)
    table = expand_counting_process(cohort)
    assert table.n_rows == int(np.minimum(cohort.t_obs, horizon).sum())
    t_last, y_back = collapse_person_periods(table)
    np.testing.assert_array_equal(t_last, np.minimum(cohort.t_obs, horizon))
    expect_y = (cohort.y == 1) & (cohort.t_obs <= horizon)
    np.testing.assert_array_equal(y_back.astype(bool), expect_y)
    # total events match, expansion order preserves subjects
    assert table.event.sum() == expect_y.sum()
    assert (np.diff(table.subject_index) >= 0).all()


def test_csv_round_trip(tmp_path):
    cohort = validate_cohort(rows3(), horizon=12)
    path = tmp_path / "cohort.csv"
    write_cohort_csv(path, cohort)
    back = read_cohort_csv(path, horizon=12)
    assert back.ids == cohort.ids
    np.testing.assert_array_equal(back.a, cohort.a)
    np.testing.assert_array_equal(back.t_obs, cohort.t_obs)
    np.testing.assert_allclose(back.x, cohort.x)


def test_csv_missing_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("id,time,event,x1\nA,1,0,0.5\n")
    with pytest.raises(CohortValidationError, match="treatment"):
        read_cohort_csv(path, horizon=12)


def test_csv_malformed_cell_reports_row(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("id,time,event,treatment,x1\n"
                    "A,1,0,1,0.5\n"
                    "B,oops,0,1,0.5\n")
    with pytest.raises(CohortValidationError) as err:
        read_cohort_csv(path, horizon=12)
    assert err.value.violations[0][0] == 2


def test_subset_bootstrap_keeps_ids_unique():
    cohort = validate_cohort(rows3(), horizon=12)
    sample = cohort.subset([0, 0, 2], id_suffix="_b0")
    assert len(set(sample.ids)) == 3
    assert sample.n == 3
