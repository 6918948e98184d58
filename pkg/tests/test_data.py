import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from tewm.data import (
    ColumnSpec, TimeSeries, build_lagged, covariate_lag, load_csv, outcome_lag,
    treatment_lag, write_csv,
)
from tewm.errors import (
    MalformedHeader, NonBinaryTreatment, NonFiniteValue, SpecOutOfRange, UnsortedTime,
)


def _write(path, text):
    path.write_text(text)
    return path


def test_load_three_rows(tmp_path):
    p = _write(tmp_path / "a.csv", "t,y,w\n0,1,1\n1,2,0\n2,3,1\n")
    s = load_csv(p)
    assert s.T == 3 and s.k == 0
    np.testing.assert_array_equal(s.outcomes, [1, 2, 3])
    np.testing.assert_array_equal(s.treatments, [1, 0, 1])


def test_non_binary_treatment_reports_time(tmp_path):
    p = _write(tmp_path / "a.csv", "t,y,w\n0,1,1\n1,2,2\n2,3,1\n")
    with pytest.raises(NonBinaryTreatment) as info:
        load_csv(p)
    assert info.value.t == 1


@pytest.mark.parametrize("text, err", [
    ("t,y\n0,1\n1,2\n", MalformedHeader),
    ("t,y,w,z2\n0,1,1,0\n1,2,0,0\n", MalformedHeader),
    ("time,y,w\n0,1,1\n1,2,0\n", MalformedHeader),
    ("t,y,w\n0,1,1\n2,2,0\n", UnsortedTime),
    ("t,y,w\n1,1,1\n0,2,0\n", UnsortedTime),
    ("t,y,w\n0,nan,1\n1,2,0\n", NonFiniteValue),
    ("t,y,w,z1\n0,1,1,inf\n1,2,0,0\n", NonFiniteValue),
])
def test_load_errors(tmp_path, text, err):
    with pytest.raises(err):
        load_csv(_write(tmp_path / "a.csv", text))


def test_weekly_layout_round_trip(tmp_path):
    rng = np.random.default_rng(7)
    T, k = 92, 7
    s = TimeSeries(rng.normal(size=T) * 100, rng.integers(0, 2, T), rng.lognormal(size=(T, k)))
    p = tmp_path / "weekly.csv"
    write_csv(s, p)
    back = load_csv(p)
    assert back.T == 92 and back.k == 7
    assert back == s


@settings(max_examples=50, deadline=None)
@given(
    T=st.integers(2, 30), k=st.integers(0, 3),
    data=st.data(),
)
def test_round_trip_bitwise(tmp_path_factory, T, k, data):
    floats = st.floats(allow_nan=False, allow_infinity=False, width=64)
    y = data.draw(arrays(np.float64, T, elements=floats))
    w = data.draw(arrays(np.int8, T, elements=st.integers(0, 1)))
    z = data.draw(arrays(np.float64, (T, k), elements=floats))
    s = TimeSeries(y, w, z)
    p = tmp_path_factory.mktemp("rt") / "s.csv"
    write_csv(s, p)
    back = load_csv(p)
    assert back == s
    assert np.array_equal(back.outcomes.view(np.int64), s.outcomes.view(np.int64))


def test_build_lagged_single_row():
    s = TimeSeries([0.5, 1.5], [1, 0])
    rows = build_lagged(s, [treatment_lag()])
    assert len(rows) == 1
    r = rows[0]
    assert r.index == 1 and r.y == 1.5 and r.w == 0
    np.testing.assert_array_equal(r.x_prev, [1.0])


def test_build_lagged_hand_shift():
    y = [10.0, 11.0, 12.0, 13.0]
    w = [0, 1, 1, 0]
    z = [[100.0, -1.0], [101.0, -2.0], [102.0, -3.0], [103.0, -4.0]]
    rows = build_lagged(TimeSeries(y, w, z), [outcome_lag(), covariate_lag(0)])
    assert len(rows) == 3
    np.testing.assert_array_equal(rows.index, [1, 2, 3])
    np.testing.assert_array_equal(rows.y, [11.0, 12.0, 13.0])
    np.testing.assert_array_equal(rows.w, [1, 1, 0])
    np.testing.assert_array_equal(rows.x, [[10.0, 100.0], [11.0, 101.0], [12.0, 102.0]])
    np.testing.assert_array_equal(rows.w_prev, [0, 1, 1])
    assert rows[2].value("z2_lag") == -3.0


def test_spec_out_of_range():
    s = TimeSeries([0.0, 1.0, 2.0], [0, 1, 0], np.zeros((3, 2)))
    with pytest.raises(SpecOutOfRange):
        build_lagged(s, [covariate_lag(5)])
    with pytest.raises(SpecOutOfRange):
        ColumnSpec.parse("y_lag,nonsense")
    with pytest.raises(SpecOutOfRange):
        ColumnSpec.parse("y_lag,y_lag")


def test_column_spec_parse():
    assert ColumnSpec.parse("y_lag, z1_lag").columns == ("y_lag", "z1_lag")
    assert str(ColumnSpec.parse(["w_lag"])) == "w_lag"


@settings(max_examples=40, deadline=None)
@given(T=st.integers(2, 40), seed=st.integers(0, 2**32 - 1))
def test_lagged_length(T, seed):
    rng = np.random.default_rng(seed)
    s = TimeSeries(rng.normal(size=T), rng.integers(0, 2, T), rng.normal(size=(T, 2)))
    assert len(build_lagged(s, "y_lag,z2_lag")) == T - 1


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), perm=st.permutations(range(4)))
def test_covariate_permutation_invariance(seed, perm):
    rng = np.random.default_rng(seed)
    T = 12
    z = rng.normal(size=(T, 4))
    s = TimeSeries(rng.normal(size=T), rng.integers(0, 2, T), z)
    # column j of the permuted file is original column perm[j]
    permuted = TimeSeries(s.outcomes, s.treatments, z[:, perm])
    inverse = {orig: j for j, orig in enumerate(perm)}
    chosen = [2, 0, 3]
    spec = ["y_lag"] + [covariate_lag(c) for c in chosen]
    spec_perm = ["y_lag"] + [covariate_lag(inverse[c]) for c in chosen]
    assert build_lagged(s, spec) == build_lagged(permuted, spec_perm)


def test_series_is_read_only():
    s = TimeSeries([1.0, 2.0], [0, 1])
    with pytest.raises(ValueError):
        s.outcomes[0] = 5.0
