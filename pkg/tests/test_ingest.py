import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dirdep.ingest import (
    BivariateSample,
    IngestError,
    TiePolicy,
    read_csv,
    read_table,
    to_pseudo,
)


def write(tmp_path, text, name="data.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_sample_validation():
    with pytest.raises(IngestError):
        BivariateSample([1, 2], [1])
    with pytest.raises(IngestError):
        BivariateSample([1], [1])
    with pytest.raises(IngestError):
        BivariateSample([1, np.nan], [1, 2])
    s = BivariateSample([1, 2, 3], [3, 2, 1])
    assert s.n == 3
    with pytest.raises(ValueError):
        s.xs[0] = 5


def test_read_csv_with_header(tmp_path):
    p = write(tmp_path, "a,b,c\n1,2,3\n4,5,6\n7,8,9\n")
    s = read_csv(p, "c", "a")
    assert s.xs.tolist() == [3, 6, 9]
    assert s.ys.tolist() == [1, 4, 7]
    s = read_csv(p, 1, 2)
    assert s.xs.tolist() == [2, 5, 8]


def test_read_csv_headerless(tmp_path):
    p = write(tmp_path, "1,2\n3,4\n")
    s = read_csv(p)
    assert s.xs.tolist() == [1, 3] and s.ys.tolist() == [2, 4]
    with pytest.raises(IngestError, match="no header"):
        read_csv(p, "x", "y")


def test_read_csv_errors_name_row(tmp_path):
    p = write(tmp_path, "x,y\n1,2\n3,\n5,6\n")
    with pytest.raises(IngestError, match="row 3"):
        read_csv(p, "x", "y")
    s = read_csv(p, "x", "y", drop_incomplete=True)
    assert s.n == 2
    p = write(tmp_path, "x,y\n1,2\n3,abc\n", "bad.csv")
    with pytest.raises(IngestError, match="row 3"):
        read_csv(p, "x", "y")
    p = write(tmp_path, "x,y\n1,2\n3,inf\n", "inf.csv")
    with pytest.raises(IngestError, match="non-finite"):
        read_csv(p, "x", "y")


def test_read_csv_missing_column_and_file(tmp_path):
    p = write(tmp_path, "x,y\n1,2\n3,4\n")
    with pytest.raises(IngestError, match="no column named"):
        read_csv(p, "x", "z")
    with pytest.raises(IngestError, match="out of range"):
        read_csv(p, 0, 5)
    with pytest.raises(IngestError):
        read_csv(tmp_path / "absent.csv")
    with pytest.raises(IngestError):
        read_csv(write(tmp_path, "", "empty.csv"))


def test_too_few_complete_rows(tmp_path):
    p = write(tmp_path, "x,y\n1,2\n,4\n")
    with pytest.raises(IngestError, match="at least 2"):
        read_csv(p, drop_incomplete=True)


def test_read_table(tmp_path):
    p = write(tmp_path, "y,a,b\n1,2,3\n4,5,6\n")
    t = read_table(p, "y")
    assert t.exogenous == ["a", "b"]
    assert t.n_rows == 2
    pair = t.pair("b")
    assert pair.xs.tolist() == [3, 6] and pair.ys.tolist() == [1, 4]
    with pytest.raises(IngestError):
        read_table(p, "q")


def test_pseudo_tie_free_ranks():
    s = BivariateSample([0.3, 0.1, 0.2], [5.0, 7.0, 6.0])
    ps = to_pseudo(s, seed=1)
    assert ps.u.tolist() == [1.0, 1 / 3, 2 / 3]
    assert ps.v.tolist() == [1 / 3, 1.0, 2 / 3]
    assert ps == to_pseudo(s, seed=99)
    assert ps.pairs[0] == (1.0, 1 / 3)


def test_jitter_ties_are_seeded_permutation():
    s = BivariateSample([1, 1, 1, 2], [1, 2, 3, 4])
    a = to_pseudo(s, seed=3)
    assert a == to_pseudo(s, seed=3)
    assert sorted(a.u.tolist()) == [0.25, 0.5, 0.75, 1.0]
    assert a.u[3] == 1.0
    seen = {tuple(to_pseudo(s, seed=k).u[:3]) for k in range(40)}
    assert len(seen) > 1


def test_midrank_warns_on_ties():
    s = BivariateSample([1, 1, 2], [1, 2, 3])
    with pytest.warns(UserWarning):
        ps = to_pseudo(s, TiePolicy.MID_RANK)
    assert ps.u.tolist() == [0.5, 0.5, 1.0]
    assert ps.tie_policy_used is TiePolicy.MID_RANK
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        to_pseudo(BivariateSample([1, 2], [2, 1]), "midrank")


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(-5, 5), st.integers(-5, 5)), min_size=2, max_size=60),
       st.integers(0, 2**32 - 1))
def test_jitter_margins_are_exact_permutations(rows, seed):
    xs, ys = zip(*rows)
    ps = to_pseudo(BivariateSample(xs, ys), seed=seed)
    n = len(rows)
    expected = np.arange(1, n + 1) / n
    assert np.array_equal(np.sort(ps.u), expected)
    assert np.array_equal(np.sort(ps.v), expected)
    # ranks respect the data order
    xs = np.array(xs)
    assert np.all(np.diff(xs[np.argsort(ps.u)]) >= 0)
