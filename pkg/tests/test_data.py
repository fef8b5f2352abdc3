import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from weakguide.core import Dataset
from weakguide.data import fit_standardizer, gen_synthetic, load_csv, save_csv, select_top_correlated, split
from weakguide.errors import BadK, Empty, InsufficientRows, IoError, MissingTarget, ParseError


def test_synthetic_shapes():
    ds = gen_synthetic(500, 50, 1.0, 0)
    assert ds.X.shape == (500, 50) and ds.y.shape == (500,)


def test_synthetic_noise_free_is_linear():
    ds = gen_synthetic(80, 6, 0.0, 3)
    w, *_ = np.linalg.lstsq(ds.X, ds.y, rcond=None)
    assert np.max(np.abs(ds.X @ w - ds.y)) <= 1e-8


def test_synthetic_same_seed():
    a, b = gen_synthetic(40, 3, 1.0, 9), gen_synthetic(40, 3, 1.0, 9)
    assert_array_equal(a.X, b.X)
    assert_array_equal(a.y, b.y)


def test_synthetic_distribution():
    ds, w_true = gen_synthetic(4000, 3, 0.5, 1, return_weights=True)
    assert_allclose(ds.X.mean(axis=0), 0.0, atol=0.06)
    assert_allclose(ds.X.std(axis=0), 1.0, atol=0.05)
    resid = ds.y - ds.X @ w_true
    assert resid.std() == pytest.approx(0.5, rel=0.05)


def test_synthetic_rejects_bad_args():
    with pytest.raises(ValueError):
        gen_synthetic(0, 2)
    with pytest.raises(ValueError):
        gen_synthetic(5, 2, -1.0)


def _write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_csv_basic(tmp_path):
    p = _write(tmp_path, "a,b,target\n1,2,3\n4,5,6\n7,8,9\n")
    ds = load_csv(p, "target")
    assert ds.X.shape == (3, 2)
    assert_array_equal(ds.y, [3, 6, 9])
    assert ds.feature_names == ("a", "b") and ds.target_name == "target"


def test_load_csv_target_by_index(tmp_path):
    p = _write(tmp_path, "a,b,c\n1,2,3\n4,5,6\n")
    ds = load_csv(p, 0)
    assert_array_equal(ds.y, [1, 4])
    assert_array_equal(ds.X, [[2, 3], [5, 6]])


def test_load_csv_reports_row(tmp_path):
    p = _write(tmp_path, "a,b,target\n1,2,3\n4,oops,6\n")
    with pytest.raises(ParseError) as info:
        load_csv(p, "target")
    assert info.value.row == 2 and info.value.column == "b"
    assert "row 2" in str(info.value)


def test_load_csv_missing_target(tmp_path):
    p = _write(tmp_path, "a,b\n1,2\n")
    with pytest.raises(MissingTarget):
        load_csv(p, "target")


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(IoError):
        load_csv(tmp_path / "absent.csv", "y")


def test_load_csv_rejects_quotes(tmp_path):
    p = _write(tmp_path, 'a,"b",y\n1,2,3\n')
    with pytest.raises(ParseError):
        load_csv(p, "y")


def test_load_csv_ragged_row(tmp_path):
    p = _write(tmp_path, "a,b,y\n1,2,3\n4,5\n")
    with pytest.raises(ParseError):
        load_csv(p, "y")


def test_load_csv_header_only(tmp_path):
    p = _write(tmp_path, "a,y\n")
    with pytest.raises(Empty):
        load_csv(p, "y")


@settings(max_examples=30, deadline=None)
@given(st.lists(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=3, max_size=3),
                min_size=1, max_size=8))
def test_csv_round_trip_bit_exact(tmp_path_factory, rows):
    arr = np.array(rows)
    ds = Dataset(arr[:, :2], arr[:, 2], ("p", "q"), "r")
    path = tmp_path_factory.mktemp("rt") / "x.csv"
    save_csv(ds, path)
    back = load_csv(path, "r")
    assert back.X.tobytes() == ds.X.tobytes() and back.y.tobytes() == ds.y.tobytes()


def test_standardizer_two_values():
    c, s = fit_standardizer(np.array([[0.0], [2.0]]))
    assert c[0] == 1.0 and s[0] == 1.0


def test_standardizer_constant_column():
    X = np.array([[3.0, 1.0], [3.0, 2.0], [3.0, 4.0]])
    c, s = fit_standardizer(X)
    assert s[0] == 1.0
    assert_array_equal((X - c) / s, np.column_stack([np.zeros(3), (X[:, 1] - c[1]) / s[1]]))


def test_standardizer_moments():
    X = np.random.default_rng(0).normal(5.0, 3.0, (50, 4))
    c, s = fit_standardizer(X)
    Z = (X - c) / s
    assert np.max(np.abs(Z.mean(axis=0))) <= 1e-10
    assert np.max(np.abs(Z.std(axis=0) - 1.0)) <= 1e-10


def test_standardizer_needs_two_rows():
    with pytest.raises(Empty):
        fit_standardizer(np.ones((1, 3)))


def test_select_top_correlated_exact_column():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((30, 6))
    ds = Dataset(X, X[:, 3].copy())
    out = select_top_correlated(ds, 1)
    assert_array_equal(out.X[:, 0], X[:, 3])


def test_select_top_correlated_identity():
    rng = np.random.default_rng(2)
    ds = Dataset(rng.standard_normal((20, 4)), rng.standard_normal(20), ("a", "b", "c", "d"))
    out = select_top_correlated(ds, 4)
    assert_array_equal(out.X, ds.X)
    assert out.feature_names == ds.feature_names


def test_select_top_correlated_tie_goes_to_lower_index():
    rng = np.random.default_rng(3)
    col = rng.standard_normal(25)
    X = np.column_stack([rng.standard_normal(25), col, -col])
    out = select_top_correlated(Dataset(X, col + 0.1 * rng.standard_normal(25)), 1)
    assert_array_equal(out.X[:, 0], col)


def test_select_zero_variance_ranks_last():
    rng = np.random.default_rng(4)
    X = np.column_stack([np.ones(15), rng.standard_normal(15)])
    out = select_top_correlated(Dataset(X, rng.standard_normal(15)), 1)
    assert_array_equal(out.X[:, 0], X[:, 1])


def test_select_bad_k():
    ds = Dataset(np.ones((3, 2)), np.arange(3.0))
    with pytest.raises(BadK):
        select_top_correlated(ds, 3)
    with pytest.raises(BadK):
        select_top_correlated(ds, 0)


def test_split_counts():
    ds = gen_synthetic(10, 2, 1.0, 0)
    sp = split(ds, 3, 4, rng_seed=1)
    assert (sp.labeled.n, sp.test.n, sp.pool.n) == (3, 4, 3)
    idx = np.concatenate([sp.labeled_idx, sp.test_idx, sp.pool_idx])
    assert sorted(idx.tolist()) == list(range(10))


def test_split_empty_pool_allowed():
    ds = gen_synthetic(10, 2, 1.0, 0)
    sp = split(ds, 6, 4, 0)
    assert sp.pool.n == 0


def test_split_deterministic():
    ds = gen_synthetic(30, 2, 1.0, 0)
    a, b = split(ds, 5, 5, 7), split(ds, 5, 5, 7)
    assert_array_equal(a.labeled_idx, b.labeled_idx)
    assert_array_equal(a.test_idx, b.test_idx)


def test_split_too_many_rows():
    ds = gen_synthetic(10, 2, 1.0, 0)
    with pytest.raises(InsufficientRows):
        split(ds, 8, 4, 0)
    with pytest.raises(InsufficientRows):
        split(ds, 2, 0, 0)
