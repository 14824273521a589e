import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given, settings
from pydantic import ValidationError

from svm01.data import (
    Dataset,
    SyntheticSpec,
    apply_scaling,
    flip_count,
    generate_synthetic,
    holdout_split,
    make_folds,
    read_libsvm,
    s_grid,
    scale_features,
    split,
    write_libsvm,
)
from svm01.errors import DataFormatError, InputError


# ───────────────────────────────────────────────
# LIBSVM I/O
# ───────────────────────────────────────────────
def test_read_single_line(tmp_path):
    path = tmp_path / "one.svm"
    path.write_text("+1 1:0.5 3:-2\n")
    ds = read_libsvm(path)
    np.testing.assert_array_equal(ds.features, [[0.5, 0.0, -2.0]])
    np.testing.assert_array_equal(ds.labels, [1.0])


def test_read_maps_zero_label_and_skips_comments(tmp_path):
    path = tmp_path / "mixed.svm"
    path.write_text("# header\n0 2:1\n\n-1 1:3 # trailing\n1\n")
    ds = read_libsvm(path)
    np.testing.assert_array_equal(ds.labels, [-1.0, -1.0, 1.0])
    np.testing.assert_array_equal(ds.features, [[0.0, 1.0], [3.0, 0.0], [0.0, 0.0]])


def test_read_empty_file(tmp_path):
    path = tmp_path / "empty.svm"
    path.write_text("")
    ds = read_libsvm(path)
    assert ds.m == 0


@pytest.mark.parametrize(
    "line, fragment",
    [
        ("2 1:1", "not binary"),
        ("x 1:1", "bad label"),
        ("1 2:1 1:1", "ascending"),
        ("1 0:1", "ascending"),
        ("1 1-1", "idx:val"),
        ("1 1:nan", "non-finite"),
    ],
)
def test_read_reports_bad_lines(tmp_path, line, fragment):
    path = tmp_path / "bad.svm"
    path.write_text("1 1:1\n" + line + "\n")
    with pytest.raises(DataFormatError, match=fragment) as info:
        read_libsvm(path)
    assert info.value.line == 2
    assert "line 2" in str(info.value)


def test_read_missing_file(tmp_path):
    with pytest.raises(OSError):
        read_libsvm(tmp_path / "absent.svm")


def test_read_rejects_too_narrow_width(tmp_path):
    path = tmp_path / "wide.svm"
    path.write_text("1 5:1\n")
    with pytest.raises(InputError):
        read_libsvm(path, n_features=3)
    assert read_libsvm(path, n_features=7).n_features == 7


def test_write_then_read(tmp_path, rng):
    X = rng.standard_normal((6, 4))
    X[:, 2] = 0.0
    y = np.array([1.0, -1.0, 1.0, 1.0, -1.0, -1.0])
    path = tmp_path / "rt.svm"
    write_libsvm(Dataset(X, y), path)
    back = read_libsvm(path, n_features=4)
    np.testing.assert_allclose(back.features, X, rtol=1e-15, atol=1e-15)
    np.testing.assert_array_equal(back.labels, y)


# ───────────────────────────────────────────────
# scaling
# ───────────────────────────────────────────────
def test_scale_column():
    ds = scale_features(Dataset(np.array([[0.0], [5.0], [10.0]]), np.ones(3)))
    np.testing.assert_allclose(ds.features[:, 0], [-1.0, 0.0, 1.0])


def test_scale_constant_column():
    ds = scale_features(Dataset(np.array([[3.0], [3.0]]), np.ones(2)))
    np.testing.assert_array_equal(ds.features[:, 0], [0.0, 0.0])


def test_train_scaling_can_leave_range():
    train = scale_features(Dataset(np.array([[0.0], [10.0]]), np.ones(2)))
    test = apply_scaling(Dataset(np.array([[20.0]]), np.ones(1)), train.scaling)
    assert test.features[0, 0] == pytest.approx(3.0)


def test_scaling_idempotent(rng):
    ds = Dataset(rng.uniform(-4.0, 9.0, (20, 5)), np.ones(20))
    once = scale_features(ds)
    twice = scale_features(once)
    np.testing.assert_allclose(twice.features, once.features, rtol=0, atol=1e-15)


def test_scaling_width_mismatch(rng):
    train = scale_features(Dataset(rng.standard_normal((4, 3)), np.ones(4)))
    with pytest.raises(InputError):
        apply_scaling(Dataset(np.zeros((2, 2)), np.ones(2)), train.scaling)


# ───────────────────────────────────────────────
# synthetic data
# ───────────────────────────────────────────────
def test_flip_count_rounding():
    assert flip_count(0.1, 1000) == 100
    assert flip_count(0.125, 100) == 13
    assert flip_count(0.0, 50) == 0


def test_synthetic_exact_flips():
    ds = generate_synthetic(SyntheticSpec(m=1000, n=5, noise_ratio=0.1, seed=3))
    assert ds.flipped.size == 100
    assert np.count_nonzero(ds.labels != ds.clean_labels) == 100
    assert np.count_nonzero(ds.clean_labels > 0) == 500


def test_synthetic_no_noise_means():
    spec = SyntheticSpec(m=10000, n=3, mu1=0.3, mu2=-0.3, noise_ratio=0.0, seed=5)
    ds = generate_synthetic(spec)
    assert ds.flipped.size == 0
    half = ds.m // 2
    bound = 5.0 / np.sqrt(half)
    np.testing.assert_array_less(np.abs(ds.features[ds.labels > 0].mean(axis=0) - 0.3), bound)
    np.testing.assert_array_less(np.abs(ds.features[ds.labels < 0].mean(axis=0) + 0.3), bound)


def test_synthetic_vector_parameters():
    spec = SyntheticSpec(m=4000, n=2, mu1=[1.0, -1.0], mu2=[0.0, 0.0], sigma1=[0.25, 4.0], seed=1)
    ds = generate_synthetic(spec)
    pos = ds.features[ds.labels > 0]
    np.testing.assert_allclose(pos.std(axis=0), [0.5, 2.0], rtol=0.1)


def test_synthetic_same_seed_identical():
    spec = SyntheticSpec(m=50, n=7, noise_ratio=0.2, seed=9)
    a, b = generate_synthetic(spec), generate_synthetic(spec)
    np.testing.assert_array_equal(a.features, b.features)
    np.testing.assert_array_equal(a.labels, b.labels)


def test_synthetic_rejects_full_noise():
    with pytest.raises(ValidationError):
        SyntheticSpec(m=10, n=2, noise_ratio=1.0)


def test_synthetic_rejects_bad_mean_length():
    with pytest.raises(InputError):
        generate_synthetic(SyntheticSpec(m=10, n=3, mu1=[1.0, 2.0]))


# ───────────────────────────────────────────────
# splits
# ───────────────────────────────────────────────
def test_five_folds_of_two():
    plan = make_folds(10, 5, seed=0)
    assert [plan.test_indices(f).size for f in range(5)] == [2] * 5


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 50).flatmap(lambda m: st.tuples(st.just(m), st.integers(2, m))), st.integers(0, 1000))
def test_folds_cover_and_are_disjoint(mk, seed):
    m, k = mk
    plan = make_folds(m, k, seed)
    tests = [plan.test_indices(f) for f in range(k)]
    joined = np.concatenate(tests)
    assert joined.size == m
    np.testing.assert_array_equal(np.sort(joined), np.arange(m))
    sizes = [t.size for t in tests]
    assert max(sizes) - min(sizes) <= 1


def test_same_seed_same_plan():
    np.testing.assert_array_equal(make_folds(30, 4, 7).assignments, make_folds(30, 4, 7).assignments)


def test_make_folds_rejects_bad_k():
    with pytest.raises(InputError):
        make_folds(5, 1, 0)
    with pytest.raises(InputError):
        make_folds(5, 6, 0)


def test_split_carries_flipped_indices():
    ds = generate_synthetic(SyntheticSpec(m=40, n=3, noise_ratio=0.25, seed=2))
    plan = make_folds(ds.m, 4, seed=1)
    total = 0
    for fold in range(plan.k):
        train, test = split(ds, plan, fold)
        assert train.m + test.m == ds.m
        np.testing.assert_array_equal(test.clean_labels, ds.clean_labels[plan.test_indices(fold)])
        total += test.flipped.size
    assert total == ds.flipped.size


def test_holdout_split_halves(rng):
    ds = Dataset(rng.standard_normal((11, 2)), np.ones(11))
    train, test = holdout_split(ds, 0.5, seed=3)
    assert (train.m, test.m) == (5, 6)
    with pytest.raises(InputError):
        holdout_split(ds, 1.0)


def test_s_grid():
    grid = s_grid(1000)
    assert grid[:3] == [1, 2, 3]
    assert grid[-1] == 1000
    assert 90 in grid and 100 in grid
    assert s_grid(10) == sorted(set(s_grid(10)))
