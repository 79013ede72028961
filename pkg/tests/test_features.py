import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thermopore.features import (SplitSpec, apply_minmax, extract_kernel, feature_index_meta,
                                 fit_minmax, invert_minmax, kernel_offsets, layer_tag,
                                 load_feature_csv, split, store_feature_csv)
from thermopore.grid import Label, LabelGrid

from .conftest import random_thermal


def triple_loop_features(thermal, labels, k):
    """Reference gather: loop over centres in linear order, then dz, dy, dx."""
    nx, ny, nz = thermal.dims
    r = k // 2
    tau, tmax, mask = thermal.tau.values, thermal.tmax.values, thermal.mask.values
    rows, ys, coords = [], [], []
    for z in range(nz):
        for y in range(ny):
            for x in range(nx):
                if labels.states[x + nx * (y + ny * z)] == Label.EXCLUDED:
                    continue
                if not (r <= x < nx - r and r <= y < ny - r and r <= z < nz - r):
                    continue
                idx = []
                for dz in range(-r, r + 1):
                    for dy in range(-r, r + 1):
                        for dx in range(-r, r + 1):
                            idx.append((x + dx) + nx * ((y + dy) + ny * (z + dz)))
                if not all(mask[i] for i in idx):
                    continue
                rows.append([tau[i] for i in idx] + [tmax[i] for i in idx])
                ys.append(labels.states[x + nx * (y + ny * z)])
                coords.append((x, y, z))
    return np.array(rows).reshape(len(rows), 2 * k ** 3), np.array(ys), np.array(coords)


@pytest.mark.parametrize("k", [1, 3, 5])
@pytest.mark.parametrize("seed", [0, 1])
def test_extract_matches_triple_loop(k, seed):
    rng = np.random.default_rng(seed)
    thermal, labels = random_thermal(rng, 8, 7, 7, mask_p=0.97)
    fm, y = extract_kernel(thermal, labels, k)
    X_ref, y_ref, c_ref = triple_loop_features(thermal, labels, k)
    assert fm.n_cols == 2 * k ** 3
    assert np.array_equal(fm.X, X_ref)
    assert np.array_equal(y, y_ref)
    assert np.array_equal(fm.row_coords, c_ref.reshape(-1, 3))


@pytest.mark.parametrize("k,cols", [(1, 2), (3, 54), (5, 250), (7, 686)])
def test_column_counts(k, cols, rng):
    thermal, labels = random_thermal(rng, 9, 9, 9, mask_p=1.0)
    fm, _ = extract_kernel(thermal, labels, k)
    assert fm.n_cols == cols
    assert fm.n_rows == (9 - k + 1) ** 3


def test_interior_rows_on_small_cube(rng):
    thermal, labels = random_thermal(rng, 5, 5, 5, mask_p=1.0)
    fm, _ = extract_kernel(thermal, labels, 3)
    assert fm.n_rows == 27
    assert extract_kernel(thermal, labels, 7)[0].n_rows == 0


def test_centre_column_is_voxel_value(rng):
    thermal, labels = random_thermal(rng, 6, 6, 6, mask_p=1.0)
    k = 5
    fm, _ = extract_kernel(thermal, labels, k)
    centre = k ** 3 // 2
    x, y, z = fm.row_coords[0]
    i = x + 6 * (y + 6 * z)
    assert fm.X[0, centre] == thermal.tau.values[i]
    assert fm.X[0, k ** 3 + centre] == thermal.tmax.values[i]


def test_even_kernel_rejected(rng):
    thermal, labels = random_thermal(rng, 4, 4, 4)
    with pytest.raises(ValueError):
        extract_kernel(thermal, labels, 2)


def test_feature_index_meta():
    assert feature_index_meta(0, 5) == ("tau", (-2, -2, -2))
    assert feature_index_meta(125, 5) == ("tmax", (-2, -2, -2))
    assert feature_index_meta(62, 5) == ("tau", (0, 0, 0))
    assert feature_index_meta(249, 5) == ("tmax", (2, 2, 2))
    with pytest.raises(IndexError):
        feature_index_meta(250, 5)


@pytest.mark.parametrize("k", [1, 3, 5, 7])
def test_meta_agrees_with_offsets(k):
    offs = kernel_offsets(k)
    for i in range(2 * k ** 3):
        kind, off = feature_index_meta(i, k)
        assert off == offs[i % k ** 3]
        assert kind == ("tau" if i < k ** 3 else "tmax")


def test_layer_tag():
    assert [layer_tag(d) for d in (-2, -1, 0, 1, 2)] == ["L-2", "L-1", "L0", "L+1", "L+2"]


def test_minmax_examples():
    X = np.array([[0.0, 5.0], [10.0, 5.0], [5.0, 5.0]])
    p = fit_minmax(X)
    out = apply_minmax(X, p)
    assert np.array_equal(out, [[0, 0], [1, 0], [0.5, 0]])
    # no clipping outside the fitted range
    assert apply_minmax(np.array([[20.0, 5.0]]), p).tolist() == [[2.0, 0.0]]


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 30), st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
def test_minmax_range_and_inverse(n, d, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d)) * rng.uniform(0.1, 100, size=d)
    p = fit_minmax(X)
    S = apply_minmax(X, p)
    assert S.min() >= 0 and S.max() <= 1
    span = p.x_max - p.x_min
    ok = span > 0
    assert np.allclose(invert_minmax(S, p)[:, ok], X[:, ok], rtol=1e-12, atol=1e-9 * np.abs(X).max())


def test_split_sizes_and_partition():
    tr, te = split(10_000, SplitSpec(0.07, 0))
    assert te.size == 700 and tr.size == 9300
    assert np.array_equal(np.sort(np.concatenate([tr, te])), np.arange(10_000))
    tr2, te2 = split(10_000, SplitSpec(0.07, 0))
    assert np.array_equal(te, te2)
    assert not np.array_equal(te, split(10_000, SplitSpec(0.07, 1))[1])


@pytest.mark.parametrize("f", [0.07, 0.10, 0.20, 0.30, 0.40])
def test_split_rounding(f):
    for n in (11, 57, 1001):
        _, te = split(n, SplitSpec(f, 3))
        assert te.size == int(np.floor(n * f + 0.5))


def test_split_degenerate():
    with pytest.raises(ValueError):
        split(3, SplitSpec(0.07, 0))
    with pytest.raises(ValueError):
        SplitSpec(1.0)


def test_feature_csv_round_trip(tmp_path, rng):
    thermal, labels = random_thermal(rng, 5, 5, 5, mask_p=1.0)
    fm, y = extract_kernel(thermal, labels, 3)
    store_feature_csv(tmp_path / "f.csv", fm, y)
    fm2, y2 = load_feature_csv(tmp_path / "f.csv")
    assert np.array_equal(fm2.X, fm.X) and np.array_equal(y2, y)
    assert np.array_equal(fm2.row_coords, fm.row_coords) and fm2.kernel_k == 3


def test_excluded_centres_dropped():
    rng = np.random.default_rng(5)
    thermal, _ = random_thermal(rng, 3, 3, 3, mask_p=1.0)
    states = np.zeros((3, 3, 3), dtype=np.int8)
    states[1, 1, 1] = Label.EXCLUDED
    fm, y = extract_kernel(thermal, LabelGrid.from_array(states), 3)
    assert fm.n_rows == 0 and y.size == 0
