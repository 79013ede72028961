"""Sliding-window kernel features, min-max scaling and hold-out splits.

A K-kernel row holds ``2 * k**3`` values: the tau values of the ``k**3``
window voxels followed by their tmax values. Inside each half, window
offsets run dz slowest, then dy, then dx fastest, so the central voxel
sits at half-index ``(k**3 - 1) // 2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .grid import GridError, Label

KERNELS = (1, 3, 5, 7)
HOLDOUTS = (0.07, 0.10, 0.20, 0.30, 0.40)


@dataclass(eq=False)
class FeatureMatrix:
    X: np.ndarray
    kernel_k: int
    row_coords: np.ndarray  # (n, 3) int, x/y/z of the central voxel

    @property
    def n_rows(self):
        return self.X.shape[0]

    @property
    def n_cols(self):
        return self.X.shape[1]

    def take(self, rows):
        return FeatureMatrix(self.X[rows], self.kernel_k, self.row_coords[rows])


@dataclass
class ScaleParams:
    x_min: np.ndarray
    x_max: np.ndarray


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.test_fraction < 1:
            raise ValueError("test_fraction must lie in (0, 1)")


def _check_k(k):
    if k < 1 or k % 2 == 0:
        raise ValueError(f"kernel size must be odd and >= 1, got {k}")


def extract_kernel(thermal, labels, k):
    """Gather kernel features for every eligible voxel.

    A voxel is kept when its whole ``k x k x k`` window is inside the grid
    and inside the part mask and its own label is Normal or Defective.
    Rows come out in linear-index order of the central voxel.

    Returns
    -------
    FeatureMatrix, ndarray
        Features and the 0/1 label vector.
    """
    _check_k(k)
    if labels.dims != thermal.dims:
        raise GridError("label and thermal dims differ")
    r = k // 2
    tau = thermal.tau.as_array()
    tmax = thermal.tmax.as_array()
    mask = thermal.mask.as_array()
    states = labels.as_array()
    nz, ny, nx = tau.shape
    empty = (np.empty((0, 2 * k ** 3)), np.empty((0, 3), dtype=np.int64))
    if min(nx, ny, nz) < k:
        return FeatureMatrix(*empty[:1], k, empty[1]), np.empty(0, dtype=np.int8)

    full = sliding_window_view(mask, (k, k, k)).all(axis=(3, 4, 5))
    centre_state = states[r:nz - r, r:ny - r, r:nx - r]
    keep = full & (centre_state != Label.EXCLUDED)
    cz, cy, cx = np.nonzero(keep)  # C order == linear-index order

    wt = sliding_window_view(tau, (k, k, k))[cz, cy, cx].reshape(len(cz), k ** 3)
    wm = sliding_window_view(tmax, (k, k, k))[cz, cy, cx].reshape(len(cz), k ** 3)
    X = np.concatenate([wt, wm], axis=1).astype(float)
    coords = np.stack([cx + r, cy + r, cz + r], axis=1).astype(np.int64)
    y = centre_state[cz, cy, cx].astype(np.int8)
    return FeatureMatrix(X, k, coords), y


def kernel_offsets(k):
    """Window offsets ``(dx, dy, dz)`` in feature order."""
    r = k // 2
    rng = range(-r, r + 1)
    return [(dx, dy, dz) for dz in rng for dy in rng for dx in rng]


def feature_index_meta(i, k):
    """Kind (``'tau'`` or ``'tmax'``) and ``(dx, dy, dz)`` offset of column
    ``i``; positive dz is a layer above the central voxel."""
    _check_k(k)
    half = k ** 3
    if not 0 <= i < 2 * half:
        raise IndexError(f"feature index {i} outside 0..{2 * half - 1}")
    kind = "tau" if i < half else "tmax"
    j = i % half
    r = k // 2
    dx = j % k - r
    dy = (j // k) % k - r
    dz = j // (k * k) - r
    return kind, (dx, dy, dz)


def layer_tag(dz):
    return "L0" if dz == 0 else f"L{dz:+d}"


def fit_minmax(X):
    X = np.asarray(X, dtype=float)
    if X.shape[0] == 0:
        raise ValueError("cannot fit scaling on an empty matrix")
    return ScaleParams(X.min(axis=0), X.max(axis=0))


def apply_minmax(X, params):
    """Scale to ``(x - x_min) / (x_max - x_min)``; constant columns map to 0.
    Values outside the fitted range are not clipped."""
    X = np.asarray(X, dtype=float)
    if X.shape[1] != params.x_min.size:
        raise ValueError(f"matrix has {X.shape[1]} columns, params have {params.x_min.size}")
    span = params.x_max - params.x_min
    degenerate = span == 0
    out = (X - params.x_min) / np.where(degenerate, 1.0, span)
    out[:, degenerate] = 0.0
    return out


def invert_minmax(Xs, params):
    return Xs * (params.x_max - params.x_min) + params.x_min


def split(n_rows, spec):
    """Uniform random train/test partition (PCG64 seeded by ``spec.seed``).

    Both index arrays are returned sorted.
    """
    if n_rows < 2:
        raise ValueError("need at least two rows to split")
    n_test = int(np.floor(n_rows * spec.test_fraction + 0.5))
    if n_test < 1 or n_test >= n_rows:
        raise ValueError(f"test fraction {spec.test_fraction} leaves an empty side for n={n_rows}")
    perm = np.random.default_rng(spec.seed).permutation(n_rows)
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def store_feature_csv(path, fm, y):
    """Write ``# kernel <k>`` then ``x,y,z,label,f0..``."""
    cols = ",".join(f"f{i}" for i in range(fm.n_cols))
    lines = [f"# kernel {fm.kernel_k}", f"x,y,z,label,{cols}"]
    for (cx, cy, cz), lab, row in zip(fm.row_coords.tolist(), np.asarray(y).tolist(), fm.X.tolist()):
        lines.append(f"{cx},{cy},{cz},{lab}," + ",".join(repr(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_feature_csv(path):
    with open(path) as fh:
        first = fh.readline().split()
        if first[:2] != ["#", "kernel"] or len(first) != 3:
            raise GridError(f"{path}:1: expected '# kernel <k>'")
        k = int(first[2])
        fh.readline()
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape[1] != 4 + 2 * k ** 3:
        raise GridError(f"{path}: expected {4 + 2 * k ** 3} columns, got {data.shape[1]}")
    coords = data[:, :3].astype(np.int64)
    return FeatureMatrix(data[:, 4:], k, coords), data[:, 3].astype(np.int8)
