"""Micro-CT processing: binarization, down-sampling onto the thermal voxel
grid, and x-y translation registration by mutual information."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .grid import (GridError, Label, LabelGrid, ThermalFeatureGrid, VoxelGrid3, load_voxel_csv,
                   store_voxel_csv)

log = logging.getLogger(__name__)

THERMAL_SPACING = (130.0, 135.0, 50.0)
CT_SPACING = (15.0, 15.0, 10.0)


class RegistrationError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class CtVolume:
    """Fine-resolution CT volume, flat arrays in x-fastest order."""

    nx: int
    ny: int
    nz: int
    spacing: tuple
    grayscale: np.ndarray
    pore_mask: np.ndarray | None = None

    def __post_init__(self):
        n = self.nx * self.ny * self.nz
        gray = np.asarray(self.grayscale, dtype=float).reshape(-1)
        if gray.size != n:
            raise GridError(f"grayscale has {gray.size} values, dims need {n}")
        object.__setattr__(self, "grayscale", gray)
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))
        if self.pore_mask is not None:
            pores = np.asarray(self.pore_mask, dtype=bool).reshape(-1)
            if pores.size != n:
                raise GridError("pore_mask length does not match dims")
            object.__setattr__(self, "pore_mask", pores)

    @property
    def dims(self):
        return (self.nx, self.ny, self.nz)

    @classmethod
    def from_grid_csv(cls, thermal):
        """Adapter for CT stored in the voxel CSV layout: grayscale in the
        ``tmax`` column, pore mask in the ``mask`` column."""
        g = thermal.tmax
        return cls(g.nx, g.ny, g.nz, g.spacing, g.values, thermal.mask.values)


@dataclass(frozen=True)
class Translation3:
    dx: int
    dy: int
    dz: int

    def inverse(self):
        return Translation3(-self.dx, -self.dy, -self.dz)


def binarize_ct(ct, gray_threshold, pores_dark=True):
    """Mark pores by thresholding grayscale (pores darker by default)."""
    if not math.isfinite(gray_threshold):
        raise ValueError("gray_threshold must be finite")
    if pores_dark:
        pores = ct.grayscale < gray_threshold
    else:
        pores = ct.grayscale > gray_threshold
    return CtVolume(ct.nx, ct.ny, ct.nz, ct.spacing, ct.grayscale, pores)


def coarse_membership(ct, target_spacing):
    """Coarse dims and, per fine voxel, the coarse linear index whose cell
    contains the fine voxel's centre."""
    idx_axes = []
    dims = []
    for n_fine, s_fine, s_coarse in zip(ct.dims, ct.spacing, target_spacing):
        n_coarse = max(1, math.ceil(n_fine * s_fine / s_coarse - 1e-9))
        centres = (np.arange(n_fine) + 0.5) * s_fine
        idx = np.minimum(np.floor(centres / s_coarse).astype(np.int64), n_coarse - 1)
        idx_axes.append(idx)
        dims.append(n_coarse)
    cx, cy, cz = dims
    ix, iy, iz = idx_axes
    lin = ix[None, None, :] + cx * (iy[None, :, None] + cy * iz[:, None, None])
    return tuple(dims), lin.reshape(-1)


def downsample_ct(ct, target_spacing=THERMAL_SPACING, porosity_fraction_threshold=0.05):
    """Average grayscale and label porosity on the coarse grid.

    A coarse voxel is Defective when strictly more than
    ``porosity_fraction_threshold`` of its member fine voxels are pores.
    Coarse voxels without members get NaN grayscale and the Excluded label.

    Returns
    -------
    gray : VoxelGrid3
    labels : LabelGrid
    """
    if ct.grayscale.size == 0:
        raise ValueError("empty CT volume")
    if ct.pore_mask is None:
        raise ValueError("CT volume has no pore mask; binarize it first")
    target_spacing = tuple(float(s) for s in target_spacing)
    if any(t < s for t, s in zip(target_spacing, ct.spacing)):
        raise ValueError("target spacing must be at least the CT spacing on every axis")
    dims, lin = coarse_membership(ct, target_spacing)
    n = dims[0] * dims[1] * dims[2]
    counts = np.bincount(lin, minlength=n)
    gray_sum = np.bincount(lin, weights=ct.grayscale, minlength=n)
    pores = np.bincount(lin, weights=ct.pore_mask.astype(float), minlength=n)
    has = counts > 0
    gray = np.full(n, np.nan)
    gray[has] = gray_sum[has] / counts[has]
    states = np.full(n, Label.EXCLUDED, dtype=np.int8)
    # correctly rounded p/c equals the threshold literal when exactly 5%
    defective = pores[has] / counts[has] > porosity_fraction_threshold
    states[has] = np.where(defective, Label.DEFECTIVE, Label.NORMAL)
    return (VoxelGrid3(*dims, target_spacing, gray),
            LabelGrid(*dims, target_spacing, states))


def mutual_information(a, b, bins=32):
    """Mutual information (nats) of two equally shaped fields from a
    ``bins x bins`` joint histogram of min-max normalised intensities."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {np.shape(a)} vs {np.shape(b)}")
    if bins < 2:
        raise ValueError("bins must be >= 2")
    if a.size == 0:
        return 0.0
    ia = _bin_index(a, bins)
    ib = _bin_index(b, bins)
    if ia is None or ib is None:
        return 0.0
    joint = np.bincount(ia * bins + ib, minlength=bins * bins).reshape(bins, bins)
    pxy = joint / a.size
    px = pxy.sum(axis=1)
    py = pxy.sum(axis=0)
    nz = pxy > 0
    outer = px[:, None] * py[None, :]
    return float(max(0.0, np.sum(pxy[nz] * np.log(pxy[nz] / outer[nz]))))


def _bin_index(v, bins):
    lo, hi = v.min(), v.max()
    if not hi > lo:
        return None
    idx = np.floor((v - lo) / (hi - lo) * bins).astype(np.int64)
    return np.minimum(idx, bins - 1)


def _overlap(gray, ref, dx, dy, dz):
    """Pairs (ref[x,y,z], gray[x-dx, y-dy, z-dz]) over the common region,
    arrays indexed [z, y, x]."""
    gz, gy, gx = gray.shape
    rz, ry, rx = ref.shape

    def span(shift, n_src, n_dst):
        lo = max(0, shift)
        hi = min(n_dst, n_src + shift)
        return lo, hi

    zlo, zhi = span(dz, gz, rz)
    ylo, yhi = span(dy, gy, ry)
    xlo, xhi = span(dx, gx, rx)
    if zlo >= zhi or ylo >= yhi or xlo >= xhi:
        return None, None
    r = ref[zlo:zhi, ylo:yhi, xlo:xhi]
    g = gray[zlo - dz:zhi - dz, ylo - dy:yhi - dy, xlo - dx:xhi - dx]
    ok = np.isfinite(r) & np.isfinite(g)
    return r[ok], g[ok]


def register_xy(gray_coarse, thermal_ref, dz, window=(4, 4), bins=32,
                register_against="tmax", workers=1):
    """Exhaustive integer x-y translation search maximising mutual
    information between translated CT grayscale and a thermal field.

    The returned translation maps CT coordinates onto thermal coordinates
    the same way :func:`apply_translation` does. Equal scores are resolved
    by smallest ``|dx| + |dy|``, then lexicographic ``(dx, dy)``.

    Returns
    -------
    Translation3, float
        Best translation and its MI score.
    """
    wx, wy = window
    if wx < 0 or wy < 0:
        raise ValueError("window must be non-negative")
    if register_against not in ("tmax", "tau"):
        raise ValueError("register_against must be 'tmax' or 'tau'")
    field = thermal_ref.tmax if register_against == "tmax" else thermal_ref.tau
    ref = field.as_array().astype(float)
    gray = gray_coarse.as_array().astype(float)
    candidates = [(dx, dy) for dx in range(-wx, wx + 1) for dy in range(-wy, wy + 1)]

    def evaluate(c):
        r, g = _overlap(gray, ref, c[0], c[1], dz)
        if r is None or r.size == 0:
            return None
        return mutual_information(g, r, bins)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            scores = list(pool.map(evaluate, candidates))
    else:
        scores = [evaluate(c) for c in candidates]
    scored = [(s, c) for s, c in zip(scores, candidates) if s is not None]
    if not scored:
        raise RegistrationError("no candidate translation overlaps the thermal grid")
    best_score, (bdx, bdy) = min(scored, key=lambda sc: (-sc[0], abs(sc[1][0]) + abs(sc[1][1]), sc[1]))
    return Translation3(bdx, bdy, dz), best_score


def apply_translation(labels, t, target_dims=None):
    """Resample labels so that target (x, y, z) takes the source label at
    ``(x - dx, y - dy, z - dz)``; coordinates outside the source are Excluded."""
    if target_dims is None:
        target_dims = labels.dims
    tx, ty, tz = target_dims
    src = labels.as_array()
    out = np.full((tz, ty, tx), Label.EXCLUDED, dtype=np.int8)
    sz, sy, sx = src.shape

    def span(shift, n_src, n_dst):
        return max(0, shift), min(n_dst, n_src + shift)

    zlo, zhi = span(t.dz, sz, tz)
    ylo, yhi = span(t.dy, sy, ty)
    xlo, xhi = span(t.dx, sx, tx)
    if zlo < zhi and ylo < yhi and xlo < xhi:
        out[zlo:zhi, ylo:yhi, xlo:xhi] = src[zlo - t.dz:zhi - t.dz,
                                             ylo - t.dy:yhi - t.dy,
                                             xlo - t.dx:xhi - t.dx]
    return LabelGrid(tx, ty, tz, labels.spacing, out.reshape(-1))


def ingest(ct, thermal, dz, window=(4, 4), gray_threshold=None, pores_dark=True,
           porosity_fraction_threshold=0.05, bins=32, register_against="tmax", workers=1):
    """Full CT-to-label path: binarize (when a threshold is given),
    down-sample, register in x-y, translate and restrict to the part mask.

    Returns
    -------
    labels : LabelGrid
        Aligned with ``thermal``.
    translation : Translation3
    score : float
    """
    if gray_threshold is not None:
        ct = binarize_ct(ct, gray_threshold, pores_dark)
    gray, coarse_labels = downsample_ct(ct, thermal.spacing, porosity_fraction_threshold)
    t, score = register_xy(gray, thermal, dz, window, bins, register_against, workers)
    log.info("registration: dx=%d dy=%d dz=%d mi=%.6f", t.dx, t.dy, t.dz, score)
    aligned = apply_translation(coarse_labels, t, thermal.dims)
    return aligned.restricted_to(thermal.mask), t, score


def store_ct_csv(path, ct):
    """CT in the voxel CSV layout: grayscale in ``tmax``, pores in ``mask``,
    ``tau`` zero."""
    sp = ct.spacing
    pores = ct.pore_mask if ct.pore_mask is not None else np.zeros(ct.grayscale.size, bool)
    grid = ThermalFeatureGrid(VoxelGrid3(*ct.dims, sp, np.zeros(ct.grayscale.size)),
                              VoxelGrid3(*ct.dims, sp, ct.grayscale),
                              VoxelGrid3(*ct.dims, sp, pores))
    store_voxel_csv(path, grid)


def load_ct_csv(path):
    grid, _ = load_voxel_csv(path)
    return CtVolume.from_grid_csv(grid)
