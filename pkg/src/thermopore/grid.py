"""Voxel grids, label grids and the voxel CSV format.

Storage is flat and row-major with x fastest, then y, then z, so a layer
(fixed z) is a contiguous block of ``nx * ny`` values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np


class GridError(ValueError):
    """Raised for malformed grids or voxel CSV files."""


class Label(IntEnum):
    NORMAL = 0
    DEFECTIVE = 1
    EXCLUDED = 2


def _freeze(arr):
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class VoxelGrid3:
    """Dense 3D scalar field.

    Parameters
    ----------
    nx, ny, nz : int
        Voxel counts per axis.
    spacing : tuple of float
        Voxel size (sx, sy, sz) in micrometres.
    values : ndarray
        Flat array of length ``nx * ny * nz`` in linear-index order.
    """

    nx: int
    ny: int
    nz: int
    spacing: tuple
    values: np.ndarray

    def __post_init__(self):
        if min(self.nx, self.ny, self.nz) < 1:
            raise GridError(f"grid dims must be positive, got {self.dims}")
        values = np.asarray(self.values).reshape(-1)
        if values.size != self.nx * self.ny * self.nz:
            raise GridError(
                f"values has {values.size} entries, dims {self.dims} need {self.size}")
        spacing = tuple(float(s) for s in self.spacing)
        if len(spacing) != 3 or not all(s > 0 and math.isfinite(s) for s in spacing):
            raise GridError(f"spacing must be three positive numbers, got {self.spacing}")
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "values", _freeze(values))

    @classmethod
    def from_array(cls, arr, spacing=(130.0, 135.0, 50.0)):
        """Build from an array indexed ``[z, y, x]``."""
        arr = np.asarray(arr)
        if arr.ndim != 3:
            raise GridError("expected a 3D array indexed [z, y, x]")
        nz, ny, nx = arr.shape
        return cls(nx, ny, nz, spacing, arr.reshape(-1))

    @property
    def dims(self):
        return (self.nx, self.ny, self.nz)

    @property
    def size(self):
        return self.nx * self.ny * self.nz

    def as_array(self):
        """Read-only view indexed ``[z, y, x]``."""
        return self.values.reshape(self.nz, self.ny, self.nx)

    def same_geometry(self, other):
        return self.dims == other.dims and self.spacing == other.spacing

    def __eq__(self, other):
        if not isinstance(other, VoxelGrid3):
            return NotImplemented
        return (self.same_geometry(other)
                and self.values.dtype == other.values.dtype
                and np.array_equal(self.values, other.values, equal_nan=self.values.dtype.kind == "f"))


@dataclass(frozen=True, eq=False)
class ThermalFeatureGrid:
    """Per-voxel time above melt threshold (``tau``, seconds) and peak
    radiance (``tmax``, camera units) with the part mask."""

    tau: VoxelGrid3
    tmax: VoxelGrid3
    mask: VoxelGrid3

    def __post_init__(self):
        if not (self.tau.same_geometry(self.tmax) and self.tau.same_geometry(self.mask)):
            raise GridError("tau, tmax and mask must share dims and spacing")
        if self.mask.values.dtype != np.bool_:
            object.__setattr__(self, "mask", VoxelGrid3(
                *self.mask.dims, self.mask.spacing, self.mask.values.astype(bool)))
        inside = self.mask.values
        tau_in = self.tau.values[inside]
        if not (np.all(np.isfinite(tau_in)) and np.all(np.isfinite(self.tmax.values[inside]))):
            raise GridError("tau and tmax must be finite inside the mask")
        if np.any(tau_in < 0):
            raise GridError("tau must be non-negative inside the mask")

    @property
    def dims(self):
        return self.tau.dims

    @property
    def spacing(self):
        return self.tau.spacing

    def __eq__(self, other):
        if not isinstance(other, ThermalFeatureGrid):
            return NotImplemented
        return self.tau == other.tau and self.tmax == other.tmax and self.mask == other.mask


@dataclass(frozen=True, eq=False)
class LabelGrid:
    """Per-voxel ground truth, values from :class:`Label`."""

    nx: int
    ny: int
    nz: int
    spacing: tuple
    states: np.ndarray

    def __post_init__(self):
        states = np.asarray(self.states).reshape(-1)
        if states.size != self.nx * self.ny * self.nz:
            raise GridError("label count does not match dims")
        if states.size and (states.min() < 0 or states.max() > 2):
            raise GridError("labels must be in {0, 1, 2}")
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))
        object.__setattr__(self, "states", _freeze(states.astype(np.int8)))

    @classmethod
    def from_array(cls, arr, spacing=(130.0, 135.0, 50.0)):
        nz, ny, nx = np.shape(arr)
        return cls(nx, ny, nz, spacing, np.asarray(arr).reshape(-1))

    @property
    def dims(self):
        return (self.nx, self.ny, self.nz)

    def as_array(self):
        return self.states.reshape(self.nz, self.ny, self.nx)

    def restricted_to(self, mask):
        """Copy with every voxel outside ``mask`` set to Excluded."""
        if mask.dims != self.dims:
            raise GridError("mask dims do not match label dims")
        states = np.where(mask.values.astype(bool), self.states, Label.EXCLUDED)
        return LabelGrid(self.nx, self.ny, self.nz, self.spacing, states)

    def check_against(self, thermal):
        if thermal.dims != self.dims:
            raise GridError(f"label dims {self.dims} != thermal dims {thermal.dims}")
        outside = ~thermal.mask.values
        if np.any(self.states[outside] != Label.EXCLUDED):
            raise GridError("voxels outside the part mask must be Excluded")

    def __eq__(self, other):
        if not isinstance(other, LabelGrid):
            return NotImplemented
        return (self.dims == other.dims and self.spacing == other.spacing
                and np.array_equal(self.states, other.states))


def linear_index(x, y, z, dims):
    nx, ny, nz = dims
    if not (0 <= x < nx and 0 <= y < ny and 0 <= z < nz):
        raise IndexError(f"voxel ({x}, {y}, {z}) outside grid {dims}")
    return x + nx * (y + ny * z)


def coords_of(index, dims):
    nx, ny, nz = dims
    if not 0 <= index < nx * ny * nz:
        raise IndexError(f"index {index} outside grid {dims}")
    x = index % nx
    y = (index // nx) % ny
    z = index // (nx * ny)
    return x, y, z


def layer_slice(grid, z):
    """Values of layer ``z`` as a read-only ``(ny, nx)`` array.

    Flattening the result gives the layer in x-fastest order.
    """
    nz = grid.nz
    if not 0 <= z < nz:
        raise IndexError(f"layer {z} outside 0..{nz - 1}")
    data = grid.values if isinstance(grid, VoxelGrid3) else grid.states
    n = grid.nx * grid.ny
    return data[z * n:(z + 1) * n].reshape(grid.ny, grid.nx)


# ---------------------------------------------------------------------------
# voxel CSV

HEADER = "x,y,z,tau_s,tmax,mask,label"


def _fmt(v):
    # repr of a Python float round-trips exactly
    return repr(float(v))


def store_voxel_csv(path, thermal, labels=None):
    """Write ``thermal`` (and optionally ``labels``) in the voxel CSV format."""
    nx, ny, nz = thermal.dims
    sx, sy, sz = thermal.spacing
    if labels is not None and labels.dims != thermal.dims:
        raise GridError("label dims do not match thermal dims")
    lines = [f"# dims {nx} {ny} {nz}",
             f"# spacing_um {_fmt(sx)} {_fmt(sy)} {_fmt(sz)}",
             HEADER if labels is not None else HEADER.rsplit(",", 1)[0]]
    tau = thermal.tau.values.tolist()
    tmax = thermal.tmax.values.tolist()
    mask = thermal.mask.values.tolist()
    states = labels.states.tolist() if labels is not None else None
    i = 0
    for z in range(nz):
        for y in range(ny):
            for x in range(nx):
                row = f"{x},{y},{z},{tau[i]!r},{tmax[i]!r},{int(mask[i])}"
                if states is not None:
                    row += f",{states[i]}"
                lines.append(row)
                i += 1
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_error(path, lineno, msg):
    return GridError(f"{path}:{lineno}: {msg}")


def load_voxel_csv(path):
    """Read a voxel CSV file.

    Returns
    -------
    thermal : ThermalFeatureGrid
    labels : LabelGrid or None
        None when the file has no label column.
    """
    with open(path) as fh:
        text = fh.read().splitlines()
    if len(text) < 3:
        raise _parse_error(path, len(text) + 1, "truncated header")
    parts = text[0].split()
    if len(parts) != 5 or parts[:2] != ["#", "dims"]:
        raise _parse_error(path, 1, "expected '# dims <nx> <ny> <nz>'")
    try:
        nx, ny, nz = (int(p) for p in parts[2:])
    except ValueError:
        raise _parse_error(path, 1, "dims must be integers") from None
    parts = text[1].split()
    if len(parts) != 5 or parts[:2] != ["#", "spacing_um"]:
        raise _parse_error(path, 2, "expected '# spacing_um <sx> <sy> <sz>'")
    try:
        spacing = tuple(float(p) for p in parts[2:])
    except ValueError:
        raise _parse_error(path, 2, "spacing must be numbers") from None
    header = text[2].strip()
    if header == HEADER:
        has_label = True
    elif header == HEADER.rsplit(",", 1)[0]:
        has_label = False
    else:
        raise _parse_error(path, 3, f"unexpected header {header!r}")
    if min(nx, ny, nz) < 1:
        raise _parse_error(path, 1, "dims must be positive")

    n = nx * ny * nz
    records = text[3:]
    while records and not records[-1].strip():
        records.pop()
    if len(records) != n:
        raise _parse_error(path, 3 + len(records),
                           f"dims {nx}x{ny}x{nz} need {n} records, found {len(records)}")
    ncol = 7 if has_label else 6
    tau = np.empty(n)
    tmax = np.empty(n)
    mask = np.empty(n, dtype=bool)
    states = np.empty(n, dtype=np.int8) if has_label else None
    x = y = z = 0
    for i, line in enumerate(records):
        lineno = i + 4
        cols = line.split(",")
        if len(cols) != ncol:
            raise _parse_error(path, lineno, f"expected {ncol} columns, got {len(cols)}")
        try:
            cx, cy, cz = int(cols[0]), int(cols[1]), int(cols[2])
            tau[i] = float(cols[3])
            tmax[i] = float(cols[4])
            m = int(cols[5])
            lab = int(cols[6]) if has_label else 0
        except ValueError:
            raise _parse_error(path, lineno, "non-numeric field") from None
        if (cx, cy, cz) != (x, y, z):
            raise _parse_error(path, lineno, f"record out of order, expected ({x},{y},{z})")
        if m not in (0, 1):
            raise _parse_error(path, lineno, "mask must be 0 or 1")
        if lab not in (0, 1, 2):
            raise _parse_error(path, lineno, "label must be 0, 1 or 2")
        if m and not (math.isfinite(tau[i]) and math.isfinite(tmax[i])):
            raise _parse_error(path, lineno, "non-finite tau/tmax inside mask")
        mask[i] = bool(m)
        if has_label:
            states[i] = lab
        x += 1
        if x == nx:
            x = 0
            y += 1
            if y == ny:
                y = 0
                z += 1
    try:
        thermal = ThermalFeatureGrid(VoxelGrid3(nx, ny, nz, spacing, tau),
                                     VoxelGrid3(nx, ny, nz, spacing, tmax),
                                     VoxelGrid3(nx, ny, nz, spacing, mask))
    except GridError as exc:
        raise _parse_error(path, 4, str(exc)) from None
    labels = LabelGrid(nx, ny, nz, spacing, states) if has_label else None
    return thermal, labels
