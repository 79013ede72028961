"""Synthetic LPBF build with a known, auditable porosity rule.

A cylindrical part is filled with a smooth latent thermal field plus
per-layer laser-track striping and voxel-level noise. The defect
probability of a voxel is logistic in the z-scored peak radiance of the
voxel itself, the mean z-scored peak radiance of the two layers above it,
and its own z-scored tau. The bias is calibrated by bisection so the
defect prevalence (after label noise) hits the target.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy.ndimage import gaussian_filter

from .ctproc import CtVolume
from .grid import Label, LabelGrid, ThermalFeatureGrid, VoxelGrid3
from .models.base import sigmoid


class GenerationError(ValueError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    nz: int = 60
    diameter: int = 24
    pad: int = 1
    spacing: tuple = (130.0, 135.0, 50.0)
    smooth_sigma: float = 1.5
    stripe_amplitude: float = 0.3
    stripe_period: float = 4.0
    stripe_rotation_deg: float = 67.0
    tmax_noise: float = 1.0
    tmax_base: float = 1000.0
    tmax_scale: float = 100.0
    tau_base: float = 2e-3
    tau_spread: float = 0.25
    tau_corr: float = 0.6
    w_self_tmax: float = 1.0
    w_above: float = 3.0
    w_tau: float = 0.3
    prevalence: float = 0.08
    label_noise: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.prevalence < 1:
            raise GenerationError("prevalence must lie in (0, 1)")
        if not 0 <= self.label_noise < 0.5:
            raise GenerationError("label_noise must lie in [0, 0.5)")
        for name in ("w_self_tmax", "w_above", "w_tau"):
            if not math.isfinite(getattr(self, name)):
                raise GenerationError(f"{name} must be finite")
        if self.nz < 1 or self.diameter < 1 or self.pad < 0:
            raise GenerationError("nz and diameter must be positive, pad non-negative")

    @property
    def nxy(self):
        return self.diameter + 2 * self.pad

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise GenerationError(f"unknown synth settings: {sorted(unknown)}")
        d = dict(d)
        if "spacing" in d:
            d["spacing"] = tuple(float(s) for s in d["spacing"])
        return cls(**d)


def cylinder_mask(cfg):
    n = cfg.nxy
    c = (n - 1) / 2.0
    yy, xx = np.mgrid[0:n, 0:n]
    disk = (xx - c) ** 2 + (yy - c) ** 2 <= (cfg.diameter / 2.0) ** 2
    return np.broadcast_to(disk, (cfg.nz, n, n)).copy()


def _zscore(a, mask):
    v = a[mask]
    return (a - v.mean()) / v.std(), float(v.mean()), float(v.std())


def above_mean(zt, mask, depth=2):
    """Mean of the field over the ``depth`` layers above each voxel (only
    layers inside the grid and mask count; 0 when there are none)."""
    total = np.zeros_like(zt)
    count = np.zeros_like(zt)
    for dz in range(1, depth + 1):
        total[:-dz] += np.where(mask[dz:], zt[dz:], 0.0)
        count[:-dz] += mask[dz:]
    return np.divide(total, count, out=np.zeros_like(total), where=count > 0)


def rule_logit(tmax, tau, mask, rule):
    """Linear predictor of the defect rule, without the bias."""
    zt = (tmax - rule["tmax_mean"]) / rule["tmax_std"]
    ztau = (tau - rule["tau_mean"]) / rule["tau_std"]
    return (rule["w_self_tmax"] * zt + rule["w_above"] * above_mean(zt, mask)
            + rule["w_tau"] * ztau)


def _calibrate_bias(s, target):
    f = lambda b: float(np.mean(sigmoid(s + b)))  # noqa: E731
    span = float(np.max(np.abs(s))) + 60.0  # sigmoid saturates beyond +-60
    lo, hi = -span, span
    if not f(lo) < target < f(hi):
        raise GenerationError(f"prevalence {target} unreachable under the configured weights")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def generate(cfg=SynthConfig()):
    """Returns ``(thermal, labels, rule)``; ``rule`` is the JSON-able record
    of the generative rule (see :func:`describe_ground_truth`)."""
    rng = np.random.default_rng(cfg.seed)
    n = cfg.nxy
    shape = (cfg.nz, n, n)
    mask = cylinder_mask(cfg)

    latent = gaussian_filter(rng.standard_normal(shape), cfg.smooth_sigma, mode="reflect")
    latent /= latent[mask].std()
    yy, xx = np.mgrid[0:n, 0:n]
    stripes = np.empty(shape)
    for z in range(cfg.nz):
        theta = math.radians(cfg.stripe_rotation_deg * z)
        phase = (xx * math.cos(theta) + yy * math.sin(theta)) / cfg.stripe_period
        stripes[z] = cfg.stripe_amplitude * np.sin(2 * math.pi * phase)
    tmax = cfg.tmax_base + cfg.tmax_scale * (latent + stripes
                                             + cfg.tmax_noise * rng.standard_normal(shape))
    rho = cfg.tau_corr
    tau = cfg.tau_base * np.exp(cfg.tau_spread * (rho * latent + math.sqrt(1 - rho ** 2)
                                                  * rng.standard_normal(shape)))
    tmax = np.where(mask, tmax, 0.0)
    tau = np.where(mask, tau, 0.0)

    _, tm_mean, tm_std = _zscore(tmax, mask)
    _, ta_mean, ta_std = _zscore(tau, mask)
    rule = {"w_self_tmax": cfg.w_self_tmax, "w_above": cfg.w_above, "w_tau": cfg.w_tau,
            "above_layers": [1, 2], "tmax_mean": tm_mean, "tmax_std": tm_std,
            "tau_mean": ta_mean, "tau_std": ta_std, "label_noise": cfg.label_noise,
            "prevalence_target": cfg.prevalence, "seed": cfg.seed}
    s = rule_logit(tmax, tau, mask, rule)
    clean_target = (cfg.prevalence - cfg.label_noise) / (1 - 2 * cfg.label_noise)
    if not 0 < clean_target < 1:
        raise GenerationError("label noise too high for the prevalence target")
    rule["bias"] = _calibrate_bias(s[mask], clean_target)

    p = sigmoid(s + rule["bias"])
    defect = rng.random(shape) < p
    flip = rng.random(shape) < cfg.label_noise
    defect ^= flip
    states = np.where(mask, defect.astype(np.int8), Label.EXCLUDED)
    rule["prevalence_realised"] = float(defect[mask].mean())

    sp = tuple(float(v) for v in cfg.spacing)
    thermal = ThermalFeatureGrid(VoxelGrid3.from_array(tau, sp), VoxelGrid3.from_array(tmax, sp),
                                 VoxelGrid3.from_array(mask, sp))
    return thermal, LabelGrid.from_array(states, sp), rule


def describe_ground_truth(cfg=SynthConfig()):
    """The exact generative rule for ``cfg`` (weights, calibrated bias,
    z-score constants, label noise)."""
    return generate(cfg)[2]


def bayes_probability(thermal, rule):
    """True defect probability per voxel (flat, x-fastest) under ``rule``,
    label noise included."""
    mask = thermal.mask.as_array()
    s = rule_logit(thermal.tmax.as_array(), thermal.tau.as_array(), mask, rule)
    p = sigmoid(s + rule["bias"])
    rho = rule["label_noise"]
    return (p * (1 - rho) + (1 - p) * rho).reshape(-1)


def save_rule(rule, path):
    with open(path, "w") as fh:
        json.dump(rule, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_rule(path):
    with open(path) as fh:
        return json.load(fh)


def synthesize_ct(thermal, labels, factor=(2, 2, 2), shift=(0, 0), pore_fraction=0.25,
                  noise=0.05, seed=0):
    """Fine CT volume consistent with a labelled thermal grid.

    Part voxels are bright with contrast following peak radiance, air is
    dark, and every fine voxel in a Defective coarse voxel is a pore with
    probability ``pore_fraction`` (at least one per such voxel). Content
    is then moved by ``shift`` coarse voxels in x-y, so registration should
    return ``(-shift[0], -shift[1])``.
    """
    rng = np.random.default_rng(seed)
    fx, fy, fz = factor
    mask = thermal.mask.as_array()
    tmax = thermal.tmax.as_array()
    zt = np.zeros_like(tmax)
    zt[mask] = (tmax[mask] - tmax[mask].mean()) / tmax[mask].std()
    states = labels.as_array()

    def up(a):
        return np.repeat(np.repeat(np.repeat(a, fz, 0), fy, 1), fx, 2)

    part = up(mask)
    gray = np.where(part, 0.7 + 0.1 * up(zt), 0.1)
    pores = np.zeros(part.shape, dtype=bool)
    defective = up(states == Label.DEFECTIVE)
    pores[defective] = rng.random(int(defective.sum())) < pore_fraction
    # force one pore per defective coarse voxel so the >5% rule holds
    dz, dy, dx = np.nonzero(states == Label.DEFECTIVE)
    pores[dz * fz, dy * fy, dx * fx] = True
    gray = np.where(pores, 0.2, gray) + noise * rng.standard_normal(part.shape)

    sx, sy = shift[0] * fx, shift[1] * fy
    gray = _shift_fill(gray, sx, sy, 0.1)
    pores = _shift_fill(pores, sx, sy, False)
    nz, ny, nx = gray.shape
    spacing = tuple(s / f for s, f in zip(thermal.spacing, factor))
    return CtVolume(nx, ny, nz, spacing, gray.reshape(-1), pores.reshape(-1))


def _shift_fill(a, sx, sy, fill):
    out = np.full_like(a, fill)
    ny, nx = a.shape[1:]
    ys, yd = (slice(0, ny - sy), slice(sy, ny)) if sy >= 0 else (slice(-sy, ny), slice(0, ny + sy))
    xs, xd = (slice(0, nx - sx), slice(sx, nx)) if sx >= 0 else (slice(-sx, nx), slice(0, nx + sx))
    out[:, yd, xd] = a[:, ys, xs]
    return out


def config_dict(cfg):
    d = asdict(cfg)
    d["spacing"] = list(cfg.spacing)
    return d
