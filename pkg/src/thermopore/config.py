"""Experiment configuration: an INI file with one section per concern.

Every key is optional; ``thermopore <cmd> --print-defaults`` prints the
complete default file.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, fields, replace

from .features import HOLDOUTS, KERNELS
from .models.params import KINDS, Hyperparams
from .resample import SmoteConfig
from .synth import SynthConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class IngestSettings:
    ct: str = ""
    thermal: str = ""
    dz: int = 0
    window_x: int = 4
    window_y: int = 4
    gray_threshold: float | None = None
    pores_dark: bool = True
    porosity_threshold: float = 0.05
    bins: int = 32
    register_against: str = "tmax"


@dataclass(frozen=True)
class ImportanceSettings:
    kernel: int = 5
    n_splits: int = 100
    train_fraction: float = 0.7


@dataclass(frozen=True)
class ExperimentConfig:
    thermal: str = ""  # voxel CSV with labels; empty -> generate from [synth]
    kernels: tuple = KERNELS
    holdouts: tuple = HOLDOUTS
    models: tuple = KINDS
    scale_fit: str = "train"
    threshold: float = 0.5
    seed: int = 0
    workers: int = 1
    out: str = "out"
    hp: Hyperparams = field(default_factory=Hyperparams)
    smote: SmoteConfig = field(default_factory=SmoteConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    ingest: IngestSettings = field(default_factory=IngestSettings)
    importance: ImportanceSettings = field(default_factory=ImportanceSettings)

    def validate(self):
        if not self.models:
            raise ConfigError("model list is empty")
        for m in self.models:
            if m not in KINDS:
                raise ConfigError(f"unknown model {m!r}; choose from {', '.join(KINDS)}")
        for k in (*self.kernels, self.importance.kernel):
            if k < 1 or k % 2 == 0:
                raise ConfigError(f"kernel sizes must be odd and positive, got {k}")
        if not self.kernels:
            raise ConfigError("kernel list is empty")
        for h in self.holdouts:
            if not 0 < h < 1:
                raise ConfigError(f"hold-out fractions must lie in (0, 1), got {h}")
        if not 0 < self.importance.train_fraction < 1:
            raise ConfigError("importance train_fraction must lie in (0, 1)")
        if self.importance.n_splits < 1:
            raise ConfigError("importance n_splits must be >= 1")
        if not 0 < self.threshold < 1:
            raise ConfigError("threshold must lie in (0, 1)")
        if self.scale_fit not in ("train", "all"):
            raise ConfigError("scale_fit must be 'train' or 'all'")
        return self


# -- value (de)serialisation ------------------------------------------------

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (tuple, list)):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


def _parse(raw, default, name):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError(raw)
            return low in ("true", "yes", "1")
        if isinstance(default, tuple):
            items = [x.strip() for x in raw.split(",") if x.strip()]
            if default and isinstance(default[0], (int, float)) and not isinstance(default[0], bool):
                kind = type(default[0])
                return tuple(kind(x) if kind is float else int(x) for x in items)
            return tuple(items)
        if default is None:
            return float(raw) if raw else None
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for {name}") from None


def _section(cp, name, obj, special=None):
    if not cp.has_section(name):
        return obj
    special = special or {}
    known = {f.name for f in fields(obj)}
    updates = {}
    for key, raw in cp.items(name):
        if key not in known:
            raise ConfigError(f"unknown key {key!r} in [{name}]")
        if key in special:
            updates[key] = special[key](raw)
        else:
            updates[key] = _parse(raw, getattr(obj, key), f"{name}.{key}")
    return replace(obj, **updates)


def _int_or_none(raw):
    raw = raw.strip().lower()
    return None if raw in ("", "none", "inf") else int(raw)


def _max_features(raw):
    raw = raw.strip().lower()
    return raw if raw in ("sqrt", "all") else int(raw)


def _ints(raw):
    return tuple(int(x) for x in raw.split(",") if x.strip())


def load_config(path=None, text=None):
    cp = configparser.ConfigParser(interpolation=None)
    if path is not None:
        try:
            with open(path) as fh:
                cp.read_file(fh)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
    elif text is not None:
        cp.read_string(text)
    if cp.has_option("smote", "seed"):
        raise ConfigError("[smote] seed is derived from the master seed; set [experiment] seed")
    allowed = {"experiment", "smote", "synth", "ingest", "importance", *KINDS}
    extra = set(cp.sections()) - allowed
    if extra:
        raise ConfigError(f"unknown sections: {sorted(extra)}")

    cfg = ExperimentConfig()
    if cp.has_section("experiment"):
        base = {f.name: getattr(cfg, f.name) for f in fields(cfg)
                if f.name not in ("hp", "smote", "synth", "ingest", "importance")}
        for key, raw in cp.items("experiment"):
            if key not in base:
                raise ConfigError(f"unknown key {key!r} in [experiment]")
            base[key] = _parse(raw, base[key], f"experiment.{key}")
        cfg = replace(cfg, **base)

    hp = cfg.hp
    depth = {"max_depth": _int_or_none}
    hp = replace(hp, threshold=cfg.threshold,
                 knn=_section(cp, "knn", hp.knn),
                 dt=_section(cp, "dt", hp.dt, depth),
                 rf=_section(cp, "rf", hp.rf, {**depth, "max_features": _max_features}),
                 lr=_section(cp, "lr", hp.lr),
                 adaboost=_section(cp, "adaboost", hp.adaboost),
                 mlp=_section(cp, "mlp", hp.mlp, {"hidden": _ints}))
    try:
        cfg = replace(cfg, hp=hp,
                      smote=_section(cp, "smote", cfg.smote),
                      synth=_section(cp, "synth", cfg.synth,
                                     {"spacing": lambda r: tuple(float(x) for x in r.split(","))}),
                      ingest=_section(cp, "ingest", cfg.ingest),
                      importance=_section(cp, "importance", cfg.importance))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    return cfg.validate()


def dump_config(cfg):
    """Render ``cfg`` as an INI file that :func:`load_config` reads back."""
    cp = configparser.ConfigParser(interpolation=None)
    cp["experiment"] = {f.name: _fmt(getattr(cfg, f.name)) for f in fields(cfg)
                        if f.name not in ("hp", "smote", "synth", "ingest", "importance")}
    for kind in KINDS:
        cp[kind] = {f.name: _fmt(getattr(cfg.hp.for_kind(kind), f.name))
                    for f in fields(cfg.hp.for_kind(kind))}
    for name in ("smote", "synth", "ingest", "importance"):
        obj = getattr(cfg, name)
        cp[name] = {f.name: _fmt(getattr(obj, f.name)) for f in fields(obj)
                    if not (name == "smote" and f.name == "seed")}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
