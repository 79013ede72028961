"""Command-line driver.

Exit codes: 0 success, 2 usage error, 3 data error, 4 pipeline error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path

from . import ctproc, synth
from .config import ConfigError, ExperimentConfig, dump_config, load_config
from .evaluation import experiment_table, importance_study
from .grid import GridError, load_voxel_csv, store_voxel_csv
from .reports import write_importance_bundle, write_json, write_run_bundle

log = logging.getLogger("thermopore")

EXIT_USAGE, EXIT_DATA, EXIT_PIPELINE = 2, 3, 4


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


@contextmanager
def stage(name):
    t0 = time.perf_counter()
    log.info("%s: start", name)
    yield
    log.info("%s: done in %.2fs", name, time.perf_counter() - t0)


def _load_cfg(args):
    if args.config is None:
        cfg = ExperimentConfig()
    else:
        if not Path(args.config).is_file():
            raise UsageError(f"config file not found: {args.config}")
        cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed, synth=replace(cfg.synth, seed=args.seed))
    if getattr(args, "workers", None) is not None:
        cfg = replace(cfg, workers=args.workers)
    if args.out is not None:
        cfg = replace(cfg, out=args.out)
    return cfg.validate()


def _dataset(cfg):
    if cfg.thermal:
        path = Path(cfg.thermal)
        if not path.is_file():
            raise DataError(f"thermal data file not found: {path}")
        with stage("load"):
            thermal, labels = load_voxel_csv(path)
        if labels is None:
            raise DataError(f"{path} has no label column; run 'ingest' first")
        labels.check_against(thermal)
        return thermal, labels
    with stage("synth"):
        thermal, labels, _ = synth.generate(cfg.synth)
    return thermal, labels


def cmd_synth(cfg, args):
    out = Path(cfg.out)
    with stage("synth"):
        thermal, labels, rule = synth.generate(cfg.synth)
    with stage("write"):
        out.mkdir(parents=True, exist_ok=True)
        tmp = out / ".dataset.csv.tmp"
        store_voxel_csv(tmp, thermal, labels)
        tmp.replace(out / "dataset.csv")
        write_json(out / "ground_truth.json", {"rule": rule, "config": synth.config_dict(cfg.synth)})
        if args.ct_shift is not None:
            ct = synth.synthesize_ct(thermal, labels, shift=tuple(args.ct_shift), seed=cfg.synth.seed)
            tmp = out / ".ct.csv.tmp"
            ctproc.store_ct_csv(tmp, ct)
            tmp.replace(out / "ct.csv")
    log.info("prevalence %.4f (target %.4f)", rule["prevalence_realised"], cfg.synth.prevalence)
    return 0


def cmd_ingest(cfg, args):
    ing = cfg.ingest
    ct_path = args.ct or ing.ct
    th_path = args.thermal or ing.thermal
    if not ct_path or not th_path:
        raise UsageError("ingest needs --ct and --thermal (or [ingest] ct/thermal)")
    for p in (ct_path, th_path):
        if not Path(p).is_file():
            raise DataError(f"file not found: {p}")
    dz = args.dz if args.dz is not None else ing.dz
    window = tuple(args.window) if args.window is not None else (ing.window_x, ing.window_y)
    with stage("load"):
        ct = ctproc.load_ct_csv(ct_path)
        thermal, _ = load_voxel_csv(th_path)
    with stage("register"):
        labels, t, score = ctproc.ingest(
            ct, thermal, dz, window, ing.gray_threshold, ing.pores_dark,
            ing.porosity_threshold, ing.bins, ing.register_against, cfg.workers)
    log.info("chosen translation dx=%d dy=%d dz=%d, mutual information %.6f", t.dx, t.dy, t.dz, score)
    out = Path(cfg.out)
    with stage("write"):
        out.mkdir(parents=True, exist_ok=True)
        tmp = out / ".labels.csv.tmp"
        store_voxel_csv(tmp, thermal, labels)
        tmp.replace(out / "labels.csv")
        write_json(out / "registration.json",
                   {"dx": t.dx, "dy": t.dy, "dz": t.dz, "mutual_information": score,
                    "window": list(window), "bins": ing.bins,
                    "register_against": ing.register_against})
    return 0


def _recorded(cfg):
    """Config text saved with a bundle; execution-only settings (worker
    count, output directory) are reset so bundles compare byte-for-byte."""
    default = ExperimentConfig()
    return dump_config(replace(cfg, workers=default.workers, out=default.out))


def cmd_run(cfg, args):
    thermal, labels = _dataset(cfg)

    def progress(cell):
        log.info("cell %s: auc=%.4f f1=%.4f", cell.name, cell.report.auc, cell.report.f1)

    with stage("experiment"):
        cells = experiment_table(thermal, labels, cfg.kernels, cfg.holdouts, cfg.models,
                                 cfg.seed, cfg.hp, cfg.smote, cfg.scale_fit, cfg.workers, progress)
    with stage("write"):
        write_run_bundle(cfg.out, cells, _recorded(cfg))
    return 0


def cmd_importance(cfg, args):
    imp = cfg.importance
    if args.n_splits is not None:
        imp = replace(imp, n_splits=args.n_splits)
        cfg = replace(cfg, importance=imp)
    thermal, labels = _dataset(cfg)
    with stage("importance"):
        report = importance_study(thermal, labels, imp.kernel, imp.n_splits, imp.train_fraction,
                                  cfg.hp.rf, cfg.seed, cfg.smote, cfg.scale_fit, cfg.workers)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    with stage("write"):
        write_importance_bundle(cfg.out, report, _recorded(cfg))
    log.info("tau mean %.5f, tmax mean %.5f", report.per_kind["tau_mean"], report.per_kind["tmax_mean"])
    return 0


COMMANDS = {"synth": cmd_synth, "ingest": cmd_ingest, "run": cmd_run, "importance": cmd_importance}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def build_parser():
    p = _Parser(prog="thermopore", description="Voxel-wise porosity prediction from LPBF thermal features.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {"synth": "generate a synthetic labelled build",
             "ingest": "register CT porosity onto a thermal grid",
             "run": "train and evaluate the model x kernel x hold-out matrix",
             "importance": "repeated-split random-forest Gini importance"}
    for name, text in helps.items():
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--config", help="INI experiment config")
        sp.add_argument("--seed", type=int, help="master seed (overrides config)")
        sp.add_argument("--out", help="output directory (overrides config)")
        sp.add_argument("--workers", type=int, help="worker threads for forests/registration")
        sp.add_argument("--print-defaults", action="store_true", help="print the default config and exit")
        sp.add_argument("-v", "--verbose", action="store_true")
        if name == "synth":
            sp.add_argument("--ct-shift", type=int, nargs=2, metavar=("DX", "DY"),
                            help="also write a matching fine CT volume shifted by DX DY voxels")
        if name == "ingest":
            sp.add_argument("--ct", help="CT voxel CSV (grayscale in tmax, pores in mask)")
            sp.add_argument("--thermal", help="thermal voxel CSV")
            sp.add_argument("--dz", type=int, help="manual layer offset")
            sp.add_argument("--window", type=int, nargs=2, metavar=("WX", "WY"))
        if name == "importance":
            sp.add_argument("--n-splits", type=int)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s", stream=sys.stderr)
    if args.print_defaults:
        sys.stdout.write(dump_config(ExperimentConfig()))
        return 0
    try:
        cfg = _load_cfg(args)
        return COMMANDS[args.command](cfg, args)
    except (UsageError, ConfigError) as exc:
        print(f"thermopore {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, GridError, synth.GenerationError, OSError) as exc:
        print(f"thermopore {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        log.debug("pipeline failure", exc_info=True)
        print(f"thermopore {args.command}: pipeline error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
