"""Command line interface.

Subcommands:
  validate   parse a config and fully load every referenced dataset
  run        evaluate the grid and write report.md / report.csv / report.json
  report     re-emit report files from an existing report.json
  ensemble   recombine persisted per-cell predictions with a new vote

Exit codes: 0 success, 2 config error, 3 data problem or failed cells,
4 I/O error.  Wall-clock timestamps go to run_meta.json, never into the
report files, so identical config + seed gives byte-identical reports.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from . import __version__
from .datasets import DatasetError, load_feature_csv
from .pipeline import ConfigError, load_config
from .pipeline.config import EnsembleConfig
from .pipeline.reporting import REPORT_FORMATS, emit_report, render_json, \
    report_rows_from_dict
from .pipeline.runner import PipelineIOError, evaluate_ensemble, run_grid

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CELLS = 3
EXIT_IO = 4


def _resolve_seed(args, cfg) -> int:
    """Seed precedence: --seed, then DEEPFEAT_SEED, then config, then 0."""
    if args.seed is not None:
        return args.seed
    env = os.environ.get("DEEPFEAT_SEED")
    if env is not None:
        try:
            seed = int(env)
        except ValueError:
            raise ConfigError(f"DEEPFEAT_SEED must be an integer, got '{env}'")
        if not 0 <= seed < 2 ** 64:
            raise ConfigError(f"DEEPFEAT_SEED out of range: {seed}")
        return seed
    if cfg is not None and cfg.seed is not None:
        return cfg.seed
    return 0


def _seed_arg(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed out of range: {value}")
    return value


def _formats_arg(text: str) -> tuple[str, ...]:
    formats = tuple(f.strip() for f in text.split(",") if f.strip())
    unknown = set(formats) - set(REPORT_FORMATS)
    if unknown:
        raise argparse.ArgumentTypeError(
            f"unknown formats {sorted(unknown)}, choose from {list(REPORT_FORMATS)}")
    return formats or REPORT_FORMATS


def _with_overrides(cfg, args):
    if getattr(args, "out", None):
        out = Path(args.out)
        changes = {"output_dir": out}
        # keep the cache inside the overridden output dir unless the
        # config pinned it elsewhere explicitly
        if cfg.cache_dir == cfg.output_dir / "cache":
            changes["cache_dir"] = out / "cache"
        from dataclasses import replace
        cfg = replace(cfg, **changes)
    return cfg


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    print(f"config ok: {len(cfg.datasets)} dataset(s), {len(cfg.selectors)} "
          f"selector(s), {len(cfg.classifiers)} classifier(s)")
    failures = 0
    for model, path in cfg.datasets.items():
        try:
            ds = load_feature_csv(path)
        except DatasetError as e:
            print(f"  {model}: ERROR {e}")
            failures += 1
            continue
        counts = ", ".join(f"{name}={int(c)}" for name, c
                           in zip(ds.class_names, ds.class_counts()))
        print(f"  {model}: {ds.matrix.n_rows} rows x {ds.matrix.n_features} "
              f"features ({counts})")
    if failures:
        print(f"{failures} dataset(s) failed to load")
        return EXIT_CELLS
    print("all datasets load cleanly")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _with_overrides(load_config(args.config), args)
    seed = _resolve_seed(args, cfg)
    started = time.time()
    report = run_grid(cfg, seed=seed, jobs=args.jobs)
    finished = time.time()
    written = emit_report(report, cfg.output_dir, args.format)
    meta = {
        "started_unix": started,
        "finished_unix": finished,
        "duration_seconds": finished - started,
        "seed": seed,
        "config_hash": report.provenance["config_hash"],
        "package_version": __version__,
    }
    meta_path = cfg.output_dir / "run_meta.json"
    try:
        meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n",
                             encoding="utf-8")
    except OSError as e:
        raise PipelineIOError(f"cannot write {meta_path}: {e}") from e
    for fmt in args.format:
        print(f"wrote {written[fmt]}")
    failed = [r for r in report.rows if not r.ok]
    if report.ensemble is not None and report.ensemble.error is not None:
        print(f"ensemble failed: {report.ensemble.error}")
    for r in failed:
        print(f"cell failed: {r.cell_id}: {r.error}")
    if failed:
        print(f"{len(failed)} of {len(report.rows)} cells failed")
        return EXIT_CELLS
    print(f"{len(report.rows)} cells ok")
    return EXIT_OK


def cmd_report(args) -> int:
    src = Path(args.source)
    if not src.exists():
        raise PipelineIOError(f"no such report file {src}")
    try:
        doc = json.loads(src.read_text(encoding="utf-8"))
        report = report_rows_from_dict(doc)
    except (ValueError, KeyError) as e:
        raise ConfigError(f"{src} is not a report JSON document: {e}")
    out_dir = Path(args.out) if args.out else src.parent
    written = emit_report(report, out_dir, args.format)
    for fmt in args.format:
        print(f"wrote {written[fmt]}")
    return EXIT_OK


def cmd_ensemble(args) -> int:
    cfg = _with_overrides(load_config(args.config), args)
    report_path = cfg.output_dir / "report.json"
    if not report_path.exists():
        raise PipelineIOError(f"no report at {report_path}; run the grid first")
    report = report_rows_from_dict(
        json.loads(report_path.read_text(encoding="utf-8")))
    members = "best_per_model"
    if args.members:
        members = tuple(m.strip() for m in args.members.split(",") if m.strip())
    weights = None
    if args.weights:
        try:
            weights = tuple(float(w) for w in args.weights.split(","))
        except ValueError:
            raise ConfigError(f"weights must be numbers, got '{args.weights}'")
    spec = EnsembleConfig(mode=args.mode, members=members, weights=weights,
                          tie_break=args.tie_break)
    outcome = evaluate_ensemble(cfg, report.rows, spec)
    if outcome.error is not None:
        print(f"ensemble failed: {outcome.error}")
        return EXIT_CELLS
    report.ensemble = outcome
    written = emit_report(report, cfg.output_dir, args.format)
    m = outcome.metrics
    count = len(outcome.member_cell_ids)
    noun = "member" if count == 1 else "members"
    print(f"{spec.mode} vote over {count} {noun}: "
          f"accuracy {m.accuracy:.4f}, f1 {m.f1:.4f}")
    for fmt in args.format:
        print(f"wrote {written[fmt]}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deepfeat",
        description="Feature selection and classification over CNN feature CSVs.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON config path")

    p = sub.add_parser("validate", parents=[common],
                       help="check the config and load every dataset")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", parents=[common], help="evaluate the full grid")
    p.add_argument("--seed", type=_seed_arg, default=None,
                   help="split seed (overrides DEEPFEAT_SEED and the config)")
    p.add_argument("--out", default=None, help="output directory override")
    p.add_argument("--format", type=_formats_arg, default=REPORT_FORMATS,
                   help="comma-separated subset of md,csv,json (default all)")
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel selector workers per dataset")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="re-emit reports from a report.json")
    p.add_argument("--source", required=True, help="path to report.json")
    p.add_argument("--out", default=None, help="output directory (default: alongside)")
    p.add_argument("--format", type=_formats_arg, default=REPORT_FORMATS)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("ensemble", parents=[common],
                       help="revote persisted predictions without re-running")
    p.add_argument("--mode", choices=("hard", "soft"), default="hard")
    p.add_argument("--members", default=None,
                   help="comma-separated model/selector/classifier patterns")
    p.add_argument("--weights", default=None, help="comma-separated member weights")
    p.add_argument("--tie-break", choices=("lowest_index", "score_sum"),
                   default="lowest_index")
    p.add_argument("--out", default=None, help="output directory override")
    p.add_argument("--format", type=_formats_arg, default=REPORT_FORMATS)
    p.set_defaults(func=cmd_ensemble)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DatasetError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_CELLS
    except (PipelineIOError, OSError) as e:
        print(f"io error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
