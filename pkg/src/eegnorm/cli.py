"""Command-line interface.

Subcommands: generate, preprocess, normalize, grid, report, selftest.
Exit codes: 0 success, 1 validation/usage error, 2 I/O or file-format error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, apply_overrides, load_grid_config_file
from .data import LabeledDataset, drop_channels
from .dsp import preprocess as preprocess_recording
from .export import collect_windows, write_windows
from .harness import (
    GridConfig,
    aggregate_rows,
    GridReport,
    parse_report_tsv,
    render_table,
    report_tsv,
    run_grid,
    run_log_text,
)
from .normalize import DegeneracyPolicy, NormalizationPlan
from .recio import RecordingFormatError, read_recording, write_recording
from .synth import gen_dataset


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{message}\n{self.format_usage()}")


def _load_dataset_dir(path: Path) -> LabeledDataset:
    from .data import Provenance

    files = sorted(path.glob("*.eegn"))
    if not files:
        raise UsageError(f"no .eegn recordings under {path}")
    recs = tuple(read_recording(f) for f in files)
    return LabeledDataset(recs, Provenance(master_seed=0, config_hash="loaded"))


def _cmd_generate(args) -> int:
    cfg = load_grid_config_file(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ds = gen_dataset(cfg.synth, cfg.n_subjects, cfg.n_groups, rule=cfg.rule)
    for rec in ds:
        write_recording(rec, out / f"{rec.id}.eegn")
    (out / "provenance.txt").write_text(
        f"master_seed={ds.provenance.master_seed}\n"
        f"config_hash={ds.provenance.config_hash}\n"
        f"n_recordings={len(ds)}\n",
        encoding="utf-8",
    )
    print(f"wrote {len(ds)} recordings to {out}")
    return 0


def _cmd_preprocess(args) -> int:
    src = Path(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ds = _load_dataset_dir(src)
    count = 0
    for rec in ds:
        rec = preprocess_recording(rec)
        if args.drop:
            rec = drop_channels(rec, args.drop)
        write_recording(rec, out / f"{rec.id}.eegn")
        count += 1
    print(f"preprocessed {count} recordings into {out}")
    return 0


def _cmd_normalize(args) -> int:
    ds = _load_dataset_dir(Path(args.data))
    plan = NormalizationPlan.parse(args.plan)
    policy = DegeneracyPolicy.parse(args.policy)
    windows, labels = collect_windows(ds, plan, args.window_len, policy)
    manifest = write_windows(args.out, windows, labels, plan, args.window_len, policy)
    print(
        f"wrote {manifest['n_windows']} windows "
        f"({manifest['n_channels']}x{manifest['n_samples']}) to {args.out}"
    )
    print(f"payload sha256: {manifest['payload_sha256']}")
    return 0


def _write_grid_outputs(report: GridReport, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(render_table(report), encoding="utf-8")
    (out / "report.tsv").write_text(report_tsv(report), encoding="utf-8")
    runs = out / "runs"
    runs.mkdir(exist_ok=True)
    for row in report.rows:
        name = f"{report.task}_{row.plan.recording}-{row.plan.window}_s{row.seed}.log"
        (runs / name).write_text(run_log_text(row), encoding="utf-8")


def _cmd_grid(args) -> int:
    cfg = load_grid_config_file(args.config)
    cfg = apply_overrides(cfg, task=args.task, n_seeds=args.seeds, workers=args.workers)
    report = run_grid(cfg)
    out = Path(args.out)
    _write_grid_outputs(report, out)
    print(render_table(report))
    print(f"report written to {out / 'report.txt'} and {out / 'report.tsv'}")
    return 0


def _cmd_report(args) -> int:
    path = Path(args.tsv)
    if not path.exists():
        raise UsageError(f"report file not found: {path}")
    meta, rows = parse_report_tsv(path.read_text(encoding="utf-8"))
    plans = []
    for row in rows:
        if row.plan not in plans:
            plans.append(row.plan)
    report = GridReport(
        task=meta.get("task", "?"),
        metric_name=meta.get("metric", "?"),
        higher_is_better=meta.get("higher_is_better") == "true",
        plans=tuple(plans),
        rows=rows,
        cells=aggregate_rows(tuple(plans), rows),
        config_hash=meta.get("config", "?"),
    )
    text = render_table(report)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    print(text)
    return 0


def _cmd_selftest(_args) -> int:
    from . import selftest

    return selftest.run()


def build_parser() -> _Parser:
    parser = _Parser(prog="eegnorm", description=__doc__)
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("generate", help="generate a synthetic dataset")
    p.add_argument("--config", required=True, help="config file path")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("preprocess", help="filter and decimate recordings")
    p.add_argument("--data", required=True, help="directory of .eegn recordings")
    p.add_argument("--out", required=True)
    p.add_argument("--drop", nargs="*", default=[], help="channels to drop afterwards")

    p = sub.add_parser("normalize", help="apply a plan and export windows")
    p.add_argument("--data", required=True)
    p.add_argument("--plan", required=True, help="recording,window e.g. none,channel")
    p.add_argument("--window-len", type=float, default=2.0)
    p.add_argument("--policy", default="flag_identity")
    p.add_argument("--out", required=True, help="output .eegw file")

    p = sub.add_parser("grid", help="run the plans x seeds benchmark grid")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--task", choices=["age", "gender", "cpc_same", "cpc_cross"])
    p.add_argument("--seeds", type=int, help="override: use seeds 0..N-1")
    p.add_argument("--workers", type=int)

    p = sub.add_parser("report", help="re-render a table from report.tsv")
    p.add_argument("--tsv", required=True)
    p.add_argument("--out")

    sub.add_parser("selftest", help="run the built-in oracle checks")
    return parser


_COMMANDS = {
    "generate": _cmd_generate,
    "preprocess": _cmd_preprocess,
    "normalize": _cmd_normalize,
    "grid": _cmd_grid,
    "report": _cmd_report,
    "selftest": _cmd_selftest,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError(parser.format_usage())
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (RecordingFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
