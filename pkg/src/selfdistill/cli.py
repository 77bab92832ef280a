"""Command-line entry point.

Every experiment subcommand writes ``results.csv`` and ``meta.json`` into
``--out``; some also write checkpoints, summaries and SVG charts. Exit
status: 0 on success, 1 on usage or configuration errors, 2 on runtime
errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import __version__
from . import harness as H
from .config import ConfigError, ExperimentConfig, config_hash, config_to_dict, defaults_reference, parse_config
from .data import make_splits
from .metrics import evaluate
from .nn import load_checkpoint, save_checkpoint
from .plots import emit_plots
from .results import read_results, write_results, write_table

log = logging.getLogger("selfdistill")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, help="TOML configuration file (defaults if omitted)")
    p.add_argument("--seed", type=int, help="override the base seed")
    p.add_argument("--repeats", type=int, help="override the number of repeats")
    p.add_argument("--out", type=Path, help="output directory (default: results; metrics and "
                   "calibrate-t only print unless given)")
    p.add_argument("--timing", action="store_true", help="record wall-clock seconds per run")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="selfdistill", description="Self-distillation experiments on desk-scale data.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    sub.add_parser("train", parents=[common], help="one run of the configured scheme")
    sub.add_parser("ban", parents=[common], help="born-again generation sequence")

    p = sub.add_parser("temperature", parents=[common], help="one teacher, one student per temperature")
    p.add_argument("--T", dest="T_values", type=float, nargs="+", default=[1, 1.5, 2, 2.5, 3, 4])
    p.add_argument("--ban-table", type=Path, help="ban results.csv for the reference lines")

    p = sub.add_parser("sweep", parents=[common], help="vary one hyper-parameter")
    p.add_argument("--axis", required=True, choices=H.SWEEP_AXES)
    p.add_argument("--values", required=True, type=float, nargs="+")

    p = sub.add_parser("compare", parents=[common], help="CE / LS / Beta / SD suite")
    p.add_argument("--schemes", nargs="+", default=["ce", "ls", "beta", "sd"])

    p = sub.add_parser("cross", parents=[common], help="self- and cross-distillation of two architectures")
    p.add_argument("--config-b", type=Path, help="second architecture (default: model.cross_hidden)")

    p = sub.add_parser("metrics", parents=[common], help="recompute metrics from a checkpoint")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--split", choices=("train", "val", "test"), default="test")

    p = sub.add_parser("plot", parents=[common], help="results table to SVG charts")
    p.add_argument("table", type=Path)
    p.add_argument("--ban-table", type=Path, help="ban results.csv for temperature reference lines")

    p = sub.add_parser("calibrate-t", parents=[common],
                       help="temperature matching a mean effective ground-truth label")
    p.add_argument("--g", type=float, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--checkpoint", type=Path, help="teacher (default: train a CE teacher)")

    sub.add_parser("config-reference", help="print the configuration reference page")
    return parser


def _load_config(args) -> ExperimentConfig:
    cfg = parse_config(args.config) if args.config else ExperimentConfig()
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.repeats is not None:
        over["repeats"] = args.repeats
    return cfg.replace(**over) if over else cfg


def _write_meta(out: Path, command: str, cfg: ExperimentConfig, **extra) -> None:
    meta = {"artifact_version": __version__, "command": command, "config_hash": config_hash(cfg),
            "config": config_to_dict(cfg), **extra}
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _finish(args, cfg, records, **extra):
    args.out.mkdir(parents=True, exist_ok=True)
    write_results(records, args.out / "results.csv")
    _write_meta(args.out, args.command, cfg, **extra)


def cmd_train(args, cfg):
    records = []
    args.out.mkdir(parents=True, exist_ok=True)
    for r in range(cfg.repeats):
        res = H.single_run(cfg, repeat=r, timing=args.timing)
        records += res.records
        seed = cfg.seed + r
        save_checkpoint(res.models["model"], args.out / f"model_s{seed}.dfck")
        if "teacher" in res.models:
            save_checkpoint(res.models["teacher"], args.out / f"teacher_s{seed}.dfck")
    _finish(args, cfg, records)


def cmd_ban(args, cfg):
    records = []
    args.out.mkdir(parents=True, exist_ok=True)
    for r in range(cfg.repeats):
        res = H.ban_sequence(cfg, repeat=r, timing=args.timing)
        records += res.records
        for gen, model in res.models.items():
            save_checkpoint(model, args.out / f"gen{gen}_s{cfg.seed + r}.dfck")
    _finish(args, cfg, records)
    emit_plots(records, args.out)


def cmd_temperature(args, cfg):
    records = []
    for r in range(cfg.repeats):
        records += H.temperature_sweep(cfg, args.T_values, repeat=r, timing=args.timing).records
    _finish(args, cfg, records, temperatures=list(args.T_values))
    ban = read_results(args.ban_table) if args.ban_table else None
    emit_plots(records, args.out, ban_records=ban)


def cmd_sweep(args, cfg):
    values = [int(v) if args.axis == "trainset_size" else v for v in args.values]
    res = H.sweep(cfg, args.axis, values, timing=args.timing)
    _finish(args, cfg, res.records, axis=args.axis, values=values)
    write_table(res.summary, ["axis", "value", "scheme", "seed", "teacher_accuracy", "student_accuracy",
                              "relative_improvement"], args.out / "summary.csv")


def cmd_compare(args, cfg):
    res = H.comparison_suite(cfg, schemes=tuple(args.schemes), timing=args.timing)
    _finish(args, cfg, res.records, schemes=list(args.schemes))
    write_table(res.summary, ["scheme", "n", "accuracy_mean", "accuracy_std", "ece_mean", "ece_std"],
                args.out / "summary.csv")
    emit_plots(res.records, args.out)


def cmd_cross(args, cfg):
    cfg_b = parse_config(args.config_b) if args.config_b else None
    if cfg_b is not None and args.seed is not None:
        cfg_b = cfg_b.replace(seed=args.seed)
    res = H.cross_distill(cfg, cfg_b, timing=args.timing)
    extra = {"config_b": config_to_dict(cfg_b)} if cfg_b is not None else {}
    _finish(args, cfg, res.records, **extra)


def cmd_metrics(args, cfg):
    model = load_checkpoint(args.checkpoint)
    splits = make_splits(cfg.dataset, cfg.train.validation_fraction, cfg.seed)
    batch = getattr(splits, args.split)
    if batch is None:
        raise ConfigError(f"split {args.split!r} is empty (train.validation_fraction = 0)")
    m = evaluate(H.predict_proba(model, batch.features), batch.labels, cfg.k_nn, cfg.n_bins)
    text = json.dumps(dataclasses.asdict(m), sort_keys=True)
    print(text)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / f"metrics_{args.split}.json").write_text(text + "\n")


def cmd_plot(args, cfg):
    ban = read_results(args.ban_table) if args.ban_table else None
    for p in emit_plots(read_results(args.table), args.out, ban_records=ban):
        print(p)


def cmd_calibrate_t(args, cfg):
    splits = make_splits(cfg.dataset, cfg.train.validation_fraction, cfg.seed)
    if args.checkpoint:
        teacher = load_checkpoint(args.checkpoint)
    else:
        ce = dataclasses.replace(cfg.scheme, kind="ce", alpha=0.0, temperature=1.0)
        teacher = H.train_run(cfg, splits, seed=(cfg.seed, 0), scheme=ce).model
    T = H.matched_smoothing_calibration(teacher, splits.train.features, splits.train.labels, args.alpha, args.g)
    print(repr(T))


COMMANDS = {
    "train": cmd_train, "ban": cmd_ban, "temperature": cmd_temperature, "sweep": cmd_sweep,
    "compare": cmd_compare, "cross": cmd_cross, "metrics": cmd_metrics, "plot": cmd_plot,
    "calibrate-t": cmd_calibrate_t,
}


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        if not argv:
            raise UsageError(parser.format_help())
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_help())
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    if args.command == "config-reference":
        print(defaults_reference())
        return 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.out is None and args.command not in ("metrics", "calibrate-t"):
        args.out = Path("results")
    try:
        cfg = _load_config(args)
        COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        log.debug("failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
