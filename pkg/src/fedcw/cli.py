"""Command line entry point: ``fedcw run | validate-bianchi | summarize``."""

import argparse
import logging
import sys
from pathlib import Path

from . import bianchi
from .config import MODES, ConfigError, parse_config
from .harness import PartialOutputError, emit_summary, read_metrics_csv, run_experiment, write_summary_json

log = logging.getLogger("fedcw")


def build_parser():
    p = argparse.ArgumentParser(prog="fedcw", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log federation rounds and warnings")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one seeded experiment from a config file")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--seed", type=int, help="override the config seed")
    run.add_argument("--mode", choices=MODES, help="override the config mode")
    run.add_argument("--out", type=Path, help="output directory (overrides out_dir)")

    val = sub.add_parser("validate-bianchi", help="compare the simulator with the analytic DCF model")
    val.add_argument("--n", type=int, required=True, help="number of saturated stations")
    val.add_argument("--cw", type=int, required=True, help="fixed contention window")
    val.add_argument("--time", type=float, default=10.0, help="simulated seconds (default 10)")
    val.add_argument("--seed", type=int, default=0)

    summ = sub.add_parser("summarize", help="post-warmup summary of metrics CSVs")
    summ.add_argument("--in", dest="inputs", nargs="+", required=True, type=Path)
    summ.add_argument("--warmup", type=float, default=0.25, help="fraction of windows to drop")
    summ.add_argument("--base", help="mode the delay delta is measured against")
    summ.add_argument("--out", type=Path, help="also write the summary as JSON")
    return p


def cmd_run(args):
    cfg = parse_config(args.config.read_text())
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.mode is not None:
        overrides["mode"] = args.mode
    if args.out is not None:
        overrides["out_dir"] = str(args.out)
    if overrides:
        cfg = cfg.with_overrides(**overrides)
    report = run_experiment(cfg, write=True, keep_records=True)
    if cfg.scenario == "bianchi-validate":
        print(bianchi.format_table(report.summary["bianchi"]))
    else:
        s = report.summary
        print(f"{report.run_id}: {cfg.n_windows} windows, {len(report.rounds)} rounds, "
              f"mean delay {s['mean_delay_us'] / 1e3:.3f} ms, throughput {s['mean_throughput_mbps']:.2f} Mbps "
              f"({report.wall_time_s:.1f} s)")
    for path in (report.metrics_path, report.rounds_path):
        if path is not None:
            print(f"wrote {path}")
    return 0


def cmd_validate(args):
    if args.n < 1:
        raise ConfigError("--n", "must be at least 1")
    rows = bianchi.run_bianchi_validation(args.n, args.cw, args.time, args.seed)
    print(bianchi.format_table(rows))
    return 0


def cmd_summarize(args):
    rows = []
    for path in args.inputs:
        rows.extend(read_metrics_csv(path))
    if not rows:
        raise ValueError("no metric rows in the given files")
    summary, table = emit_summary(rows, args.warmup, args.base)
    print(table)
    if args.out is not None:
        write_summary_json(summary, args.out)
        print(f"wrote {args.out}")
    return 0


COMMANDS = {"run": cmd_run, "validate-bianchi": cmd_validate, "summarize": cmd_summarize}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except PartialOutputError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return 3
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
