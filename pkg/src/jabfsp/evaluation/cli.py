"""Command line entry point: ``jabfsp run|sweep|selftest``."""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .config import RECEIVERS, ConfigError, ExperimentConfig, load_config
from .harness import emit_csv, format_csv, run_sweep


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jabfsp", description="Grant-free NOMA receiver simulator")
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in (("run", "simulate a single configuration"), ("sweep", "simulate the sweep axis of a config")):
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--config", metavar="PATH", help="INI experiment file (defaults built in)")
        sp.add_argument("--out", metavar="PATH", help="CSV output file (stdout if omitted)")
        sp.add_argument("--trials", type=int, metavar="N")
        sp.add_argument("--seed", type=int, metavar="N")
        sp.add_argument("--receiver", metavar="NAME",
                        help=f"comma separated subset of {', '.join(RECEIVERS)}")
        sp.add_argument("--threads", type=int, metavar="N", help="worker processes")
    st = sub.add_parser("selftest", help="run the built-in invariant checks")
    st.add_argument("--seed", type=int, default=0, metavar="N")
    st.add_argument("--trials", type=int, default=20, metavar="N")
    return p


def _resolve(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    over = {}
    if args.trials is not None:
        over["trials"] = args.trials
    if args.seed is not None:
        over["seed"] = args.seed
    if args.threads is not None:
        if args.threads <= 0:
            raise ConfigError("--threads must be positive")
        over["threads"] = args.threads
    if args.receiver:
        over["receivers"] = tuple(x.strip().lower() for x in args.receiver.split(",") if x.strip())
    cfg = replace(cfg, **over)
    if args.command == "run":
        cfg = replace(cfg, sweep_param=None, sweep_values=())
    elif cfg.sweep_param is None:
        raise ConfigError("sweep needs a [sweep] section with param and values")
    return cfg.validate()


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "selftest":
            from .selftest import run_selftest

            return 0 if run_selftest(seed=args.seed, trials=args.trials) else 1
        cfg = _resolve(args)
        rows = run_sweep(cfg, threads=cfg.threads)
        if args.out:
            emit_csv(rows, args.out)
        else:
            sys.stdout.write(format_csv(rows))
    except (ConfigError, OSError, ValueError) as exc:
        print(f"jabfsp: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
