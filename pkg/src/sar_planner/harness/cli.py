"""Command-line entry point: ``train``, ``eval`` and ``selftest``.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from ..approximator import CheckpointError
from ..enums import ConfigError
from .config import DESK_PRESET, build_run_config, read_config_file

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

log = logging.getLogger("sar_planner")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sar-planner", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress every 50 episodes")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def run_flags(p):
        p.add_argument("--scenario", help="E1, E2 or E3")
        p.add_argument("--algo", help="proposed, td3 or ddpg")
        p.add_argument("--episodes", help="training episodes per seed (eval: episodes per seed)")
        p.add_argument("--max-steps", help="episode step limit")
        p.add_argument("--seed", action="append", help="run seed (repeatable)")
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--desk-preset", action="store_true",
                       help="60 m arena, 3 obstacles, [64, 64] hidden layers, 300 episodes, 200 warm-up steps, seeds 0 1 2")

    run_flags(sub.add_parser("train", help="train an agent and write episodes.csv, summary.txt, checkpoints"))
    ev = sub.add_parser("eval", help="evaluate a checkpoint with a frozen policy")
    run_flags(ev)
    ev.add_argument("--checkpoint", required=True, help="checkpoint directory written by train")
    st = sub.add_parser("selftest", help="run the built-in invariant checks")
    st.add_argument("--quick", action="store_true", help="fewer random trials")
    return parser


def resolve(args, command: str):
    raw: dict[str, str] = {}
    if args.desk_preset:
        raw.update(DESK_PRESET)
    if args.config:
        raw.update(read_config_file(args.config))
    flag_keys = {"scenario": "run.scenario", "algo": "run.algo", "max_steps": "run.max_steps", "out": "run.out"}
    for attr, key in flag_keys.items():
        if getattr(args, attr) is not None:
            raw[key] = getattr(args, attr)
    if args.seed:
        raw["run.seeds"] = ",".join(args.seed)
    if args.episodes is not None:
        raw["run.eval_episodes" if command == "eval" else "run.episodes"] = args.episodes
    return build_run_config(raw)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        print(f"sar-planner: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")

    if args.command == "selftest":
        from .selftest import run_selftest

        return EXIT_OK if run_selftest(quick=args.quick) else EXIT_RUNTIME

    try:
        cfg = resolve(args, args.command)
    except ConfigError as exc:
        print(f"sar-planner: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    from .results import format_summary
    from .training import run_eval, run_training

    try:
        if args.command == "train":
            summary = run_training(cfg)
        else:
            summary = run_eval(args.checkpoint, cfg)
    except ConfigError as exc:
        print(f"sar-planner: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CheckpointError, OSError, ArithmeticError, RuntimeError) as exc:
        print(f"sar-planner: {args.command} failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    sys.stdout.write(format_summary(summary, cfg))
    print(f"results written to {cfg.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
