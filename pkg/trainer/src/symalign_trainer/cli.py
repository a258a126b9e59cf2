"""Command line for training and cross-validation."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict

from .states import StateFileError
from .train import TrainConfig, crossval, train


def _config_from_args(args) -> TrainConfig:
    return TrainConfig(
        batch_size=args.batch_size,
        epochs=args.epochs,
        warmup_steps=args.warmup_steps,
        lr_scale=args.lr_scale,
        augment_semitones=args.augment,
        holdout_fraction=args.holdout_fraction,
        seed=args.seed,
    )


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--batch-size", type=int, default=8192)
    parser.add_argument("--epochs", type=int, default=50)
    parser.add_argument("--warmup-steps", type=int, default=4000)
    parser.add_argument("--lr-scale", type=float, default=1.0)
    parser.add_argument("--augment", type=int, default=12, help="pitch-shift range in semitones")
    parser.add_argument("--holdout-fraction", type=float, default=0.1)
    parser.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="symalign-train")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train on a states file and export SMAW weights")
    p.add_argument("--states", required=True)
    p.add_argument("--out", required=True, help="SMAW weight file to write")
    p.add_argument("--report", help="JSON report path (default: stdout)")
    _add_config_flags(p)

    p = sub.add_parser("crossval", help="piece-wise cross-validation over a corpus dir")
    p.add_argument("--corpus", required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--report", help="JSON report path (default: stdout)")
    _add_config_flags(p)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "train":
            report = train(args.states, args.out, _config_from_args(args))
            payload = report.to_json()
        else:
            reports, summary = crossval(args.corpus, args.folds, _config_from_args(args))
            payload = json.dumps(
                {"folds": [asdict(r) for r in reports], "summary": summary}, indent=2
            ) + "\n"
        if args.report:
            with open(args.report, "w") as fh:
                fh.write(payload)
        else:
            sys.stdout.write(payload)
        return 0
    except (OSError, StateFileError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
