"""Command-line entry point.

Subcommands are thin wrappers over the library: align-offline, align-online,
follow (streaming), evaluate, sample-states, and synth. All outputs are
written atomically; evaluation subcommands offer --json for machine reading.
"""

from __future__ import annotations

import argparse
import json
import queue
import sys
import threading
from pathlib import Path

from . import __version__
from .metrics import fscore
from .midi import MidiParseError, load_performance_midi
from .notes import (
    SchemaError,
    load_alignment_json,
    load_performance_json,
    load_score_json,
    pitch_from_midi,
    save_alignment_json,
    save_performance_json,
    PerfNote,
)
from .offline import OfflineAligner
from .online import FollowerSession, OnlineAligner
from .sampling import augment_pitch_shift, export_states, sample_states
from .synth import SynthParams, generate_performance


def _load_perf(path: str):
    if Path(path).suffix.lower() in (".mid", ".midi"):
        perf, dropped = load_performance_midi(path)
        if dropped:
            print(f"warning: dropped {dropped} note(s) outside the piano range", file=sys.stderr)
        return perf
    return load_performance_json(path)


def _cmd_align_offline(args) -> int:
    score = load_score_json(args.score)
    perf = _load_perf(args.perf)
    alignment = OfflineAligner(cutoff_sec=args.cutoff_sec).fit(score).predict(perf)
    save_alignment_json(alignment, args.out)
    return 0


def _cmd_align_online(args) -> int:
    score = load_score_json(args.score)
    perf = _load_perf(args.perf)
    aligner = OnlineAligner(
        weights_path=None if args.heuristic else args.weights,
        top_k=args.top_k,
        default_beat_period=args.default_beat_period,
    )
    alignment = aligner.fit(score).predict(perf)
    save_alignment_json(alignment, args.out)
    return 0


def _cmd_follow(args) -> int:
    """Read {"pitch": midi, "onset_sec": t} lines on stdin, answer positions.

    One reader thread feeds a bounded queue; the decision loop answers strictly
    in input order.
    """
    score = load_score_json(args.score)
    aligner = OnlineAligner(weights_path=None if args.heuristic else args.weights).fit(score)
    session = FollowerSession(score, aligner.value_fn_)

    events: queue.Queue = queue.Queue(maxsize=64)

    def reader():
        for line in sys.stdin:
            events.put(line)
        events.put(None)

    threading.Thread(target=reader, daemon=True).start()
    count = 0
    while True:
        line = events.get()
        if line is None:
            break
        line = line.strip()
        if not line:
            continue
        doc = json.loads(line)
        note = PerfNote(
            id=f"e{count}",
            pitch=pitch_from_midi(int(doc["pitch"])),
            onset_sec=float(doc["onset_sec"]),
        )
        count += 1
        onset_index, beat, _ = session.follow(note, policy=args.policy)
        print(json.dumps({"onset_index": onset_index, "beat": beat}), flush=True)
    return 0


def _cmd_evaluate(args) -> int:
    pred = load_alignment_json(args.pred)
    truth = load_alignment_json(args.truth)
    score = fscore(pred, truth)
    if args.json:
        print(
            json.dumps(
                {
                    "precision": score.precision,
                    "recall": score.recall,
                    "f": score.f,
                    "tp": score.tp,
                    "fp": score.fp,
                    "fn": score.fn,
                }
            )
        )
    else:
        print(
            f"precision={score.precision:.4f} recall={score.recall:.4f} f={score.f:.4f} "
            f"(tp={score.tp} fp={score.fp} fn={score.fn})"
        )
    return 0


def _cmd_sample_states(args) -> int:
    score = load_score_json(args.score)
    perf = _load_perf(args.perf)
    truth = load_alignment_json(args.truth)
    states = sample_states(score, perf, truth)
    if args.augment:
        import numpy as np

        rng = np.random.default_rng(args.seed)
        extra = []
        for labeled in states:
            for _ in range(args.augment):
                extra.append(augment_pitch_shift(labeled, int(rng.integers(-12, 13))))
        states = states + extra
    export_states(states, args.out)
    print(f"wrote {len(states)} states", file=sys.stderr)
    return 0


def _cmd_synth(args) -> int:
    score = load_score_json(args.score)
    params = SynthParams(
        tempo_curve=((0.0, args.bpm),),
        jitter_ms=args.jitter_ms,
        p_insert=args.p_insert,
        p_delete=args.p_delete,
        chord_spread_ms=args.chord_spread_ms,
        seed=args.seed,
    )
    perf, truth = generate_performance(score, params)
    save_performance_json(perf, args.out_perf)
    save_alignment_json(truth, args.out_truth)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="symalign", description=__doc__)
    parser.add_argument("--version", action="version", version=f"symalign {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("align-offline", help="two-step DTW alignment of a full performance")
    p.add_argument("--score", required=True)
    p.add_argument("--perf", required=True, help="performance JSON or MIDI file")
    p.add_argument("--out", required=True)
    p.add_argument("--cutoff-sec", type=float, default=5.0)
    p.set_defaults(func=_cmd_align_offline)

    p = sub.add_parser("align-online", help="note-by-note alignment with the online model")
    p.add_argument("--score", required=True)
    p.add_argument("--perf", required=True)
    p.add_argument("--out", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--weights", help="SMAW weight file for the value network")
    group.add_argument("--heuristic", action="store_true", help="use the suffix-match values")
    p.add_argument("--top-k", type=int, default=3)
    p.add_argument("--default-beat-period", type=float, default=0.5)
    p.set_defaults(func=_cmd_align_online)

    p = sub.add_parser("follow", help="stream positions for note events on stdin")
    p.add_argument("--score", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--weights")
    group.add_argument("--heuristic", action="store_true")
    p.add_argument("--policy", choices=("tempo", "greedy"), default="tempo")
    p.set_defaults(func=_cmd_follow)

    p = sub.add_parser("evaluate", help="match F-score of a predicted alignment")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("sample-states", help="emit labeled follower states as ndjson")
    p.add_argument("--score", required=True)
    p.add_argument("--perf", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--augment", type=int, default=0, help="pitch-shifted copies per state")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_sample_states)

    p = sub.add_parser("synth", help="render a synthetic performance with ground truth")
    p.add_argument("--score", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bpm", type=float, default=120.0)
    p.add_argument("--jitter-ms", type=float, default=0.0)
    p.add_argument("--p-insert", type=float, default=0.0)
    p.add_argument("--p-delete", type=float, default=0.0)
    p.add_argument("--chord-spread-ms", type=float, default=0.0)
    p.add_argument("--out-perf", required=True)
    p.add_argument("--out-truth", required=True)
    p.set_defaults(func=_cmd_synth)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (OSError, SchemaError, MidiParseError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
