"""Evaluation metrics: match F-score, top-k hit rates, and asynchrony."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .model import best_slot
from .notes import NoteAlignment, Performance, Score
from .offline import TimeMap


@dataclass(frozen=True)
class MatchScore:
    precision: float
    recall: float
    f: float
    tp: int
    fp: int
    fn: int


def fscore(pred: NoteAlignment, truth: NoteAlignment) -> MatchScore:
    """F-score over match records.

    A predicted match is a true positive only when the ground truth matches
    the same pair of notes; insertions and deletions are not scored. Both
    alignments must label the same note-id universes.
    """
    if pred.perf_ids() != truth.perf_ids() or pred.score_ids() != truth.score_ids():
        raise ValueError("alignments cover different note-id universes")
    pred_pairs = pred.match_pairs()
    truth_pairs = truth.match_pairs()
    tp = len(pred_pairs & truth_pairs)
    fp = len(pred_pairs - truth_pairs)
    fn = len(truth_pairs - pred_pairs)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return MatchScore(precision, recall, f, tp, fp, fn)


def topk_hits(states: Sequence, value_fn: Callable) -> tuple[float, float, float]:
    """Greedy hit rates: exactly on target, within one slot, within two."""
    if not states:
        raise ValueError("no states to evaluate")
    hits = [0, 0, 0]
    for labeled in states:
        slot = best_slot(value_fn(labeled.state))
        distance = abs(slot - labeled.target_slot)
        for k in range(3):
            if distance <= k:
                hits[k] += 1
    n = len(states)
    return hits[0] / n, hits[1] / n, hits[2] / n


@dataclass(frozen=True)
class AsynchronyReport:
    median_ms: float
    pct_le_25: float
    pct_le_50: float
    pct_le_100: float


def asynchrony(
    est_positions: Sequence[tuple[int, int]],
    perf: Performance,
    truth: NoteAlignment,
    score: Score,
) -> AsynchronyReport:
    """Timing error of estimated score positions.

    For each ``(note index, estimated onset index)`` pair the error is the
    absolute time between the performed note and the performance time that the
    ground truth assigns to the estimated onset (first matched note there;
    onsets nobody played fall back to interpolation between truth anchors).
    Notes the caller decided were insertions should be excluded upstream.
    """
    if not est_positions:
        raise ValueError("no position estimates")
    onset_of = score.note_id_to_onset()
    note_by_id = {n.id: n for n in perf.notes}
    truth_time: dict[int, float] = {}
    for rec in truth.records:
        if rec.kind != "match":
            continue
        j = onset_of[rec.score_id]
        t = note_by_id[rec.perf_id].onset_sec
        if j not in truth_time or t < truth_time[j]:
            truth_time[j] = t

    if not truth_time:
        raise ValueError("ground truth contains no matches")
    anchors = [(score.onsets[j].beat, truth_time[j]) for j in sorted(truth_time)]
    kept = [anchors[0]]
    for beat, sec in anchors[1:]:
        if sec >= kept[-1][1]:
            kept.append((beat, sec))
    if len(kept) == 1:
        kept.append((kept[0][0] + 1.0, kept[0][1] + 0.5))
    fallback = TimeMap(tuple(kept))

    errors_ms = []
    for note_idx, onset_idx in est_positions:
        t_note = perf.notes[note_idx].onset_sec
        t_onset = truth_time.get(onset_idx)
        if t_onset is None:
            t_onset = float(fallback(score.onsets[onset_idx].beat))
        errors_ms.append(abs(t_note - t_onset) * 1000.0)

    arr = np.array(errors_ms)
    return AsynchronyReport(
        median_ms=float(np.median(arr)),
        pct_le_25=float((arr <= 25.0).mean() * 100.0),
        pct_le_50=float((arr <= 50.0).mean() * 100.0),
        pct_le_100=float((arr <= 100.0).mean() * 100.0),
    )
