"""Offline note alignment: pitch-sequence warping, ambiguity cleanup, a
score-time-to-performance-time map, then per-pitch onset warping.

The pipeline matches on pitch content first and brings in timing only at the
end, when each pitch channel is aligned on the time axis through the map.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from statistics import median
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .dtw import disagreement_brackets, dtw, dtw_backward
from .notes import (
    AlignmentRecord,
    NoteAlignment,
    Performance,
    Score,
    check_performance,
    check_score,
)

DEFAULT_CUTOFF_SEC = 5.0
DEFAULT_BEAT_PERIOD = 0.5  # seconds per beat assumed when a map has one anchor

Pair = tuple[int, int]  # (performance note index, score onset index)
Bracket = tuple[tuple[int, int], tuple[int, int]]


@dataclass(frozen=True)
class TimeMap:
    """Monotone piecewise-linear map from score beats to performance seconds.

    Anchors are strictly increasing in beat and non-decreasing in seconds;
    evaluation interpolates between them and extrapolates linearly with the
    end-segment slopes beyond them.
    """

    anchors: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.anchors) < 2:
            raise ValueError("a time map needs at least two anchors")
        for (b0, s0), (b1, s1) in zip(self.anchors, self.anchors[1:]):
            if not b1 > b0:
                raise ValueError(f"anchor beats must strictly increase ({b0} -> {b1})")
            if s1 < s0:
                raise ValueError(f"anchor seconds must not decrease ({s0} -> {s1})")
        object.__setattr__(self, "_beats", np.array([b for b, _ in self.anchors]))
        object.__setattr__(self, "_secs", np.array([s for _, s in self.anchors]))

    def __call__(self, beat):
        beats, secs = self._beats, self._secs
        x = np.asarray(beat, dtype=np.float64)
        y = np.interp(x, beats, secs)
        lo_slope = (secs[1] - secs[0]) / (beats[1] - beats[0])
        hi_slope = (secs[-1] - secs[-2]) / (beats[-1] - beats[-2])
        y = np.where(x < beats[0], secs[0] + (x - beats[0]) * lo_slope, y)
        y = np.where(x > beats[-1], secs[-1] + (x - beats[-1]) * hi_slope, y)
        return float(y) if np.isscalar(beat) else y


def pitch_sequence_align(score: Score, perf: Performance):
    """Warp the performance pitch sequence onto the score pitch-set sequence.

    Runs one forward and one backward pass and returns ``(agreed, brackets)``;
    agreed pairs are (performance index, onset index) links both passes share,
    brackets delimit the ambiguous spans where they differ.
    """
    check_score(score)
    check_performance(perf)
    pitches = perf.pitch_sequence()
    sets = score.pitch_set_sequence()
    _, fwd = dtw(pitches, sets, metric="inclusion")
    _, bwd = dtw_backward(pitches, sets, metric="inclusion")
    return disagreement_brackets(fwd, bwd)


def resolve_brackets(
    brackets: Sequence[Bracket], score: Score, perf: Performance
) -> list[Pair]:
    """Recover pairs inside ambiguous spans.

    Within one bracket, notes are grouped per pitch; a pitch whose performance
    and score occurrence counts agree is paired in temporal order. Every
    remaining performance note falls back to linear index interpolation across
    the bracket.
    """
    out: list[Pair] = []
    for (i_lo, i_hi), (j_lo, j_hi) in brackets:
        perf_by_pitch: dict[int, list[int]] = {}
        for i in range(i_lo, i_hi + 1):
            perf_by_pitch.setdefault(perf.notes[i].pitch, []).append(i)
        score_by_pitch: dict[int, list[int]] = {}
        for j in range(j_lo, j_hi + 1):
            for pitch in score.onsets[j].pitch_set:
                score_by_pitch.setdefault(pitch, []).append(j)

        pairs: list[Pair] = []
        matched: set[int] = set()
        for pitch, perf_idx in perf_by_pitch.items():
            score_idx = score_by_pitch.get(pitch, [])
            if len(perf_idx) == len(score_idx):
                pairs.extend(zip(perf_idx, score_idx))
                matched.update(perf_idx)

        span_i = i_hi - i_lo
        span_j = j_hi - j_lo
        for i in range(i_lo, i_hi + 1):
            if i in matched:
                continue
            if span_i == 0:
                j = j_lo + (span_j + 1) // 2
            else:
                j = j_lo + int((i - i_lo) * span_j / span_i + 0.5)
            pairs.append((i, min(max(j, j_lo), j_hi)))
        out.extend(sorted(pairs))
    return out


def build_time_map(
    pairs: Sequence[Pair],
    score: Score,
    perf: Performance,
    default_beat_period: float = DEFAULT_BEAT_PERIOD,
) -> TimeMap:
    """Turn alignment pairs into a time map.

    Each score onset present in the pairs becomes an anchor at the median of
    its paired performance times. Anchors that would make the map decrease in
    time are dropped greedily, keeping the earlier anchor. A single surviving
    anchor is extended with the default beat period.
    """
    if not pairs:
        raise ValueError("cannot build a time map from zero pairs")
    secs_by_onset: dict[int, list[float]] = {}
    for i, j in pairs:
        secs_by_onset.setdefault(j, []).append(perf.notes[i].onset_sec)
    anchors = [
        (score.onsets[j].beat, median(secs_by_onset[j])) for j in sorted(secs_by_onset)
    ]
    kept = [anchors[0]]
    for beat, sec in anchors[1:]:
        if sec >= kept[-1][1]:
            kept.append((beat, sec))
    if len(kept) == 1:
        beat, sec = kept[0]
        kept.append((beat + 1.0, sec + default_beat_period))
    return TimeMap(tuple(kept))


def _collapse_links(path_pairs, dist):
    """Keep one link per note: a link survives iff it is the lowest-distance
    choice for both of its endpoints (ties to the earlier index)."""
    best_for_i: dict[int, tuple[float, int]] = {}
    best_for_j: dict[int, tuple[float, int]] = {}
    for i, j in path_pairs:
        d = dist(i, j)
        if i not in best_for_i or (d, j) < best_for_i[i]:
            best_for_i[i] = (d, j)
        if j not in best_for_j or (d, i) < best_for_j[j]:
            best_for_j[j] = (d, i)
    return [
        (i, j)
        for i, j in path_pairs
        if best_for_i[i][1] == j and best_for_j[j][1] == i
    ]


def onset_align(
    score: Score,
    perf: Performance,
    time_map: TimeMap,
    cutoff_sec: float = DEFAULT_CUTOFF_SEC,
    threads: int | None = None,
) -> NoteAlignment:
    """Produce note-level records by warping each pitch channel on the time axis.

    Score onsets are projected to seconds through ``time_map``; per pitch, the
    performed onset sequence is warped onto the projected one with an L1
    metric, many-to-one links collapse to their lowest-distance tuple, and any
    link farther than ``cutoff_sec`` breaks into an insertion plus a deletion.
    """
    perf_by_pitch: dict[int, list[tuple[float, str]]] = {}
    for note in perf.notes:
        perf_by_pitch.setdefault(note.pitch, []).append((note.onset_sec, note.id))
    score_by_pitch: dict[int, list[tuple[float, str]]] = {}
    for onset in score.onsets:
        for pitch in sorted(onset.pitch_set):
            for nid in onset.note_ids.get(pitch, ()):
                score_by_pitch.setdefault(pitch, []).append((onset.beat, nid))

    def channel(pitch: int) -> list[AlignmentRecord]:
        perf_seq = perf_by_pitch.get(pitch, [])
        score_seq = score_by_pitch.get(pitch, [])
        if not perf_seq:
            return [AlignmentRecord.deletion(nid) for _, nid in score_seq]
        if not score_seq:
            return [AlignmentRecord.insertion(nid) for _, nid in perf_seq]
        perf_secs = [t for t, _ in perf_seq]
        proj = time_map(np.array([beat for beat, _ in score_seq])).tolist()
        _, path = dtw(perf_secs, proj, metric="l1")
        links = _collapse_links(
            path.pairs, lambda i, j: abs(perf_secs[i] - proj[j])
        )
        links = [(i, j) for i, j in links if abs(perf_secs[i] - proj[j]) <= cutoff_sec]
        matched_i = {i for i, _ in links}
        matched_j = {j for _, j in links}
        records = [
            AlignmentRecord.match(perf_seq[i][1], score_seq[j][1]) for i, j in links
        ]
        records += [
            AlignmentRecord.insertion(nid)
            for i, (_, nid) in enumerate(perf_seq)
            if i not in matched_i
        ]
        records += [
            AlignmentRecord.deletion(nid)
            for j, (_, nid) in enumerate(score_seq)
            if j not in matched_j
        ]
        return records

    pitches = sorted(set(perf_by_pitch) | set(score_by_pitch))
    n_threads = threads if threads is not None else _env_threads()
    if n_threads > 1 and len(pitches) > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            per_channel = list(pool.map(channel, pitches))
    else:
        per_channel = [channel(p) for p in pitches]

    records: list[AlignmentRecord] = []
    for recs in per_channel:
        records.extend(recs)
    return NoteAlignment(records).validate()


def _env_threads() -> int:
    try:
        return max(1, int(os.environ.get("SYMALIGN_THREADS", "1")))
    except ValueError:
        return 1


def align_offline(
    score: Score, perf: Performance, cutoff_sec: float = DEFAULT_CUTOFF_SEC
) -> NoteAlignment:
    """Full offline pipeline: pitch warp, bracket cleanup, time map, onset warp."""
    agreed, brackets = pitch_sequence_align(score, perf)
    pairs = list(agreed) + resolve_brackets(brackets, score, perf)
    time_map = build_time_map(pairs, score, perf)
    return onset_align(score, perf, time_map, cutoff_sec=cutoff_sec)


class OfflineAligner(BaseEstimator):
    """Estimator wrapper around the offline pipeline.

    Fit binds the score; predict aligns a performance against it.

    >>> aligner = OfflineAligner().fit(score)
    >>> alignment = aligner.predict(performance)
    """

    def __init__(self, cutoff_sec: float = DEFAULT_CUTOFF_SEC):
        self.cutoff_sec = cutoff_sec

    def fit(self, score: Score, y=None) -> "OfflineAligner":
        self.score_ = check_score(score)
        return self

    def predict(self, perf: Performance) -> NoteAlignment:
        if not hasattr(self, "score_"):
            raise RuntimeError("OfflineAligner is not fitted; call fit(score) first")
        check_performance(perf)
        return align_offline(self.score_, perf, cutoff_sec=self.cutoff_sec)

    def fit_predict(self, score: Score, perf: Performance) -> NoteAlignment:
        return self.fit(score).predict(perf)
