"""Online score following and note-by-note alignment.

Two policies share one session object. The greedy policy jumps to the
highest-value slot for every incoming note. The tempo-assisted policy takes
the top three value candidates, predicts an expected onset time for each by
extrapolating the local beat period, and matches the candidate closest in
time; notes whose pitch none of the candidates offer become insertions, and
pitches still expected at the current onset are consumed directly without a
value query.

Decisions for note k depend only on notes 1..k and the score; a session never
sees future notes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .model import (
    CENTER_SLOT,
    PERF_SLOTS,
    SCORE_SLOTS,
    AgentState,
    SlotValues,
    best_slot,
    load_weights,
    network_value_fn,
    rank_slots,
    suffix_match_values,
)
from .notes import (
    AlignmentRecord,
    NoteAlignment,
    Performance,
    PerfNote,
    Score,
    check_performance,
    check_score,
)

DEFAULT_BEAT_PERIOD = 0.5  # seconds per beat before any tempo evidence
DEFAULT_TOP_K = 3
BEAT_PERIOD_BOUNDS = (0.05, 5.0)
TEMPO_FIT_POINTS = 5  # distinct-beat matches entering the regression


@dataclass(frozen=True)
class TempoEstimate:
    beat_period: float  # seconds per beat
    anchor: tuple[float, float]  # (beat, sec) the extrapolation starts from

    def predict(self, beat: float) -> float:
        anchor_beat, anchor_sec = self.anchor
        return anchor_sec + self.beat_period * (beat - anchor_beat)


def estimate_tempo(
    matched,
    default: float = DEFAULT_BEAT_PERIOD,
    fallback_anchor: tuple[float, float] | None = None,
) -> TempoEstimate:
    """Local tempo from recent matches.

    With fewer than two distinct-beat matches the default beat period is used
    and the anchor is the last match (or ``fallback_anchor``). Otherwise the
    beat period is the least-squares slope of seconds against beats over the
    last five distinct beats, clamped to a playable range.
    """
    if matched:
        anchor = (matched[-1][2], matched[-1][1])
    else:
        anchor = fallback_anchor if fallback_anchor is not None else (0.0, 0.0)

    points: list[tuple[float, float]] = []
    seen_beats: set[float] = set()
    for onset_idx, sec, beat in reversed(matched):
        if beat in seen_beats:
            continue
        seen_beats.add(beat)
        points.append((beat, sec))
        if len(points) == TEMPO_FIT_POINTS:
            break
    if len(points) < 2:
        return TempoEstimate(default, anchor)

    beats = np.array([b for b, _ in points])
    secs = np.array([s for _, s in points])
    denom = ((beats - beats.mean()) ** 2).sum()
    slope = float(((beats - beats.mean()) * (secs - secs.mean())).sum() / denom)
    lo, hi = BEAT_PERIOD_BOUNDS
    return TempoEstimate(min(max(slope, lo), hi), anchor)


@dataclass(frozen=True)
class StepDecision:
    kind: str  # "match" | "insertion"
    onset_index: int  # score position after the step
    score_id: str | None = None


class FollowerSession:
    """Mutable per-piece state for one follower run (strictly sequential)."""

    def __init__(
        self,
        score: Score,
        value_fn=None,
        top_k: int = DEFAULT_TOP_K,
        default_beat_period: float = DEFAULT_BEAT_PERIOD,
    ):
        check_score(score)
        self.score = score
        self.value_fn = value_fn if value_fn is not None else suffix_match_values
        self.top_k = top_k
        self.default_beat_period = default_beat_period
        self.current_onset = 0
        self.history: list[int] = []
        self.matched: list[tuple[int, float, float]] = []  # (onset idx, sec, beat)
        self.records: list[AlignmentRecord] = []
        self.insertion_count = 0
        self._first_note_sec: float | None = None
        # unconsumed score-note ids per onset, FIFO per pitch
        self._remaining: list[dict[int, list[str]]] = [
            {pitch: list(ids) for pitch, ids in onset.note_ids.items()}
            for onset in score.onsets
        ]
        self._sets = score.pitch_set_sequence()

    def state(self) -> AgentState:
        c = self.current_onset
        n = len(self.score)
        start = max(0, c - CENTER_SLOT)
        stop = min(n - 1, c + (SCORE_SLOTS - 1 - CENTER_SLOT))  # c + 8 future onsets
        return AgentState(
            perf_window=tuple(self.history[-PERF_SLOTS:]),
            score_window=tuple(self._sets[start : stop + 1]),
            center=c - start,
            window_start=start,
        )

    def _onset_of_slot(self, slot: int) -> int:
        return self.current_onset + (slot - CENTER_SLOT)

    def _record_match(self, onset: int, note: PerfNote, score_id: str) -> StepDecision:
        self.records.append(AlignmentRecord.match(note.id, score_id))
        self.matched.append((onset, note.onset_sec, self.score.onsets[onset].beat))
        self.current_onset = onset
        return StepDecision("match", onset, score_id)

    def _in_range(self, onset: int) -> bool:
        return 0 <= onset < len(self.score)

    def greedy_step(self, note: PerfNote) -> int:
        """Jump to the argmax-value slot; ties fall to the slot nearest the
        center, then the earlier slot."""
        self.history.append(note.pitch)
        values = self.value_fn(self.state())
        # a conforming value function masks padded slots; filter regardless
        onset = next(
            o
            for o in (self._onset_of_slot(s) for s in rank_slots(values))
            if self._in_range(o)
        )
        self.current_onset = onset
        self.matched.append((onset, note.onset_sec, self.score.onsets[onset].beat))
        return onset

    def align_step(self, note: PerfNote) -> StepDecision:
        """Match the note or declare it an insertion.

        A pitch still expected at the current onset is consumed there without
        querying the value function. Otherwise the top three value slots are
        candidates; candidates without an unconsumed note of this pitch are
        discarded, and the survivor whose tempo-extrapolated time is closest
        to the note wins (time ties keep the higher-valued candidate). With no
        survivors the note is an insertion and the position stays put.
        """
        if self._first_note_sec is None:
            self._first_note_sec = note.onset_sec
        self.history.append(note.pitch)

        pending = self._remaining[self.current_onset].get(note.pitch)
        if pending:
            return self._record_match(self.current_onset, note, pending.pop(0))

        values = self.value_fn(self.state())
        candidates = []
        for slot in rank_slots(values, self.top_k):
            onset = self._onset_of_slot(slot)
            if self._in_range(onset) and self._remaining[onset].get(note.pitch):
                candidates.append(onset)
        if not candidates:
            self.records.append(AlignmentRecord.insertion(note.id))
            self.insertion_count += 1
            return StepDecision("insertion", self.current_onset, None)

        tempo = estimate_tempo(
            self.matched,
            self.default_beat_period,
            fallback_anchor=(self.score.onsets[0].beat, self._first_note_sec),
        )
        onset = min(
            candidates,
            key=lambda o: abs(note.onset_sec - tempo.predict(self.score.onsets[o].beat)),
        )
        return self._record_match(onset, note, self._remaining[onset][note.pitch].pop(0))

    def follow(self, note: PerfNote, policy: str = "tempo"):
        """One step for score following; returns (onset index, beat, est. sec)."""
        if policy == "greedy":
            onset = self.greedy_step(note)
        elif policy == "tempo":
            onset = self.align_step(note).onset_index
        else:
            raise ValueError(f"unknown policy {policy!r}")
        beat = self.score.onsets[onset].beat
        tempo = estimate_tempo(
            self.matched,
            self.default_beat_period,
            fallback_anchor=(self.score.onsets[0].beat, note.onset_sec),
        )
        return onset, beat, tempo.predict(beat)

    def finalize(self) -> NoteAlignment:
        """Close the session: every unconsumed score note becomes a deletion."""
        records = list(self.records)
        for per_pitch in self._remaining:
            for pitch in sorted(per_pitch):
                records.extend(AlignmentRecord.deletion(nid) for nid in per_pitch[pitch])
        return NoteAlignment(records).validate()


def _resolve_value_fn(value_fn, weights_path):
    if value_fn is not None:
        return value_fn
    if weights_path is not None:
        return network_value_fn(load_weights(weights_path))
    return suffix_match_values


class GreedyFollower(BaseEstimator):
    """Score follower that always takes the argmax-value onset."""

    def __init__(self, value_fn=None, weights_path=None):
        self.value_fn = value_fn
        self.weights_path = weights_path

    def fit(self, score: Score, y=None) -> "GreedyFollower":
        self.score_ = check_score(score)
        self.value_fn_ = _resolve_value_fn(self.value_fn, self.weights_path)
        return self

    def new_session(self) -> FollowerSession:
        if not hasattr(self, "score_"):
            raise RuntimeError("GreedyFollower is not fitted; call fit(score) first")
        return FollowerSession(self.score_, self.value_fn_)

    def predict(self, perf: Performance) -> np.ndarray:
        """Onset index chosen for each performed note, in note order."""
        check_performance(perf)
        session = self.new_session()
        return np.array([session.greedy_step(note) for note in perf.notes], dtype=np.int64)


class OnlineAligner(BaseEstimator):
    """Note-by-note aligner: top-3 value candidates filtered by tempo fit."""

    def __init__(
        self,
        value_fn=None,
        weights_path=None,
        top_k: int = DEFAULT_TOP_K,
        default_beat_period: float = DEFAULT_BEAT_PERIOD,
    ):
        self.value_fn = value_fn
        self.weights_path = weights_path
        self.top_k = top_k
        self.default_beat_period = default_beat_period

    def fit(self, score: Score, y=None) -> "OnlineAligner":
        self.score_ = check_score(score)
        self.value_fn_ = _resolve_value_fn(self.value_fn, self.weights_path)
        return self

    def new_session(self) -> FollowerSession:
        if not hasattr(self, "score_"):
            raise RuntimeError("OnlineAligner is not fitted; call fit(score) first")
        return FollowerSession(
            self.score_,
            self.value_fn_,
            top_k=self.top_k,
            default_beat_period=self.default_beat_period,
        )

    def decide(self, perf: Performance) -> list[StepDecision]:
        """Per-note decisions in note order, without the closing deletions."""
        check_performance(perf)
        session = self.new_session()
        return [session.align_step(note) for note in perf.notes]

    def predict(self, perf: Performance) -> NoteAlignment:
        check_performance(perf)
        session = self.new_session()
        for note in perf.notes:
            session.align_step(note)
        return session.finalize()
