"""Synthetic performance generator with exact ground truth.

Renders a score through a piecewise tempo curve and perturbs it with onset
jitter, chord spread, random extra notes, and random omissions. The returned
alignment records exactly which notes were kept, inserted, or dropped, making
the generator a self-contained oracle for both aligners.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .notes import (
    PITCH_MAX,
    PITCH_MIN,
    AlignmentRecord,
    NoteAlignment,
    Performance,
    PerfNote,
    Score,
)


@dataclass(frozen=True)
class SynthParams:
    """Knobs for one rendering; probabilities are per note."""

    tempo_curve: tuple[tuple[float, float], ...] = ((0.0, 120.0),)  # (beat, bpm)
    jitter_ms: float = 0.0
    p_insert: float = 0.0
    p_delete: float = 0.0
    chord_spread_ms: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.tempo_curve:
            raise ValueError("tempo curve needs at least one control point")
        for beat, bpm in self.tempo_curve:
            if bpm <= 0:
                raise ValueError(f"bpm must be positive, got {bpm} at beat {beat}")
        for name in ("p_insert", "p_delete"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")


def _onset_times(beats, tempo_curve) -> np.ndarray:
    """Integrate the beat period over the curve; time zero sits at beat zero.

    The curve gives (beat, bpm) control points; the beat period (60/bpm) is
    linear between them and flat beyond, so the integral is an exact
    trapezoid sum.
    """
    control = sorted(tempo_curve)
    cb = np.array([b for b, _ in control])
    cp = np.array([60.0 / bpm for _, bpm in control])
    grid = np.unique(np.concatenate([cb, np.asarray(beats, dtype=np.float64), [0.0]]))
    periods = np.interp(grid, cb, cp)
    elapsed = np.concatenate(
        [[0.0], np.cumsum(np.diff(grid) * (periods[1:] + periods[:-1]) / 2.0)]
    )
    origin = elapsed[np.searchsorted(grid, 0.0)]
    time_at = {b: t - origin for b, t in zip(grid, elapsed)}
    return np.array([time_at[b] for b in beats])


def generate_performance(
    score: Score, params: SynthParams = SynthParams()
) -> tuple[Performance, NoteAlignment]:
    """Render the score; returns the performance and its exact alignment."""
    rng = np.random.default_rng(params.seed)
    beats = [onset.beat for onset in score.onsets]
    times = _onset_times(beats, params.tempo_curve) if beats else np.array([])

    records: list[AlignmentRecord] = []
    notes: list[PerfNote] = []
    for j, onset in enumerate(score.onsets):
        kept_here = 0
        for pitch in sorted(onset.pitch_set):
            for score_id in onset.note_ids.get(pitch, ()):
                if params.p_delete > 0 and rng.random() < params.p_delete:
                    records.append(AlignmentRecord.deletion(score_id))
                    continue
                t = float(times[j])
                if kept_here > 0 and params.chord_spread_ms > 0:
                    t += rng.uniform(0.0, params.chord_spread_ms / 1000.0)
                if params.jitter_ms > 0:
                    t += rng.normal(0.0, params.jitter_ms / 1000.0)
                note_id = f"p{len(notes)}"
                notes.append(
                    PerfNote(
                        id=note_id,
                        pitch=pitch,
                        onset_sec=max(t, 0.0),
                        velocity=int(rng.integers(40, 100)),
                    )
                )
                records.append(AlignmentRecord.match(note_id, score_id))
                kept_here += 1

    if params.p_insert > 0 and notes:
        span_lo = min(n.onset_sec for n in notes)
        span_hi = max(n.onset_sec for n in notes)
        pitches = sorted({p for onset in score.onsets for p in onset.pitch_set})
        p_lo = max(PITCH_MIN, pitches[0] - 3)
        p_hi = min(PITCH_MAX, pitches[-1] + 3)
        for _ in range(rng.binomial(len(notes), params.p_insert)):
            note_id = f"p{len(notes)}"
            notes.append(
                PerfNote(
                    id=note_id,
                    pitch=int(rng.integers(p_lo, p_hi + 1)),
                    onset_sec=float(rng.uniform(span_lo, span_hi)),
                    velocity=int(rng.integers(40, 100)),
                )
            )
            records.append(AlignmentRecord.insertion(note_id))

    return Performance(notes), NoteAlignment(records).validate()
