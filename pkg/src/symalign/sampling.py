"""State sampling for value-function training and evaluation.

From an aligned (performance, score) pair, every matched note spawns up to 16
labeled states: the score window shifts so the note's true onset lands on each
slot from leftmost (current position minus seven) to rightmost (current
position plus eight), with windows clipped at piece boundaries. The export
format is newline-delimited JSON so a trainer can stream it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .model import CENTER_SLOT, PERF_SLOTS, SCORE_SLOTS, AgentState
from .notes import (
    PITCH_MAX,
    PITCH_MIN,
    NoteAlignment,
    Performance,
    Score,
    SchemaError,
    write_atomic,
)


@dataclass(frozen=True)
class LabeledState:
    """A follower state plus the slot of the true next score onset."""

    state: AgentState
    target_slot: int

    def __post_init__(self):
        lo = self.state.slot_of(0)
        hi = self.state.slot_of(len(self.state.score_window) - 1)
        if not lo <= self.target_slot <= hi:
            raise ValueError(f"target slot {self.target_slot} is masked in this state")


def sample_states(score: Score, perf: Performance, truth: NoteAlignment) -> list[LabeledState]:
    """Exhaustively place each matched note's true onset at every feasible slot.

    A placement is feasible when the implied current position (the window
    center) is a real score onset. Interior notes of long pieces yield all 16
    placements; notes near the edges yield fewer, with shortened windows.
    """
    onset_of = score.note_id_to_onset()
    match_of = {r.perf_id: r.score_id for r in truth.records if r.kind == "match"}
    sets = tuple(score.pitch_set_sequence())
    n = len(score)
    out: list[LabeledState] = []
    for t, note in enumerate(perf.notes):
        score_id = match_of.get(note.id)
        if score_id is None:
            continue
        true_onset = onset_of[score_id]
        pitches = tuple(p.pitch for p in perf.notes[max(0, t - PERF_SLOTS + 1) : t + 1])
        for slot in range(SCORE_SLOTS):
            center_onset = true_onset - (slot - CENTER_SLOT)
            if not 0 <= center_onset < n:
                continue
            start = max(0, center_onset - CENTER_SLOT)
            stop = min(n - 1, center_onset + (SCORE_SLOTS - 1 - CENTER_SLOT))
            state = AgentState(
                perf_window=pitches,
                score_window=sets[start : stop + 1],
                center=center_onset - start,
                window_start=start,
            )
            out.append(LabeledState(state, slot))
    return out


def augment_pitch_shift(labeled: LabeledState, shift: int) -> LabeledState:
    """Shift every pitch in both windows by the same amount.

    The shift is clamped so all pitches stay on the keyboard; the target slot
    and window geometry are untouched.
    """
    state = labeled.state
    pitches = list(state.perf_window)
    for pitch_set in state.score_window:
        pitches.extend(pitch_set)
    lo = PITCH_MIN - min(pitches)
    hi = PITCH_MAX - max(pitches)
    shift = min(max(shift, lo), hi)
    return LabeledState(
        AgentState(
            perf_window=tuple(p + shift for p in state.perf_window),
            score_window=tuple(
                frozenset(p + shift for p in s) for s in state.score_window
            ),
            center=state.center,
            window_start=state.window_start,
        ),
        labeled.target_slot,
    )


def export_states(states, path) -> None:
    """Write states as newline-delimited JSON records."""
    lines = []
    for labeled in states:
        state = labeled.state
        lines.append(
            json.dumps(
                {
                    "perf_pitches": list(state.perf_window),
                    "score_sets": [sorted(s) for s in state.score_window],
                    "center": state.center,
                    "target_slot": labeled.target_slot,
                },
                sort_keys=True,
                separators=(",", ":"),
            )
        )
    write_atomic(path, "".join(line + "\n" for line in lines))


def import_states(path) -> list[LabeledState]:
    out: list[LabeledState] = []
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"line {lineno}"
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{where}: invalid JSON ({exc})") from exc
            if not isinstance(doc, dict):
                raise SchemaError(f"{where}: expected an object")
            for key, kind in (
                ("perf_pitches", list),
                ("score_sets", list),
                ("center", int),
                ("target_slot", int),
            ):
                if key not in doc:
                    raise SchemaError(f"{where}: missing field {key!r}")
                if not isinstance(doc[key], kind) or isinstance(doc[key], bool):
                    raise SchemaError(f"{where}.{key}: expected {kind.__name__}")
            for i, p in enumerate(doc["perf_pitches"]):
                if not isinstance(p, int) or not PITCH_MIN <= p <= PITCH_MAX:
                    raise SchemaError(f"{where}.perf_pitches[{i}]: bad pitch {p!r}")
            for i, pitch_set in enumerate(doc["score_sets"]):
                if not isinstance(pitch_set, list) or not pitch_set:
                    raise SchemaError(f"{where}.score_sets[{i}]: expected a non-empty list")
                for k, p in enumerate(pitch_set):
                    if not isinstance(p, int) or not PITCH_MIN <= p <= PITCH_MAX:
                        raise SchemaError(f"{where}.score_sets[{i}][{k}]: bad pitch {p!r}")
            try:
                state = AgentState(
                    perf_window=tuple(doc["perf_pitches"]),
                    score_window=tuple(frozenset(s) for s in doc["score_sets"]),
                    center=doc["center"],
                )
                out.append(LabeledState(state, doc["target_slot"]))
            except ValueError as exc:
                raise SchemaError(f"{where}: {exc}") from exc
    return out
