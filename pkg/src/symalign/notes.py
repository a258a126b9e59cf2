"""Data model for scores, performances, and note alignments, plus JSON interchange.

Pitches are represented as piano key indices 1..88 (MIDI pitch minus 20) in
memory; all JSON files carry MIDI pitch numbers (21..108) and the loaders and
savers convert at the boundary.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

PITCH_MIN = 1
PITCH_MAX = 88
MIDI_PITCH_OFFSET = 20  # piano key index = MIDI pitch - 20


class SchemaError(ValueError):
    """An input file violates its documented schema."""


def pitch_from_midi(midi_pitch: int) -> int:
    """Convert a MIDI pitch (21..108) to a piano key index (1..88)."""
    pitch = midi_pitch - MIDI_PITCH_OFFSET
    if not PITCH_MIN <= pitch <= PITCH_MAX:
        raise ValueError(f"MIDI pitch {midi_pitch} outside piano range 21..108")
    return pitch


def midi_from_pitch(pitch: int) -> int:
    """Convert a piano key index (1..88) back to a MIDI pitch."""
    check_pitch(pitch)
    return pitch + MIDI_PITCH_OFFSET


def check_pitch(pitch: int) -> int:
    if not isinstance(pitch, int) or isinstance(pitch, bool):
        raise TypeError(f"pitch must be an int, got {type(pitch).__name__}")
    if not PITCH_MIN <= pitch <= PITCH_MAX:
        raise ValueError(f"pitch {pitch} outside 1..88")
    return pitch


@dataclass(frozen=True)
class PerfNote:
    """One performed note. Velocity is carried through but never used for matching."""

    id: str
    pitch: int
    onset_sec: float
    velocity: int = 64

    def __post_init__(self):
        check_pitch(self.pitch)
        if self.onset_sec < 0:
            raise ValueError(f"note {self.id!r}: onset_sec must be >= 0")
        if not 1 <= self.velocity <= 127:
            raise ValueError(f"note {self.id!r}: velocity {self.velocity} outside 1..127")


@dataclass(frozen=True)
class Performance:
    """Performed notes ordered by onset time, ties broken by pitch, then id."""

    notes: tuple[PerfNote, ...]

    def __init__(self, notes: Iterable[PerfNote]):
        ordered = tuple(sorted(notes, key=lambda n: (n.onset_sec, n.pitch, n.id)))
        ids = [n.id for n in ordered]
        if len(set(ids)) != len(ids):
            dup = next(i for i in ids if ids.count(i) > 1)
            raise ValueError(f"duplicate performance note id {dup!r}")
        object.__setattr__(self, "notes", ordered)

    def __len__(self) -> int:
        return len(self.notes)

    def pitch_sequence(self) -> list[int]:
        return [n.pitch for n in self.notes]


@dataclass(frozen=True)
class ScoreOnset:
    """All notated pitches sharing one score time.

    ``note_ids`` maps each pitch in ``pitch_set`` to the score-note ids written
    at this onset; a pitch written by two voices keeps both ids.
    """

    beat: float
    pitch_set: frozenset[int]
    note_ids: Mapping[int, tuple[str, ...]]

    def __post_init__(self):
        if not self.pitch_set:
            raise ValueError(f"onset at beat {self.beat}: empty pitch set")
        for p in self.pitch_set:
            check_pitch(p)
        if set(self.note_ids) - set(self.pitch_set):
            raise ValueError(f"onset at beat {self.beat}: note_ids key outside pitch_set")


@dataclass(frozen=True)
class Score:
    """Score onsets with strictly increasing beat times."""

    onsets: tuple[ScoreOnset, ...]

    def __init__(self, onsets: Iterable[ScoreOnset]):
        onsets = tuple(onsets)
        for a, b in zip(onsets, onsets[1:]):
            if not b.beat > a.beat:
                raise ValueError(f"onset beats must strictly increase ({a.beat} -> {b.beat})")
        seen: set[str] = set()
        for onset in onsets:
            for ids in onset.note_ids.values():
                for nid in ids:
                    if nid in seen:
                        raise ValueError(f"duplicate score note id {nid!r}")
                    seen.add(nid)
        object.__setattr__(self, "onsets", onsets)

    def __len__(self) -> int:
        return len(self.onsets)

    def pitch_set_sequence(self) -> list[frozenset[int]]:
        return [o.pitch_set for o in self.onsets]

    def note_id_to_onset(self) -> dict[str, int]:
        """Map every score-note id to the index of its onset."""
        out: dict[str, int] = {}
        for j, onset in enumerate(self.onsets):
            for ids in onset.note_ids.values():
                for nid in ids:
                    out[nid] = j
        return out


@dataclass(frozen=True)
class AlignmentRecord:
    kind: str  # "match" | "insertion" | "deletion"
    perf_id: str | None = None
    score_id: str | None = None

    @classmethod
    def match(cls, perf_id: str, score_id: str) -> "AlignmentRecord":
        return cls("match", perf_id, score_id)

    @classmethod
    def insertion(cls, perf_id: str) -> "AlignmentRecord":
        return cls("insertion", perf_id, None)

    @classmethod
    def deletion(cls, score_id: str) -> "AlignmentRecord":
        return cls("deletion", None, score_id)

    def __post_init__(self):
        if self.kind == "match":
            ok = self.perf_id is not None and self.score_id is not None
        elif self.kind == "insertion":
            ok = self.perf_id is not None and self.score_id is None
        elif self.kind == "deletion":
            ok = self.perf_id is None and self.score_id is not None
        else:
            raise ValueError(f"unknown record kind {self.kind!r}")
        if not ok:
            raise ValueError(f"record ids inconsistent with kind {self.kind!r}")


@dataclass(frozen=True)
class NoteAlignment:
    """A complete labeling: matches, insertions, and deletions.

    Every performance note id appears in exactly one record, and so does every
    score note id; ``validate`` enforces this and is called by every producer
    in the toolkit.
    """

    records: tuple[AlignmentRecord, ...]

    def __init__(self, records: Iterable[AlignmentRecord]):
        object.__setattr__(self, "records", tuple(records))

    def validate(self) -> "NoteAlignment":
        perf_seen: set[str] = set()
        score_seen: set[str] = set()
        for rec in self.records:
            if rec.perf_id is not None:
                if rec.perf_id in perf_seen:
                    raise ValueError(f"performance id {rec.perf_id!r} in more than one record")
                perf_seen.add(rec.perf_id)
            if rec.score_id is not None:
                if rec.score_id in score_seen:
                    raise ValueError(f"score id {rec.score_id!r} in more than one record")
                score_seen.add(rec.score_id)
        return self

    def match_pairs(self) -> set[tuple[str, str]]:
        return {(r.perf_id, r.score_id) for r in self.records if r.kind == "match"}

    def perf_ids(self) -> set[str]:
        return {r.perf_id for r in self.records if r.perf_id is not None}

    def score_ids(self) -> set[str]:
        return {r.score_id for r in self.records if r.score_id is not None}

    def counts(self) -> dict[str, int]:
        out = {"match": 0, "insertion": 0, "deletion": 0}
        for r in self.records:
            out[r.kind] += 1
        return out


def score_from_notes(notes: Iterable[Mapping]) -> Score:
    """Group a flat note list into a Score.

    Each note is a mapping with ``id``, ``pitch`` (MIDI, 21..108),
    ``onset_beat``, and optionally ``duration_beat`` (accepted, unused).
    Notes sharing an onset beat merge into one pitch set; two notes with the
    same pitch at one beat collapse to a single set member but keep both ids.
    """
    by_beat: dict[float, list[tuple[int, str]]] = {}
    for idx, note in enumerate(notes):
        try:
            beat = float(note["onset_beat"])
            pitch = pitch_from_midi(int(note["pitch"]))
            nid = str(note["id"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"notes[{idx}]: {exc}") from exc
        if not math.isfinite(beat):
            raise ValueError(f"notes[{idx}]: non-finite onset_beat {beat}")
        by_beat.setdefault(beat, []).append((pitch, nid))
    onsets = []
    for beat in sorted(by_beat):
        note_ids: dict[int, list[str]] = {}
        for pitch, nid in by_beat[beat]:
            note_ids.setdefault(pitch, []).append(nid)
        onsets.append(
            ScoreOnset(
                beat=beat,
                pitch_set=frozenset(note_ids),
                note_ids={p: tuple(ids) for p, ids in note_ids.items()},
            )
        )
    return Score(onsets)


# ---------------------------------------------------------------------------
# estimator input validation helpers


def check_score(score, require_nonempty: bool = True) -> Score:
    if not isinstance(score, Score):
        raise TypeError(f"expected a Score, got {type(score).__name__}")
    if require_nonempty and len(score) == 0:
        raise ValueError("score has no onsets")
    return score


def check_performance(perf, require_nonempty: bool = True) -> Performance:
    if not isinstance(perf, Performance):
        raise TypeError(f"expected a Performance, got {type(perf).__name__}")
    if require_nonempty and len(perf) == 0:
        raise ValueError("performance has no notes")
    return perf


# ---------------------------------------------------------------------------
# JSON interchange


def canonical_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_atomic(path, data: str | bytes) -> None:
    """Write via a temp file in the target directory, then rename."""
    path = Path(path)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name + ".")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _field(obj: Mapping, key: str, types, where: str):
    if key not in obj:
        raise SchemaError(f"{where}: missing field {key!r}")
    value = obj[key]
    if not isinstance(value, types) or isinstance(value, bool):
        raise SchemaError(f"{where}.{key}: expected {types}, got {type(value).__name__}")
    return value


def load_score_json(path) -> Score:
    """Load ``{"onsets": [{"beat": f, "notes": [{"id": s, "pitch": midi}]}]}``."""
    with open(path, "r") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise SchemaError("top level: expected an object")
    raw_onsets = _field(doc, "onsets", list, "top level")
    onsets = []
    for j, raw in enumerate(raw_onsets):
        where = f"onsets[{j}]"
        if not isinstance(raw, dict):
            raise SchemaError(f"{where}: expected an object")
        beat = float(_field(raw, "beat", (int, float), where))
        raw_notes = _field(raw, "notes", list, where)
        if not raw_notes:
            raise SchemaError(f"{where}.notes: empty onset")
        note_ids: dict[int, list[str]] = {}
        for k, rn in enumerate(raw_notes):
            nw = f"{where}.notes[{k}]"
            if not isinstance(rn, dict):
                raise SchemaError(f"{nw}: expected an object")
            midi = _field(rn, "pitch", int, nw)
            try:
                pitch = pitch_from_midi(midi)
            except ValueError as exc:
                raise SchemaError(f"{nw}.pitch: {exc}") from exc
            nid = _field(rn, "id", str, nw)
            note_ids.setdefault(pitch, []).append(nid)
        onsets.append(
            ScoreOnset(
                beat=beat,
                pitch_set=frozenset(note_ids),
                note_ids={p: tuple(ids) for p, ids in note_ids.items()},
            )
        )
    try:
        return Score(onsets)
    except ValueError as exc:
        raise SchemaError(f"onsets: {exc}") from exc


def save_score_json(score: Score, path) -> None:
    doc = {
        "onsets": [
            {
                "beat": onset.beat,
                "notes": [
                    {"id": nid, "pitch": midi_from_pitch(pitch)}
                    for pitch in sorted(onset.pitch_set)
                    for nid in onset.note_ids.get(pitch, ())
                ],
            }
            for onset in score.onsets
        ]
    }
    write_atomic(path, canonical_json(doc))


def load_performance_json(path) -> Performance:
    """Load ``{"notes": [{"id": s, "pitch": midi, "onset_sec": f, "velocity": i}]}``."""
    with open(path, "r") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise SchemaError("top level: expected an object")
    raw_notes = _field(doc, "notes", list, "top level")
    notes = []
    for k, rn in enumerate(raw_notes):
        where = f"notes[{k}]"
        if not isinstance(rn, dict):
            raise SchemaError(f"{where}: expected an object")
        midi = _field(rn, "pitch", int, where)
        try:
            pitch = pitch_from_midi(midi)
        except ValueError as exc:
            raise SchemaError(f"{where}.pitch: {exc}") from exc
        onset = float(_field(rn, "onset_sec", (int, float), where))
        velocity = _field(rn, "velocity", int, where) if "velocity" in rn else 64
        nid = _field(rn, "id", str, where)
        try:
            notes.append(PerfNote(id=nid, pitch=pitch, onset_sec=onset, velocity=velocity))
        except ValueError as exc:
            raise SchemaError(f"{where}: {exc}") from exc
    try:
        return Performance(notes)
    except ValueError as exc:
        raise SchemaError(f"notes: {exc}") from exc


def save_performance_json(perf: Performance, path) -> None:
    doc = {
        "notes": [
            {
                "id": n.id,
                "pitch": midi_from_pitch(n.pitch),
                "onset_sec": n.onset_sec,
                "velocity": n.velocity,
            }
            for n in perf.notes
        ]
    }
    write_atomic(path, canonical_json(doc))


_RECORD_KINDS = ("match", "insertion", "deletion")


def load_alignment_json(path) -> NoteAlignment:
    with open(path, "r") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise SchemaError("top level: expected an object")
    raw_records = _field(doc, "records", list, "top level")
    records = []
    for k, rr in enumerate(raw_records):
        where = f"records[{k}]"
        if not isinstance(rr, dict):
            raise SchemaError(f"{where}: expected an object")
        kind = _field(rr, "kind", str, where)
        if kind not in _RECORD_KINDS:
            raise SchemaError(f"{where}.kind: unknown kind {kind!r}")
        try:
            if kind == "match":
                records.append(
                    AlignmentRecord.match(
                        _field(rr, "perf_id", str, where), _field(rr, "score_id", str, where)
                    )
                )
            elif kind == "insertion":
                records.append(AlignmentRecord.insertion(_field(rr, "perf_id", str, where)))
            else:
                records.append(AlignmentRecord.deletion(_field(rr, "score_id", str, where)))
        except ValueError as exc:
            raise SchemaError(f"{where}: {exc}") from exc
    alignment = NoteAlignment(records)
    try:
        return alignment.validate()
    except ValueError as exc:
        raise SchemaError(f"records: {exc}") from exc


def save_alignment_json(alignment: NoteAlignment, path) -> None:
    records = []
    for rec in alignment.records:
        if rec.kind == "match":
            records.append({"kind": "match", "perf_id": rec.perf_id, "score_id": rec.score_id})
        elif rec.kind == "insertion":
            records.append({"kind": "insertion", "perf_id": rec.perf_id})
        else:
            records.append({"kind": "deletion", "score_id": rec.score_id})
    write_atomic(path, canonical_json({"records": records}))
