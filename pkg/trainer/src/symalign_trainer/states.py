"""Sampled-state files: loading, token encoding, augmentation, fold balancing.

The input is the aligner's newline-delimited JSON state format:
``{"perf_pitches": [int], "score_sets": [[int]], "center": int,
"target_slot": int}`` with pitches as piano key indices 1..88. Encoding lays
each state on the fixed 26-token grid the value network expects: 8 performance
slots (newest against the delimiter), a delimiter, 16 score slots with the
window center on the middle slot, and an end token.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

PITCH_MIN = 1
PITCH_MAX = 88
PERF_SLOTS = 8
SCORE_SLOTS = 16
CENTER_SLOT = 7
MAX_SET = 7
SEQ_LEN = PERF_SLOTS + 1 + SCORE_SLOTS + 1
DELIM_SLOT = PERF_SLOTS
SCORE_SLOT0 = PERF_SLOTS + 1
END_SLOT = SEQ_LEN - 1

NO_PITCH = PITCH_MAX
DELIM_TOKEN = PITCH_MAX + 1
END_TOKEN = PITCH_MAX + 2
VOCAB_SIZE = PITCH_MAX + 3


class StateFileError(ValueError):
    pass


@dataclass(frozen=True)
class StateRecord:
    perf_pitches: tuple[int, ...]
    score_sets: tuple[tuple[int, ...], ...]  # ascending pitches per onset
    center: int
    target_slot: int


def load_states(path) -> list[StateRecord]:
    records: list[StateRecord] = []
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"line {lineno}"
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise StateFileError(f"{where}: invalid JSON ({exc})") from exc
            try:
                perf = tuple(int(p) for p in doc["perf_pitches"])
                sets = tuple(tuple(sorted(int(p) for p in s)) for s in doc["score_sets"])
                center = int(doc["center"])
                target = int(doc["target_slot"])
            except (KeyError, TypeError, ValueError) as exc:
                raise StateFileError(f"{where}: malformed record ({exc})") from exc
            if not 1 <= len(perf) <= PERF_SLOTS:
                raise StateFileError(f"{where}: perf_pitches length {len(perf)}")
            if not 1 <= len(sets) <= SCORE_SLOTS:
                raise StateFileError(f"{where}: score_sets length {len(sets)}")
            for p in perf + tuple(p for s in sets for p in s):
                if not PITCH_MIN <= p <= PITCH_MAX:
                    raise StateFileError(f"{where}: pitch {p} outside 1..88")
            if not 0 <= center < len(sets) or center > CENTER_SLOT:
                raise StateFileError(f"{where}: center {center} invalid")
            if len(sets) - center > SCORE_SLOTS - CENTER_SLOT:
                raise StateFileError(f"{where}: window overruns future slots")
            slot_lo = CENTER_SLOT - center
            slot_hi = slot_lo + len(sets) - 1
            if not slot_lo <= target <= slot_hi:
                raise StateFileError(f"{where}: target_slot {target} is padding")
            records.append(StateRecord(perf, sets, center, target))
    return records


def feasible_shift(record: StateRecord, shift: int) -> int:
    """Clamp a pitch shift so every pitch stays on the keyboard."""
    pitches = list(record.perf_pitches) + [p for s in record.score_sets for p in s]
    return min(max(shift, PITCH_MIN - min(pitches)), PITCH_MAX - max(pitches))


def encode_batch(records, shifts=None) -> dict[str, np.ndarray]:
    """Token arrays for a batch of states.

    Returns perf_tokens (B,8), score_tokens (B,16,7) with member mask
    score_members (B,16,7), the sequence mask (B,26), per-slot labels (B,16),
    and slot_valid (B,16). Fully padded score slots carry a single no_pitch
    member so they embed exactly like the aligner does.
    """
    batch = len(records)
    perf_tokens = np.full((batch, PERF_SLOTS), NO_PITCH, dtype=np.int64)
    score_tokens = np.full((batch, SCORE_SLOTS, MAX_SET), NO_PITCH, dtype=np.int64)
    score_members = np.zeros((batch, SCORE_SLOTS, MAX_SET), dtype=np.float32)
    mask = np.zeros((batch, SEQ_LEN), dtype=bool)
    labels = np.zeros((batch, SCORE_SLOTS), dtype=np.int64)
    slot_valid = np.zeros((batch, SCORE_SLOTS), dtype=bool)

    for b, record in enumerate(records):
        shift = 0 if shifts is None else feasible_shift(record, int(shifts[b]))
        w = len(record.perf_pitches)
        for idx, pitch in enumerate(record.perf_pitches):
            slot = PERF_SLOTS - w + idx
            perf_tokens[b, slot] = pitch + shift - PITCH_MIN
            mask[b, slot] = True
        mask[b, DELIM_SLOT] = True
        mask[b, END_SLOT] = True
        for k, pitch_set in enumerate(record.score_sets):
            slot = CENTER_SLOT - record.center + k
            members = pitch_set[:MAX_SET]  # ascending input: keeps the lowest
            for j, pitch in enumerate(members):
                score_tokens[b, slot, j] = pitch + shift - PITCH_MIN
                score_members[b, slot, j] = 1.0
            mask[b, SCORE_SLOT0 + slot] = True
            slot_valid[b, slot] = True
        # padding score slots embed as a lone no_pitch token
        for slot in range(SCORE_SLOTS):
            if not slot_valid[b, slot]:
                score_members[b, slot, 0] = 1.0
        labels[b, record.target_slot] = 1

    return {
        "perf_tokens": perf_tokens,
        "score_tokens": score_tokens,
        "score_members": score_members,
        "mask": mask,
        "labels": labels,
        "slot_valid": slot_valid,
    }


def balance_folds(pieces: list[tuple[str, int]], folds: int) -> list[list[str]]:
    """Greedy piece-wise split keeping summed onset counts roughly even."""
    if len(pieces) < folds:
        raise ValueError(f"need at least {folds} pieces, got {len(pieces)}")
    assignment: list[list[str]] = [[] for _ in range(folds)]
    weights = [0] * folds
    for name, count in sorted(pieces, key=lambda item: (-item[1], item[0])):
        lightest = min(range(folds), key=lambda f: (weights[f], f))
        assignment[lightest].append(name)
        weights[lightest] += count
    return assignment
