import numpy as np
import pytest

from symalign import (
    NoteAlignment,
    Performance,
    PerfNote,
    SchemaError,
    SynthParams,
    augment_pitch_shift,
    export_states,
    generate_performance,
    import_states,
    sample_states,
    suffix_match_values,
)
from symalign.model import CENTER_SLOT, SCORE_SLOTS, best_slot
from conftest import make_random_score


def corpus(seed=0, n_onsets=60):
    score = make_random_score(seed=seed, n_onsets=n_onsets)
    perf, truth = generate_performance(score, SynthParams(seed=seed))
    return score, perf, truth


def test_interior_note_emits_all_16(small_score):
    score, perf, truth = corpus(seed=50, n_onsets=60)
    states = sample_states(score, perf, truth)
    onset_of = score.note_id_to_onset()
    match_of = {r.perf_id: r.score_id for r in truth.records if r.kind == "match"}
    per_note = {}
    for labeled in states:
        per_note.setdefault(tuple(labeled.state.perf_window), 0)
    # count states per matched note by walking the same emission order
    counts = []
    idx = 0
    for t, note in enumerate(perf.notes):
        if note.id not in match_of:
            continue
        o = onset_of[match_of[note.id]]
        feasible = sum(
            1 for s in range(SCORE_SLOTS) if 0 <= o - (s - CENTER_SLOT) < len(score)
        )
        counts.append(feasible)
        for k in range(feasible):
            assert 0 <= states[idx].target_slot < SCORE_SLOTS
        idx += feasible
    assert idx == len(states)
    interior = [c for t, c in enumerate(counts) if c == 16]
    assert interior  # long piece has fully feasible notes


def test_first_note_has_fewer_states_with_short_windows():
    score, perf, truth = corpus(seed=51)
    states = sample_states(score, perf, truth)
    first = [s for s in states if s.state.perf_window == (perf.notes[0].pitch,)]
    # onset 0 only reaches slots 0..7 (centers at onsets 7 down to 0)
    assert 0 < len(first) <= 8
    assert all(len(s.state.perf_window) == 1 for s in first)
    assert all(s.target_slot <= 7 for s in first)
    # the placement centered on onset 0 has no past context at all
    centered = next(s for s in first if s.target_slot == 7)
    assert centered.state.center == 0
    assert len(centered.state.score_window) == 9


def test_every_slot_occurs_on_long_pieces():
    score, perf, truth = corpus(seed=52, n_onsets=30)
    states = sample_states(score, perf, truth)
    assert {s.target_slot for s in states} == set(range(SCORE_SLOTS))


def test_target_slot_points_at_true_onset():
    score, perf, truth = corpus(seed=53, n_onsets=40)
    onset_of = score.note_id_to_onset()
    match_of = {r.perf_id: r.score_id for r in truth.records if r.kind == "match"}
    states = sample_states(score, perf, truth)
    note_iter = iter(
        onset_of[match_of[n.id]] for n in perf.notes if n.id in match_of
    )
    current_truth = next(note_iter)
    seen_slots: set[int] = set()
    for labeled in states:
        if labeled.target_slot in seen_slots:  # next note's block begins
            current_truth = next(note_iter)
            seen_slots = set()
        seen_slots.add(labeled.target_slot)
        window_index = labeled.target_slot - labeled.state.slot_of(0)
        onset_idx = labeled.state.window_start + window_index
        assert onset_idx == current_truth


def test_augment_identity_and_shift():
    score, perf, truth = corpus(seed=54)
    labeled = sample_states(score, perf, truth)[10]
    assert augment_pitch_shift(labeled, 0) == labeled
    up = augment_pitch_shift(labeled, 12)
    assert up.target_slot == labeled.target_slot
    assert up.state.perf_window == tuple(p + 12 for p in labeled.state.perf_window)
    assert all(
        shifted == frozenset(p + 12 for p in original)
        for shifted, original in zip(up.state.score_window, labeled.state.score_window)
    )


def test_augment_clamps_to_keyboard():
    score, perf, truth = corpus(seed=55)
    labeled = sample_states(score, perf, truth)[0]
    top = max(max(s) for s in labeled.state.score_window)
    top = max(top, max(labeled.state.perf_window))
    shifted = augment_pitch_shift(labeled, 88)
    new_top = max(
        max(max(s) for s in shifted.state.score_window),
        max(shifted.state.perf_window),
    )
    assert new_top == 88
    assert shifted.state.perf_window[0] - labeled.state.perf_window[0] == 88 - top


def test_augment_preserves_suffix_argmax():
    score, perf, truth = corpus(seed=56, n_onsets=50)
    states = sample_states(score, perf, truth)
    rng = np.random.default_rng(1)
    for labeled in states[:200]:
        shift = int(rng.integers(-12, 13))
        shifted = augment_pitch_shift(labeled, shift)
        assert best_slot(suffix_match_values(shifted.state)) == best_slot(
            suffix_match_values(labeled.state)
        )


def test_export_import_round_trip(tmp_path):
    score, perf, truth = corpus(seed=57)
    states = sample_states(score, perf, truth)[:25]
    path = tmp_path / "states.ndjson"
    export_states(states, path)
    assert import_states(path) == states


def test_export_empty_is_valid(tmp_path):
    path = tmp_path / "empty.ndjson"
    export_states([], path)
    assert import_states(path) == []


def test_import_schema_errors_name_line_and_field(tmp_path):
    path = tmp_path / "bad.ndjson"
    path.write_text('{"perf_pitches": [40], "score_sets": [[40]], "center": 0}\n')
    with pytest.raises(SchemaError, match="line 1: missing field 'target_slot'"):
        import_states(path)
    path.write_text(
        '{"perf_pitches": [40], "score_sets": [[40]], "center": 0, "target_slot": 7}\n'
        '{"perf_pitches": [40], "score_sets": [[99]], "center": 0, "target_slot": 7}\n'
    )
    with pytest.raises(SchemaError, match=r"line 2.score_sets\[0\]\[0\]"):
        import_states(path)


def test_import_rejects_masked_target(tmp_path):
    path = tmp_path / "bad.ndjson"
    path.write_text('{"perf_pitches": [40], "score_sets": [[40]], "center": 0, "target_slot": 3}\n')
    with pytest.raises(SchemaError, match="masked"):
        import_states(path)
