import numpy as np
import pytest

from symalign_trainer import StateFileError, StateRecord, balance_folds, encode_batch, feasible_shift, load_states
from symalign_trainer.states import CENTER_SLOT, NO_PITCH, SCORE_SLOT0

from conftest import write_piece


def test_cross_boundary_decode_matches_source(tmp_path):
    """A file written by the aligner decodes into exactly the tensors its own
    tokenizer implies."""
    from symalign import tokenize

    labeled = write_piece(tmp_path, "p", seed=123)
    records = load_states(tmp_path / "p.states.ndjson")
    assert len(records) == len(labeled)
    batch = encode_batch(records)
    for i, source in enumerate(labeled):
        seq = tokenize(source.state)
        assert tuple(batch["perf_tokens"][i]) == seq.perf_tokens
        assert tuple(batch["mask"][i]) == seq.mask
        for slot in range(16):
            members = batch["score_members"][i, slot].astype(bool)
            tokens = tuple(sorted(batch["score_tokens"][i, slot][members]))
            if seq.score_sets[slot]:
                assert tokens == seq.score_sets[slot]
            else:
                assert tokens == (NO_PITCH,)
        assert batch["labels"][i].argmax() == source.target_slot
        assert batch["labels"][i].sum() == 1


def test_load_rejects_bad_lines(tmp_path):
    path = tmp_path / "bad.ndjson"
    path.write_text('{"perf_pitches": [200], "score_sets": [[40]], "center": 0, "target_slot": 7}\n')
    with pytest.raises(StateFileError, match="line 1"):
        load_states(path)
    path.write_text('{"perf_pitches": [40], "score_sets": [[40]], "center": 0, "target_slot": 2}\n')
    with pytest.raises(StateFileError, match="padding"):
        load_states(path)


def test_feasible_shift_clamps():
    rec = StateRecord((80,), ((85, 88),), center=0, target_slot=7)
    assert feasible_shift(rec, 12) == 0
    assert feasible_shift(rec, -100) == -79
    rec = StateRecord((40,), ((40,),), center=0, target_slot=7)
    assert feasible_shift(rec, 5) == 5


def test_encode_respects_shift():
    rec = StateRecord((40, 42), ((40,), (42, 44)), center=0, target_slot=7)
    plain = encode_batch([rec])
    up = encode_batch([rec], shifts=[3])
    assert (up["perf_tokens"][0, -2:] - plain["perf_tokens"][0, -2:]).tolist() == [3, 3]
    members = plain["score_members"][0, CENTER_SLOT].astype(bool)
    assert (
        up["score_tokens"][0, CENTER_SLOT][members]
        - plain["score_tokens"][0, CENTER_SLOT][members]
    ).tolist() == [3]


def test_balance_folds_five_identical_pieces():
    pieces = [(f"p{i}", 100) for i in range(5)]
    folds = balance_folds(pieces, 5)
    assert sorted(len(f) for f in folds) == [1, 1, 1, 1, 1]


def test_balance_folds_imbalance_below_20pct():
    rng = np.random.default_rng(0)
    pieces = [(f"p{i}", int(rng.integers(60, 140))) for i in range(20)]
    folds = balance_folds(pieces, 5)
    sizes = [sum(c for n, c in pieces if n in fold) for fold in folds]
    assert (max(sizes) - min(sizes)) / max(sizes) < 0.20


def test_balance_folds_needs_enough_pieces():
    with pytest.raises(ValueError):
        balance_folds([("a", 1)], 5)
