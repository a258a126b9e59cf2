import json
import sys
from pathlib import Path

import numpy as np
import pytest

# the aligner package provides corpus fixtures; the trainer itself only ever
# touches the files these helpers write
from symalign import (
    SynthParams,
    export_states,
    generate_performance,
    sample_states,
    save_score_json,
    score_from_notes,
)


def make_random_score(seed, n_onsets=40, pitch_lo=25, pitch_hi=60):
    rng = np.random.default_rng(seed)
    notes = []
    beat = 0.0
    serial = 0
    for _ in range(n_onsets):
        size = int(rng.choice([1, 1, 1, 2]))
        for p in rng.choice(np.arange(pitch_lo, pitch_hi + 1), size=size, replace=False):
            notes.append({"id": f"s{serial}", "pitch": int(p) + 20, "onset_beat": beat})
            serial += 1
        beat += float(rng.choice([0.25, 0.5, 0.5, 1.0]))
    return score_from_notes(notes)


def write_piece(directory: Path, name: str, seed: int, n_onsets: int = 40):
    """One corpus entry: <name>.score.json + <name>.states.ndjson."""
    score = make_random_score(seed, n_onsets=n_onsets)
    perf, truth = generate_performance(score, SynthParams(seed=seed))
    save_score_json(score, directory / f"{name}.score.json")
    labeled = sample_states(score, perf, truth)
    export_states(labeled, directory / f"{name}.states.ndjson")
    return labeled


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    directory = tmp_path_factory.mktemp("corpus")
    for i in range(6):
        write_piece(directory, f"piece{i}", seed=8000 + i, n_onsets=20 + 4 * i)
    return directory


@pytest.fixture(scope="session")
def toy_corpus(tmp_path_factory):
    """20 clean pieces split 16/4 by piece; returns trainer-side records."""
    from symalign_trainer import load_states

    directory = tmp_path_factory.mktemp("toy")
    train, hold = [], []
    for i in range(20):
        write_piece(directory, f"toy{i}", seed=9000 + i, n_onsets=25)
        records = load_states(directory / f"toy{i}.states.ndjson")
        (train if i < 16 else hold).extend(records)
    return train, hold
