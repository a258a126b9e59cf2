import numpy as np
import pytest

from symalign import Score, score_from_notes


def make_random_score(
    seed: int,
    n_onsets: int = 80,
    pitch_lo: int = 20,
    pitch_hi: int = 70,
    max_chord: int = 4,
) -> Score:
    """Random piece: mostly single notes and small chords, binary-fraction beats."""
    rng = np.random.default_rng(seed)
    notes = []
    beat = 0.0
    serial = 0
    for _ in range(n_onsets):
        size = int(rng.choice([1, 1, 1, 2, 2, 3, max_chord]))
        pitches = rng.choice(np.arange(pitch_lo, pitch_hi + 1), size=size, replace=False)
        for p in pitches:
            notes.append(
                {"id": f"s{serial}", "pitch": int(p) + 20, "onset_beat": beat}
            )
            serial += 1
        beat += float(rng.choice([0.25, 0.5, 0.5, 1.0]))
    return score_from_notes(notes)


@pytest.fixture
def small_score() -> Score:
    return make_random_score(seed=7, n_onsets=30)
