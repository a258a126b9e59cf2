"""Secondary acceptance: cross-boundary parity and learnability on a toy corpus."""

import numpy as np
import pytest
import torch

from symalign_trainer import StateRecord, TrainConfig, ValueNet, encode_batch, train_records, write_smaw
from symalign_trainer.model import batch_to_torch

from conftest import make_random_score


def report(name, detail=""):
    print(f"\n[PASS] {name}" + (f" ({detail})" if detail else ""))


def gather_states(n, seed):
    from symalign import SynthParams, generate_performance, sample_states

    states = []
    for piece_seed in range(seed, seed + 5):
        score = make_random_score(piece_seed, n_onsets=40)
        perf, truth = generate_performance(score, SynthParams(seed=piece_seed))
        states.extend(sample_states(score, perf, truth))
    rng = np.random.default_rng(seed)
    return [states[i] for i in rng.choice(len(states), size=n, replace=False)]


def test_cross_boundary_forward_parity(tmp_path):
    """Exported weights load on the inference side and the two forward
    implementations agree within 1e-4 on 100 random states."""
    from symalign import forward, load_weights, tokenize

    torch.manual_seed(0)
    net = ValueNet()
    path = tmp_path / "parity.smaw"
    write_smaw(path, net.export_tensors())
    weights = load_weights(path)
    assert weights.param_count() == net.param_count()

    picks = gather_states(100, seed=300)
    records = [
        StateRecord(
            perf_pitches=labeled.state.perf_window,
            score_sets=tuple(tuple(sorted(s)) for s in labeled.state.score_window),
            center=labeled.state.center,
            target_slot=labeled.target_slot,
        )
        for labeled in picks
    ]
    batch = batch_to_torch(encode_batch(records))
    with torch.no_grad():
        logits = net(batch).numpy()
    shifted = np.exp(logits - logits.max(-1, keepdims=True))
    trainer_q = shifted[..., 1] / shifted.sum(-1)

    worst = 0.0
    for i, labeled in enumerate(picks):
        q = forward(tokenize(labeled.state), weights).q
        valid = np.isfinite(q)
        worst = max(worst, float(np.abs(q[valid] - trainer_q[i][valid]).max()))
    assert worst < 1e-4
    report("cross-boundary parity", f"max |dq| = {worst:.2e} over 100 states")


def test_toy_training_beats_uniform_baseline(toy_corpus):
    """10 epochs on a 20-piece toy corpus: held-out Top0 must clear 30%
    (uniform-guess baseline is 6.25%)."""
    train_set, holdout = toy_corpus
    cfg = TrainConfig(
        batch_size=256, epochs=10, warmup_steps=200, lr_scale=1.0,
        augment_semitones=12, holdout_fraction=0.0, seed=0,
    )
    _, result = train_records(train_set, cfg, holdout=holdout)
    assert result.top0 > 0.30
    assert result.top0 <= result.top1 <= result.top2
    report(
        "toy training",
        f"held-out Top0 = {result.top0:.1%}, Top1 = {result.top1:.1%}, "
        f"Top2 = {result.top2:.1%} after 10 epochs",
    )
