"""Training loop: per-slot binary classification of sampled states.

Immediate reward only — the label is 1 at the true slot and 0 at every other
real score slot, optimized with cross-entropy per token. Values are learned
per action, not as a distribution across actions. Batches are drawn in
shuffled order, pitch-shift augmentation happens on the fly, and the learning
rate follows a warmup then inverse-square-root decay.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from .model import NetConfig, ValueNet, batch_to_torch
from .smaw import write_smaw
from .states import CENTER_SLOT, SCORE_SLOTS, StateRecord, balance_folds, encode_batch, load_states


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 8192
    epochs: int = 50
    warmup_steps: int = 4000
    lr_scale: float = 1.0
    augment_semitones: int = 12
    holdout_fraction: float = 0.1
    seed: int = 0
    net: NetConfig = field(default_factory=NetConfig)


@dataclass
class TrainReport:
    loss_curve: list[float]
    top0: float
    top1: float
    top2: float
    param_count: int
    n_train: int
    n_holdout: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"


def learning_rate(step: int, config: TrainConfig) -> float:
    """Warmup then square-root decay, scaled by 1/sqrt(d_model)."""
    step = max(step, 1)
    base = config.lr_scale * config.net.d_model ** -0.5
    return base * min(step**-0.5, step * config.warmup_steps**-1.5)


def _batch_losses(net: ValueNet, batch: dict) -> torch.Tensor:
    logits = net(batch)
    valid = batch["slot_valid"]
    return F.cross_entropy(logits[valid], batch["labels"][valid])


def greedy_slots(logits: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Argmax with the follower's tie-breaks (nearest center, then earlier)."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    probs = np.exp(shifted)
    q = probs[..., 1] / probs.sum(axis=-1)
    slots = np.arange(SCORE_SLOTS)
    out = np.empty(len(q), dtype=np.int64)
    for b in range(len(q)):
        out[b] = min(
            slots[valid[b]], key=lambda s: (-q[b, s], abs(s - CENTER_SLOT), s)
        )
    return out


def evaluate_topk(net: ValueNet, records: list[StateRecord], batch_size: int = 1024):
    net.eval()
    hits = np.zeros(3)
    with torch.no_grad():
        for lo in range(0, len(records), batch_size):
            chunk = records[lo : lo + batch_size]
            batch = batch_to_torch(encode_batch(chunk))
            logits = net(batch).numpy()
            chosen = greedy_slots(logits, batch["slot_valid"].numpy())
            targets = np.array([r.target_slot for r in chunk])
            distance = np.abs(chosen - targets)
            for k in range(3):
                hits[k] += (distance <= k).sum()
    net.train()
    return tuple(hits / max(len(records), 1))


def train_records(
    records: list[StateRecord],
    config: TrainConfig = TrainConfig(),
    holdout: list[StateRecord] | None = None,
    loss_hook=None,
) -> tuple[ValueNet, TrainReport]:
    if not records:
        raise ValueError("no training states")
    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)

    if holdout is None and config.holdout_fraction > 0 and len(records) > 1:
        order = rng.permutation(len(records))
        n_hold = max(1, int(len(records) * config.holdout_fraction))
        holdout = [records[i] for i in order[:n_hold]]
        records = [records[i] for i in order[n_hold:]]
    holdout = holdout or []

    net = ValueNet(config.net)
    optimizer = torch.optim.Adam(net.parameters(), lr=learning_rate(1, config))
    step = 0
    loss_curve: list[float] = []
    for _epoch in range(config.epochs):
        order = rng.permutation(len(records))
        epoch_losses = []
        for lo in range(0, len(records), config.batch_size):
            chunk = [records[i] for i in order[lo : lo + config.batch_size]]
            shifts = (
                rng.integers(-config.augment_semitones, config.augment_semitones + 1, len(chunk))
                if config.augment_semitones > 0
                else None
            )
            batch = batch_to_torch(encode_batch(chunk, shifts))
            step += 1
            for group in optimizer.param_groups:
                group["lr"] = learning_rate(step, config)
            optimizer.zero_grad()
            loss = _batch_losses(net, batch)
            loss.backward()
            optimizer.step()
            loss_value = float(loss.detach())
            epoch_losses.append(loss_value)
            if loss_hook is not None:
                loss_hook(step, loss_value)
        loss_curve.append(float(np.mean(epoch_losses)))

    if holdout:
        top0, top1, top2 = evaluate_topk(net, holdout)
    else:
        top0 = top1 = top2 = float("nan")
    report = TrainReport(
        loss_curve=loss_curve,
        top0=float(top0),
        top1=float(top1),
        top2=float(top2),
        param_count=net.param_count(),
        n_train=len(records),
        n_holdout=len(holdout),
    )
    return net, report


def train(states_path, weights_out, config: TrainConfig = TrainConfig()) -> TrainReport:
    """Train on a states file and export SMAW weights."""
    records = load_states(states_path)
    net, report = train_records(records, config)
    write_smaw(weights_out, net.export_tensors())
    return report


def crossval(corpus_dir, folds: int = 5, config: TrainConfig = TrainConfig()):
    """Piece-wise cross-validation over a corpus directory.

    The directory holds ``<piece>.states.ndjson`` plus ``<piece>.score.json``
    per piece; folds are balanced by score-onset count. Returns the per-fold
    reports and a mean/std summary of the top-k rates.
    """
    corpus = Path(corpus_dir)
    pieces = sorted(p.name[: -len(".states.ndjson")] for p in corpus.glob("*.states.ndjson"))
    if len(pieces) < folds:
        raise ValueError(f"need at least {folds} pieces, found {len(pieces)}")
    weights = []
    for name in pieces:
        with open(corpus / f"{name}.score.json") as fh:
            weights.append((name, len(json.load(fh)["onsets"])))
    fold_pieces = balance_folds(weights, folds)

    states = {name: load_states(corpus / f"{name}.states.ndjson") for name in pieces}
    reports = []
    for fold in range(folds):
        held_names = set(fold_pieces[fold])
        train_set = [r for name in pieces if name not in held_names for r in states[name]]
        hold_set = [r for name in sorted(held_names) for r in states[name]]
        _, report = train_records(train_set, config, holdout=hold_set)
        reports.append(report)
    summary = {
        "folds": folds,
        "pieces_per_fold": [sorted(f) for f in fold_pieces],
        "top0_mean": float(np.mean([r.top0 for r in reports])),
        "top0_std": float(np.std([r.top0 for r in reports])),
        "top1_mean": float(np.mean([r.top1 for r in reports])),
        "top1_std": float(np.std([r.top1 for r in reports])),
        "top2_mean": float(np.mean([r.top2 for r in reports])),
        "top2_std": float(np.std([r.top2 for r in reports])),
    }
    return reports, summary
