"""Value model for online following: state tokenization, a small attention
network scoring each score-window slot, portable weight files, and a
deterministic suffix-match value function usable without trained weights.

A state pairs the most recent performance pitches (up to 8, newest last) with
a window of 16 score onsets centered on the last predicted position (7 past,
the current onset, 8 future). The network reads the state as 26 tokens
(8 performance slots, a delimiter, 16 score slots, an end token) and emits,
per score slot, the probability that matching the newest note there is
correct. The slot values are independent probabilities, not a distribution.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .notes import PITCH_MAX, PITCH_MIN, write_atomic

PERF_SLOTS = 8
SCORE_SLOTS = 16
CENTER_SLOT = 7  # slot index of the current onset within the score window
MAX_SET_TOKENS = 7  # larger pitch sets keep their lowest pitches

SEQ_LEN = PERF_SLOTS + 1 + SCORE_SLOTS + 1
DELIM_SLOT = PERF_SLOTS
SCORE_SLOT0 = PERF_SLOTS + 1
END_SLOT = SEQ_LEN - 1

NO_PITCH = PITCH_MAX  # token ids: pitches occupy 0..87
DELIM_TOKEN = PITCH_MAX + 1
END_TOKEN = PITCH_MAX + 2
VOCAB_SIZE = PITCH_MAX + 3


class WeightFormatError(ValueError):
    """A weight file violates the SMAW container format."""


@dataclass(frozen=True)
class AgentState:
    """Follower state: recent performance pitches plus a local score window.

    ``center`` indexes the current onset inside ``score_window``;
    ``window_start`` records which score onset the window begins at and is
    provenance only (it does not participate in equality).
    """

    perf_window: tuple[int, ...]
    score_window: tuple[frozenset[int], ...]
    center: int
    window_start: int = field(default=0, compare=False)

    def __post_init__(self):
        if not 1 <= len(self.perf_window) <= PERF_SLOTS:
            raise ValueError(f"performance window length {len(self.perf_window)} outside 1..8")
        if not 1 <= len(self.score_window) <= SCORE_SLOTS:
            raise ValueError(f"score window length {len(self.score_window)} outside 1..16")
        if not 0 <= self.center < len(self.score_window):
            raise ValueError("center outside score window")
        if self.center > CENTER_SLOT:
            raise ValueError(f"center {self.center} leaves no room for past slots")
        if len(self.score_window) - self.center > SCORE_SLOTS - CENTER_SLOT:
            raise ValueError("score window overruns the future slots")

    def slot_of(self, window_index: int) -> int:
        """Slot (0..15) holding the given score_window element."""
        return CENTER_SLOT - self.center + window_index

    def slot_sets(self) -> list[frozenset[int] | None]:
        """Pitch sets per slot; None where the window has no onset."""
        slots: list[frozenset[int] | None] = [None] * SCORE_SLOTS
        for k, pitch_set in enumerate(self.score_window):
            slots[self.slot_of(k)] = pitch_set
        return slots


@dataclass(frozen=True)
class TokenSequence:
    """Fixed 26-slot token layout; padded slots carry no_pitch and mask False."""

    perf_tokens: tuple[int, ...]               # 8 token ids
    score_sets: tuple[tuple[int, ...], ...]    # 16 sorted token-id tuples; () = padding
    mask: tuple[bool, ...]                     # 26 flags, True = real content


def tokenize(state: AgentState) -> TokenSequence:
    """Lay a state out on the 26-slot grid.

    Performance pitches are right-aligned against the delimiter; the score
    window is placed so its center lands on the middle score slot. Oversized
    pitch sets keep their 7 lowest pitches.
    """
    w = len(state.perf_window)
    perf_tokens = [NO_PITCH] * PERF_SLOTS
    mask = [False] * SEQ_LEN
    for idx, pitch in enumerate(state.perf_window):
        slot = PERF_SLOTS - w + idx
        perf_tokens[slot] = pitch - PITCH_MIN
        mask[slot] = True
    mask[DELIM_SLOT] = True
    mask[END_SLOT] = True

    score_sets: list[tuple[int, ...]] = [()] * SCORE_SLOTS
    for k, pitch_set in enumerate(state.score_window):
        slot = state.slot_of(k)
        tokens = tuple(sorted(p - PITCH_MIN for p in pitch_set)[:MAX_SET_TOKENS])
        score_sets[slot] = tokens
        mask[SCORE_SLOT0 + slot] = True
    return TokenSequence(tuple(perf_tokens), tuple(score_sets), tuple(mask))


@dataclass(frozen=True)
class ModelConfig:
    n_layers: int = 6
    n_heads: int = 8
    d_model: int = 64
    d_ff: int = 64
    vocab_size: int = VOCAB_SIZE
    seq_len: int = SEQ_LEN
    ln_eps: float = 1e-5


def expected_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    d, f = config.d_model, config.d_ff
    shapes: dict[str, tuple[int, ...]] = {
        "pitch_embedding": (config.vocab_size, d),
        "position_embedding": (config.seq_len, d),
        "final_ln.weight": (d,),
        "final_ln.bias": (d,),
        "head.weight": (d, 2),
        "head.bias": (2,),
    }
    for i in range(config.n_layers):
        p = f"layers.{i}"
        shapes[f"{p}.ln1.weight"] = (d,)
        shapes[f"{p}.ln1.bias"] = (d,)
        shapes[f"{p}.ln2.weight"] = (d,)
        shapes[f"{p}.ln2.bias"] = (d,)
        for name in ("wq", "wk", "wv", "wo"):
            shapes[f"{p}.attn.{name}.weight"] = (d, d)
            shapes[f"{p}.attn.{name}.bias"] = (d,)
        shapes[f"{p}.ff.w1.weight"] = (d, f)
        shapes[f"{p}.ff.w1.bias"] = (f,)
        shapes[f"{p}.ff.w2.weight"] = (f, d)
        shapes[f"{p}.ff.w2.bias"] = (d,)
    return shapes


class ModelWeights:
    """Named tensors for the value network. Immutable by convention after load."""

    def __init__(self, config: ModelConfig, tensors: Mapping[str, np.ndarray]):
        expected = expected_shapes(config)
        missing = sorted(set(expected) - set(tensors))
        if missing:
            raise WeightFormatError(f"missing tensors: {', '.join(missing)}")
        extra = sorted(set(tensors) - set(expected))
        if extra:
            raise WeightFormatError(f"unexpected tensors: {', '.join(extra)}")
        for name, shape in expected.items():
            got = tuple(tensors[name].shape)
            if got != shape:
                raise WeightFormatError(f"tensor {name!r}: shape {got}, expected {shape}")
        self.config = config
        self.tensors = {k: np.asarray(v, dtype=np.float32) for k, v in tensors.items()}

    def param_count(self) -> int:
        return sum(int(t.size) for t in self.tensors.values())

    @classmethod
    def zeros(cls, config: ModelConfig = ModelConfig()) -> "ModelWeights":
        return cls(
            config,
            {name: np.zeros(shape, np.float32) for name, shape in expected_shapes(config).items()},
        )

    @classmethod
    def random(cls, seed: int = 0, config: ModelConfig = ModelConfig()) -> "ModelWeights":
        rng = np.random.default_rng(seed)
        tensors = {}
        for name, shape in expected_shapes(config).items():
            if name.endswith("ln.weight") or ".ln1.weight" in name or ".ln2.weight" in name:
                tensors[name] = np.ones(shape, np.float32)
            elif name.endswith(".bias"):
                tensors[name] = np.zeros(shape, np.float32)
            else:
                tensors[name] = rng.normal(0.0, 0.02, size=shape).astype(np.float32)
        return cls(config, tensors)


def embed(seq: TokenSequence, weights: ModelWeights) -> np.ndarray:
    """Token embeddings plus learned positions, shape (26, d_model).

    A score slot embeds as the sum of its member-pitch rows (in sorted order,
    so equal sets embed bit-identically); fully padded slots fall back to the
    no_pitch row.
    """
    table = weights.tensors["pitch_embedding"]
    pos = weights.tensors["position_embedding"]
    d = weights.config.d_model
    x = np.zeros((SEQ_LEN, d), dtype=np.float32)
    for slot, token in enumerate(seq.perf_tokens):
        x[slot] = table[token]
    x[DELIM_SLOT] = table[DELIM_TOKEN]
    x[END_SLOT] = table[END_TOKEN]
    for k, tokens in enumerate(seq.score_sets):
        slot = SCORE_SLOT0 + k
        if not tokens:
            x[slot] = table[NO_PITCH]
        else:
            ordered = sorted(tokens)  # fixed summation order: equal sets embed bit-identically
            acc = table[ordered[0]].copy()
            for token in ordered[1:]:
                acc += table[token]
            x[slot] = acc
    return x + pos


class SlotValues:
    """Per-slot probabilities of a correct match; masked slots hold -inf."""

    __slots__ = ("q",)

    def __init__(self, q: np.ndarray):
        self.q = np.asarray(q, dtype=np.float64)
        if self.q.shape != (SCORE_SLOTS,):
            raise ValueError(f"expected {SCORE_SLOTS} slot values, got shape {self.q.shape}")

    def __repr__(self):
        return f"SlotValues({np.array2string(self.q, precision=3)})"


def rank_slots(values: SlotValues, k: int | None = None) -> list[int]:
    """Slots by descending value; ties prefer the slot nearest the center,
    then the earlier slot."""
    q = values.q
    order = sorted(
        (s for s in range(SCORE_SLOTS) if np.isfinite(q[s])),
        key=lambda s: (-q[s], abs(s - CENTER_SLOT), s),
    )
    return order if k is None else order[:k]


def best_slot(values: SlotValues) -> int:
    return rank_slots(values, 1)[0]


def _layer_norm(x: np.ndarray, weight, bias, eps: float) -> np.ndarray:
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + eps) * weight + bias


def _softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def forward(seq: TokenSequence, weights: ModelWeights) -> SlotValues:
    """Run the attention stack and read out per-slot reward probabilities.

    Pre-norm layers; padded slots are excluded as attention keys, so their
    contents can never influence real positions.
    """
    cfg = weights.config
    t = weights.tensors
    heads, d = cfg.n_heads, cfg.d_model
    head_dim = d // heads
    x = embed(seq, weights)
    mask = np.array(seq.mask, dtype=bool)

    for layer in range(cfg.n_layers):
        p = f"layers.{layer}"
        h = _layer_norm(x, t[f"{p}.ln1.weight"], t[f"{p}.ln1.bias"], cfg.ln_eps)
        q = (h @ t[f"{p}.attn.wq.weight"] + t[f"{p}.attn.wq.bias"])
        k = (h @ t[f"{p}.attn.wk.weight"] + t[f"{p}.attn.wk.bias"])
        v = (h @ t[f"{p}.attn.wv.weight"] + t[f"{p}.attn.wv.bias"])
        q = q.reshape(SEQ_LEN, heads, head_dim).transpose(1, 0, 2)
        k = k.reshape(SEQ_LEN, heads, head_dim).transpose(1, 0, 2)
        v = v.reshape(SEQ_LEN, heads, head_dim).transpose(1, 0, 2)
        scores = q @ k.transpose(0, 2, 1) / np.sqrt(head_dim)
        scores = np.where(mask[None, None, :], scores, -np.inf)
        ctx = _softmax(scores) @ v
        ctx = ctx.transpose(1, 0, 2).reshape(SEQ_LEN, d)
        x = x + ctx @ t[f"{p}.attn.wo.weight"] + t[f"{p}.attn.wo.bias"]

        h = _layer_norm(x, t[f"{p}.ln2.weight"], t[f"{p}.ln2.bias"], cfg.ln_eps)
        inner = np.maximum(h @ t[f"{p}.ff.w1.weight"] + t[f"{p}.ff.w1.bias"], 0.0)
        x = x + inner @ t[f"{p}.ff.w2.weight"] + t[f"{p}.ff.w2.bias"]

    x = _layer_norm(x, t["final_ln.weight"], t["final_ln.bias"], cfg.ln_eps)
    logits = x[SCORE_SLOT0 : SCORE_SLOT0 + SCORE_SLOTS] @ t["head.weight"] + t["head.bias"]
    if not np.isfinite(logits).all():
        raise ValueError("non-finite activations in forward pass; weights corrupt?")
    probs = _softmax(logits)[:, 1]
    q_out = np.where(mask[SCORE_SLOT0 : SCORE_SLOT0 + SCORE_SLOTS], probs, -np.inf)
    return SlotValues(q_out)


def network_value_fn(weights: ModelWeights):
    """Bind weights into a ``state -> SlotValues`` callable."""

    def value_fn(state: AgentState) -> SlotValues:
        return forward(tokenize(state), weights)

    return value_fn


# ---------------------------------------------------------------------------
# deterministic value function (no trained weights required)


def suffix_match_values(state: AgentState) -> SlotValues:
    """Score each slot by how much of the recent pitch history it can absorb.

    q[i] = L / len(perf_window), where L is the longest suffix of the
    performance window assignable, in order, to non-decreasing slots ending
    exactly at slot i; each (slot, pitch) occurrence is usable once. Slots
    lacking the newest pitch score 0, padded slots -inf.
    """
    slots = state.slot_sets()
    window = state.perf_window
    w = len(window)
    last = window[-1]
    q = np.full(SCORE_SLOTS, -np.inf)
    for end in range(SCORE_SLOTS):
        pitch_set = slots[end]
        if pitch_set is None:
            continue
        if last not in pitch_set:
            q[end] = 0.0
            continue
        best = 1
        for length in range(2, w + 1):
            if _prefix_fits(window[w - length : w - 1], end, last, slots):
                best = length
            else:
                break
        q[end] = best / w
    return SlotValues(q)


def _prefix_fits(prefix, end_slot, reserved_pitch, slots) -> bool:
    """Greedy leftmost assignment of ``prefix`` to slots <= end_slot.

    The (end_slot, reserved_pitch) occurrence is held back for the suffix's
    final note. Greedy placement is safe because equal-pitch notes are
    interchangeable across their occurrences.
    """
    j = 0
    used: set[tuple[int, int]] = set()
    for pitch in prefix:
        while j <= end_slot:
            pitch_set = slots[j]
            if (
                pitch_set is not None
                and pitch in pitch_set
                and (j, pitch) not in used
                and not (j == end_slot and pitch == reserved_pitch)
            ):
                used.add((j, pitch))
                break
            j += 1
        else:
            return False
    return True


# ---------------------------------------------------------------------------
# SMAW weight container


SMAW_MAGIC = b"SMAW"
SMAW_VERSION = 1
_CONFIG_TENSOR = "config"


def write_tensor_file(path, tensors: Mapping[str, np.ndarray]) -> None:
    """Write named float32 tensors in the SMAW container (little-endian).

    Layout: magic "SMAW", u32 version, u32 tensor count; per tensor a u16
    name length, UTF-8 name, u8 rank, rank u32 dims, row-major f32 payload;
    finally the u32 CRC32 of everything before it. Tensors are written in
    name order so equal contents give byte-identical files.
    """
    buf = bytearray()
    buf += SMAW_MAGIC
    buf += struct.pack("<II", SMAW_VERSION, len(tensors))
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype="<f4")
        encoded = name.encode("utf-8")
        buf += struct.pack("<H", len(encoded))
        buf += encoded
        buf += struct.pack("<B", arr.ndim)
        for dim in arr.shape:
            buf += struct.pack("<I", dim)
        buf += arr.tobytes()
    buf += struct.pack("<I", zlib.crc32(bytes(buf)))
    write_atomic(path, bytes(buf))


def read_tensor_file(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        data = fh.read()

    def take(pos: int, n: int, what: str) -> tuple[bytes, int]:
        if pos + n > len(data):
            raise WeightFormatError(
                f"truncated file: {what} needs {n} bytes at offset {pos}, "
                f"only {len(data) - pos} available"
            )
        return data[pos : pos + n], pos + n

    chunk, pos = take(0, 4, "magic")
    if chunk != SMAW_MAGIC:
        raise WeightFormatError(f"bad magic {chunk!r}, expected {SMAW_MAGIC!r}")
    chunk, pos = take(pos, 8, "header")
    version, count = struct.unpack("<II", chunk)
    if version != SMAW_VERSION:
        raise WeightFormatError(f"unsupported version {version}, expected {SMAW_VERSION}")

    tensors: dict[str, np.ndarray] = {}
    for index in range(count):
        chunk, pos = take(pos, 2, f"tensor {index} name length")
        (name_len,) = struct.unpack("<H", chunk)
        chunk, pos = take(pos, name_len, f"tensor {index} name")
        name = chunk.decode("utf-8")
        chunk, pos = take(pos, 1, f"tensor {name!r} rank")
        rank = chunk[0]
        dims = []
        for d in range(rank):
            chunk, pos = take(pos, 4, f"tensor {name!r} dim {d}")
            dims.append(struct.unpack("<I", chunk)[0])
        size = 1
        for d in dims:
            size *= d
        chunk, pos = take(pos, 4 * size, f"tensor {name!r} payload")
        if name in tensors:
            raise WeightFormatError(f"duplicate tensor name {name!r}")
        tensors[name] = np.frombuffer(chunk, dtype="<f4").reshape(dims).copy()

    chunk, pos = take(pos, 4, "checksum")
    (stored_crc,) = struct.unpack("<I", chunk)
    actual_crc = zlib.crc32(data[: pos - 4])
    if stored_crc != actual_crc:
        raise WeightFormatError(
            f"checksum mismatch: file says 0x{stored_crc:08X}, computed 0x{actual_crc:08X}"
        )
    if pos != len(data):
        raise WeightFormatError(f"{len(data) - pos} trailing bytes after checksum")
    return tensors


def save_weights(weights: ModelWeights, path) -> None:
    cfg = weights.config
    tensors = dict(weights.tensors)
    tensors[_CONFIG_TENSOR] = np.array(
        [cfg.n_layers, cfg.n_heads, cfg.d_model, cfg.d_ff, cfg.vocab_size, cfg.seq_len],
        dtype=np.float32,
    )
    write_tensor_file(path, tensors)


def load_weights(path) -> ModelWeights:
    tensors = read_tensor_file(path)
    if _CONFIG_TENSOR not in tensors:
        raise WeightFormatError("missing 'config' tensor")
    raw = tensors.pop(_CONFIG_TENSOR)
    if raw.shape != (6,):
        raise WeightFormatError(f"'config' tensor has shape {raw.shape}, expected (6,)")
    config = ModelConfig(
        n_layers=int(raw[0]),
        n_heads=int(raw[1]),
        d_model=int(raw[2]),
        d_ff=int(raw[3]),
        vocab_size=int(raw[4]),
        seq_len=int(raw[5]),
    )
    if config.vocab_size != VOCAB_SIZE or config.seq_len != SEQ_LEN:
        raise WeightFormatError(
            f"config declares vocab {config.vocab_size} / seq {config.seq_len}, "
            f"this build expects {VOCAB_SIZE} / {SEQ_LEN}"
        )
    return ModelWeights(config, tensors)
