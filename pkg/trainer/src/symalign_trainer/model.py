"""Torch value network, architecturally identical to the aligner's inference
stack, with export in its tensor naming (weights oriented for y = x @ W + b,
so Linear weights transpose on the way out)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .states import SCORE_SLOT0, SCORE_SLOTS, SEQ_LEN, VOCAB_SIZE


@dataclass(frozen=True)
class NetConfig:
    n_layers: int = 6
    n_heads: int = 8
    d_model: int = 64
    d_ff: int = 64
    vocab_size: int = VOCAB_SIZE
    seq_len: int = SEQ_LEN
    ln_eps: float = 1e-5


class EncoderLayer(nn.Module):
    def __init__(self, cfg: NetConfig):
        super().__init__()
        d = cfg.d_model
        self.ln1 = nn.LayerNorm(d, eps=cfg.ln_eps)
        self.wq = nn.Linear(d, d)
        self.wk = nn.Linear(d, d)
        self.wv = nn.Linear(d, d)
        self.wo = nn.Linear(d, d)
        self.ln2 = nn.LayerNorm(d, eps=cfg.ln_eps)
        self.ff1 = nn.Linear(d, cfg.d_ff)
        self.ff2 = nn.Linear(cfg.d_ff, d)
        self.n_heads = cfg.n_heads
        self.head_dim = d // cfg.n_heads

    def forward(self, x: torch.Tensor, key_mask: torch.Tensor) -> torch.Tensor:
        b, t, d = x.shape
        h = self.ln1(x)
        def split(z):
            return z.view(b, t, self.n_heads, self.head_dim).transpose(1, 2)
        q, k, v = split(self.wq(h)), split(self.wk(h)), split(self.wv(h))
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        scores = scores.masked_fill(~key_mask[:, None, None, :], float("-inf"))
        ctx = torch.softmax(scores, dim=-1) @ v
        ctx = ctx.transpose(1, 2).reshape(b, t, d)
        x = x + self.wo(ctx)
        x = x + self.ff2(torch.relu(self.ff1(self.ln2(x))))
        return x


class ValueNet(nn.Module):
    def __init__(self, cfg: NetConfig = NetConfig()):
        super().__init__()
        self.cfg = cfg
        self.embedding = nn.Embedding(cfg.vocab_size, cfg.d_model)
        self.position = nn.Parameter(torch.empty(cfg.seq_len, cfg.d_model))
        self.layers = nn.ModuleList(EncoderLayer(cfg) for _ in range(cfg.n_layers))
        self.final_ln = nn.LayerNorm(cfg.d_model, eps=cfg.ln_eps)
        self.head = nn.Linear(cfg.d_model, 2)
        self.reset_parameters()

    def reset_parameters(self):
        for module in self.modules():
            if isinstance(module, (nn.Linear, nn.Embedding)):
                nn.init.normal_(module.weight, std=0.02)
                if isinstance(module, nn.Linear) and module.bias is not None:
                    nn.init.zeros_(module.bias)
        nn.init.normal_(self.position, std=0.02)

    def forward(self, batch: dict) -> torch.Tensor:
        """Per-slot logits, shape (B, 16, 2); class 1 means "match here"."""
        perf = batch["perf_tokens"]
        x_perf = self.embedding(perf)
        # pitch-set embedding: sum member rows, no_pitch fillers excluded
        sets = self.embedding(batch["score_tokens"]) * batch["score_members"].unsqueeze(-1)
        x_score = sets.sum(dim=2)
        b = perf.shape[0]
        delim = self.embedding.weight[VOCAB_SIZE - 2].expand(b, 1, -1)
        end = self.embedding.weight[VOCAB_SIZE - 1].expand(b, 1, -1)
        x = torch.cat([x_perf, delim, x_score, end], dim=1) + self.position
        mask = batch["mask"]
        for layer in self.layers:
            x = layer(x, mask)
        x = self.final_ln(x)
        return self.head(x[:, SCORE_SLOT0 : SCORE_SLOT0 + SCORE_SLOTS])

    def param_count(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def export_tensors(self) -> dict[str, np.ndarray]:
        def out(t: torch.Tensor) -> np.ndarray:
            return t.detach().cpu().numpy().astype(np.float32)

        tensors: dict[str, np.ndarray] = {
            "pitch_embedding": out(self.embedding.weight),
            "position_embedding": out(self.position),
            "final_ln.weight": out(self.final_ln.weight),
            "final_ln.bias": out(self.final_ln.bias),
            "head.weight": out(self.head.weight).T.copy(),
            "head.bias": out(self.head.bias),
        }
        for i, layer in enumerate(self.layers):
            p = f"layers.{i}"
            tensors[f"{p}.ln1.weight"] = out(layer.ln1.weight)
            tensors[f"{p}.ln1.bias"] = out(layer.ln1.bias)
            tensors[f"{p}.ln2.weight"] = out(layer.ln2.weight)
            tensors[f"{p}.ln2.bias"] = out(layer.ln2.bias)
            for name, lin in (("wq", layer.wq), ("wk", layer.wk), ("wv", layer.wv), ("wo", layer.wo)):
                tensors[f"{p}.attn.{name}.weight"] = out(lin.weight).T.copy()
                tensors[f"{p}.attn.{name}.bias"] = out(lin.bias)
            tensors[f"{p}.ff.w1.weight"] = out(layer.ff1.weight).T.copy()
            tensors[f"{p}.ff.w1.bias"] = out(layer.ff1.bias)
            tensors[f"{p}.ff.w2.weight"] = out(layer.ff2.weight).T.copy()
            tensors[f"{p}.ff.w2.bias"] = out(layer.ff2.bias)
        tensors["config"] = np.array(
            [
                self.cfg.n_layers,
                self.cfg.n_heads,
                self.cfg.d_model,
                self.cfg.d_ff,
                self.cfg.vocab_size,
                self.cfg.seq_len,
            ],
            dtype=np.float32,
        )
        return tensors


def batch_to_torch(batch: dict, device="cpu") -> dict:
    return {
        "perf_tokens": torch.from_numpy(batch["perf_tokens"]).to(device),
        "score_tokens": torch.from_numpy(batch["score_tokens"]).to(device),
        "score_members": torch.from_numpy(batch["score_members"]).to(device),
        "mask": torch.from_numpy(batch["mask"]).to(device),
        "labels": torch.from_numpy(batch["labels"]).to(device),
        "slot_valid": torch.from_numpy(batch["slot_valid"]).to(device),
    }
