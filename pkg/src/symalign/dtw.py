"""Dynamic-programming sequence warping with pluggable local metrics.

The recursion uses the standard step set {(1,0), (0,1), (1,1)} with unit
weights. Backtracking resolves cost ties in a fixed order (diagonal, then the
step advancing the first sequence, then the second), so identical inputs
always produce identical paths. Cost memory stays at two rolling rows; step
choices are kept as 2-bit codes, four per byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np
from numba import njit

from .notes import PITCH_MAX

Metric = Union[str, Callable]

_DIAG, _UP, _LEFT = 0, 1, 2  # predecessor codes: (i-1,j-1), (i-1,j), (i,j-1)


def inclusion_cost(pitch: int, pitch_set) -> float:
    """Asymmetric 0/1 cost: zero iff the performed pitch is in the onset's set."""
    return 0.0 if pitch in pitch_set else 1.0


def l1_cost(a: float, b: float) -> float:
    return abs(a - b)


@dataclass(frozen=True)
class WarpPath:
    """Monotone correspondence between two sequences, as (i, j) index pairs."""

    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if not self.pairs:
            raise ValueError("empty warp path")
        if self.pairs[0] != (0, 0):
            raise ValueError(f"warp path must start at (0, 0), got {self.pairs[0]}")
        for (i0, j0), (i1, j1) in zip(self.pairs, self.pairs[1:]):
            if (i1 - i0, j1 - j0) not in ((1, 0), (0, 1), (1, 1)):
                raise ValueError(f"illegal step ({i0},{j0}) -> ({i1},{j1})")

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def end(self) -> tuple[int, int]:
        return self.pairs[-1]


@njit(cache=True)
def _dp_inclusion(pitches, member):
    n = pitches.shape[0]
    m = member.shape[0]
    steps = np.zeros((n, (m + 3) // 4), dtype=np.uint8)
    prev = np.empty(m, dtype=np.float64)
    cur = np.empty(m, dtype=np.float64)
    acc = 0.0
    for j in range(m):
        acc += 0.0 if member[j, pitches[0]] else 1.0
        cur[j] = acc
        if j > 0:
            steps[0, j >> 2] |= np.uint8(_LEFT << ((j & 3) * 2))
    for i in range(1, n):
        prev, cur = cur, prev
        local0 = 0.0 if member[0, pitches[i]] else 1.0
        cur[0] = prev[0] + local0
        steps[i, 0] |= np.uint8(_UP)
        for j in range(1, m):
            local = 0.0 if member[j, pitches[i]] else 1.0
            d = prev[j - 1]
            u = prev[j]
            l = cur[j - 1]
            if d <= u and d <= l:
                best, code = d, _DIAG
            elif u <= l:
                best, code = u, _UP
            else:
                best, code = l, _LEFT
            cur[j] = best + local
            steps[i, j >> 2] |= np.uint8(code << ((j & 3) * 2))
    return cur[m - 1], steps


@njit(cache=True)
def _dp_l1(x, y):
    n = x.shape[0]
    m = y.shape[0]
    steps = np.zeros((n, (m + 3) // 4), dtype=np.uint8)
    prev = np.empty(m, dtype=np.float64)
    cur = np.empty(m, dtype=np.float64)
    acc = 0.0
    for j in range(m):
        acc += abs(x[0] - y[j])
        cur[j] = acc
        if j > 0:
            steps[0, j >> 2] |= np.uint8(_LEFT << ((j & 3) * 2))
    for i in range(1, n):
        prev, cur = cur, prev
        cur[0] = prev[0] + abs(x[i] - y[0])
        steps[i, 0] |= np.uint8(_UP)
        for j in range(1, m):
            local = abs(x[i] - y[j])
            d = prev[j - 1]
            u = prev[j]
            l = cur[j - 1]
            if d <= u and d <= l:
                best, code = d, _DIAG
            elif u <= l:
                best, code = u, _UP
            else:
                best, code = l, _LEFT
            cur[j] = best + local
            steps[i, j >> 2] |= np.uint8(code << ((j & 3) * 2))
    return cur[m - 1], steps


@njit(cache=True)
def _dp_matrix(local):
    n, m = local.shape
    steps = np.zeros((n, (m + 3) // 4), dtype=np.uint8)
    prev = np.empty(m, dtype=np.float64)
    cur = np.empty(m, dtype=np.float64)
    acc = 0.0
    for j in range(m):
        acc += local[0, j]
        cur[j] = acc
        if j > 0:
            steps[0, j >> 2] |= np.uint8(_LEFT << ((j & 3) * 2))
    for i in range(1, n):
        prev, cur = cur, prev
        cur[0] = prev[0] + local[i, 0]
        steps[i, 0] |= np.uint8(_UP)
        for j in range(1, m):
            d = prev[j - 1]
            u = prev[j]
            l = cur[j - 1]
            if d <= u and d <= l:
                best, code = d, _DIAG
            elif u <= l:
                best, code = u, _UP
            else:
                best, code = l, _LEFT
            cur[j] = best + local[i, j]
            steps[i, j >> 2] |= np.uint8(code << ((j & 3) * 2))
    return cur[m - 1], steps


def _backtrack(steps, n: int, m: int) -> WarpPath:
    i, j = n - 1, m - 1
    pairs = [(i, j)]
    while i > 0 or j > 0:
        code = (steps[i, j >> 2] >> ((j & 3) * 2)) & 3
        if code == _DIAG:
            i, j = i - 1, j - 1
        elif code == _UP:
            i -= 1
        else:
            j -= 1
        pairs.append((i, j))
    pairs.reverse()
    return WarpPath(tuple(pairs))


def _local_cost_matrix(a: Sequence, b: Sequence, metric: Callable) -> np.ndarray:
    local = np.empty((len(a), len(b)), dtype=np.float64)
    for i, xa in enumerate(a):
        for j, xb in enumerate(b):
            cost = float(metric(xa, xb))
            if not (cost >= 0.0 and math.isfinite(cost)):
                raise ValueError(f"metric returned invalid cost {cost} at ({i}, {j})")
            local[i, j] = cost
    return local


def dtw(a: Sequence, b: Sequence, metric: Metric = "l1") -> tuple[float, WarpPath]:
    """Minimum-cost monotone alignment of ``a`` against ``b``.

    ``metric`` is ``"inclusion"`` (``a`` holds pitches, ``b`` pitch sets),
    ``"l1"`` (both numeric), or any callable ``(a_i, b_j) -> cost``. The two
    named metrics run on compiled kernels; callables fall back to a dense
    local-cost matrix and suit short sequences only.
    """
    if len(a) == 0 or len(b) == 0:
        raise ValueError("dtw requires non-empty sequences")
    if metric == "inclusion":
        pitches = np.asarray(a, dtype=np.int64)
        member = np.zeros((len(b), PITCH_MAX + 1), dtype=np.bool_)
        for j, pitch_set in enumerate(b):
            if not pitch_set:
                raise ValueError(f"empty pitch set at index {j}")
            member[j, list(pitch_set)] = True
        cost, steps = _dp_inclusion(pitches, member)
    elif metric == "l1":
        cost, steps = _dp_l1(
            np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
        )
    elif callable(metric):
        cost, steps = _dp_matrix(_local_cost_matrix(a, b, metric))
    else:
        raise ValueError(f"unknown metric {metric!r}")
    return float(cost), _backtrack(steps, len(a), len(b))


def dtw_backward(a: Sequence, b: Sequence, metric: Metric = "l1") -> tuple[float, WarpPath]:
    """Run dtw on the reversed sequences and map the path back.

    The cost equals the forward cost (the optimum is unique even when paths
    are not); the path may differ wherever several optima exist.
    """
    rev_a = list(a)[::-1]
    rev_b = list(b)[::-1]
    cost, path = dtw(rev_a, rev_b, metric)
    n, m = len(rev_a), len(rev_b)
    pairs = tuple((n - 1 - i, m - 1 - j) for i, j in reversed(path.pairs))
    return cost, WarpPath(pairs)


def disagreement_brackets(fwd: WarpPath, bwd: WarpPath):
    """Split two optimal paths into agreed pairs and ambiguous index ranges.

    Returns ``(agreed, brackets)``: ``agreed`` holds the pairs present in both
    paths; each bracket is ``((i_lo, i_hi), (j_lo, j_hi))``, the smallest index
    ranges covering every pair on which the paths differ between two
    consecutive agreed anchors. Agreed and bracketed indices together cover
    both sequences.
    """
    if fwd.end() != bwd.end():
        raise ValueError("paths cover different sequence lengths")
    common = set(fwd.pairs) & set(bwd.pairs)
    agreed = sorted(common)

    def gaps(path: WarpPath) -> list[list[tuple[int, int]]]:
        out: list[list[tuple[int, int]]] = []
        current: list[tuple[int, int]] = []
        for pair in path.pairs:
            if pair in common:
                out.append(current)
                current = []
            else:
                current.append(pair)
        return out[1:]  # the leading element before (0,0) is always empty

    brackets = []
    for gap_f, gap_b in zip(gaps(fwd), gaps(bwd)):
        disputed = gap_f + gap_b
        if not disputed:
            continue
        i_vals = [i for i, _ in disputed]
        j_vals = [j for _, j in disputed]
        brackets.append(((min(i_vals), max(i_vals)), (min(j_vals), max(j_vals))))
    return agreed, brackets
