"""Random walk generators.

A walk of length t has t edges and t + 1 nodes. Batched generators return
int64 arrays of shape (n, t + 1) padded with -1 after a dead end; the
single-walk helpers return the trimmed 1-D node sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .graph import AliasSampler, Graph, sample_neighbors
from .sgns import EmbeddingModel


@dataclass(frozen=True)
class Simple:
    pass


@dataclass(frozen=True)
class Node2Vec:
    p: float = 1.0
    q: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.p) and math.isfinite(self.q) and self.p > 0 and self.q > 0):
            raise ValueError("node2vec p and q must be positive and finite")


@dataclass(frozen=True)
class LossGuided:
    power: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.power) and self.power >= 0):
            raise ValueError("loss-guided power must be finite and >= 0")


WalkKind = Simple | Node2Vec | LossGuided


def trim(walk: np.ndarray) -> np.ndarray:
    walk = np.asarray(walk)
    return walk[walk >= 0]


def walk_lengths(walks: np.ndarray) -> np.ndarray:
    """Node counts of each padded row."""
    return (np.asarray(walks) >= 0).sum(axis=1)


def _pad(prefixes, t: int) -> tuple[np.ndarray, np.ndarray]:
    prefixes = np.atleast_2d(np.asarray(prefixes, dtype=np.int64))
    n, width = prefixes.shape
    if width > t + 1:
        raise ValueError(f"prefix has more than t + 1 = {t + 1} nodes")
    out = np.full((n, t + 1), -1, dtype=np.int64)
    out[:, :width] = prefixes
    return out, walk_lengths(out)


def _simple_extend(g: Graph, s: AliasSampler, walks: np.ndarray, lengths: np.ndarray, rng) -> np.ndarray:
    width = walks.shape[1]
    # rows that already ended at a dead end before their declared length stay as-is
    for k in range(int(lengths.min()) if lengths.size else width, width):
        rows = np.flatnonzero((lengths <= k) & (walks[:, k - 1] >= 0)) if k > 0 else np.empty(0, int)
        if rows.size == 0:
            continue
        walks[rows, k] = sample_neighbors(g, s, walks[rows, k - 1], rng)
    return walks


@numba.njit(cache=True)
def _has_arc(offsets, nbrs, u, v):
    lo = offsets[u]
    hi = offsets[u + 1]
    while lo < hi:
        mid = (lo + hi) // 2
        if nbrs[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo < offsets[u + 1] and nbrs[lo] == v


@numba.njit(cache=True)
def _pick(buf, n, u):
    total = 0.0
    for k in range(n):
        total += buf[k]
    target = u * total
    acc = 0.0
    for k in range(n):
        acc += buf[k]
        if target < acc:
            return k
    # rounding: last positive slot
    for k in range(n - 1, -1, -1):
        if buf[k] > 0:
            return k
    return n - 1


@numba.njit(cache=True)
def _node2vec_kernel(offsets, nbrs, wts, walks, lengths, inv_p, inv_q, uniforms):
    n, width = walks.shape
    maxdeg = 1
    for v in range(offsets.shape[0] - 1):
        maxdeg = max(maxdeg, offsets[v + 1] - offsets[v])
    buf = np.empty(maxdeg)
    for r in range(n):
        for k in range(lengths[r], width):
            if k == 0 or walks[r, k - 1] < 0:
                break
            v = walks[r, k - 1]
            lo = offsets[v]
            deg = offsets[v + 1] - lo
            if deg == 0:
                break
            for e in range(deg):
                x = nbrs[lo + e]
                a = 1.0
                if k >= 2:
                    prev = walks[r, k - 2]
                    if x == prev:
                        a = inv_p
                    elif not _has_arc(offsets, nbrs, prev, x):
                        a = inv_q
                buf[e] = wts[lo + e] * a
            walks[r, k] = nbrs[lo + _pick(buf, deg, uniforms[r, k])]
    return walks


@numba.njit(cache=True)
def _loss_guided_kernel(offsets, nbrs, wts, focus, context, walks, lengths, power, uniforms):
    n, width = walks.shape
    d = focus.shape[1]
    maxdeg = 1
    for v in range(offsets.shape[0] - 1):
        maxdeg = max(maxdeg, offsets[v + 1] - offsets[v])
    logs = np.empty(maxdeg)
    buf = np.empty(maxdeg)
    evals = 0
    for r in range(n):
        for k in range(lengths[r], width):
            if k == 0 or walks[r, k - 1] < 0:
                break
            v = walks[r, k - 1]
            lo = offsets[v]
            deg = offsets[v + 1] - lo
            if deg == 0:
                break
            best = -np.inf
            for e in range(deg):
                lw = np.log(wts[lo + e])
                if power > 0:
                    x = 0.0
                    for a in range(d):
                        x += focus[v, a] * context[nbrs[lo + e], a]
                    loss = np.log1p(np.exp(-abs(x))) + max(-x, 0.0)
                    evals += 1
                    lw += power * np.log(loss) if loss > 0 else -np.inf
                logs[e] = lw
                best = max(best, lw)
            if best == -np.inf:
                # every candidate loss is exactly zero: weight-proportional step
                for e in range(deg):
                    buf[e] = wts[lo + e]
            else:
                for e in range(deg):
                    buf[e] = np.exp(logs[e] - best)
            walks[r, k] = nbrs[lo + _pick(buf, deg, uniforms[r, k])]
    return walks, evals


def simple_walks(g: Graph, s: AliasSampler, starts, t: int, rng: np.random.Generator) -> np.ndarray:
    if t < 1:
        raise ValueError("t must be >= 1")
    walks, lengths = _pad(np.asarray(starts, dtype=np.int64)[:, None], t)
    return _simple_extend(g, s, walks, lengths, rng)


def simple_walk(g: Graph, s: AliasSampler, start: int, t: int, rng: np.random.Generator) -> np.ndarray:
    """DeepWalk walk; a dead end yields a shorter walk."""
    return trim(simple_walks(g, s, [start], t, rng)[0])


def node2vec_walks(g: Graph, starts, t: int, p: float, q: float, rng: np.random.Generator) -> np.ndarray:
    if t < 1:
        raise ValueError("t must be >= 1")
    walks, lengths = _pad(np.asarray(starts, dtype=np.int64)[:, None], t)
    return _node2vec_extend(g, walks, lengths, Node2Vec(p, q), rng)


def node2vec_walk(g: Graph, start: int, t: int, p: float, q: float, rng: np.random.Generator) -> np.ndarray:
    """Second-order walk; the first step is an ordinary weighted step."""
    return trim(node2vec_walks(g, [start], t, p, q, rng)[0])


def _node2vec_extend(g, walks, lengths, kind: Node2Vec, rng):
    uniforms = rng.random(walks.shape)
    return _node2vec_kernel(
        g.offsets, g.neighbors, g.weights, walks, lengths, 1.0 / kind.p, 1.0 / kind.q, uniforms
    )


def _loss_guided_extend(g, m: EmbeddingModel, walks, lengths, power, rng, snapshot=True):
    if m is None:
        raise ValueError("loss-guided walks need a model")
    focus, context = (m.focus.copy(), m.context.copy()) if snapshot else (m.focus, m.context)
    uniforms = rng.random(walks.shape)
    return _loss_guided_kernel(
        g.offsets, g.neighbors, g.weights, focus, context, walks, lengths, float(power), uniforms
    )


def loss_guided_walks(
    g: Graph, m: EmbeddingModel, starts, t: int, power: float, rng: np.random.Generator,
    snapshot: bool = True,
) -> tuple[np.ndarray, int]:
    """Walks whose steps are weighted by w_vu * loss(v, u)^power.

    Returns the walks and the number of edge-loss evaluations spent.
    ``snapshot=False`` reads the live parameter arrays (relaxed staleness).
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    LossGuided(power)
    walks, lengths = _pad(np.asarray(starts, dtype=np.int64)[:, None], t)
    return _loss_guided_extend(g, m, walks, lengths, power, rng, snapshot)


def loss_guided_walk(g, m, start, t, power, rng, snapshot=True) -> np.ndarray:
    return trim(loss_guided_walks(g, m, [start], t, power, rng, snapshot)[0][0])


def draw_walks(
    g: Graph,
    s: AliasSampler,
    kind: WalkKind,
    starts,
    t: int,
    rng: np.random.Generator,
    model: EmbeddingModel | None = None,
) -> tuple[np.ndarray, int]:
    """Batch of walks of the given kind plus the loss evaluations they cost."""
    starts = np.asarray(starts, dtype=np.int64)
    return extend_walks(g, s, starts[:, None], kind, t, rng, model)


def extend_walks(
    g: Graph,
    s: AliasSampler,
    prefixes,
    kind: WalkKind,
    t: int,
    rng: np.random.Generator,
    model: EmbeddingModel | None = None,
) -> tuple[np.ndarray, int]:
    """Continue padded prefixes to t + 1 nodes under ``kind``'s conditional law.

    Second-order kinds condition on the last two prefix nodes. Prefixes that
    already ended at a dead end are left alone.
    """
    walks, lengths = _pad(prefixes, t)
    if isinstance(kind, Simple):
        return _simple_extend(g, s, walks, lengths, rng), 0
    if isinstance(kind, Node2Vec):
        return _node2vec_extend(g, walks, lengths, kind, rng), 0
    if isinstance(kind, LossGuided):
        return _loss_guided_extend(g, model, walks, lengths, kind.power, rng)
    raise TypeError(f"unknown walk kind {kind!r}")


def extend_walk(g, s, prefix, kind: WalkKind, t: int, rng, model=None) -> np.ndarray:
    prefix = np.asarray(prefix, dtype=np.int64)
    if isinstance(kind, Node2Vec) and prefix.shape[0] < 2 and t + 1 > prefix.shape[0]:
        raise ValueError("second-order extension needs a prefix of at least two nodes")
    return trim(extend_walks(g, s, prefix[None, :], kind, t, rng, model)[0][0])
