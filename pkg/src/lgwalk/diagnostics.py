"""Edge-loss separation and spread probes on a frozen model."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import Graph
from .sgns import EmbeddingModel, pos_loss

# below this many ordered pairs, candidate non-edges are enumerated directly
_ENUMERATE_LIMIT = 4_000_000


@dataclass(frozen=True)
class LossProfile:
    edge_loss: float
    background_loss: float
    ratio: float
    q90_loss: float
    q90_ratio: float

    @property
    def background_defined(self) -> bool:
        return not math.isnan(self.background_loss)

    def as_row(self) -> dict:
        return {
            "edge_loss": self.edge_loss,
            "bg_loss": self.background_loss,
            "ratio": self.ratio,
            "q90_ratio": self.q90_ratio,
        }


def _mean(values: np.ndarray) -> float:
    # shifted by the first value so a constant field averages to itself exactly
    ref = values[0]
    return float(ref + (values - ref).mean())


def nearest_rank_quantile(values, q: float) -> float:
    v = np.sort(np.asarray(values, dtype=np.float64))
    rank = max(1, math.ceil(q * v.shape[0]))
    return float(v[rank - 1])


def _linked(g: Graph) -> set:
    src, dst, _ = g.arcs()
    n = g.node_count
    return set((src * n + dst).tolist()) | set((dst * n + src).tolist())


def background_pairs(g: Graph, count: int, rng: np.random.Generator) -> np.ndarray:
    """Distinct ordered non-adjacent pairs, neither self-pairs nor edges in either direction.

    Returns fewer than ``count`` pairs only when fewer exist.
    """
    n = g.node_count
    linked = _linked(g)
    if n * n <= _ENUMERATE_LIMIT:
        flat = np.arange(n * n)
        flat = flat[(flat // n != flat % n) & ~np.isin(flat, np.fromiter(linked, np.int64, len(linked)))]
        take = rng.choice(flat.shape[0], size=min(count, flat.shape[0]), replace=False)
        chosen = flat[np.sort(take)]
    else:
        seen: set = set()
        while len(seen) < count:
            cand = rng.integers(n, size=(2 * count, 2))
            for u, v in cand:
                key = int(u) * n + int(v)
                if u != v and key not in linked:
                    seen.add(key)
                    if len(seen) == count:
                        break
        chosen = np.array(sorted(seen), dtype=np.int64)
    return np.column_stack([chosen // n, chosen % n])


def loss_profile(
    m: EmbeddingModel, g: Graph, n_background: int = 1000, rng: np.random.Generator | None = None
) -> LossProfile:
    """Mean positive loss on edges vs. sampled non-edges, and the 90% quantile spread.

    A graph without non-edges gives NaN background quantities.
    """
    rng = rng if rng is not None else np.random.default_rng()
    src, dst, _ = g.arcs()
    if src.shape[0] == 0:
        raise ValueError("graph has no edges")
    edge = pos_loss(m, src, dst)
    mean_edge = _mean(edge)
    q90 = nearest_rank_quantile(edge, 0.9)
    bg_pairs = background_pairs(g, n_background, rng)
    if bg_pairs.shape[0] == 0:
        bg = ratio = math.nan
    else:
        bg = _mean(pos_loss(m, bg_pairs[:, 0], bg_pairs[:, 1]))
        ratio = mean_edge / bg if bg > 0 else math.nan
    q90_ratio = q90 / mean_edge if mean_edge > 0 else math.nan
    return LossProfile(mean_edge, bg, ratio, q90, q90_ratio)
