"""Planted-partition benchmark graphs and per-community training share."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import Graph, from_arcs


@dataclass(frozen=True)
class PlantedPartitionSpec:
    """Communities of the given sizes; p inside a community, q[a][b] across."""

    sizes: tuple = (600, 600, 600)
    p: float = 0.02
    q: tuple = field(default=((0.0, 0.006, 0.0), (0.006, 0.0, 0.0), (0.0, 0.0, 0.0)))

    def __post_init__(self):
        q = np.asarray(self.q, dtype=np.float64)
        k = len(self.sizes)
        if min(self.sizes) < 1:
            raise ValueError("community sizes must be >= 1")
        if q.shape != (k, k) or not np.allclose(q, q.T) or np.any(np.diag(q) != 0):
            raise ValueError("q must be a symmetric matrix with zero diagonal")
        if not (0 <= self.p <= 1) or q.min() < 0 or q.max() > 1:
            raise ValueError("probabilities must lie in [0, 1]")

    @classmethod
    def large_scale(cls) -> "PlantedPartitionSpec":
        """Three communities of 10^4 nodes, p = 0.001, red-green q = 0.0003, blue isolated."""
        q = ((0.0, 0.0003, 0.0), (0.0003, 0.0, 0.0), (0.0, 0.0, 0.0))
        return cls((10_000, 10_000, 10_000), 0.001, q)


def _skip_indices(n_pairs: int, prob: float, rng: np.random.Generator) -> np.ndarray:
    """Indices in [0, n_pairs) each kept independently with probability ``prob``.

    Geometric gaps between kept indices make this O(kept) instead of O(pairs).
    """
    if prob <= 0 or n_pairs == 0:
        return np.empty(0, dtype=np.int64)
    if prob >= 1:
        return np.arange(n_pairs, dtype=np.int64)
    chunks, pos = [], -1
    batch = max(16, int(n_pairs * prob * 1.1) + 16)
    while True:
        idx = pos + np.cumsum(rng.geometric(prob, size=batch))
        if idx[-1] >= n_pairs:
            chunks.append(idx[idx < n_pairs])
            break
        chunks.append(idx)
        pos = int(idx[-1])
    return np.concatenate(chunks).astype(np.int64)


def _triangle_pairs(k: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # k = i (i - 1) / 2 + j with 0 <= j < i
    i = np.floor((1 + np.sqrt(1 + 8 * k.astype(np.float64))) / 2).astype(np.int64)
    i -= i * (i - 1) // 2 > k
    i += (i + 1) * i // 2 <= k
    return i, k - i * (i - 1) // 2


def generate(spec: PlantedPartitionSpec, rng: np.random.Generator) -> tuple[Graph, np.ndarray]:
    """Sample an undirected planted-partition graph; returns (graph, community per node)."""
    sizes = np.asarray(spec.sizes, dtype=np.int64)
    starts = np.concatenate([[0], np.cumsum(sizes)])
    q = np.asarray(spec.q, dtype=np.float64)
    src, dst = [], []
    for a, n in enumerate(sizes):
        i, j = _triangle_pairs(_skip_indices(int(n * (n - 1) // 2), spec.p, rng))
        src.append(i + starts[a])
        dst.append(j + starts[a])
        for b in range(a + 1, len(sizes)):
            k = _skip_indices(int(n * sizes[b]), q[a, b], rng)
            src.append(k // sizes[b] + starts[a])
            dst.append(k % sizes[b] + starts[b])
    labels = np.repeat(np.arange(len(sizes)), sizes)
    g = from_arcs(int(starts[-1]), np.concatenate(src), np.concatenate(dst))
    return g, labels


def block_edge_counts(g: Graph, labels: np.ndarray) -> np.ndarray:
    """Undirected edge counts between every pair of communities."""
    src, dst, _ = g.arcs()
    keep = src < dst
    k = labels.max() + 1
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (labels[src[keep]], labels[dst[keep]]), 1)
    return counts + counts.T - np.diag(np.diag(counts))


def community_training_share(start_log, labels, n_communities: int | None = None) -> np.ndarray:
    """Fraction of trained walks starting in each community, one row per epoch.

    ``start_log`` holds one array of start nodes per epoch.
    """
    labels = np.asarray(labels)
    k = n_communities or int(labels.max()) + 1
    rows = []
    for starts in start_log:
        counts = np.bincount(labels[np.asarray(starts, dtype=np.int64)], minlength=k).astype(float)
        rows.append(counts / counts.sum() if counts.sum() else counts)
    return np.asarray(rows).reshape(len(rows), k)


def write_labels(labels, ids, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for name, lab in zip(ids, labels):
            fh.write(f"{name} {lab}\n")
