"""Weighted graphs in CSR form, edge-list ingestion and alias-table neighbor sampling."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import IO, Iterable

import numpy as np


class GraphFormatError(ValueError):
    """Raised for malformed edge-list input."""


class DeadEndError(RuntimeError):
    """Raised when a neighbor is requested for a node without out-edges."""


@dataclass(frozen=True)
class Graph:
    """Immutable weighted adjacency in compressed sparse row layout.

    Neighbors of each row are sorted by node id, which lets second-order
    walks test adjacency with a binary search.
    """

    node_count: int
    offsets: np.ndarray
    neighbors: np.ndarray
    weights: np.ndarray
    directed: bool = False
    ids: list[str] = field(default_factory=list)
    dropped_self_loops: int = 0

    def __post_init__(self):
        for arr in (self.offsets, self.neighbors, self.weights):
            arr.setflags(write=False)

    @property
    def arc_count(self) -> int:
        return int(self.neighbors.shape[0])

    @property
    def edge_count(self) -> int:
        """Number of edges; undirected edges are stored as two arcs."""
        return self.arc_count if self.directed else self.arc_count // 2

    def degree(self, u: int) -> int:
        return int(self.offsets[u + 1] - self.offsets[u])

    def out_degrees(self) -> np.ndarray:
        return np.diff(self.offsets)

    def neighbors_of(self, u: int) -> np.ndarray:
        return self.neighbors[self.offsets[u] : self.offsets[u + 1]]

    def weights_of(self, u: int) -> np.ndarray:
        return self.weights[self.offsets[u] : self.offsets[u + 1]]

    def has_arc(self, u: int, v: int) -> bool:
        row = self.neighbors_of(u)
        k = np.searchsorted(row, v)
        return bool(k < row.shape[0] and row[k] == v)

    def arcs(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return (sources, targets, weights) of every stored arc."""
        src = np.repeat(np.arange(self.node_count), self.out_degrees())
        return src, self.neighbors.copy(), self.weights.copy()

    def index_of(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.ids)}


def from_arcs(
    node_count: int,
    src: Iterable[int],
    dst: Iterable[int],
    weight: Iterable[float] | None = None,
    *,
    directed: bool = False,
    ids: list[str] | None = None,
) -> Graph:
    """Build a Graph from arc lists.

    For undirected graphs each (u, v) is mirrored. Self-loops and
    non-positive weights are dropped; duplicate arcs are merged by summing
    their weights.
    """
    src = np.asarray(list(src) if not isinstance(src, np.ndarray) else src, dtype=np.int64)
    dst = np.asarray(list(dst) if not isinstance(dst, np.ndarray) else dst, dtype=np.int64)
    if weight is None:
        w = np.ones(src.shape[0], dtype=np.float64)
    else:
        w = np.asarray(list(weight) if not isinstance(weight, np.ndarray) else weight, dtype=np.float64)
    if not (src.shape == dst.shape == w.shape):
        raise ValueError("arc arrays must have equal length")
    if src.size and (src.min() < 0 or dst.min() < 0 or max(src.max(), dst.max()) >= node_count):
        raise ValueError("arc endpoint out of range")

    loops = src == dst
    n_loops = int(loops.sum())
    keep = ~loops & (w > 0)
    src, dst, w = src[keep], dst[keep], w[keep]
    if not directed:
        src, dst = np.concatenate([src, dst]), np.concatenate([dst, src])
        w = np.concatenate([w, w])

    # merge duplicates, sort rows by (src, dst)
    key = src * node_count + dst
    uniq, inverse = np.unique(key, return_inverse=True)
    merged = np.zeros(uniq.shape[0], dtype=np.float64)
    np.add.at(merged, inverse, w)
    src = uniq // node_count if node_count else uniq
    dst = uniq % node_count if node_count else uniq

    offsets = np.zeros(node_count + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=node_count), out=offsets[1:])
    return Graph(
        node_count=node_count,
        offsets=offsets,
        neighbors=dst.astype(np.int64),
        weights=merged,
        directed=directed,
        ids=list(ids) if ids is not None else [str(i) for i in range(node_count)],
        dropped_self_loops=n_loops,
    )


def load_edge_list(source: IO | str | bytes, directed: bool = False) -> Graph:
    """Parse a whitespace-separated edge list ("u v" or "u v w" per line).

    Node tokens are arbitrary strings, mapped to dense ids in first-seen
    order; ``Graph.ids`` keeps the reverse mapping. Lines starting with '#'
    and blank lines are skipped.
    """
    if isinstance(source, (str, bytes)) and not isinstance(source, io.IOBase):
        text = source.decode("utf-8") if isinstance(source, bytes) else source
        lines = text.splitlines()
    else:
        lines = (ln.decode("utf-8") if isinstance(ln, bytes) else ln for ln in source)

    index: dict[str, int] = {}
    src, dst, wts = [], [], []
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) not in (2, 3):
            raise GraphFormatError(f"line {lineno}: expected 'u v [w]', got {line!r}")
        w = 1.0
        if len(tokens) == 3:
            try:
                w = float(tokens[2])
            except ValueError:
                raise GraphFormatError(f"line {lineno}: bad weight {tokens[2]!r}") from None
            if not np.isfinite(w) or w <= 0:
                raise GraphFormatError(f"line {lineno}: weight must be positive, got {tokens[2]}")
        for tok in tokens[:2]:
            if tok not in index:
                index[tok] = len(index)
        src.append(index[tokens[0]])
        dst.append(index[tokens[1]])
        wts.append(w)

    if not index:
        raise GraphFormatError("empty edge list")
    return from_arcs(len(index), src, dst, wts, directed=directed, ids=list(index))


def read_edge_list(path, directed: bool = False) -> Graph:
    with open(path, "rb") as fh:
        return load_edge_list(fh, directed=directed)


def write_edge_list(g: Graph, path) -> None:
    src, dst, w = g.arcs()
    with open(path, "w", encoding="utf-8") as fh:
        for u, v, x in zip(src, dst, w):
            if g.directed or u < v:
                fh.write(f"{g.ids[u]} {g.ids[v]} {x:.17g}\n" if x != 1.0 else f"{g.ids[u]} {g.ids[v]}\n")


@dataclass(frozen=True)
class AliasSampler:
    """Per-node Vose alias tables laid out parallel to ``Graph.neighbors``.

    ``prob[e]`` is the acceptance threshold of slot ``e`` and ``alias[e]``
    the local (row-relative) index used on rejection.
    """

    prob: np.ndarray
    alias: np.ndarray

    @classmethod
    def build(cls, g: Graph) -> "AliasSampler":
        prob = np.ones(g.arc_count, dtype=np.float64)
        alias = np.zeros(g.arc_count, dtype=np.int64)
        for u in range(g.node_count):
            lo, hi = g.offsets[u], g.offsets[u + 1]
            if hi - lo > 1:
                p, a = vose_tables(g.weights[lo:hi])
                prob[lo:hi] = p
                alias[lo:hi] = a
        prob.setflags(write=False)
        alias.setflags(write=False)
        return cls(prob, alias)


def vose_tables(weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = len(weights)
    scaled = np.asarray(weights, dtype=np.float64) * n / np.sum(weights)
    prob = np.ones(n)
    alias = np.arange(n)
    small = [i for i in range(n) if scaled[i] < 1.0]
    large = [i for i in range(n) if scaled[i] >= 1.0]
    while small and large:
        s, l = small.pop(), large.pop()
        prob[s] = scaled[s]
        alias[s] = l
        scaled[l] -= 1.0 - scaled[s]
        (small if scaled[l] < 1.0 else large).append(l)
    # leftovers are 1 up to rounding
    return prob, alias


def sample_neighbor(g: Graph, s: AliasSampler, u: int, rng: np.random.Generator) -> int:
    """Draw a neighbor j of u with probability w_uj / sum_h w_uh."""
    lo, hi = int(g.offsets[u]), int(g.offsets[u + 1])
    if hi == lo:
        raise DeadEndError(f"node {u} has no out-edges")
    k = lo + int(rng.integers(hi - lo))
    if rng.random() < s.prob[k]:
        return int(g.neighbors[k])
    return int(g.neighbors[lo + s.alias[k]])


def sample_neighbors(g: Graph, s: AliasSampler, nodes: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Vectorized ``sample_neighbor``; dead ends yield -1."""
    nodes = np.asarray(nodes, dtype=np.int64)
    lo = g.offsets[nodes]
    deg = g.offsets[nodes + 1] - lo
    u1 = rng.random(nodes.shape[0])
    u2 = rng.random(nodes.shape[0])
    live = deg > 0
    k = lo + np.minimum((u1 * deg).astype(np.int64), np.maximum(deg - 1, 0))
    k = np.where(live, k, 0)
    if g.arc_count == 0:
        return np.full(nodes.shape[0], -1, dtype=np.int64)
    take = u2 < s.prob[k]
    out = np.where(take, g.neighbors[k], g.neighbors[np.where(live, lo + s.alias[k], 0)])
    return np.where(live, out, -1)
