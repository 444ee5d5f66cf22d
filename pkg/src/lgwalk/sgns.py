"""Skip-gram with negative sampling over node walks.

Walk batches are 2-D int64 arrays padded on the right with -1, so a row
``[3, 7, 2, -1]`` is a walk of two edges truncated at a dead end.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

NEG_POWER = 0.75
LR_START = 0.025
LR_END = 0.0001


class NumericError(FloatingPointError):
    """Training produced non-finite parameters (usually: learning rate too high)."""


@dataclass
class EmbeddingModel:
    focus: np.ndarray
    context: np.ndarray

    @property
    def dim(self) -> int:
        return self.focus.shape[1]

    @property
    def node_count(self) -> int:
        return self.focus.shape[0]

    def copy(self) -> "EmbeddingModel":
        return EmbeddingModel(self.focus.copy(), self.context.copy())

    def dots(self, i, j) -> np.ndarray:
        return np.einsum("...k,...k->...", self.focus[i], self.context[j])


def init_model(node_count: int, dim: int, rng: np.random.Generator) -> EmbeddingModel:
    """Uniform focus vectors in [-0.5/d, 0.5/d], zero context vectors."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    half = 0.5 / dim
    focus = rng.uniform(-half, half, size=(node_count, dim))
    return EmbeddingModel(focus, np.zeros((node_count, dim)))


def softplus(x):
    """ln(1 + e^x) without overflow."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > 0, x + np.log1p(np.exp(-np.abs(x))), np.log1p(np.exp(np.minimum(x, 0.0))))


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def pos_loss_from_dot(x):
    return softplus(-np.asarray(x, dtype=np.float64))


def neg_loss_from_dot(x):
    return softplus(x)


def pos_loss(m: EmbeddingModel, i, j):
    """Loss of positive example (i, j): ln(1 + exp(-f_i . c_j)); vectorizes over i, j."""
    return pos_loss_from_dot(m.dots(i, j))


def neg_loss(m: EmbeddingModel, i, j):
    return neg_loss_from_dot(m.dots(i, j))


def loss_and_grad(f: np.ndarray, c: np.ndarray, label: int) -> tuple[float, np.ndarray, np.ndarray]:
    """Per-example loss and its gradients with respect to f and c."""
    x = float(f @ c)
    if label:
        return float(pos_loss_from_dot(x)), -sigmoid(-x) * c, -sigmoid(-x) * f
    return float(neg_loss_from_dot(x)), sigmoid(x) * c, sigmoid(x) * f


def lr_at(progress: float, start: float = LR_START, end: float = LR_END) -> float:
    """Linearly decayed learning rate, clipped at ``end``."""
    if not 0.0 <= progress <= 1.0:
        raise ValueError(f"progress must lie in [0, 1], got {progress}")
    lr = start + progress * (end - start)
    return max(lr, end) if end <= start else lr


def expected_pair_count(t: int, window: int) -> float:
    """Closed-form E|Pairs(S)| for a walk of t edges and skips uniform on 1..window."""
    d = np.arange(1, window + 1)
    return float(sum(2.0 * np.minimum(k, d).mean() for k in range(t + 1)))


class NegativeTable:
    """Context counts since training start and a cached counts^0.75 distribution."""

    def __init__(self, node_count: int):
        self.counts = np.zeros(node_count, dtype=np.int64)
        self._cdf: np.ndarray | None = None

    def record(self, contexts: np.ndarray) -> None:
        self.counts += np.bincount(np.asarray(contexts, dtype=np.int64), minlength=self.counts.shape[0])

    def refresh(self) -> None:
        if self.counts.any():
            cdf = np.cumsum(self.counts.astype(np.float64) ** NEG_POWER)
            self._cdf = cdf / cdf[-1]

    def probabilities(self) -> np.ndarray:
        if self._cdf is None:
            self.refresh()
        if self._cdf is None:
            return np.full(self.counts.shape[0], 1.0 / self.counts.shape[0])
        return np.diff(self._cdf, prepend=0.0)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self._cdf is None:
            self.refresh()
        if self._cdf is None:
            return rng.integers(self.counts.shape[0], size=n)
        idx = np.searchsorted(self._cdf, rng.random(n), side="right")
        return np.minimum(idx, self.counts.shape[0] - 1)


def record_and_sample_negatives(
    tbl: NegativeTable, pairs: np.ndarray, negatives: int, rng: np.random.Generator
) -> np.ndarray:
    """Record the batch's contexts, then draw ``negatives`` (focus, context) pairs per positive."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    tbl.record(pairs[:, 1])
    if negatives == 0 or pairs.shape[0] == 0:
        return np.empty((0, 2), dtype=np.int64)
    ctx = tbl.sample(pairs.shape[0] * negatives, rng)
    return np.column_stack([np.repeat(pairs[:, 0], negatives), ctx])


def draw_skips(shape, window: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(1, window + 1, size=shape)


@numba.njit(cache=True)
def _pairs_kernel(walks, skips):
    n, width = walks.shape
    total = 0
    for r in range(n):
        length = 0
        while length < width and walks[r, length] >= 0:
            length += 1
        for i in range(length):
            total += min(skips[r, i], i) + min(skips[r, i], length - 1 - i)
    pairs = np.empty((total, 2), dtype=np.int64)
    owner = np.empty(total, dtype=np.int64)
    k = 0
    for r in range(n):
        length = 0
        while length < width and walks[r, length] >= 0:
            length += 1
        for i in range(length):
            lo = max(0, i - skips[r, i])
            hi = min(length - 1, i + skips[r, i])
            for j in range(lo, hi + 1):
                if j != i:
                    pairs[k, 0] = walks[r, i]
                    pairs[k, 1] = walks[r, j]
                    owner[k] = r
                    k += 1
    return pairs, owner


def pairs_from_walks(walks: np.ndarray, skips: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Positive pairs for a padded walk batch given per-position skips.

    Returns (pairs, owner) where ``owner[k]`` is the row of pair k.
    """
    walks = np.ascontiguousarray(np.atleast_2d(walks), dtype=np.int64)
    skips = np.ascontiguousarray(np.atleast_2d(skips), dtype=np.int64)
    return _pairs_kernel(walks, skips)


def gen_pairs(walk, window: int, rng: np.random.Generator) -> np.ndarray:
    """Ordered (focus, context) pairs of one walk; each position draws its own skip."""
    if window < 1:
        raise ValueError("window must be >= 1")
    walk = np.asarray(walk, dtype=np.int64)
    skips = draw_skips(walk.shape[0], window, rng)
    return pairs_from_walks(walk[None, :], skips[None, :])[0]


@numba.njit(cache=True)
def _sgd_kernel(focus, context, pairs, negs, lrs):
    # negs[k] holds the negative contexts of positive k; lrs[k] its learning rate
    d = focus.shape[1]
    n_neg = negs.shape[1]
    loss_sum = 0.0
    ok = True
    fi = np.empty(d)
    for k in range(pairs.shape[0]):
        i = pairs[k, 0]
        lr = lrs[k]
        for m in range(n_neg + 1):
            if m == 0:
                j = pairs[k, 1]
                label = 1.0
            else:
                j = negs[k, m - 1]
                label = 0.0
            x = 0.0
            for a in range(d):
                fi[a] = focus[i, a]
                x += fi[a] * context[j, a]
            if x >= 0:
                s = 1.0 / (1.0 + np.exp(-x))
            else:
                e = np.exp(x)
                s = e / (1.0 + e)
            if m == 0:
                loss_sum += np.log1p(np.exp(-abs(x))) + max(-x, 0.0)
            g = lr * (label - s)
            for a in range(d):
                focus[i, a] += g * context[j, a]
                context[j, a] += g * fi[a]
        for a in range(d):
            if not np.isfinite(focus[i, a]):
                ok = False
    return loss_sum, ok


@numba.njit(cache=True, parallel=True)
def _sgd_kernel_parallel(focus, context, pairs, negs, lrs, chunks):
    # lock-free: workers race on shared rows, lost updates are tolerated
    bounds = np.linspace(0, pairs.shape[0], chunks + 1).astype(np.int64)
    losses = np.zeros(chunks)
    oks = np.ones(chunks, dtype=np.bool_)
    for c in numba.prange(chunks):
        lo, hi = bounds[c], bounds[c + 1]
        ls, ok = _sgd_kernel(focus, context, pairs[lo:hi], negs[lo:hi], lrs[lo:hi])
        losses[c] = ls
        oks[c] = ok
    return losses.sum(), oks.all()


@dataclass
class UpdateStats:
    walks: int
    pairs: int
    negatives: int
    mean_loss: float


def apply_updates(
    m: EmbeddingModel,
    pairs: np.ndarray,
    negs: np.ndarray,
    lrs: np.ndarray,
    workers: int = 1,
) -> float:
    """Run SGD over positives and their negatives; returns summed pre-update positive loss."""
    if pairs.shape[0] == 0:
        return 0.0
    negs = np.ascontiguousarray(negs.reshape(pairs.shape[0], -1), dtype=np.int64)
    lrs = np.ascontiguousarray(np.broadcast_to(lrs, (pairs.shape[0],)), dtype=np.float64)
    if workers > 1:
        loss, ok = _sgd_kernel_parallel(m.focus, m.context, pairs, negs, lrs, workers)
    else:
        loss, ok = _sgd_kernel(m.focus, m.context, pairs, negs, lrs)
    if not ok or not np.isfinite(m.context).all():
        raise NumericError("non-finite embedding parameters; lower the learning rate")
    return float(loss)


def update_on_walks(
    m: EmbeddingModel,
    walks: np.ndarray,
    window: int,
    negatives: int,
    tbl: NegativeTable,
    lrs,
    rng: np.random.Generator,
    workers: int = 1,
) -> UpdateStats:
    """Train on a padded batch of walks. ``lrs`` is a scalar or one rate per walk."""
    walks = np.ascontiguousarray(np.atleast_2d(walks), dtype=np.int64)
    skips = draw_skips(walks.shape, window, rng)
    pairs, owner = pairs_from_walks(walks, skips)
    negs = record_and_sample_negatives(tbl, pairs, negatives, rng)
    lr_walk = np.broadcast_to(np.asarray(lrs, dtype=np.float64), (walks.shape[0],))
    loss = apply_updates(m, pairs, negs[:, 1], lr_walk[owner], workers)
    n = pairs.shape[0]
    return UpdateStats(walks.shape[0], n, negs.shape[0], loss / n if n else 0.0)


def update_on_walk(m, walk, window, negatives, tbl, lr, rng) -> UpdateStats:
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    return update_on_walks(m, np.asarray(walk)[None, :], window, negatives, tbl, lr, rng)


class Trainer:
    """Model, negative table and learning-rate progress for one training run.

    Progress is measured in walks consumed out of ``total_walks``.
    """

    def __init__(
        self,
        node_count: int,
        dim: int,
        window: int,
        negatives: int,
        total_walks: int,
        rng: np.random.Generator,
        lr_start: float = LR_START,
        lr_end: float = LR_END,
        workers: int = 1,
    ):
        self.model = init_model(node_count, dim, rng)
        self.table = NegativeTable(node_count)
        self.window = window
        self.negatives = negatives
        self.total_walks = max(total_walks, 1)
        self.lr_start, self.lr_end = lr_start, lr_end
        self.workers = workers
        self.walks_done = 0

    def current_lr(self) -> float:
        return lr_at(min(1.0, self.walks_done / self.total_walks), self.lr_start, self.lr_end)

    def train(self, walks: np.ndarray, rng: np.random.Generator) -> UpdateStats:
        n = walks.shape[0]
        progress = np.minimum(1.0, (self.walks_done + np.arange(n)) / self.total_walks)
        lrs = self.lr_start + progress * (self.lr_end - self.lr_start)
        stats = update_on_walks(
            self.model, walks, self.window, self.negatives, self.table, lrs, rng, self.workers
        )
        self.walks_done += n
        return stats


def export_embeddings(m: EmbeddingModel, ids: list[str], path) -> None:
    """Text export: header "n d", then one line per node with its focus vector."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{m.node_count} {m.dim}\n")
        for name, row in zip(ids, m.focus):
            fh.write(name + " " + " ".join(f"{x:.9g}" for x in row) + "\n")


def load_embeddings(path) -> tuple[list[str], np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        n, d = (int(x) for x in fh.readline().split())
        ids, rows = [], []
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if len(parts) != d + 1:
                raise ValueError(f"expected {d} values for node {parts[0]!r}")
            ids.append(parts[0])
            rows.append([float(x) for x in parts[1:]])
    if len(ids) != n:
        raise ValueError(f"header declares {n} nodes, found {len(ids)}")
    return ids, np.asarray(rows, dtype=np.float64).reshape(n, d)
