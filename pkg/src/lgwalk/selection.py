"""Loss-scored walk selection and the per-epoch training loops."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .graph import AliasSampler, Graph
from .sgns import EmbeddingModel, Trainer, pos_loss_from_dot
from .walks import LossGuided, WalkKind, draw_walks, extend_walks


@dataclass(frozen=True)
class AllScore:
    """Inclusion-weighted sum of loss^power over every pair the walk can emit."""

    power: float = 1.0

    def __post_init__(self):
        if self.power < 0:
            raise ValueError("power must be >= 0")


@dataclass(frozen=True)
class PrefixScore:
    """Sum of loss^power over the first ``t_prime`` edges."""

    t_prime: int = 1
    power: float = 32.0

    def __post_init__(self):
        if self.power < 0:
            raise ValueError("power must be >= 0")
        if self.t_prime < 1:
            raise ValueError("t_prime must be >= 1")


ScoreFn = AllScore | PrefixScore


def _log_pow_losses(m: EmbeddingModel, i: np.ndarray, j: np.ndarray, power: float) -> np.ndarray:
    """log(loss(i, j)^power); -inf marks pairs that should not count."""
    valid = (i >= 0) & (j >= 0)
    ii, jj = np.where(valid, i, 0), np.where(valid, j, 0)
    if power == 0:
        out = np.zeros(ii.shape)
    else:
        loss = pos_loss_from_dot(m.dots(ii, jj))
        with np.errstate(divide="ignore"):
            out = power * np.log(loss)
    return np.where(valid, out, -np.inf)


def log_prefix_scores(m: EmbeddingModel, walks: np.ndarray, t_prime: int, power: float) -> np.ndarray:
    """Log of the prefix score for every row of a padded walk batch."""
    walks = np.atleast_2d(walks)
    edges = min(t_prime, walks.shape[1] - 1)
    if edges < 1:
        return np.full(walks.shape[0], -np.inf)
    terms = _log_pow_losses(m, walks[:, :edges], walks[:, 1 : edges + 1], power)
    return logsumexp(terms, axis=1)


def log_all_scores(m: EmbeddingModel, walks: np.ndarray, window: int, power: float) -> np.ndarray:
    walks = np.atleast_2d(walks)
    width = walks.shape[1]
    terms = []
    for d in range(1, min(window, width - 1) + 1):
        w = np.log((window - d + 1) / window)
        a, b = walks[:, :-d], walks[:, d:]
        terms.append(_log_pow_losses(m, a, b, power) + w)
        terms.append(_log_pow_losses(m, b, a, power) + w)
    if not terms:
        return np.full(walks.shape[0], -np.inf)
    return logsumexp(np.concatenate(terms, axis=1), axis=1)


def lscore_prefix(m: EmbeddingModel, prefix, t_prime: int, power: float) -> float:
    prefix = np.asarray(prefix, dtype=np.int64)
    if prefix.shape[0] < t_prime + 1:
        raise ValueError(f"prefix needs at least {t_prime + 1} nodes")
    return float(np.exp(log_prefix_scores(m, prefix[None, :], t_prime, power)[0]))


def lscore_all(m: EmbeddingModel, walk, window: int, power: float) -> float:
    """Expected sum of loss^power over the walk's pairs under random skips.

    A pair at offset d is emitted with probability (window - d + 1) / window.
    """
    walk = np.asarray(walk, dtype=np.int64)
    return float(np.exp(log_all_scores(m, walk[None, :], window, power)[0]))


def weighted_sample_wor_log(log_weights, k: int, rng: np.random.Generator) -> np.ndarray:
    """Exponential-race sample of k indices given log weights.

    Key of item i is Exp(1) / w_i; the k smallest keys win. Zero-weight
    items (log weight -inf) only fill the sample once positive items run
    out, uniformly at random among themselves.
    """
    log_weights = np.asarray(log_weights, dtype=np.float64)
    n = log_weights.shape[0]
    if k > n:
        raise ValueError(f"cannot sample {k} of {n} items")
    if k < 0:
        raise ValueError("k must be >= 0")
    log_keys = np.log(rng.standard_exponential(n)) - log_weights
    tiebreak = rng.random(n)
    order = np.lexsort((tiebreak, log_keys))
    return np.sort(order[:k])


def weighted_sample_wor(weights, k: int, rng: np.random.Generator) -> np.ndarray:
    """Sequential weighted sampling without replacement; returns sorted indices."""
    weights = np.asarray(weights, dtype=np.float64)
    if (weights < 0).any():
        raise ValueError("weights must be nonnegative")
    with np.errstate(divide="ignore"):
        return weighted_sample_wor_log(np.log(weights), k, rng)


@dataclass(frozen=True)
class RoundPlan:
    rounds: int
    node_count: int

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds per epoch must be >= 1")
        if self.selection_size < 1:
            raise ValueError(f"|V| / F = {self.node_count}/{self.rounds} selects no walks")

    @property
    def selection_size(self) -> int:
        return self.node_count // self.rounds


@dataclass
class EpochStats:
    walks_trained: int = 0
    positive_pairs: int = 0
    negative_pairs: int = 0
    candidates_scored: int = 0
    loss_evaluations: int = 0
    loss_sum: float = 0.0
    start_nodes: list = field(default_factory=list)

    @property
    def mean_loss(self) -> float:
        return self.loss_sum / self.positive_pairs if self.positive_pairs else 0.0

    def starts(self) -> np.ndarray:
        return np.concatenate(self.start_nodes) if self.start_nodes else np.empty(0, np.int64)

    def add_training(self, walks: np.ndarray, stats) -> None:
        self.walks_trained += stats.walks
        self.positive_pairs += stats.pairs
        self.negative_pairs += stats.negatives
        self.loss_sum += stats.mean_loss * stats.pairs
        self.start_nodes.append(walks[:, 0].copy())


def run_baseline_epoch(
    g: Graph, s: AliasSampler, kind: WalkKind, t: int, trainer: Trainer, rng: np.random.Generator
) -> EpochStats:
    """One walk per node in shuffled order, each trained as drawn."""
    stats = EpochStats()
    trainer.table.refresh()
    starts = rng.permutation(g.node_count)
    if isinstance(kind, LossGuided):
        # each walk reads the model left by the previous update
        for v in starts:
            w, evals = draw_walks(g, s, kind, [v], t, rng, trainer.model)
            stats.loss_evaluations += evals
            stats.add_training(w, trainer.train(w, rng))
        return stats
    walks, _ = draw_walks(g, s, kind, starts, t, rng, trainer.model)
    stats.add_training(walks, trainer.train(walks, rng))
    return stats


def score_candidates(
    m: EmbeddingModel, walks: np.ndarray, score: ScoreFn, window: int
) -> tuple[np.ndarray, int]:
    """Log scores of candidate walks plus the number of loss evaluations used."""
    lengths = (walks >= 0).sum(axis=1)
    if isinstance(score, PrefixScore):
        evals = int(np.minimum(lengths - 1, score.t_prime).sum())
        return log_prefix_scores(m, walks, score.t_prime, score.power), evals
    if isinstance(score, AllScore):
        evals = 0
        for d in range(1, window + 1):
            evals += 2 * int(np.maximum(lengths - d, 0).sum())
        return log_all_scores(m, walks, window, score.power), evals
    raise TypeError(f"unknown score function {score!r}")


def run_loss_guided_epoch(
    g: Graph,
    s: AliasSampler,
    kind: WalkKind,
    t: int,
    score: ScoreFn,
    plan: RoundPlan,
    trainer: Trainer,
    rng: np.random.Generator,
) -> EpochStats:
    """F rounds: draw one candidate per node, score, select |V|/F by loss, train."""
    stats = EpochStats()
    nodes = np.arange(g.node_count)
    prefix_len = score.t_prime if isinstance(score, PrefixScore) else t
    if prefix_len > t:
        raise ValueError("t_prime cannot exceed t")
    for _ in range(plan.rounds):
        trainer.table.refresh()
        cand, evals = draw_walks(g, s, kind, nodes, prefix_len, rng, trainer.model)
        log_scores, score_evals = score_candidates(trainer.model, cand, score, trainer.window)
        stats.candidates_scored += cand.shape[0]
        stats.loss_evaluations += evals + score_evals
        chosen = weighted_sample_wor_log(log_scores, plan.selection_size, rng)
        chosen = chosen[rng.permutation(chosen.shape[0])]
        walks = cand[chosen]
        if prefix_len < t:
            walks, evals = extend_walks(g, s, walks, kind, t, rng, trainer.model)
            stats.loss_evaluations += evals
        stats.add_training(walks, trainer.train(walks, rng))
    return stats
