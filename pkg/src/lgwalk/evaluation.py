"""Downstream quality metrics and training/computation gain accounting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, log_expit

from .graph import Graph

# ---------------------------------------------------------------- clustering


def _kmeans_pp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        idx = rng.choice(n, p=d2 / total) if total > 0 else rng.integers(n)
        centers[c] = x[idx]
        d2 = np.minimum(d2, ((x - centers[c]) ** 2).sum(axis=1))
    return centers


def _sq_dists(x, centers):
    return (
        (x**2).sum(axis=1)[:, None] - 2 * x @ centers.T + (centers**2).sum(axis=1)[None, :]
    ).clip(min=0)


def lloyd(x, centers, max_iter=300, tol=1e-4):
    """Lloyd iterations from given centers.

    Returns (labels, inertia, inertia trace). Empty clusters are re-seeded at
    the point farthest from its current center.
    """
    trace = []
    prev = np.inf
    for _ in range(max_iter):
        d2 = _sq_dists(x, centers)
        labels = d2.argmin(axis=1)
        inertia = float(d2[np.arange(x.shape[0]), labels].sum())
        trace.append(inertia)
        if np.isfinite(prev) and prev - inertia <= tol * prev:
            break
        prev = inertia
        new = centers.copy()
        counts = np.bincount(labels, minlength=centers.shape[0])
        sums = np.zeros_like(centers)
        np.add.at(sums, labels, x)
        nonempty = counts > 0
        new[nonempty] = sums[nonempty] / counts[nonempty, None]
        if not nonempty.all():
            far = d2[np.arange(x.shape[0]), labels].argsort()[::-1]
            for slot, c in enumerate(np.flatnonzero(~nonempty)):
                new[c] = x[far[slot]]
        centers = new
    d2 = _sq_dists(x, centers)
    labels = d2.argmin(axis=1)
    return labels, float(d2[np.arange(x.shape[0]), labels].sum()), trace


@dataclass
class KMeansResult:
    labels: np.ndarray
    inertia: float
    restart_inertias: list


def kmeans(points, k: int, rng: np.random.Generator, n_init=10, max_iter=300, tol=1e-4) -> KMeansResult:
    """k-means++ seeded Lloyd with restarts; the lowest-inertia restart wins."""
    x = np.asarray(points, dtype=np.float64)
    if not 1 <= k <= x.shape[0]:
        raise ValueError(f"k must be in [1, {x.shape[0]}]")
    best = None
    inertias = []
    for _ in range(n_init):
        labels, inertia, _ = lloyd(x, _kmeans_pp(x, k, rng), max_iter, tol)
        inertias.append(inertia)
        if best is None or inertia < best[1]:
            best = (labels, inertia)
    return KMeansResult(best[0], best[1], inertias)


def modularity(g: Graph, assignment) -> float:
    """Weighted modularity Q = sum_c [ e_c / m - (deg_c / 2m)^2 ].

    Directed inputs are read as undirected: every stored arc is treated as
    half of a symmetric edge weight.
    """
    labels = np.asarray(assignment)
    _, labels = np.unique(labels, return_inverse=True)
    src, dst, w = g.arcs()
    if not g.directed:
        two_m = w.sum()
    else:
        two_m = 2 * w.sum()
        src, dst, w = np.concatenate([src, dst]), np.concatenate([dst, src]), np.concatenate([w, w])
    if two_m <= 0:
        raise ValueError("modularity is undefined on a graph with zero total weight")
    k = np.bincount(src, weights=w, minlength=g.node_count)
    same = labels[src] == labels[dst]
    # sum_{ij} A_ij delta over both arc directions
    inner = w[same].sum() / two_m
    deg_c = np.bincount(labels, weights=k)
    return float(inner - ((deg_c / two_m) ** 2).sum())


# ------------------------------------------------------------ classification


@dataclass
class OvRClassifier:
    classes: np.ndarray
    coef: np.ndarray
    intercept: np.ndarray
    absent: list

    def decision_function(self, x) -> np.ndarray:
        scores = np.asarray(x) @ self.coef.T + self.intercept
        if self.absent:
            scores[:, self.absent] = -np.inf
        return scores


def _fit_binary(x, y, C, max_iter, tol):
    # minimize 0.5 |w|^2 + C * sum logloss, intercept unpenalized
    n, d = x.shape
    sign = np.where(y, 1.0, -1.0)

    def f(theta):
        w, b = theta[:d], theta[d]
        z = sign * (x @ w + b)
        loss = -C * log_expit(z).sum() + 0.5 * w @ w
        r = -C * sign * expit(-z)
        return loss, np.append(x.T @ r + w, r.sum())

    res = minimize(f, np.zeros(d + 1), jac=True, method="L-BFGS-B",
                   options={"maxiter": max_iter, "gtol": tol})
    return res.x[:d], res.x[d]


def is_multilabel(labels) -> bool:
    return len(labels) > 0 and isinstance(labels[0], (set, frozenset, list, tuple))


def ovr_logreg_fit(features, labels, train_idx, C=1.0, max_iter=100, tol=1e-4, classes=None) -> OvRClassifier:
    """One binary L2 logistic regression per class.

    ``labels`` is either a per-node class array or a list of per-node label
    sets. Classes missing from the training split never get predicted.
    """
    x = np.asarray(features, dtype=np.float64)
    train_idx = np.asarray(train_idx)
    multilabel = is_multilabel(labels)
    if classes is None:
        if multilabel:
            classes = np.array(sorted({c for s in labels for c in s}))
        else:
            classes = np.unique(np.asarray(labels))
    classes = np.asarray(classes)
    xt = x[train_idx]
    coef = np.zeros((len(classes), x.shape[1]))
    intercept = np.zeros(len(classes))
    absent = []
    for ci, c in enumerate(classes):
        if multilabel:
            y = np.array([c in labels[i] for i in train_idx])
        else:
            y = np.asarray(labels)[train_idx] == c
        if not y.any():
            absent.append(ci)
            continue
        coef[ci], intercept[ci] = _fit_binary(xt, y, C, max_iter, tol)
    return OvRClassifier(classes, coef, intercept, absent)


def predict_multiclass(clf: OvRClassifier, features, labels, eval_idx) -> float:
    """Accuracy of argmax class prediction on ``eval_idx``."""
    eval_idx = np.asarray(eval_idx)
    scores = clf.decision_function(np.asarray(features)[eval_idx])
    pred = clf.classes[scores.argmax(axis=1)]
    return float((pred == np.asarray(labels)[eval_idx]).mean())


def micro_f1(truth: list, predicted: list) -> float:
    tp = fp = fn = 0
    for t, p in zip(truth, predicted):
        t, p = set(t), set(p)
        tp += len(t & p)
        fp += len(p - t)
        fn += len(t - p)
    return 2 * tp / (2 * tp + fp + fn) if tp + fp + fn else 1.0


def predict_multilabel(clf: OvRClassifier, features, label_sets, eval_idx) -> float:
    """Micro-F1 when each node predicts its top-n labels, n = its true label count."""
    eval_idx = np.asarray(eval_idx)
    scores = clf.decision_function(np.asarray(features)[eval_idx])
    order = np.argsort(-scores, axis=1, kind="stable")
    truth = [set(label_sets[i]) for i in eval_idx]
    predicted = [set(clf.classes[order[r, : len(truth[r])]]) for r in range(len(eval_idx))]
    return micro_f1(truth, predicted)


# ---------------------------------------------------------------------- gains


def epochs_to_peak(curves, fraction: float = 0.95) -> tuple[float, float, list]:
    """Mean and sample SD of the first 1-based epoch reaching fraction * peak.

    ``curves`` is one curve or a list of per-repetition curves; the peak is
    taken per repetition. The per-repetition epochs are returned too.
    """
    if len(curves) == 0:
        raise ValueError("empty quality curve")
    if np.ndim(curves[0]) > 0:
        curves = [np.asarray(c, dtype=np.float64) for c in curves]
    else:
        curves = [np.asarray(curves, dtype=np.float64)]
    epochs = []
    for c in curves:
        if c.size == 0:
            raise ValueError("empty quality curve")
        epochs.append(int(np.argmax(c >= fraction * c.max())) + 1)
    sd = float(np.std(epochs, ddof=1)) if len(epochs) > 1 else 0.0
    return float(np.mean(epochs)), sd, epochs


def training_gain(e_method: float, e_baseline: float) -> float:
    if e_baseline <= 0:
        raise ValueError("baseline epochs must be positive")
    return 1.0 - e_method / e_baseline


@dataclass(frozen=True)
class CostModel:
    """Per-epoch costs in loss/gradient evaluations per node."""

    pairs_per_walk: float
    negatives: int
    rounds: int = 1
    t_prime: int = 1
    method: str = "baseline"  # baseline | prefix | all | measured
    measured: float = 0.0  # loss evaluations per node per epoch, for method="measured"

    def __post_init__(self):
        if self.pairs_per_walk <= 0 or self.negatives < 0 or self.rounds < 1 or self.t_prime < 1:
            raise ValueError("invalid cost model")
        if self.measured < 0:
            raise ValueError("invalid cost model")
        if self.method not in ("baseline", "prefix", "all", "measured"):
            raise ValueError(f"unknown method {self.method!r}")

    @property
    def train(self) -> float:
        return self.pairs_per_walk * (self.negatives + 1)

    @property
    def preprocessing(self) -> float:
        if self.method == "prefix":
            return self.rounds * self.t_prime
        if self.method == "all":
            return self.rounds * self.pairs_per_walk
        if self.method == "measured":
            return self.measured
        return 0.0

    @property
    def total(self) -> float:
        return self.preprocessing + self.train

    def per_epoch(self, node_count: int) -> float:
        return node_count * self.total


def computation_gain(e_method: float, e_baseline: float, cost: CostModel) -> float:
    if e_baseline <= 0:
        raise ValueError("baseline epochs must be positive")
    return 1.0 - (cost.total * e_method) / (cost.train * e_baseline)
