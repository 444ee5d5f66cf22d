"""Experiment configuration, the epoch protocol, repetitions, sweeps and output files."""

from __future__ import annotations

import csv
import dataclasses
import itertools
import json
import os
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .diagnostics import loss_profile
from .evaluation import (
    CostModel,
    computation_gain,
    epochs_to_peak,
    kmeans,
    modularity,
    ovr_logreg_fit,
    predict_multiclass,
    predict_multilabel,
    training_gain,
)
from .graph import AliasSampler, Graph, read_edge_list
from .selection import (
    AllScore,
    EpochStats,
    PrefixScore,
    RoundPlan,
    run_baseline_epoch,
    run_loss_guided_epoch,
)
from .sgns import EmbeddingModel, Trainer, expected_pair_count, export_embeddings
from .synth import community_training_share
from .walks import LossGuided, Node2Vec, Simple

TASKS = ("clustering", "multiclass", "multilabel")
METHODS = ("baseline", "loss-guided", "loss-guided-walks")
NODE2VEC_GRID = (0.25, 0.5, 1.0, 2.0)


class ConfigError(ValueError):
    pass


class DataError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    edges: str = ""
    labels: str = ""
    directed: bool = False
    task: str = "clustering"
    clusters: int = 20
    train_per_class: int = 20
    train_fraction: float = 0.0
    method: str = "loss-guided"
    walk: str = "deepwalk"
    node2vec_p: float = 1.0
    node2vec_q: float = 1.0
    t: int = 10
    window: int = 10
    negatives: int = 5
    dim: int = 0
    epochs: int = 10
    rounds: int = 10
    score: str = "prefix"
    t_prime: int = 1
    power: float = 32.0
    walk_power: float = 1.0
    repetitions: int = 1
    seed: int = 0
    lr_start: float = 0.025
    lr_end: float = 0.0001
    workers: int = 1
    diagnostics: bool = False
    n_background: int = 1000

    def __post_init__(self):
        if not self.dim:
            self.dim = 16 if self.task == "clustering" else 128
        self.validate()

    def validate(self) -> None:
        checks = [
            (self.task in TASKS, f"task must be one of {TASKS}"),
            (self.method in METHODS, f"method must be one of {METHODS}"),
            (self.walk in ("deepwalk", "node2vec"), "walk must be deepwalk or node2vec"),
            (self.score in ("prefix", "all"), "score must be prefix or all"),
            (self.t >= 1 and self.window >= 1 and self.negatives >= 0, "t, window >= 1, negatives >= 0"),
            (self.dim >= 1 and self.epochs >= 1 and self.repetitions >= 1, "dim, epochs, repetitions >= 1"),
            (self.rounds >= 1, "rounds >= 1"),
            (1 <= self.t_prime <= self.t, "t_prime must lie in [1, t]"),
            (self.power >= 0 and self.walk_power >= 0, "powers must be >= 0"),
            (self.node2vec_p > 0 and self.node2vec_q > 0, "node2vec p, q must be positive"),
            (0 < self.lr_end <= self.lr_start, "need 0 < lr_end <= lr_start"),
            (0 <= self.train_fraction < 1, "train_fraction must lie in [0, 1)"),
            (self.clusters >= 1 and self.train_per_class >= 1, "clusters, train_per_class >= 1"),
            (self.workers >= 1 and self.n_background >= 1, "workers, n_background >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    @property
    def walk_kind(self):
        return Node2Vec(self.node2vec_p, self.node2vec_q) if self.walk == "node2vec" else Simple()

    @property
    def score_fn(self):
        return PrefixScore(self.t_prime, self.power) if self.score == "prefix" else AllScore(self.power)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_mapping(cls, values: dict) -> "ExperimentConfig":
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            key = key.replace("-", "_")
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}")
            kwargs[key] = _coerce(raw, types[key], key)
        return cls(**kwargs)


def _coerce(raw, typ, key):
    if not isinstance(raw, str):
        return raw
    try:
        if typ in ("bool", bool):
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ in ("int", int):
            return int(raw)
        if typ in ("float", float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return raw


def parse_config_file(path) -> dict:
    """Flat ``key = value`` file; '#' starts a comment."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key] = value
    return values


def desk_synthetic_config(**overrides) -> ExperimentConfig:
    """Defaults for the three-community benchmark at desk scale.

    lr_start was fit on baseline runs alone (held-out seeds); every other
    value is the standard protocol.
    """
    base = dict(task="multiclass", train_fraction=0.5, dim=10, t=10, window=10, negatives=5,
                epochs=10, repetitions=10, rounds=10, score="prefix", t_prime=1, power=32.0,
                lr_start=0.1, method="loss-guided")
    base.update(overrides)
    return ExperimentConfig(**base)


# ---------------------------------------------------------------------- labels


@dataclass
class Labels:
    values: list  # class per node, or a set of labels per node
    train_idx: np.ndarray
    eval_idx: np.ndarray
    multilabel: bool = False


def read_label_file(path, g: Graph, task: str) -> list:
    index = g.index_of()
    multilabel = task == "multilabel"
    values: list = [set() if multilabel else None for _ in range(g.node_count)]
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(None, 1)
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected 'node label'")
            node, lab = parts
            if node not in index:
                raise DataError(f"label file names unknown node {node!r}")
            if multilabel:
                values[index[node]] |= {x for x in lab.replace(" ", ",").split(",") if x}
            else:
                values[index[node]] = lab.strip()
    if not multilabel:
        missing = [g.ids[i] for i, v in enumerate(values) if v is None]
        if missing:
            raise DataError(f"{len(missing)} nodes have no class label, e.g. {missing[0]!r}")
    return values


def split_labels(values: list, task: str, rng: np.random.Generator,
                 train_per_class: int = 20, train_fraction: float = 0.0) -> Labels:
    """Seeded train/eval split: n nodes per class, or a uniform fraction."""
    n = len(values)
    if task == "multilabel":
        labeled = np.array([i for i, v in enumerate(values) if v], dtype=np.int64)
        frac = train_fraction or 0.5
        perm = rng.permutation(labeled)
        k = int(round(frac * labeled.shape[0]))
        return Labels(values, np.sort(perm[:k]), np.sort(perm[k:]), multilabel=True)
    arr = np.asarray(values)
    if train_fraction > 0:
        perm = rng.permutation(n)
        k = int(round(train_fraction * n))
        return Labels(list(values), np.sort(perm[:k]), np.sort(perm[k:]))
    train = []
    for c in np.unique(arr):
        members = np.flatnonzero(arr == c)
        train.append(rng.choice(members, size=min(train_per_class, members.shape[0]), replace=False))
    train_idx = np.sort(np.concatenate(train))
    return Labels(list(values), train_idx, np.setdiff1d(np.arange(n), train_idx))


def ingest_labels(path, task: str, g: Graph, rng: np.random.Generator,
                  train_per_class: int = 20, train_fraction: float = 0.0) -> Labels:
    return split_labels(read_label_file(path, g, task), task, rng, train_per_class, train_fraction)


# --------------------------------------------------------------------- running


def evaluate_quality(cfg: ExperimentConfig, focus: np.ndarray, g: Graph, labels: Labels | None,
                     rng: np.random.Generator) -> float:
    if cfg.task == "clustering":
        return modularity(g, kmeans(focus, min(cfg.clusters, g.node_count), rng).labels)
    clf = ovr_logreg_fit(focus, labels.values, labels.train_idx)
    if cfg.task == "multiclass":
        return predict_multiclass(clf, focus, labels.values, labels.eval_idx)
    return predict_multilabel(clf, focus, labels.values, labels.eval_idx)


def repetition_streams(seed: int, rep: int) -> dict:
    """Independent generators for split, training, evaluation and diagnostics."""
    names = ("split", "train", "eval", "diag")
    seqs = np.random.SeedSequence([seed + rep]).spawn(len(names))
    return {name: np.random.default_rng(s) for name, s in zip(names, seqs)}


def train_run(
    cfg: ExperimentConfig,
    g: Graph,
    sampler: AliasSampler,
    method: str,
    rng: np.random.Generator,
    on_epoch: Callable[[int, EpochStats, Trainer], None] | None = None,
) -> Trainer:
    """Epoch 1 is always a baseline epoch; later epochs follow ``method``."""
    trainer = Trainer(g.node_count, cfg.dim, cfg.window, cfg.negatives, cfg.epochs * g.node_count,
                      rng, cfg.lr_start, cfg.lr_end, cfg.workers)
    kind = cfg.walk_kind
    plan = RoundPlan(cfg.rounds, g.node_count) if method == "loss-guided" else None
    for epoch in range(1, cfg.epochs + 1):
        if epoch == 1 or method == "baseline":
            stats = run_baseline_epoch(g, sampler, kind, cfg.t, trainer, rng)
        elif method == "loss-guided":
            stats = run_loss_guided_epoch(g, sampler, kind, cfg.t, cfg.score_fn, plan, trainer, rng)
        else:
            stats = run_baseline_epoch(g, sampler, LossGuided(cfg.walk_power), cfg.t, trainer, rng)
        if on_epoch is not None:
            on_epoch(epoch, stats, trainer)
    return trainer


@dataclass
class RunReport:
    config: ExperimentConfig
    curves: dict = field(default_factory=dict)       # method -> (reps, epochs)
    rows: list = field(default_factory=list)         # per (method, rep, epoch)
    gains: list = field(default_factory=list)
    models: dict = field(default_factory=dict)       # method -> model of repetition 0
    start_log: dict = field(default_factory=dict)    # method -> [rep][epoch] start nodes
    ids: list = field(default_factory=list)

    def epochs(self, method: str):
        return epochs_to_peak(list(self.curves[method]))


def cost_model(cfg: ExperimentConfig, method: str, measured_per_node: float = 0.0) -> CostModel:
    pairs = expected_pair_count(cfg.t, cfg.window)
    if method == "baseline":
        return CostModel(pairs, cfg.negatives)
    if method == "loss-guided-walks":
        return CostModel(pairs, cfg.negatives, method="measured", measured=measured_per_node)
    return CostModel(pairs, cfg.negatives, cfg.rounds, cfg.t_prime,
                     "prefix" if cfg.score == "prefix" else "all")


def gain_row(cfg: ExperimentConfig, method: str, curves, baseline_curves, measured_per_node=0.0) -> dict:
    e_m, sd_m, _ = epochs_to_peak(list(curves))
    e_b, _, _ = epochs_to_peak(list(baseline_curves))
    cost = cost_model(cfg, method, measured_per_node)
    return {
        "method": method,
        "score": cfg.score if method == "loss-guided" else "",
        "t_prime": cfg.t_prime if method == "loss-guided" and cfg.score == "prefix" else "",
        "power": cfg.power if method == "loss-guided" else cfg.walk_power,
        "rounds": cfg.rounds if method == "loss-guided" else 1,
        "epochs_method": e_m,
        "epochs_method_sd": sd_m,
        "epochs_baseline": e_b,
        "training_gain_pct": 100 * training_gain(e_m, e_b),
        "training_sd_pct": 100 * sd_m / e_b,
        "computation_gain_pct": 100 * computation_gain(e_m, e_b, cost),
        "cost_ratio": cost.total / cost.train,
    }


def run_experiment(cfg: ExperimentConfig, g: Graph | None = None, labels: list | None = None,
                   methods: tuple | None = None) -> RunReport:
    """Run every method for ``cfg.repetitions`` seeded repetitions.

    A baseline run is always included so gains can be computed. ``labels``
    may be given in-process (class per node or label sets); otherwise they
    are read from ``cfg.labels``.
    """
    cfg.validate()
    if g is None:
        if not cfg.edges:
            raise ConfigError("no edge list given")
        g = read_edge_list(cfg.edges, cfg.directed)
    if cfg.task != "clustering" and labels is None:
        if not cfg.labels:
            raise DataError(f"task {cfg.task} needs a label file")
        labels = read_label_file(cfg.labels, g, cfg.task)
    if labels is not None and len(labels) != g.node_count:
        raise DataError("label count does not match node count")
    if methods is None:
        methods = ("baseline",) if cfg.method == "baseline" else ("baseline", cfg.method)

    sampler = AliasSampler.build(g)
    report = RunReport(cfg, ids=list(g.ids))
    if cfg.task == "multiclass":
        classes = sorted(set(labels))
        class_index = np.searchsorted(classes, np.asarray(labels))
    per_node_evals: dict = {m: [] for m in methods}
    for method in methods:
        curves, starts_all = [], []
        for rep in range(cfg.repetitions):
            streams = repetition_streams(cfg.seed, rep)
            split = None
            if cfg.task != "clustering":
                split = split_labels(labels, cfg.task, streams["split"], cfg.train_per_class, cfg.train_fraction)
            curve, starts = [], []

            def on_epoch(epoch, stats, trainer, rep=rep, method=method, curve=curve, starts=starts, split=split):
                model = trainer.model
                q = evaluate_quality(cfg, model.focus, g, split, streams["eval"])
                curve.append(q)
                starts.append(stats.starts())
                per_node_evals[method].append(stats.loss_evaluations / g.node_count)
                row = {
                    "method": method, "repetition": rep, "epoch": epoch, "quality": q,
                    "walks_trained": stats.walks_trained, "positive_pairs": stats.positive_pairs,
                    "negative_pairs": stats.negative_pairs, "candidates_scored": stats.candidates_scored,
                    "loss_evaluations": stats.loss_evaluations, "mean_loss": stats.mean_loss,
                }
                if cfg.task == "multiclass":
                    share = community_training_share([stats.starts()], class_index, len(classes))[0]
                    row.update({f"share_{c}": float(s) for c, s in zip(classes, share)})
                if cfg.diagnostics:
                    row.update(loss_profile(model, g, cfg.n_background, streams["diag"]).as_row())
                report.rows.append(row)

            trainer = train_run(cfg, g, sampler, method, streams["train"], on_epoch)
            if rep == 0:
                report.models[method] = trainer.model
            curves.append(curve)
            starts_all.append(starts)
        report.curves[method] = np.asarray(curves)
        report.start_log[method] = starts_all

    for method in methods:
        if method == "baseline" or "baseline" not in report.curves:
            continue
        report.gains.append(gain_row(cfg, method, report.curves[method], report.curves["baseline"],
                                     float(np.mean(per_node_evals[method]))))
    return report


def run_sweep(base: ExperimentConfig, rounds=(2, 5, 10, 20), powers=(1, 4, 32), t_primes=(1, 2, 3, 5, 10),
              g: Graph | None = None, labels=None) -> tuple[RunReport, list]:
    """Loss-guided gains over a (F, p, t') grid against one shared baseline run."""
    baseline = run_experiment(base.replace(method="baseline"), g, labels)
    if g is None:
        g = read_edge_list(base.edges, base.directed)
    if base.task != "clustering" and labels is None:
        labels = read_label_file(base.labels, g, base.task)
    rows = []
    for f, p, tp in itertools.product(rounds, powers, t_primes):
        cfg = base.replace(method="loss-guided", score="prefix", rounds=f, power=float(p), t_prime=tp)
        cfg.validate()
        rep = run_experiment(cfg, g, labels, methods=("loss-guided",))
        rows.append(gain_row(cfg, "loss-guided", rep.curves["loss-guided"], baseline.curves["baseline"]))
    return baseline, rows


def node2vec_search(base: ExperimentConfig, values=NODE2VEC_GRID, g=None, labels=None) -> list:
    """Baseline peak quality for each node2vec (p, q) pair on the grid."""
    rows = []
    for p, q in itertools.product(values, values):
        cfg = base.replace(method="baseline", walk="node2vec", node2vec_p=p, node2vec_q=q)
        rep = run_experiment(cfg, g, labels)
        curves = rep.curves["baseline"]
        rows.append({"node2vec_p": p, "node2vec_q": q, "peak_mean": float(curves.max(axis=1).mean()),
                     "epochs_to_peak": rep.epochs("baseline")[0]})
    return rows


# --------------------------------------------------------------------- outputs


def version_string() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], capture_output=True,
                             text=True, cwd=Path(__file__).parent, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def write_csv(rows: list, path) -> None:
    fields: list = []
    for row in rows:
        fields.extend(k for k in row if k not in fields)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(float(v)) if isinstance(v, (float, np.floating)) else v
                             for k, v in row.items()})


def write_manifest(cfg: ExperimentConfig, out_dir, extra: dict | None = None) -> None:
    manifest = {
        "config": cfg.as_dict(),
        "repetition_seeds": [cfg.seed + r for r in range(cfg.repetitions)],
        "version": version_string(),
    }
    manifest.update(extra or {})
    with open(Path(out_dir) / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def save_model(m: EmbeddingModel, ids, path) -> None:
    np.savez(path, focus=m.focus, context=m.context, ids=np.asarray(ids))


def load_model(path) -> tuple[EmbeddingModel, list]:
    with np.load(path) as data:
        return EmbeddingModel(data["focus"].copy(), data["context"].copy()), [str(x) for x in data["ids"]]


def write_report(report: RunReport, out_dir) -> dict:
    """Write epochs.csv, gains.csv, embeddings.txt, model.npz and manifest.json."""
    out = Path(out_dir)
    os.makedirs(out, exist_ok=True)
    cfg = report.config
    method = cfg.method if cfg.method in report.models else "baseline"
    paths = {
        "epochs": out / "epochs.csv",
        "gains": out / "gains.csv",
        "embeddings": out / "embeddings.txt",
        "model": out / "model.npz",
    }
    write_csv(report.rows, paths["epochs"])
    write_csv(report.gains, paths["gains"])
    export_embeddings(report.models[method], report.ids, paths["embeddings"])
    save_model(report.models[method], report.ids, paths["model"])
    write_manifest(cfg, out, {"exported_method": method})
    return paths
