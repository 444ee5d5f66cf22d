"""Command line entry point: ``lgwalk {train,eval,synth,sweep,diagnose}``.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiment as ex
from .diagnostics import loss_profile
from .graph import GraphFormatError, read_edge_list, write_edge_list
from .sgns import NumericError, load_embeddings
from .synth import PlantedPartitionSpec, generate, write_labels

log = logging.getLogger("lgwalk")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value configuration file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one key")
    group = p.add_argument_group("configuration keys (override the file)")
    for f in dataclasses.fields(ex.ExperimentConfig):
        group.add_argument("--" + f.name.replace("_", "-"), dest="cfg_" + f.name, default=None, metavar=f.name.upper())


def _config(args) -> ex.ExperimentConfig:
    values = ex.parse_config_file(args.config) if args.config else {}
    for item in args.set:
        if "=" not in item:
            raise ex.ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        values[k.strip()] = v.strip()
    for f in dataclasses.fields(ex.ExperimentConfig):
        v = getattr(args, "cfg_" + f.name)
        if v is not None:
            values[f.name] = v
    return ex.ExperimentConfig.from_mapping(values)


def _ints(text: str) -> tuple:
    return tuple(int(x) for x in text.split(",") if x)


def _floats(text: str) -> tuple:
    return tuple(float(x) for x in text.split(",") if x)


def cmd_train(args) -> int:
    cfg = _config(args)
    report = ex.run_experiment(cfg)
    paths = ex.write_report(report, args.out)
    for method, curves in report.curves.items():
        mean, sd, _ = report.epochs(method)
        print(f"{method:>18}: peak {curves.max(axis=1).mean():.4f}  epochs-to-peak {mean:.2f} (sd {sd:.2f})")
    for row in report.gains:
        print(f"training gain {row['training_gain_pct']:.2f}%  computation gain {row['computation_gain_pct']:.2f}%")
    print(f"wrote {', '.join(str(p) for p in paths.values())}")
    return EXIT_OK


def cmd_eval(args) -> int:
    g = read_edge_list(args.edges, args.directed)
    ids, vecs = load_embeddings(args.embeddings)
    index = g.index_of()
    focus = np.zeros((g.node_count, vecs.shape[1]))
    for name, row in zip(ids, vecs):
        if name not in index:
            raise ex.DataError(f"embedding names unknown node {name!r}")
        focus[index[name]] = row
    cfg = ex.ExperimentConfig(task=args.task, clusters=args.clusters, train_per_class=args.train_per_class,
                              train_fraction=args.train_fraction, dim=vecs.shape[1], seed=args.seed)
    streams = ex.repetition_streams(args.seed, 0)
    labels = None
    if cfg.task != "clustering":
        if not args.labels:
            raise ex.DataError(f"task {cfg.task} needs --labels")
        labels = ex.ingest_labels(args.labels, cfg.task, g, streams["split"], cfg.train_per_class,
                                  cfg.train_fraction)
    q = ex.evaluate_quality(cfg, focus, g, labels, streams["eval"])
    metric = {"clustering": "modularity", "multiclass": "accuracy", "multilabel": "micro_f1"}[cfg.task]
    print(f"{metric} {q:.6f}")
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.preset == "large":
        spec = PlantedPartitionSpec.large_scale()
    else:
        spec = PlantedPartitionSpec()
    if args.sizes:
        k = len(_ints(args.sizes))
        q = np.zeros((k, k))
        if k >= 2:
            q[0, 1] = q[1, 0] = args.q if args.q is not None else spec.q[0][1]
        spec = PlantedPartitionSpec(_ints(args.sizes), spec.p, tuple(map(tuple, q)))
    if args.p is not None or (args.q is not None and not args.sizes):
        q = np.array(spec.q)
        if args.q is not None:
            q[0, 1] = q[1, 0] = args.q
        spec = PlantedPartitionSpec(spec.sizes, args.p if args.p is not None else spec.p, tuple(map(tuple, q)))
    g, labels = generate(spec, np.random.default_rng(args.seed))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_edge_list(g, out / "edges.txt")
    present = g.out_degrees() > 0
    write_labels(labels[present], np.asarray(g.ids)[present], out / "labels.txt")
    if not present.all():
        log.warning("%d isolated nodes omitted from the output files", int((~present).sum()))
    with open(out / "spec.json", "w", encoding="utf-8") as fh:
        json.dump({"sizes": list(spec.sizes), "p": spec.p, "q": [list(r) for r in spec.q], "seed": args.seed},
                  fh, indent=2)
    print(f"{g.node_count} nodes, {g.edge_count} edges -> {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.preset == "node2vec":
        rows = ex.node2vec_search(cfg, _floats(args.node2vec_values))
        ex.write_csv(rows, out / "node2vec.csv")
        best = max(rows, key=lambda r: r["peak_mean"])
        print(f"best node2vec p={best['node2vec_p']} q={best['node2vec_q']} peak {best['peak_mean']:.4f}")
    else:
        _, rows = ex.run_sweep(cfg, _ints(args.grid_rounds), _floats(args.grid_powers), _ints(args.grid_t_primes))
        ex.write_csv(rows, out / "sweep.csv")
        for r in rows:
            print(f"F={r['rounds']:>2} p={r['power']:>4g} t'={r['t_prime']:>2}  "
                  f"train {r['training_gain_pct']:7.2f}%  comp {r['computation_gain_pct']:7.2f}%")
    ex.write_manifest(cfg, out, {"sweep": args.preset or "grid"})
    return EXIT_OK


def cmd_diagnose(args) -> int:
    if args.model:
        if not args.edges:
            raise ex.ConfigError("--model needs --edges")
        g = read_edge_list(args.edges, args.directed)
        m, ids = ex.load_model(args.model)
        if ids != list(g.ids):
            raise ex.DataError("model node ids do not match the edge list")
        prof = loss_profile(m, g, args.n_background, np.random.default_rng(args.seed))
        for k, v in prof.as_row().items():
            print(f"{k} {v:.6g}")
        return EXIT_OK
    cfg = _config(args).replace(diagnostics=True)
    report = ex.run_experiment(cfg)
    paths = ex.write_report(report, args.out)
    print(f"wrote {paths['epochs']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lgwalk", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run an experiment and write CSVs, embeddings and a manifest")
    _add_config_flags(p)
    p.add_argument("--out", default="runs/latest")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score an exported embedding on a downstream task")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--edges", required=True)
    p.add_argument("--labels")
    p.add_argument("--directed", action="store_true")
    p.add_argument("--task", choices=ex.TASKS, default="clustering")
    p.add_argument("--clusters", type=int, default=20)
    p.add_argument("--train-per-class", type=int, default=20)
    p.add_argument("--train-fraction", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="write a planted-partition benchmark (edges.txt, labels.txt)")
    p.add_argument("--preset", choices=("desk", "large"), default="desk")
    p.add_argument("--sizes", help="comma-separated community sizes")
    p.add_argument("-p", type=float, help="intra-community edge probability")
    p.add_argument("-q", type=float, help="edge probability between the first two communities")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="data/synthetic")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("sweep", help="loss-guided gains over a (F, p, t') grid")
    _add_config_flags(p)
    p.add_argument("--grid-rounds", default="2,5,10,20")
    p.add_argument("--grid-powers", default="1,4,32")
    p.add_argument("--grid-t-primes", default="1,2,3,5,10")
    p.add_argument("--preset", choices=("node2vec",), help="search node2vec (p, q) on the baseline instead")
    p.add_argument("--node2vec-values", default="0.25,0.5,1,2")
    p.add_argument("--out", default="runs/sweep")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("diagnose", help="edge/background loss ratio and 90%% quantile spread")
    _add_config_flags(p)
    p.add_argument("--model", help="profile a saved model.npz instead of training")
    p.add_argument("--out", default="runs/diagnose")
    p.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.command == "diagnose":
        # diagnose --model reuses a few config keys directly
        args.edges = args.cfg_edges
        args.directed = (args.cfg_directed or "false").lower() in ("1", "true", "yes")
        args.n_background = int(args.cfg_n_background or 1000)
        args.seed = int(args.cfg_seed or 0)
    try:
        return args.func(args)
    except (ex.ConfigError, argparse.ArgumentTypeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ex.DataError, GraphFormatError, OSError, ValueError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, FloatingPointError) as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
