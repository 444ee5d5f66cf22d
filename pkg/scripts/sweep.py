"""Hyperparameter sweep over rounds F, power p and prefix length t'.

Defaults to the desk synthetic benchmark; pass --edges/--labels for a real
dataset (for example a multiclass citation graph).

    python scripts/sweep.py --rounds 2,5,10,20 --powers 1,4,32 --t-primes 1,2,3,5,10
"""

import argparse
from pathlib import Path

import numpy as np

from lgwalk import experiment as ex
from lgwalk.synth import PlantedPartitionSpec, generate


def ints(s):
    return tuple(int(x) for x in s.split(","))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--edges")
    ap.add_argument("--labels")
    ap.add_argument("--task", default="multiclass")
    ap.add_argument("--rounds", default="2,5,10,20")
    ap.add_argument("--powers", default="1,4,32")
    ap.add_argument("--t-primes", default="1,2,3,5,10")
    ap.add_argument("--repetitions", type=int, default=5)
    ap.add_argument("--epochs", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/sweep")
    args = ap.parse_args()

    if args.edges:
        base = ex.ExperimentConfig(edges=args.edges, labels=args.labels or "", task=args.task,
                                   repetitions=args.repetitions, epochs=args.epochs, seed=args.seed)
        g = labels = None
    else:
        g, lab = generate(PlantedPartitionSpec(), np.random.default_rng(0))
        labels = list(lab)
        base = ex.desk_synthetic_config(repetitions=args.repetitions, epochs=args.epochs, seed=args.seed)
    _, rows = ex.run_sweep(base, ints(args.rounds), tuple(float(x) for x in args.powers.split(",")),
                           ints(args.t_primes), g, labels)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ex.write_csv(rows, out / "sweep.csv")
    ex.write_manifest(base, out, {"grid": {"rounds": args.rounds, "powers": args.powers, "t_primes": args.t_primes}})
    print(f"{'F':>3} {'p':>5} {'t':>3} {'train %':>9} {'sd %':>7} {'comp %':>9}")
    for r in rows:
        print(f"{r['rounds']:>3} {r['power']:>5g} {r['t_prime']:>3} {r['training_gain_pct']:>9.2f} "
              f"{r['training_sd_pct']:>7.2f} {r['computation_gain_pct']:>9.2f}")


if __name__ == "__main__":
    main()
