"""Expected positive pairs per walk: closed form vs Monte Carlo over skip draws."""

import argparse

import numpy as np

from lgwalk.sgns import draw_skips, expected_pair_count, pairs_from_walks


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--t", type=int, default=10)
    ap.add_argument("--window", type=int, default=10)
    ap.add_argument("--walks", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    walks = np.tile(np.arange(args.t + 1), (args.walks, 1))
    pairs, _ = pairs_from_walks(walks, draw_skips(walks.shape, args.window, rng))
    print(f"closed form {expected_pair_count(args.t, args.window):.4f}")
    print(f"monte carlo {pairs.shape[0] / args.walks:.4f}  ({args.walks} walks)")


if __name__ == "__main__":
    main()
