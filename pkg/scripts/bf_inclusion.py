"""Posterior inclusion of one edge under decomposable search across alphas.

Usage: python3 scripts/bf_inclusion.py [data.csv] [--edge bf] [--alpha 1 2 3 32 64 128]
"""
import argparse
from pathlib import Path

from loglin import SearchConfig, load_table, posterior_summaries, run_chains

DEFAULT_DATA = Path(__file__).resolve().parents[1] / "tests" / "data" / "czech.csv"


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("data", nargs="?", default=str(DEFAULT_DATA))
    parser.add_argument("--edge", default="bf")
    parser.add_argument("--class", dest="model_class", default="decomposable")
    parser.add_argument("--alpha", type=float, nargs="+",
                        default=[1.0, 2.0, 3.0, 32.0, 64.0, 128.0])
    parser.add_argument("--iters", type=int, default=25_000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    data = load_table(args.data)
    print(f"{'alpha':>8}  P({args.edge})")
    for alpha in args.alpha:
        config = SearchConfig(args.model_class, alpha=alpha, iterations=args.iters,
                              burnin=args.iters // 5, seed=args.seed)
        report = posterior_summaries(run_chains(config, data))
        print(f"{alpha:>8g}  {report['inclusion'][args.edge]:.3f}")


if __name__ == "__main__":
    main()
