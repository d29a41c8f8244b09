"""Run the four MC3 searches on the Czech Autoworkers table for a few alphas.

Usage: python3 scripts/czech_search.py [data.csv] [--alpha 1 2 3] [--iters 25000]
"""
import argparse
import time
from pathlib import Path

from loglin import SearchConfig, load_table, posterior_summaries, run_chains

DEFAULT_DATA = Path(__file__).resolve().parents[1] / "tests" / "data" / "czech.csv"
CLASSES = ("decomposable", "graphical-pm", "graphical-laplace", "hierarchical")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("data", nargs="?", default=str(DEFAULT_DATA))
    parser.add_argument("--alpha", type=float, nargs="+", default=[1.0, 2.0, 3.0])
    parser.add_argument("--classes", nargs="+", default=list(CLASSES))
    parser.add_argument("--iters", type=int, default=25_000)
    parser.add_argument("--burnin", type=int, help="default: a fifth of --iters")
    parser.add_argument("--chains", type=int, default=4)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    data = load_table(args.data)
    print(f"{args.data}: N = {int(data.total)}, variables {''.join(data.names)}")
    for model_class in args.classes:
        for alpha in args.alpha:
            config = SearchConfig(model_class, alpha=alpha, iterations=args.iters,
                                  burnin=args.iters // 5 if args.burnin is None else args.burnin, chains=args.chains, seed=args.seed)
            start = time.perf_counter()
            report = posterior_summaries(run_chains(config, data))
            elapsed = time.perf_counter() - start
            print(f"\n{model_class}  alpha={alpha:g}  ({report['distinct_models']} models, "
                  f"acceptance {report['acceptance_rate']:.3f}, {elapsed:.1f} s)")
            for m in report["models"]:
                if m["prob"] > config.threshold:
                    print(f"  {m['formula']:<28} {m['prob']:.3f}")
            print(f"  {report['median_model']:<28} med")


if __name__ == "__main__":
    main()
