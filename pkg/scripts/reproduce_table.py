"""Coverage / PI-size table over methods x corrections x target coverage.

    python scripts/reproduce_table.py --alphas 0.4 0.3 --trials 20 --csv results.csv
"""

import argparse
from pathlib import Path

from polarcp.evaluation import format_table, reports_to_csv, run_protocol, train_heads
from polarcp.synthdata import GeneratorConfig, generate


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--alphas", type=float, nargs="+", default=[0.4, 0.3])
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--n-cal", type=int, default=500)
    p.add_argument("--n-test", type=int, default=2000)
    p.add_argument("--n-train", type=int, default=1000)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--csv", type=Path)
    args = p.parse_args()

    pool = generate(GeneratorConfig(n=args.n_cal + args.n_test, seed=args.seed))
    train_data = generate(GeneratorConfig(n=args.n_train, seed=args.seed + 1))
    heads = train_heads(train_data, args.alphas)
    reports = run_protocol(pool, alphas=args.alphas, n_trials=args.trials, n_cal=args.n_cal,
                           n_test=args.n_test, seed=0, heads=heads)
    print(format_table(reports), end="")
    if args.csv:
        args.csv.write_text(reports_to_csv(reports))


if __name__ == "__main__":
    main()
