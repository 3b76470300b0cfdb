"""Heat-sink study at desk scale: convergence curves, mean error and the
max-temperature pushforward at several ranks.

    python scripts/run_heat.py --out results/heat [--config my_heat.json]
"""

import argparse
import sys
from pathlib import Path

from goalinf import cli, export, sampling


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="results/heat")
    parser.add_argument("--config", default=None)
    parser.add_argument("--rank-max", type=int, default=20)
    parser.add_argument("--ranks", default="1,5,10,20,full", help="ranks for the KS sweep")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--mc-samples", type=int, default=100_000)
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    problem = "builtin:heat"
    pb = cli.load(problem, args.config)

    codes = [
        cli.cmd_convergence(problem, args.rank_max, out, args.config),
        cli.cmd_mean_error(problem, args.rank_max, 20_000, args.seed, out, args.config),
    ]
    rows = []
    for token in args.ranks.split(","):
        r = None if token == "full" else int(token)
        g_exact, g_approx, used = cli.nonlinear_qoi(
            pb, r, args.mc_samples, args.seed, args.threads
        )
        ks = sampling.ks_statistic(g_exact, g_approx)
        rows.append((used, ks))
        print(f"rank {used:4d}  KS {ks:.4f}")
    export.write_csv(out / "ks_by_rank.csv", ["rank", "ks"], rows)
    codes.append(
        cli.cmd_nonlinear_qoi(
            problem, None, args.mc_samples, args.seed, out, args.config, args.threads
        )
    )
    return max(codes)


if __name__ == "__main__":
    sys.exit(main())
