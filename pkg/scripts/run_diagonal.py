"""Diagonal denoising study: spectra, covariance convergence and mean error.

    python scripts/run_diagonal.py --out results/diagonal
"""

import argparse
import sys
from pathlib import Path

from goalinf import cli, model
from goalinf.problems import diagonal_problem


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="results/diagonal")
    parser.add_argument("--n", type=int, default=30)
    parser.add_argument("--p", type=int, default=15)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--mc-samples", type=int, default=20_000)
    args = parser.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    problem = "builtin:diagonal"
    if (args.n, args.p) != (30, 15):
        # non-default sizes go through a serialized problem directory
        problem = str(out / "problem")
        model.save_problem(diagonal_problem(args.n, args.p), problem)
    codes = [
        cli.cmd_diagonal(args.n, args.p, out),
        cli.cmd_convergence(problem, args.p, out),
        cli.cmd_mean_error(problem, args.p, args.mc_samples, args.seed, out),
    ]
    for name in ("spectra.csv", "convergence.csv", "mean_error.csv"):
        print(out / name)
    return max(codes)


if __name__ == "__main__":
    sys.exit(main())
