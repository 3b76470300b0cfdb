"""CSV and Matrix Market writers for spectra, curves and samples.

Numbers are written with 17 significant digits via ``format(x, ".17g")`` so
files are locale-independent and byte-identical across repeated runs.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .linalg import write_mtx


def fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def read_csv(path):
    """Columns of a numeric CSV as a dict of float arrays."""
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = np.array([[float(v) for v in row] for row in reader]).reshape(-1, len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


def write_goal_spectrum(out_dir, gs):
    out_dir = Path(out_dir)
    write_csv(
        out_dir / "goal_spectrum.csv",
        ["index", "lambda"],
        [(i + 1, lam) for i, lam in enumerate(gs.lambdas)],
    )
    write_mtx(out_dir / "q.mtx", gs.q)
    write_mtx(out_dir / "q_hat.mtx", gs.q_hat)
    write_mtx(out_dir / "q_tilde.mtx", gs.q_tilde)


def write_param_spectrum(out_dir, sp):
    write_csv(
        Path(out_dir) / "param_spectrum.csv",
        ["index", "delta_sq"],
        [(i + 1, v) for i, v in enumerate(sp.deltas_sq)],
    )


def write_values(path, values):
    write_csv(path, ["value"], ((v,) for v in values))


def write_density(path, x, density):
    write_csv(path, ["x", "density"], zip(x, density))
