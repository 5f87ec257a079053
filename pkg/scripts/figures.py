"""Write the data behind the comparative-statics figures as CSV files.

Usage: python3 scripts/figures.py OUTDIR [--T 300] [--nx 2000] [--nt 4000]

Each file has a header row and the independent variable(s) first.  The
ruin-based sweeps solve the survival PDE repeatedly, so the T=300 run takes
a few minutes.
"""

import argparse
import csv
import os

import numpy as np

from dividend_barrier import (FeedbackPolicy, ModelParams, UnattainableRiskError, barrier_ruin,
                              risk_capital, solve_b0, solve_b_star, solve_value_function)

BASE = ModelParams.from_sigma2(mu=2.0, sigma2=50.0, delta=0.2, c=0.05, alpha=0.5, beta=8.0)


def write(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) for v in r])
    print("wrote", path)


def g_sweep(out, name, values, xs, b=100.0):
    rows = []
    for v in values:
        sol = solve_value_function(BASE.replace(**{name: v}), b)
        rows += [(v, x, g) for x, g in zip(xs, sol.value(xs))]
    write(os.path.join(out, f"g_{name}.csv"), [name, "x", "g"], rows)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out")
    ap.add_argument("--T", type=float, default=300.0)
    ap.add_argument("--nx", type=int, default=2000)
    ap.add_argument("--nt", type=int, default=4000)
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    xs = np.linspace(0.0, 150.0, 151)

    # only debt rates with 2 delta / mu < alpha have the closed-form solution
    g_sweep(args.out, "delta", [0.05, 0.1, 0.2, 0.4], xs)
    g_sweep(args.out, "mu", [1.5, 2.0, 2.5, 3.0], xs)
    g_sweep(args.out, "sigma2", [30.0, 50.0, 70.0, 90.0], xs)

    b0 = solve_b0(BASE)
    sol = solve_value_function(BASE)
    grid = np.linspace(0.0, 1.2 * b0, 241)
    write(os.path.join(args.out, "g_and_a.csv"), ["x", "g", "a_star"],
          zip(grid, sol.value(grid), FeedbackPolicy.from_params(BASE)(grid)))

    hi = barrier_ruin(b0, BASE, args.T, args.nx, args.nt)
    lo = barrier_ruin(4 * b0, BASE, args.T, args.nx, args.nt)
    eps = np.geomspace(max(lo, 1e-12), hi, 12)
    rows = [(e, solve_b_star(BASE, args.T, e, args.nx, args.nt, rtol=1e-6).b_star) for e in eps]
    write(os.path.join(args.out, "b_epsilon.csv"), ["epsilon", "b"], rows)

    rows = []
    for s in (30.0, 50.0, 70.0):
        p = BASE.replace(sigma2=s)
        for e in eps:
            try:
                rows.append((s, e, solve_b_star(p, args.T, e, args.nx, args.nt, rtol=1e-6).b_star))
            except UnattainableRiskError:
                pass
    write(os.path.join(args.out, "b_sigma_epsilon.csv"), ["sigma2", "epsilon", "b"], rows)

    eps_x = np.linspace(max(hi, 0.01) * 1.01, 0.99, 15)
    rows = [(e, risk_capital(b0, BASE, args.T, e, args.nx, args.nt)) for e in eps_x]
    write(os.path.join(args.out, "x_epsilon.csv"), ["epsilon", "x"], rows)


if __name__ == "__main__":
    main()
