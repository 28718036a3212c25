"""Optimal monitored FI rate against N, with the equilibrium (log N)^2 baseline."""

import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from _common import read_csv, run


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-min", type=int, default=2)
    ap.add_argument("--n-max", type=int, default=10)
    ap.add_argument("--global-max", type=int, default=6, help="largest exponent for the global search")
    ap.add_argument("--out", default="scaling.png")
    args = ap.parse_args()

    span = ["--n-min", str(args.n_min), "--n-max", str(args.n_max)]
    two = read_csv(run("--format", "csv", "scaling", *span, "--mode", "two-level"))
    emp = read_csv(run("--format", "csv", "scaling", *span, "--mode", "empirical"))
    eq = read_csv(run("--format", "csv", "scaling", "--n-min", str(args.n_min), "--n-max", str(min(args.n_max, 8)), "--mode", "equilibrium"))
    glo = read_csv(
        run("--format", "csv", "scaling", "--n-min", str(max(args.n_min, 2)), "--n-max", str(args.global_max), "--mode", "global")
    )

    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.plot(two.levels, two.fi_star, "o-", label="monitored, two-level")
    ax.plot(glo.levels, glo.fi_star, "k+", ms=10, label="monitored, global search")
    ax.plot(emp.levels, emp.fi_star, "s-", label="populations only")
    ax.plot(eq.levels, eq.fi_star, "^-", label="equilibrium")
    n = np.geomspace(two.levels.min(), two.levels.max(), 100)
    ax.plot(n, 0.2596 * n, "--", color="grey", label="0.2596 N")
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("number of levels N")
    ax.set_ylabel("dimensionless FI rate")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
