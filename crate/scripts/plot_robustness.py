"""FI rate per level of disordered optimal probes against the disorder strength."""

import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd

from _common import read_csv, run


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, nargs="+", default=[6, 8, 10], help="exponents of N = 2^n")
    ap.add_argument("--sigmas", default="0,0.25,0.5,0.75,1.0")
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="robustness.png")
    args = ap.parse_args()

    frames = [
        read_csv(
            run("--seed", str(args.seed), "--format", "csv", "robustness", "--n", str(n), "--sigmas", args.sigmas, "--trials", str(args.trials))
        )
        for n in args.n
    ]
    df = pd.concat(frames)

    fig, ax = plt.subplots(figsize=(6, 4.5))
    for levels, sub in df.groupby("n"):
        ax.errorbar(sub.sigma, sub.mean_fi_per_level, yerr=sub.std_fi_per_level, marker="o", capsize=3, label=f"N = {levels}")
        ax.plot(sub.sigma, sub.mean_bound_per_level, ":", color=ax.lines[-1].get_color())
    ax.axhline(0.85 * 0.2596, color="grey", ls="--", lw=0.8, label="0.85 × 0.2596")
    ax.set_xlabel("disorder σ (units of k_B T)")
    ax.set_ylabel("mean FI rate per level (dotted: analytic lower bound)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
