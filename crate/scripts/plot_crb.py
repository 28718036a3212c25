"""Estimator MSE against the Cramér-Rao bound over a range of horizons."""

import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from _common import read_json, run


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--taus", type=float, nargs="+", default=[1e3, 3e3, 1e4, 3e4, 1e5])
    ap.add_argument("--replicas", type=int, default=1000)
    ap.add_argument("--temperature", type=float, default=1.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="crb.png")
    args = ap.parse_args()

    rows = [
        read_json(
            run("--seed", str(args.seed), "crb", "--tau", repr(tau), "--replicas", str(args.replicas), "--temperature", repr(args.temperature))
        )
        for tau in args.taus
    ]
    taus = np.array(args.taus)
    mse = np.array([r["mse"] for r in rows])
    crb = np.array([r["crb"] for r in rows])
    err = np.array([r["stderr"] for r in rows]) * crb

    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.errorbar(taus, mse, yerr=err, fmt="o", capsize=3, label="MSE of the closed-form MLE")
    ax.plot(taus, crb, "-", label="Cramér-Rao bound 1/FI")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("horizon γτ")
    ax.set_ylabel("mean squared error of T̂")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)
    for tau, r in zip(taus, rows):
        print(f"τ = {tau:g}: MSE/CRB = {r['ratio']:.3f} ± {r['stderr']:.3f}, invalid {r['invalid_fraction']:.3%}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
