"""Optimal gap and degeneracy fraction per bath, computed against reference values."""

import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from _common import read_csv, run


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--input", help="CSV from `thermo tables`; computed when omitted")
    ap.add_argument("--out", default="tables.png")
    args = ap.parse_args()

    df = read_csv(Path(args.input).read_text()) if args.input else read_csv(run("tables"))
    df["label"] = df.apply(lambda r: "fermionic" if r.bath == "fermionic" else f"s={r.s}", axis=1)

    fig, axes = plt.subplots(1, 3, figsize=(13, 4))
    for ax, (col, ref, title) in zip(
        axes,
        [
            ("x_star", "reference_x_star", "optimal gap x*"),
            ("c_star", "reference_c_star", "degeneracy fraction C*"),
            ("coefficient", "reference_coefficient", "coefficient per level"),
        ],
    ):
        for variant, marker in (("monitored", "o"), ("empirical", "s")):
            sub = df[df.variant == variant]
            ax.scatter(sub.label, sub[col], marker=marker, label=f"{variant} (computed)")
            ax.scatter(sub.label, sub[ref], marker="x", color="k", label=f"{variant} (reference)" if variant == "monitored" else None)
        ax.set_title(title)
        ax.tick_params(axis="x", rotation=30)
    axes[2].set_yscale("log")
    axes[0].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)
    print(f"wrote {args.out}; {int((~df['pass']).sum())} rows outside tolerance")


if __name__ == "__main__":
    main()
