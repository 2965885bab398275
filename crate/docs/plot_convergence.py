"""Plot residual curves from the plot.csv written by `bwalloc report`.

Usage: python docs/plot_convergence.py plot.csv [out.png]
"""

import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def main() -> None:
    if len(sys.argv) < 2:
        sys.exit(__doc__)
    data = pd.read_csv(sys.argv[1])
    out = sys.argv[2] if len(sys.argv) > 2 else "convergence.png"

    fig, axes = plt.subplots(1, 3, figsize=(14, 4))
    for (label, kind), group in data.groupby(["label", "kind"]):
        axes[0].semilogy(group["iter"], group["p_res"], label=label)
        axes[1].semilogy(group["iter"], group["second"], label=f"{label} ({kind})")
        axes[2].semilogy(group["iter"], group["vio"].clip(lower=1e-16), label=label)
    for ax, title in zip(axes, ["primal residual", "second criterion", "capacity violation"]):
        ax.set_title(title)
        ax.set_xlabel("iteration")
        ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(out, dpi=150)


if __name__ == "__main__":
    main()
