"""Plot the series stored in a suite report (needs matplotlib).

    python3 scripts/plot_report.py out/quick.jsonl --out out/plots
"""

import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from hyprod.suite import load_report


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("report")
    ap.add_argument("--out", default="out/plots")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for s in load_report(args.report).series:
        kind, label = s["name"].split(":", 1)
        rows = np.asarray(s["rows"], float)
        fig, ax = plt.subplots(figsize=(5, 3.2))
        if kind == "tdeviation":
            ax.fill_between(rows[:, 0], rows[:, 2], rows[:, 3], alpha=0.2, label="[f, f + 4 delta]")
            ax.plot(rows[:, 0], rows[:, 1], "k", lw=1, label="distance to z")
            ax.set_xlabel("t")
        elif kind == "fellow":
            ax.plot(rows[:, 0], rows[:, 1], "o-", ms=3)
            ax.set_xlabel("t")
            ax.set_ylabel("gap")
        else:
            ax.plot(rows[:, 0], rows[:, 1], "o-")
            ax.set_xscale("log")
            ax.set_xlabel("sample size")
            ax.set_ylabel("delta estimate")
        ax.set_title(s["name"], fontsize=9)
        ax.legend(fontsize=7) if kind == "tdeviation" else None
        fig.tight_layout()
        fig.savefig(out / f"{kind}_{label}.png", dpi=120)
        plt.close(fig)
        print(out / f"{kind}_{label}.png")


if __name__ == "__main__":
    main()
