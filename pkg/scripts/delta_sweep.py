"""Four-point delta of the half-plane box against sample size and seed.

    python3 scripts/delta_sweep.py --sizes 25 50 100 200 400 --seeds 0 1 2
"""

import argparse
from pathlib import Path

import numpy as np

from hyprod.hyperbolicity import four_point_delta
from hyprod.spaces import load_space

FIX = Path(__file__).resolve().parents[1] / "src" / "hyprod" / "fixtures"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--space", default=str(FIX / "halfplane.json"))
    ap.add_argument("--sizes", type=int, nargs="+", default=[25, 50, 100, 200, 400])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    args = ap.parse_args()
    sp = load_space(args.space)
    print("n," + ",".join(f"seed{s}" for s in args.seeds) + ",tilde_seed0")
    for n in args.sizes:
        ests = [four_point_delta(sp, "all", n=n, seed=s) for s in args.seeds]
        print(f"{n}," + ",".join(f"{e.delta:.4f}" for e in ests) + f",{ests[0].tilde_delta:.4f}")


if __name__ == "__main__":
    main()
