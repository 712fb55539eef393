"""Squared bias of the Gaussian-smoothed gradient of |x|^(1+s) as the radius shrinks.

At a point away from the kink the gradient is smooth and the bias falls like
eta^4; at the kink itself (x = 0 is unbiased by symmetry, so x = eta is used)
it tracks the eta^(2s) envelope.
"""

import argparse
import csv
import sys

import numpy as np

from lflab.oracles import SmoothedOracle, gs_params
from lflab.potentials import builtin_potential


def bias_sq(pot, x, eta, draws, seed):
    oracle = SmoothedOracle(pot, 1, eta, 1)
    pts = np.full((draws, 1), x)
    G = oracle.query(pts, seed, np.arange(draws), 0)
    return float((G.mean() - pot.grad(np.array([x]))[0]) ** 2), float(G.var() / draws)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--s", type=float, default=0.5)
    ap.add_argument("--draws", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    pot = builtin_potential("holder_power", d=1, s=args.s)
    L = pot.holder[1]
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["eta", "point", "bias_sq", "mc_var_of_mean", "delta_b"])
    for eta in (0.16, 0.08, 0.04, 0.02, 0.01):
        db = gs_params(L, args.s, 1, eta)[2]
        for label, x in (("x=1", 1.0), ("x=eta", eta)):
            b, v = bias_sq(pot, x, eta, args.draws, args.seed)
            w.writerow([eta, label, f"{b:.4e}", f"{v:.2e}", f"{db:.4e}"])


if __name__ == "__main__":
    main()
