"""Tabulate Q, P and F for several indices (CSV on stdout).

    python3 scripts/gap_table.py --beta 1 --nus 0:4 --xmax 30 --points 61
"""

import argparse
import csv
import sys

import numpy as np

from hardedge.gap import evaluate_quantity
from hardedge.special import PrecisionRequest


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--beta", type=int, default=1)
    p.add_argument("--nus", default="0:4")
    p.add_argument("--xmax", type=float, default=30.0)
    p.add_argument("--points", type=int, default=61)
    p.add_argument("--bits", type=int, default=128)
    a = p.parse_args()
    lo, _, hi = a.nus.partition(":")
    nus = range(int(lo), int(hi or lo) + 1)
    prec = PrecisionRequest(a.bits, 1e-20)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["beta", "nu", "x", "Q", "P", "F"])
    for nu in nus:
        for x in np.linspace(a.xmax / a.points, a.xmax, a.points):
            row = [evaluate_quantity(a.beta, nu, float(x), q, prec=prec)[0] for q in ("Q", "P", "F")]
            w.writerow([a.beta, nu, f"{x:.6g}"] + [f"{v:.12g}" for v in row])


if __name__ == "__main__":
    main()
