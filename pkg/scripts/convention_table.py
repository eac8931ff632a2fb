"""Residual of the sigma-form under every candidate substitution convention.

    python3 scripts/convention_table.py --nus 2,3,4 --ms 1,2
"""

import argparse

from hardedge.verification import CONVENTIONS, painleve_residual


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--nus", default="2,3,4")
    p.add_argument("--ms", default="1,2")
    p.add_argument("--grid", default="0.5,1,2,5,10")
    a = p.parse_args()
    grid = [float(x) for x in a.grid.split(",")]
    cases = [(1, int(n)) for n in a.nus.split(",") if n] + [(4, int(m)) for m in a.ms.split(",") if m]
    print("beta idx " + " ".join(f"{c.name:>11s}" for c in CONVENTIONS))
    for beta, idx in cases:
        worst = [max(abs(painleve_residual(beta, idx, s, c)) for s in grid) for c in CONVENTIONS]
        print(f"{beta:4d} {idx:3d} " + " ".join(f"{w:11.2e}" for w in worst))


if __name__ == "__main__":
    main()
