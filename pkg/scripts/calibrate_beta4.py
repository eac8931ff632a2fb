"""Fit the quaternion hard-edge scaling constant and arbitrate the prefactor composition.

Both compositions are calibrated on m = 0 and then scored by KS at N = 100
for m = 0 and 1.

    python3 scripts/calibrate_beta4.py --Ns 50,100,200 --samples 20000
"""

import argparse
import json
from dataclasses import asdict, dataclass

from hardedge.montecarlo import arbitrate_composition


@dataclass(frozen=True)
class Config:
    Ns: tuple = (50, 100, 200)
    samples: int = 20_000
    seed: int = 3000
    ks_N: int = 100
    ks_samples: int = 100_000
    ks_tol: float = 0.03


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--Ns", default="50,100,200")
    p.add_argument("--samples", type=int, default=20_000)
    p.add_argument("--seed", type=int, default=3000)
    p.add_argument("--ks-N", type=int, default=100)
    p.add_argument("--ks-samples", type=int, default=100_000)
    p.add_argument("--out", default=None)
    a = p.parse_args()
    cfg = Config(tuple(int(x) for x in a.Ns.split(",")), a.samples, a.seed, a.ks_N, a.ks_samples)
    res = arbitrate_composition(list(cfg.Ns), cfg.samples, cfg.seed, cfg.ks_N, cfg.ks_samples, ks_tol=cfg.ks_tol)
    for comp, r in res["results"].items():
        ks = ", ".join(f"m={m}: {v:.4f}" for m, v in r["ks"].items())
        print(f"{comp:8s} c={r['c']:.3f} stable={r['stable']} plateaus={r['plateaus']} KS[{ks}]")
    print(f"chosen: {res['chosen']}")
    if a.out:
        with open(a.out, "w") as fh:
            json.dump({"config": asdict(cfg), **res}, fh, indent=1, default=str)


if __name__ == "__main__":
    main()
