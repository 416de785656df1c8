"""Mean number of short open connections in the principal stratum against 8*pi.

    python3 scripts/open_cross_check.py --genus-list 4,8 --samples 500
"""
import argparse
import math

import numpy as np

from flatsurge.cli import run_counts


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--genus-list", default="4,8")
    ap.add_argument("--samples", type=int, default=500)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    genera = [int(g) for g in args.genus_list.split(",")]
    by_g = run_counts("open", genera, [(0.0, 1.0)], args.samples, args.seed, args.workers)
    lam = 8 * math.pi
    for g in genera:
        c = np.array([r[3] for r in by_g[g]["rows"]])
        n = 2 * g - 2
        finite = 2 * n * (n - 1) * math.pi / g ** 2
        print(f"g={g:2d}  mean {c.mean():7.3f} +- {c.std(ddof=1) / math.sqrt(len(c)):.3f}  "
              f"rel.err {abs(c.mean() - lam) / lam:.3f}  (2n(n-1)pi/g^2 = {finite:.3f})")


if __name__ == "__main__":
    main()
