"""How often the collapse surgery fails on sampled surfaces, by failure type.

    python3 scripts/surgery_exceptions.py --genus-list 3,4,5 --samples 100
"""
import argparse
import math
from collections import Counter

from flatsurge.errors import FlatSurgeError
from flatsurge.geodesy import enumerate_saddle_connections, multiplicity, side_angles
from flatsurge.sampler import sample_batch
from flatsurge.surgery import collapse_closed, restore


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--genus-list", default="3,4,5")
    ap.add_argument("--samples", type=int, default=100)
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args()
    for g in (int(x) for x in args.genus_list.split(",")):
        kappa = (2,) * (g - 1)
        surfaces, _ = sample_batch(kappa, args.samples, args.seed)
        tally = Counter()
        for s in surfaces:
            conns = enumerate_saddle_connections(s, 1.8 / math.sqrt(g))
            cands = [c for c in conns if c.closed and side_angles(s, c) == (3, 3)
                     and multiplicity(conns, c.holonomy) == 1]
            if not cands:
                tally["no candidate"] += 1
                continue
            try:
                pinched, rec = collapse_closed(s, min(cands, key=lambda c: c.length), conns)
                restore(pinched, rec)
                tally["ok"] += 1
            except FlatSurgeError as exc:
                tally[type(exc).__name__] += 1
        print(f"g={g}: " + ", ".join(f"{k} {v}" for k, v in sorted(tally.items())))


if __name__ == "__main__":
    main()
