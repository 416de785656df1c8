"""Closed-connection Poisson experiment over a genus ladder, then the moment report.

    python3 scripts/poisson_ladder.py --out runs/ladder --samples 2000
"""
import argparse

from flatsurge import cli


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", required=True)
    ap.add_argument("--genus-list", default="4,8,12")
    ap.add_argument("--samples", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=20261015)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    argv = ["experiment", "poisson-closed", "--genus-list", args.genus_list, "--samples", str(args.samples),
            "--seed", str(args.seed), "--workers", str(args.workers), "--out", args.out,
            "--interval", "0,0.5", "--interval", "0.5,0.7", "--interval", "0.7,1.0"]
    code = cli.main(argv)
    if code == 0:
        code = cli.main(["report", "--in", args.out])
    raise SystemExit(code)


if __name__ == "__main__":
    main()
