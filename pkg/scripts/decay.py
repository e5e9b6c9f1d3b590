"""Decay of max|g0(t)| against log(1 + t) on two box sizes.

    python scripts/decay.py --out out/decay
"""

import argparse
import csv
import math
from pathlib import Path

from kgnr.harness import DecayConfig, decay_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out/decay")
    ap.add_argument("--n", type=int, default=256)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for mult in (48, 64):
        rep = decay_experiment(DecayConfig(n=args.n, side_length=mult * math.pi))
        with (out / f"decay_L{mult}pi.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time", "max_abs", "edge_ratio"])
            w.writerows(zip(rep.times, rep.max_abs, rep.edge_ratio))
        print(f"L={mult}pi slope {rep.fit.slope:.4f} r2 {rep.fit.r_squared:.4f} window {rep.window} flags {rep.flags}")


if __name__ == "__main__":
    main()
