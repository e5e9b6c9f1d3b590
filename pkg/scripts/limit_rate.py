"""KG vs WKB error over an eps ladder for K = 0 and K = 2 on Gaussian data.

    python scripts/limit_rate.py --out out/limit
"""

import argparse
from pathlib import Path

from kgnr.harness import ExperimentSpec, run_limit_experiment, write_report

LADDER = (0.2, 0.1414, 0.1, 0.0707)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out/limit")
    ap.add_argument("--n", type=int, default=128)
    ap.add_argument("--lam", type=float, default=1.0)
    ap.add_argument("--eps", type=float, nargs="+", default=LADDER)
    args = ap.parse_args()
    for k in (0, 2):
        spec = ExperimentSpec(lam=args.lam, eps_ladder=tuple(args.eps), order_k=k, n=args.n)
        rep = run_limit_experiment(spec)
        path = write_report(rep, Path(args.out) / f"limit_K{k}.csv")
        for r in rep.rows:
            print(f"K={k} eps={r.eps:<7g} error={r.error:.4e} leading={r.leading_error:.4e} flags={';'.join(r.flags) or 'ok'}")
        for col in ("error", "leading_error"):
            fit = rep.fit(1.0, col)
            print(f"K={k} {col} slope {fit.slope:.3f} r2 {fit.r_squared:.4f}")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
