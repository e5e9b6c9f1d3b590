"""Limit error for rough periodic data at several regularity indices (report only).

    python scripts/rough_probe.py --s 3 4 6
"""

import argparse
import math

from kgnr.harness import DataSpec, ExperimentSpec, run_limit_experiment

LADDER = (0.2, 0.1414, 0.1, 0.0707)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--s", type=float, nargs="+", default=(3.0, 4.0, 6.0))
    ap.add_argument("--n", type=int, default=64)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    for s in args.s:
        data = DataSpec(kind="rough", s_target=s, seed=args.seed)
        spec = ExperimentSpec(data=data, eps_ladder=LADDER, n=args.n, side_length=2 * math.pi)
        rep = run_limit_experiment(spec, with_residual=False)
        errs = ", ".join(f"{e:.3e}" for e in rep.column("error"))
        fit = rep.fit(1.0)
        print(f"s={s:g}: errors [{errs}]  slope {fit.slope:.3f} r2 {fit.r_squared:.4f}")


if __name__ == "__main__":
    main()
