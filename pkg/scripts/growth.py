"""Error growth in time at fixed eps (report only).

    python scripts/growth.py --eps 0.1
"""

import argparse

from kgnr.harness import ExperimentSpec, growth_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eps", type=float, default=0.1)
    ap.add_argument("--times", type=float, nargs="+", default=(1.0, 2.0, 4.0, 8.0))
    args = ap.parse_args()
    for k in (0, 2):
        rep = growth_experiment(ExperimentSpec(order_k=k), args.eps, tuple(args.times))
        vals = ", ".join(f"t={t:g}: {v:.3e}" for t, v in zip(rep.times, rep.scaled_errors))
        print(f"K={k} error/eps^{k + 1}: {vals}")
        if rep.fit is not None:
            print(f"K={k} growth exponent vs (1+t): {rep.fit.slope:.3f}")


if __name__ == "__main__":
    main()
