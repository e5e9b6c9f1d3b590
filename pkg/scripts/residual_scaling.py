"""Residual of the WKB ansatz in the first-order system, and its split by powers of eps.

    python scripts/residual_scaling.py
"""

import argparse
import math

from kgnr.harness import ExperimentSpec, make_data, residual_scaling
from kgnr.nls import g2_initial, init_g0
from kgnr.wkb import harmonics_from_profiles, residual_expansion

LADDER = (0.2, 0.1414, 0.1, 0.0707, 0.05)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=128)
    args = ap.parse_args()
    for k in (0, 2):
        spec = ExperimentSpec(eps_ladder=LADDER, order_k=k, n=args.n)
        rep = residual_scaling(spec)
        print(f"K={k}: residuals {[f'{r:.3e}' for r in rep.column('residual')]}  slope {rep.fits[0].residual:.3f}")

        # coefficient of each eps power at t = 0 (theta frozen at 0.7)
        phi, psi = make_data(spec.data, spec.grid)
        g2 = g2_initial(phi, psi, spec.lam) if k == 2 else None
        tab = harmonics_from_profiles(init_g0(phi, psi), g2, spec.lam, k, 0.0, with_rates=True)
        parts = residual_expansion(tab, 0.7)
        for m, part in parts.items():
            size = part.norm(1)
            if size > 1e-12:
                print(f"   eps^{m:<3d} coefficient H1 norm {size:.3e}")
        lead, nxt = parts[k + 1].norm(1), parts[k + 2].norm(1)
        print(f"   eps^{k + 1} dominates eps^{k + 2} only for eps < {lead / nxt:.2g}"
              f" ({math.log10(lead / nxt):.1f} decades)")


if __name__ == "__main__":
    main()
