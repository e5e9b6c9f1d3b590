"""First-order form ``U = (w, v, u) = (eps grad u, eps^2 d_t u, u)``.

    d_t U - (1/eps) A(d_x) U + (1/eps^2) A0 U = F(U)

with ``A(d_x)(w, v, u) = (grad v, div w, 0)``, ``A0 (w, v, u) = (0, u, -v)``
and ``F(U) = -(0, lam u^3, 0)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import Field, dealiased_cube, divergence, gradient, sobolev_norm


@dataclass(frozen=True)
class SystemVector:
    w: tuple[Field, Field]
    v: Field
    u: Field
    t: float
    eps: float

    def components(self) -> list[Field]:
        return [self.w[0], self.w[1], self.v, self.u]

    def __sub__(self, other: "SystemVector") -> "SystemVector":
        return SystemVector(
            (self.w[0] - other.w[0], self.w[1] - other.w[1]),
            self.v - other.v,
            self.u - other.u,
            self.t,
            self.eps,
        )

    def norm(self, s: float = 1.0) -> float:
        return float(np.sqrt(sum(sobolev_norm(c, s) ** 2 for c in self.components())))

    def is_finite(self) -> bool:
        return all(c.is_finite() for c in self.components())


def apply_A(w: tuple[Field, Field], v: Field, u: Field):
    """``A(d_x) (w, v, u) = (grad v, div w, 0)``."""
    return gradient(v), divergence(w), u * 0.0


def apply_A0(w: tuple[Field, Field], v: Field, u: Field):
    """``A0 (w, v, u) = (0, u, -v)``."""
    return (w[0] * 0.0, w[1] * 0.0), u, -v


def nonlinear_force(u: Field, lam: float) -> Field:
    """v-component of ``F(U)``: ``-lam u^3`` (dealiased)."""
    return dealiased_cube(u, u, u) * (-lam)
