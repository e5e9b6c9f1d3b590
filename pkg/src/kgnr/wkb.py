"""Modulated (WKB) approximate solutions of orders K = 0 and K = 2.

The approximation of ``U = (w, v, u)`` is

    U_a = sum_{n=0}^{K+2} eps^n sum_{p in H_n} exp(i p theta) U_{n,p},   theta = t / eps^2,

with ``H_n`` the odd harmonics ``|p| <= n + 1`` (n even) or ``|p| <= n``
(n odd) and ``U_{n,-p} = conj(U_{n,p})``.  Only ``p > 0`` is stored.  The
amplitudes are closed-form expressions in g0, g2 and their time derivatives,
with g1 = g3 = 0 and the top profile (g2 for K = 0, g4 for K = 2) set to zero.

Products are dealiased and staged the way they arise from expanding the
cubic, e.g. ``|g0|^2 g0^3 = P(g0, conj g0, P(g0^3))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ConfigurationError, NumericalError
from .nls import ProfileSet, g0_jet, g2_jet
from .spectral import Field, dealiased_product, gradient, laplacian
from .system import SystemVector, nonlinear_force

SUPPORTED_ORDERS = (0, 2)

_TWO_PI_HI = 6.283185307179586
_TWO_PI_LO = 2.4492935982947064e-16


@dataclass(frozen=True)
class WKBOrder:
    K: int

    def __post_init__(self):
        if self.K not in SUPPORTED_ORDERS:
            raise ConfigurationError(f"order K must be one of {SUPPORTED_ORDERS}, got {self.K}")

    @property
    def top(self) -> int:
        return self.K + 2


def _order(order) -> WKBOrder:
    return order if isinstance(order, WKBOrder) else WKBOrder(int(order))


def max_harmonic(n: int) -> int:
    return n + 1 if n % 2 == 0 else n


def harmonic_set(n: int) -> list[int]:
    """Positive members of ``H_n``."""
    return list(range(1, max_harmonic(n) + 1, 2))


def fast_phase(t: float, eps: float) -> float:
    """``t / eps^2`` reduced to ``[0, 2 pi)``.

    The quotient is formed exactly in rational arithmetic from the two
    doubles, and the multiple of 2 pi is removed using a two-term (hi + lo)
    representation of 2 pi.
    """
    theta = Fraction(t) / (Fraction(eps) * Fraction(eps))
    k = math.floor(float(theta) / _TWO_PI_HI)
    r = theta - k * (Fraction(_TWO_PI_HI) + Fraction(_TWO_PI_LO))
    r = float(r)
    if r < 0:
        r += _TWO_PI_HI
    elif r >= _TWO_PI_HI:
        r -= _TWO_PI_HI
    return r


@dataclass(frozen=True)
class Harmonic:
    """Component triple of one ``U_{n,p}`` (complex fields)."""

    w: tuple[Field, Field]
    v: Field
    u: Field

    def components(self) -> list[Field]:
        return [self.w[0], self.w[1], self.v, self.u]

    def scaled(self, s: complex) -> "Harmonic":
        return Harmonic((self.w[0] * s, self.w[1] * s), self.v * s, self.u * s)

    def __add__(self, other: "Harmonic") -> "Harmonic":
        return Harmonic(
            (self.w[0] + other.w[0], self.w[1] + other.w[1]), self.v + other.v, self.u + other.u
        )


def _harmonic(zero: Field, w=None, v=None, u=None) -> Harmonic:
    return Harmonic(w if w is not None else (zero, zero), v if v is not None else zero, u if u is not None else zero)


@dataclass
class HarmonicTable:
    t: float
    order: WKBOrder
    lam: float
    entries: dict[tuple[int, int], Harmonic] = field(default_factory=dict)
    rates: dict[tuple[int, int], Harmonic] | None = None

    def __post_init__(self):
        for n, p in list(self.entries) + list(self.rates or {}):
            if p % 2 == 0 or not 0 < p <= max_harmonic(n) or not 0 <= n <= self.order.top:
                raise ConfigurationError(f"harmonic ({n}, {p}) outside the allowed support")

    def __getitem__(self, key) -> Harmonic:
        return self.entries[key]

    def keys(self):
        return self.entries.keys()


class _Jet:
    """Profile values and time derivatives at one instant."""

    def __init__(self, g0: Field, g2: Field | None, lam: float, need_rates: bool):
        order0 = 2 if need_rates else 1
        self.a = g0_jet(g0, lam, order=order0)
        if g2 is None:
            self.b = None
        else:
            self.b = g2_jet(g2, g0, lam, order=2 if need_rates else 1)


def build_harmonics(profiles: ProfileSet, t: float, order, with_rates: bool = False) -> HarmonicTable:
    """Closed-form amplitudes ``U_{n,p}`` at time ``t`` (and their time derivatives).

    Raises ``InterpolationRefusedError`` if ``t`` was not a solved time.
    """
    order = _order(order)
    g0, g2 = profiles.at(t)
    if order.K == 2 and g2 is None:
        raise ConfigurationError("order K = 2 needs g2 profiles")
    if order.K == 0:
        g2 = None
    return harmonics_from_profiles(g0, g2, profiles.lam, order, t, with_rates)


def harmonics_from_profiles(
    g0: Field, g2: Field | None, lam: float, order, t: float = 0.0, with_rates: bool = False
) -> HarmonicTable:
    order = _order(order)
    jet = _Jet(g0, g2 if order.K == 2 else None, lam, with_rates)
    values, rates = _amplitudes(jet, lam, order, with_rates)
    for key, h in values.items():
        if not all(c.is_finite() for c in h.components()):
            raise NumericalError(f"non-finite amplitude U_{key}")
    return HarmonicTable(t, order, lam, values, rates)


def _amplitudes(jet: _Jet, lam: float, order: WKBOrder, with_rates: bool):
    P = dealiased_product
    a = jet.a
    a0, a1 = a[0], a[1]
    zero = a0 * 0.0
    c = lam / 8.0
    I = 1j

    cube = P(a0, a0, a0)
    dcube = P(a0, a0, a1) * 3.0
    V: dict[tuple[int, int], Harmonic] = {}
    R: dict[tuple[int, int], Harmonic] = {}

    V[0, 1] = _harmonic(zero, v=a0 * I, u=a0)
    V[1, 1] = _harmonic(zero, w=gradient(a0))
    V[2, 3] = _harmonic(zero, v=cube * (3j * c), u=cube * c)
    if with_rates:
        a2 = a[2]
        ddcube = P(a0, a1, a1) * 6.0 + P(a0, a0, a2) * 3.0
        R[0, 1] = _harmonic(zero, v=a1 * I, u=a1)
        R[1, 1] = _harmonic(zero, w=gradient(a1))
        R[2, 3] = _harmonic(zero, v=dcube * (3j * c), u=dcube * c)

    if order.K == 0:
        V[2, 1] = _harmonic(zero, v=a1)
        if with_rates:
            R[2, 1] = _harmonic(zero, v=a2)
        return V, (R if with_rates else None)

    b0, b1 = jet.b[0], jet.b[1]
    V[2, 1] = _harmonic(zero, v=b0 * I + a1, u=b0)
    V[3, 1] = _harmonic(zero, w=gradient(b0))
    gc = gradient(cube)
    V[3, 3] = _harmonic(zero, w=(gc[0] * c, gc[1] * c))
    V[4, 1] = _harmonic(zero, v=b1)

    quad = P(a0, a0.conj(), cube)  # |g0|^2 g0^3
    x43 = laplacian(cube) * c - (P(a0, a0, b0) + quad * (lam / 4.0)) * (3.0 * lam)
    V[4, 3] = _harmonic(
        zero,
        v=dcube * (-1.25 * c) + x43 * (-0.375j),
        u=dcube * (0.75j * c) + x43 * (-0.125),
    )
    quint = P(a0, a0, cube)  # g0^5
    V[4, 5] = _harmonic(zero, v=quint * (5j * lam * lam / 64.0), u=quint * (lam * lam / 64.0))

    if not with_rates:
        return V, None

    b2 = jet.b[2]
    R[2, 1] = _harmonic(zero, v=b1 * I + a2, u=b1)
    R[3, 1] = _harmonic(zero, w=gradient(b1))
    gdc = gradient(dcube)
    R[3, 3] = _harmonic(zero, w=(gdc[0] * c, gdc[1] * c))
    R[4, 1] = _harmonic(zero, v=b2)
    dquad = P(a1, a0.conj(), cube) + P(a0, a1.conj(), cube) + P(a0, a0.conj(), dcube)
    daab = P(a0, a1, b0) * 2.0 + P(a0, a0, b1)
    dx43 = laplacian(dcube) * c - (daab + dquad * (lam / 4.0)) * (3.0 * lam)
    R[4, 3] = _harmonic(
        zero,
        v=ddcube * (-1.25 * c) + dx43 * (-0.375j),
        u=ddcube * (0.75j * c) + dx43 * (-0.125),
    )
    dquint = P(a0, a1, cube) * 2.0 + P(a0, a0, dcube)
    R[4, 5] = _harmonic(zero, v=dquint * (5j * lam * lam / 64.0), u=dquint * (lam * lam / 64.0))
    return V, R


# --- assembly ---------------------------------------------------------------------


def _real_sum(terms: list[tuple[complex, Field]], grid) -> Field:
    """``sum (z X + conj(z X))`` with an explicit check that the result is real."""
    acc = np.zeros((grid.n, grid.n), dtype=np.complex128)
    for z, f in terms:
        zx = z * f.values
        acc += zx + np.conj(zx)
    scale = max(1.0, float(np.max(np.abs(acc))))
    if float(np.max(np.abs(acc.imag))) > 1e-12 * scale:
        raise NumericalError("assembled field is not real")
    return Field(grid, acc.real, "real")


def _phase(theta: float, p: int) -> complex:
    return complex(math.cos(p * theta), math.sin(p * theta))


def _component_terms(table: HarmonicTable, eps: float, theta: float, pick, n_filter=None):
    terms = []
    for (n, p), h in table.entries.items():
        if n_filter is not None and not n_filter(n):
            continue
        terms.append((eps**n * _phase(theta, p), pick(h)))
    return terms


def _theta(table: HarmonicTable, eps: float, theta: float | None) -> float:
    return fast_phase(table.t, eps) if theta is None else theta


def evaluate_u_a(table: HarmonicTable, eps: float, order=None, theta: float | None = None) -> Field:
    """``u_a = sum_n eps^n sum_{p>0} 2 Re(exp(i p theta) u_{n,p})``."""
    if not 0 < eps < 1:
        raise ConfigurationError("eps must lie in (0, 1)")
    if order is not None and _order(order) != table.order:
        raise ConfigurationError("order does not match the harmonic table")
    th = _theta(table, eps, theta)
    grid = table.entries[0, 1].u.grid
    return _real_sum(_component_terms(table, eps, th, lambda h: h.u), grid)


def assemble_U_a(table: HarmonicTable, eps: float, order=None, theta: float | None = None) -> SystemVector:
    if order is not None and _order(order) != table.order:
        raise ConfigurationError("order does not match the harmonic table")
    th = _theta(table, eps, theta)
    grid = table.entries[0, 1].u.grid
    comp = [
        _real_sum(_component_terms(table, eps, th, pick), grid)
        for pick in (lambda h: h.w[0], lambda h: h.w[1], lambda h: h.v, lambda h: h.u)
    ]
    return SystemVector((comp[0], comp[1]), comp[2], comp[3], table.t, eps)


def block(table: HarmonicTable, n: int, theta: float = 0.0) -> SystemVector:
    """The real order-``n`` block ``U_n`` (without the ``eps^n`` factor)."""
    grid = table.entries[0, 1].u.grid
    sub = [(1.0 * _phase(theta, p), h) for (m, p), h in table.entries.items() if m == n]
    comp = [
        _real_sum([(z, pick(h)) for z, h in sub], grid)
        for pick in (lambda h: h.w[0], lambda h: h.w[1], lambda h: h.v, lambda h: h.u)
    ]
    return SystemVector((comp[0], comp[1]), comp[2], comp[3], table.t, float("nan"))


def leading_order(profiles: ProfileSet, t: float, eps: float, theta: float | None = None) -> Field:
    """``2 Re(exp(i theta) g0(t))``."""
    g0, _ = profiles.at(t)
    th = fast_phase(t, eps) if theta is None else theta
    return _real_sum([(_phase(th, 1), g0)], g0.grid)


# --- residual -----------------------------------------------------------------------


def _L_p(h: Harmonic, p: int) -> Harmonic:
    """``(i p + A0) U = (i p w, i p v + u, i p u - v)``."""
    ip = 1j * p
    return Harmonic((h.w[0] * ip, h.w[1] * ip), h.v * ip + h.u, h.u * ip - h.v)


def _A(h: Harmonic) -> Harmonic:
    """``A(d_x) (w, v, u) = (grad v, div w, 0)``."""
    gv = gradient(h.v)
    dw = gradient(h.w[0])[0] + gradient(h.w[1])[1]
    return Harmonic(gv, dw, h.u * 0.0)


def residual_vector(table: HarmonicTable, eps: float, theta: float | None = None) -> SystemVector:
    """``d_t U_a - A U_a / eps + A0 U_a / eps^2 - F(U_a)`` as a real vector field."""
    if table.rates is None:
        raise ConfigurationError("residual needs a table built with with_rates=True")
    th = _theta(table, eps, theta)
    per_p: dict[int, Harmonic] = {}
    for (n, p), h in table.entries.items():
        r = table.rates[n, p]
        term = r.scaled(eps**n) + _L_p(h, p).scaled(eps ** (n - 2)) + _A(h).scaled(-(eps ** (n - 1)))
        per_p[p] = per_p[p] + term if p in per_p else term
    grid = table.entries[0, 1].u.grid
    terms = [(_phase(th, p), h) for p, h in per_p.items()]
    comp = [
        _real_sum([(z, pick(h)) for z, h in terms], grid)
        for pick in (lambda h: h.w[0], lambda h: h.w[1], lambda h: h.v, lambda h: h.u)
    ]
    u_a = evaluate_u_a(table, eps, theta=th)
    # subtracting F(U_a) = (0, -lam u_a^3, 0)
    v_res = comp[2] - nonlinear_force(u_a, table.lam)
    return SystemVector((comp[0], comp[1]), v_res, comp[3], table.t, eps)


def system_residual(profiles: ProfileSet, t: float, eps: float, order, norm_s: float = 1.0) -> float:
    """``H^s`` norm of the residual of the first-order system at ``(t, eps)``."""
    table = build_harmonics(profiles, t, order, with_rates=True)
    res = residual_vector(table, eps)
    if not res.is_finite():
        bad = [k for k, h in table.rates.items() if not all(c.is_finite() for c in h.components())]
        raise NumericalError(f"non-finite residual; offending harmonics {bad}")
    return res.norm(norm_s)


def residual_expansion(table: HarmonicTable, theta: float) -> dict[int, SystemVector]:
    """Residual split by powers of eps at a frozen fast phase.

    Returns ``{m: R_m}`` with ``residual = sum_m eps^m R_m`` when ``theta``
    is held fixed.  The linear part contributes powers ``n - 2, n - 1, n``
    of each ``U_{n,p}``; the cubic contributes sums of three block orders.
    """
    if table.rates is None:
        raise ConfigurationError("residual needs a table built with with_rates=True")
    grid = table.entries[0, 1].u.grid
    linear: dict[int, dict[int, Harmonic]] = {}

    def add(m, p, h):
        d = linear.setdefault(m, {})
        d[p] = d[p] + h if p in d else h

    for (n, p), h in table.entries.items():
        add(n, p, table.rates[n, p])
        add(n - 2, p, _L_p(h, p))
        add(n - 1, p, _A(h).scaled(-1.0))

    zero = Field.zeros(grid)
    out: dict[int, list[Field]] = {}
    for m, per_p in linear.items():
        terms = [(_phase(theta, p), h) for p, h in per_p.items()]
        out[m] = [
            _real_sum([(z, pick(h)) for z, h in terms], grid)
            for pick in (lambda h: h.w[0], lambda h: h.w[1], lambda h: h.v, lambda h: h.u)
        ]
    blocks: dict[int, list] = {}
    for (n, p), h in table.entries.items():
        blocks.setdefault(n, []).append((_phase(theta, p), h.u))
    u_blocks = {n: _real_sum(terms, grid) for n, terms in blocks.items()}
    for a in u_blocks:
        for b in u_blocks:
            for c in u_blocks:
                m = a + b + c
                comp = out.setdefault(m, [zero, zero, zero, zero])
                comp[2] = comp[2] - _force_term(u_blocks[a], u_blocks[b], u_blocks[c], table.lam)
    return {m: SystemVector((c[0], c[1]), c[2], c[3], table.t, float("nan")) for m, c in sorted(out.items())}


def _force_term(a: Field, b: Field, c: Field, lam: float) -> Field:
    """``-lam a b c`` (dealiased): one term of ``F(U_a)`` expanded in blocks."""
    return dealiased_product(a, b, c) * (-lam)
