import math
from decimal import Decimal, getcontext

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kgnr.errors import ConfigurationError, InterpolationRefusedError
from kgnr.harness import rough_data
from kgnr.nls import NLSParams, ProfileSet, dt_g0, g2_initial, init_g0, solve_profiles
from kgnr.spectral import Field, gradient, make_grid, sobolev_norm
from kgnr.system import SystemVector
from kgnr.wkb import (
    HarmonicTable,
    WKBOrder,
    assemble_U_a,
    block,
    build_harmonics,
    evaluate_u_a,
    fast_phase,
    harmonic_set,
    harmonics_from_profiles,
    leading_order,
    max_harmonic,
    residual_expansion,
    residual_vector,
    system_residual,
)

from conftest import gaussian

getcontext().prec = 60
PI = Decimal("3.14159265358979323846264338327950288419716939937510582097494")


def const(grid, z):
    return Field.from_function(grid, lambda x, y: np.full(x.shape, z, dtype=complex), kind="complex")


def trig_data(grid):
    phi = Field.from_function(grid, lambda x, y: np.cos(x) + 0.3 * np.sin(2 * y))
    psi = Field.from_function(grid, lambda x, y: 0.5 * np.sin(y) - 0.2 * np.cos(x + y))
    return phi, psi


def table_at_zero(phi, psi, lam, K, with_rates=False):
    g0 = init_g0(phi, psi)
    g2 = g2_initial(phi, psi, lam) if K == 2 else None
    return harmonics_from_profiles(g0, g2, lam, K, 0.0, with_rates)


def diff_norm(a: SystemVector, b: SystemVector, s=1.0):
    return (a - b).norm(s)


# --- orders and phase -----------------------------------------------------------


def test_orders_and_harmonic_sets():
    assert WKBOrder(2).top == 4
    for bad in (1, 4, -2):
        with pytest.raises(ConfigurationError):
            WKBOrder(bad)
    assert [max_harmonic(n) for n in range(5)] == [1, 1, 3, 3, 5]
    assert harmonic_set(4) == [1, 3, 5]


@given(st.floats(0.0, 10.0), st.floats(0.01, 0.9))
def test_fast_phase_matches_high_precision(t, eps):
    theta = Decimal(t) / (Decimal(eps) * Decimal(eps))
    two_pi = 2 * PI
    ref = float(theta - two_pi * int(theta / two_pi))
    got = fast_phase(t, eps)
    assert 0.0 <= got < 2 * math.pi
    d = abs(got - ref)
    assert min(d, 2 * math.pi - d) <= 4e-15 * max(1.0, ref)


def test_fast_phase_beats_naive_reduction():
    t, eps = 1.0, 0.0123
    theta = Decimal(t) / (Decimal(eps) ** 2)
    ref = float(theta - 2 * PI * int(theta / (2 * PI)))
    assert abs(fast_phase(t, eps) - ref) < 1e-13


def test_phase_shift_by_two_pi_is_invisible():
    g = make_grid(32, 2 * math.pi)
    tab = table_at_zero(*trig_data(g), 1.0, 2)
    a = evaluate_u_a(tab, 0.1, theta=0.7)
    b = evaluate_u_a(tab, 0.1, theta=0.7 + 2 * math.pi)
    assert np.max(np.abs(a.values - b.values)) <= 1e-12


# --- harmonic table -------------------------------------------------------------


def test_zero_profile_gives_zero_table():
    g = make_grid(16, 2 * math.pi)
    z = Field.zeros(g, "complex")
    tab = harmonics_from_profiles(z, z, 1.0, 2, with_rates=True)
    for h in list(tab.entries.values()) + list(tab.rates.values()):
        assert all(c.max_abs() == 0 for c in h.components())


def test_cubic_harmonic_constant_profile():
    g = make_grid(8, 1.0)
    tab = harmonics_from_profiles(const(g, 1.0), None, 8.0, 0)
    h = tab[2, 3]
    assert np.allclose(h.u.values, 1.0) and np.allclose(h.v.values, 3j)
    assert h.w[0].max_abs() == 0


def test_quintic_harmonic_constant_profile():
    g = make_grid(8, 1.0)
    one = const(g, 1.0)
    tab = harmonics_from_profiles(one, Field.zeros(g, "complex"), 1.0, 2)
    h = tab[4, 5]
    assert np.allclose(h.u.values, 1 / 64)
    assert np.allclose(h.v.values, 5j / 64)


def test_table_support():
    g = make_grid(8, 1.0)
    t0 = harmonics_from_profiles(const(g, 0.5), None, 1.0, 0)
    assert set(t0.keys()) == {(0, 1), (1, 1), (2, 1), (2, 3)}
    t2 = harmonics_from_profiles(const(g, 0.5), const(g, 0.1), 1.0, 2)
    assert set(t2.keys()) == {(0, 1), (1, 1), (2, 1), (2, 3), (3, 1), (3, 3), (4, 1), (4, 3), (4, 5)}
    for n, p in t2.keys():
        assert p % 2 == 1 and p <= max_harmonic(n)
    h = t0[0, 1]
    for bad in ((0, 3), (2, 2), (5, 1)):
        with pytest.raises(ConfigurationError):
            HarmonicTable(0.0, WKBOrder(2), 1.0, {bad: h})


def test_build_refuses_unsolved_time():
    g = make_grid(16, 2 * math.pi)
    phi, psi = trig_data(g)
    prof = solve_profiles(phi, psi, NLSParams(1.0, g, 0.01, 0.1), with_g2=False)
    build_harmonics(prof, 0.1, 0)
    with pytest.raises(InterpolationRefusedError):
        build_harmonics(prof, 0.0537, 0)
    with pytest.raises(ConfigurationError):
        build_harmonics(prof, 0.1, 2)


# --- assembly -------------------------------------------------------------------


@pytest.mark.parametrize("eps", [0.3, 0.1])
def test_u_a_at_zero_order_zero(eps):
    g = make_grid(32, 2 * math.pi)
    phi, psi = trig_data(g)
    lam = 1.3
    tab = table_at_zero(phi, psi, lam, 0)
    f, q = phi.values, psi.values
    want = f + eps**2 * lam / 32 * (f**3 - 3 * f * q**2)
    got = evaluate_u_a(tab, eps, 0)
    assert np.max(np.abs(got.values - want)) < 1e-12


def test_v_at_zero_order_zero():
    g = make_grid(32, 2 * math.pi)
    phi, psi = trig_data(g)
    lam, eps = 1.0, 0.2
    g0 = init_g0(phi, psi)
    tab = table_at_zero(phi, psi, lam, 0)
    extra = 3j * lam / 8 * g0.values**3 + dt_g0(g0, lam).values
    want = psi.values + eps**2 * 2 * extra.real
    got = assemble_U_a(tab, eps, 0).v
    assert np.max(np.abs(got.values - want)) < 1e-12


def test_order_mismatch_rejected():
    g = make_grid(16, 2 * math.pi)
    tab = table_at_zero(*trig_data(g), 1.0, 0)
    with pytest.raises(ConfigurationError):
        evaluate_u_a(tab, 0.1, 2)
    with pytest.raises(ConfigurationError):
        evaluate_u_a(tab, 1.5)


def second_block_ratio(phi, psi, lam):
    tab = table_at_zero(phi, psi, lam, 2)
    b = block(tab, 2, theta=0.0)
    size = math.hypot(sobolev_norm(b.u, 1), sobolev_norm(b.v, 1))
    return size / (sobolev_norm(phi, 3) + sobolev_norm(psi, 3))


def test_second_block_vanishes_at_zero_gaussian():
    g = make_grid(64, 16 * math.pi)
    assert second_block_ratio(gaussian(g), gaussian(g, 0.7, 1.3), 1.0) <= 1e-9


def test_second_block_vanishes_at_zero_rough():
    g = make_grid(64, 2 * math.pi)
    assert second_block_ratio(rough_data(6, 3, g), rough_data(6, 4, g), 1.0) <= 1e-9


def test_odd_block_vanishes_at_zero():
    g = make_grid(64, 16 * math.pi)
    phi, psi = gaussian(g), gaussian(g, 0.5)
    tab = table_at_zero(phi, psi, 1.0, 2)
    assert block(tab, 3).norm(1) <= 1e-9 * (sobolev_norm(phi, 3) + sobolev_norm(psi, 3))
    assert block(tab, 1).norm(1) > 1.0


def test_initial_system_vector_fourth_order():
    g = make_grid(64, 16 * math.pi)
    phi, psi = gaussian(g), gaussian(g, 0.5)
    tab = table_at_zero(phi, psi, 1.0, 2)
    errs = []
    for eps in (0.2, 0.1):
        gx, gy = gradient(phi)
        exact = SystemVector((gx * eps, gy * eps), psi, phi, 0.0, eps)
        errs.append(diff_norm(assemble_U_a(tab, eps, 2, theta=0.0), exact))
    assert math.log2(errs[0] / errs[1]) == pytest.approx(4.0, abs=0.3)


@pytest.mark.parametrize("K,power", [(0, 3), (2, 5)])
def test_w_consistent_with_gradient_of_u(K, power):
    g = make_grid(64, 16 * math.pi)
    tab = table_at_zero(gaussian(g), gaussian(g, 0.5), 1.0, K)
    errs = []
    for eps in (0.2, 0.1):
        U = assemble_U_a(tab, eps, theta=0.4)
        gx, gy = gradient(U.u)
        errs.append(math.hypot(sobolev_norm(U.w[0] - gx * eps, 1), sobolev_norm(U.w[1] - gy * eps, 1)))
    assert math.log2(errs[0] / errs[1]) == pytest.approx(power, abs=0.05)


def test_zero_table_assembles_to_zero():
    g = make_grid(16, 2 * math.pi)
    z = Field.zeros(g, "complex")
    U = assemble_U_a(harmonics_from_profiles(z, z, 1.0, 2), 0.1)
    assert U.norm(1) == 0
    assert all(c.kind == "real" for c in U.components())


def test_leading_order_examples():
    g = make_grid(16, 2 * math.pi)
    phi, psi = trig_data(g)
    prof = ProfileSet(g, 1.0, [0.0], [init_g0(phi, psi)])
    assert np.max(np.abs(leading_order(prof, 0.0, 0.1).values - phi.values)) < 1e-14
    half_i = ProfileSet(g, 1.0, [0.0], [const(g, 0.5j)])
    assert np.allclose(leading_order(half_i, 0.0, 0.1, theta=math.pi / 2).values, -1.0)


def test_leading_order_is_u_a_without_its_second_block():
    g = make_grid(32, 2 * math.pi)
    phi, psi = trig_data(g)
    g0 = init_g0(phi, psi)
    prof = ProfileSet(g, 1.0, [0.0], [g0])
    tab = build_harmonics(prof, 0.0, 0)
    eps, th = 0.15, 1.1
    rest = evaluate_u_a(tab, eps, theta=th) - block(tab, 2, th).u * eps**2
    assert np.max(np.abs(rest.values - leading_order(prof, 0.0, eps, th).values)) < 1e-14


# --- residual -------------------------------------------------------------------


def test_residual_zero_profile():
    g = make_grid(16, 2 * math.pi)
    z = Field.zeros(g, "complex")
    prof = ProfileSet(g, 1.0, [0.0], [z], [z])
    assert system_residual(prof, 0.0, 0.1, 2) == 0.0


def test_residual_needs_rates():
    g = make_grid(16, 2 * math.pi)
    tab = table_at_zero(*trig_data(g), 1.0, 0)
    with pytest.raises(ConfigurationError):
        residual_vector(tab, 0.1)


@pytest.mark.parametrize("K", [0, 2])
def test_residual_expansion_sums_to_residual_and_starts_at_K_plus_one(K):
    g = make_grid(64, 8 * math.pi)
    phi, psi = gaussian(g), gaussian(g, 0.5)
    tab = table_at_zero(phi, psi, 1.0, K, with_rates=True)
    theta, eps = 0.9, 0.13
    parts = residual_expansion(tab, theta)
    scale = max(p.norm(0) for p in parts.values())
    for m, p in parts.items():
        if m < K + 1:
            assert p.norm(0) <= 1e-9 * scale, m
    assert parts[K + 1].norm(0) > 1e-3 * scale
    total = residual_vector(tab, eps, theta)
    acc = None
    for m, p in parts.items():
        comp = [c * eps**m for c in p.components()]
        acc = comp if acc is None else [a + c for a, c in zip(acc, comp)]
    err = max(np.max(np.abs(a.values - b.values)) for a, b in zip(acc, total.components()))
    assert err <= 1e-10 * max(c.max_abs() for c in total.components())


def test_linear_residual_second_order():
    g = make_grid(64, 8 * math.pi)
    phi, psi = gaussian(g), gaussian(g, 0.5)
    tab = table_at_zero(phi, psi, 0.0, 0, with_rates=True)
    r = [residual_vector(tab, eps, 0.3).norm(1) for eps in (0.1, 0.05)]
    assert math.log2(r[0] / r[1]) == pytest.approx(2.0, abs=1e-6)
