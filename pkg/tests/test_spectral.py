import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kgnr.errors import ConfigurationError, NumericalError
from kgnr.spectral import (
    Field,
    TorusGrid,
    apply_multiplier,
    dealiased_cube,
    dealiased_product,
    divergence,
    gradient,
    inner,
    laplacian,
    make_grid,
    sobolev_norm,
    spectral_tail_fraction,
)

from conftest import band_limited, gaussian


def test_wavenumbers_integer_for_2pi_box():
    g = make_grid(8, 2 * math.pi)
    assert np.array_equal(g.wavenumbers, np.arange(-4, 4).astype(float))


def test_wavenumber_step_and_extent():
    assert make_grid(16, 16 * math.pi).dk == pytest.approx(1 / 8, rel=1e-15)
    g = make_grid(256, 48 * math.pi)
    assert np.max(np.abs(g.wavenumbers)) == pytest.approx(128 / 24, rel=1e-14)
    assert g.h == 48 * math.pi / 256


def test_wavenumbers_are_bit_reproducible():
    g = make_grid(64, 16 * math.pi)
    expected = 2 * np.pi * np.arange(-32, 32) / (16 * math.pi)
    assert np.array_equal(g.wavenumbers, expected)


@pytest.mark.parametrize("n, L", [(7, 1.0), (6, 1.0), (0, 1.0), (16, 0.0), (16, -2.0), (16, float("nan"))])
def test_invalid_grids_rejected(n, L):
    with pytest.raises(ConfigurationError):
        make_grid(n, L)


def test_round_trip_and_hermitian_symmetry(grid2pi):
    rng = np.random.default_rng(1)
    f = Field(grid2pi, rng.standard_normal((32, 32)))
    back = Field.from_spectrum(grid2pi, f.spectrum, kind="real")
    assert np.max(np.abs(back.values - f.values)) <= 1e-12 * f.max_abs()
    c = f.spectrum
    r = (-np.arange(32)) % 32
    mirrored = np.conj(c[np.ix_(r, r)])
    assert np.max(np.abs(c - mirrored)) <= 1e-13 * np.max(np.abs(c))


def test_spectrum_matches_plane_wave_coefficient():
    g = make_grid(16, 2 * math.pi)
    f = Field.from_function(g, lambda x, y: np.exp(1j * (2 * x - 3 * y)))
    c = f.spectrum
    k1, k2 = np.nonzero(np.abs(c) > 0.5)
    assert (g.index[k1[0]], g.index[k2[0]]) == (2, -3)
    assert c[k1[0], k2[0]] == pytest.approx(1.0, abs=1e-14)


def test_laplacian_eigenfunction():
    g = make_grid(16, 4 * math.pi)
    xi0 = (2 * g.dk, -g.dk)
    f = Field.from_function(g, lambda x, y: np.exp(1j * (xi0[0] * x + xi0[1] * y)))
    lap = apply_multiplier(f, lambda k1, k2: -(k1**2 + k2**2))
    assert np.max(np.abs(lap.values + (xi0[0] ** 2 + xi0[1] ** 2) * f.values)) < 1e-13
    assert np.max(np.abs(laplacian(f).values - lap.values)) < 1e-14


def test_identity_multiplier(grid2pi):
    f = band_limited(grid2pi, np.random.default_rng(2), 6)
    out = apply_multiplier(f, lambda k1, k2: np.ones_like(k1))
    assert out.kind == "real"
    assert np.max(np.abs(out.values - f.values)) < 1e-13


def test_derivative_of_cosine(grid2pi):
    f = Field.from_function(grid2pi, lambda x, y: np.cos(x))
    d = apply_multiplier(f, lambda k1, k2: 1j * k1)
    assert d.kind == "real"
    x, _ = grid2pi.mesh
    assert np.max(np.abs(d.values + np.sin(x))) < 1e-13


def test_non_symmetric_multiplier_gives_complex(grid2pi):
    f = Field.from_function(grid2pi, lambda x, y: np.cos(x))
    assert apply_multiplier(f, lambda k1, k2: np.where(k1 > 0, 1.0, 0.0)).kind == "complex"


@pytest.mark.filterwarnings("ignore:divide by zero")
def test_non_finite_multiplier_raises(grid2pi):
    f = Field.from_function(grid2pi, lambda x, y: np.cos(x))
    with pytest.raises(NumericalError):
        apply_multiplier(f, lambda k1, k2: 1.0 / (k1**2 + k2**2))


def test_sobolev_norm_of_constant_and_mode():
    g = make_grid(16, 6.0)
    assert sobolev_norm(Field.from_function(g, lambda x, y: 2.5 + 0 * x), 3.0) == pytest.approx(2.5 * 6.0, rel=1e-14)
    k = (g.dk * 2, g.dk * 3)
    mode = Field.from_function(g, lambda x, y: np.exp(1j * (k[0] * x + k[1] * y)))
    for s in (0.0, 1.0, 2.5):
        assert sobolev_norm(mode, s) == pytest.approx((1 + k[0] ** 2 + k[1] ** 2) ** (s / 2) * 6.0, rel=1e-13)


def test_sobolev_norm_gaussian_matches_plane_integral():
    # |hat f|^2 for exp(-|x|^2): L^2 part pi/2, gradient part pi
    g = make_grid(128, 16 * math.pi)
    assert sobolev_norm(gaussian(g), 1.0) == pytest.approx(math.sqrt(1.5 * math.pi), rel=1e-8)
    assert sobolev_norm(gaussian(g), 0.0) == pytest.approx(math.sqrt(0.5 * math.pi), rel=1e-8)


def test_sobolev_rejects_negative_index_and_nan(grid2pi):
    f = Field.zeros(grid2pi)
    with pytest.raises(ConfigurationError):
        sobolev_norm(f, -1.0)
    bad = Field(grid2pi, np.full((32, 32), np.nan))
    with pytest.raises(NumericalError):
        sobolev_norm(bad, 1.0)


def test_single_mode_cube_has_no_spurious_modes():
    g = make_grid(16, 2 * math.pi)
    e = Field.from_function(g, lambda x, y: np.exp(1j * x))
    c = dealiased_cube(e, e, e).spectrum
    target = np.zeros_like(c)
    target[3, 0] = 1.0
    assert np.max(np.abs(c - target)) < 1e-13


def test_cube_annihilated_by_zero(grid2pi):
    f = band_limited(grid2pi, np.random.default_rng(3), 8)
    z = Field.zeros(grid2pi)
    assert np.max(np.abs(dealiased_cube(f, z, f).values)) == 0.0


def _brute_cube(a, b, c, n):
    """Triple convolution of spectra, truncated to |k| < n/2."""
    idx = np.fft.fftfreq(n, 1.0 / n).astype(int)
    nz = lambda f: [(idx[i], idx[j], f[i, j]) for i, j in zip(*np.nonzero(np.abs(f) > 0))]
    A, B, C = nz(a), nz(b), nz(c)
    res = np.zeros((n, n), dtype=complex)
    for i1, j1, x in A:
        for i2, j2, y in B:
            for i3, j3, z in C:
                k1, k2 = i1 + i2 + i3, j1 + j2 + j3
                if abs(k1) < n // 2 and abs(k2) < n // 2:
                    res[k1 % n, k2 % n] += x * y * z
    return res


def test_dealiased_cube_equals_brute_force_convolution():
    g = make_grid(16, 2 * math.pi)
    rng = np.random.default_rng(4)
    fs = [band_limited(g, rng, 3) for _ in range(3)]
    got = dealiased_cube(*fs).spectrum
    want = _brute_cube(*(f.spectrum for f in fs), 16)
    assert np.max(np.abs(got - want)) < 1e-12 * np.max(np.abs(want))


def test_product_kind_and_grid_mismatch(grid2pi):
    f = band_limited(grid2pi, np.random.default_rng(5), 4)
    assert dealiased_product(f, f).kind == "real"
    assert dealiased_product(f, f.as_complex()).kind == "complex"
    with pytest.raises(ConfigurationError):
        dealiased_cube(f, f, Field.zeros(make_grid(16, 2 * math.pi)))


@given(st.integers(0, 2**31 - 1), st.sampled_from([8, 16, 32]), st.floats(0.5, 100.0))
def test_parseval(seed, n, L):
    g = TorusGrid(n, L)
    rng = np.random.default_rng(seed)
    f = Field(g, rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)), "complex")
    lhs = np.sum(np.abs(f.values) ** 2) * g.h**2
    rhs = np.sum(np.abs(f.spectrum) ** 2) * L**2
    assert lhs == pytest.approx(rhs, rel=1e-10)


@given(st.integers(0, 2**31 - 1))
def test_multipliers_compose(seed):
    g = make_grid(16, 3.0)
    f = band_limited(g, np.random.default_rng(seed), 7, kind="complex")
    m1 = lambda k1, k2: 1j * k1 + 0.5
    m2 = lambda k1, k2: np.exp(-(k1**2 + k2**2) / 40)
    a = apply_multiplier(apply_multiplier(f, m1), m2).spectrum
    b = apply_multiplier(f, lambda k1, k2: m1(k1, k2) * m2(k1, k2)).spectrum
    assert np.max(np.abs(a - b)) <= 1e-13 * max(1.0, np.max(np.abs(b)))


@given(st.integers(0, 2**31 - 1))
def test_cube_symmetric_in_arguments(seed):
    g = make_grid(16, 2 * math.pi)
    rng = np.random.default_rng(seed)
    a, b, c = (band_limited(g, rng, 7) for _ in range(3))
    x = dealiased_cube(a, b, c).spectrum
    for perm in ((b, c, a), (c, a, b), (b, a, c)):
        assert np.max(np.abs(dealiased_cube(*perm).spectrum - x)) <= 1e-13 * max(1.0, np.max(np.abs(x)))


@given(st.integers(0, 2**31 - 1))
def test_h1_splits_into_l2_and_gradient(seed):
    g = make_grid(32, 10.0)
    f = band_limited(g, np.random.default_rng(seed), 12)
    gx, gy = gradient(f)
    lhs = sobolev_norm(f, 0) ** 2 + sobolev_norm(gx, 0) ** 2 + sobolev_norm(gy, 0) ** 2
    assert lhs == pytest.approx(sobolev_norm(f, 1) ** 2, rel=1e-10)


@given(st.integers(0, 2**31 - 1), st.floats(0.0, 3.0), st.floats(0.0, 3.0))
def test_sobolev_monotone_in_s(seed, s1, s2):
    g = make_grid(16, 5.0)
    f = band_limited(g, np.random.default_rng(seed), 7)
    lo, hi = sorted((s1, s2))
    assert sobolev_norm(f, lo) <= sobolev_norm(f, hi) * (1 + 1e-14)


def test_divergence_of_gradient_is_laplacian(grid2pi):
    f = band_limited(grid2pi, np.random.default_rng(6), 8)
    d = divergence(gradient(f))
    assert np.max(np.abs(d.values - laplacian(f).values)) < 1e-11


def test_inner_product_matches_quadrature(grid2pi):
    rng = np.random.default_rng(7)
    a = band_limited(grid2pi, rng, 8, "complex")
    b = band_limited(grid2pi, rng, 8, "complex")
    quad = np.sum(a.values * np.conj(b.values)) * grid2pi.h**2
    assert inner(a, b) == pytest.approx(quad, rel=1e-12)


def test_field_is_immutable_and_arithmetic(grid2pi):
    f = Field.from_function(grid2pi, lambda x, y: np.cos(x))
    with pytest.raises(ValueError):
        f.values[0, 0] = 1.0
    assert np.allclose((f + 1.0 - f).values, 1.0)
    assert np.allclose((2.0 * f / 2.0).values, f.values)
    assert (f * 1j).kind == "complex"


def test_tail_fraction_of_low_mode_is_zero(grid2pi):
    f = Field.from_function(grid2pi, lambda x, y: np.cos(x) + np.sin(2 * y))
    assert spectral_tail_fraction(f) < 1e-28
    assert spectral_tail_fraction(Field.zeros(grid2pi)) == 0.0
