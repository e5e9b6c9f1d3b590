"""Periodic square grids, Fourier coefficients and spectral operators.

A field on the torus ``[-L/2, L/2)^2`` is stored as its samples.  Its spectrum
is the set of coefficients ``c_k`` with

    f(x) = sum_k c_k exp(i xi_k . x),   xi_k = 2 pi k / L,

so that formulas written for functions on the plane can be transcribed
literally (``c_k`` differs from raw FFT output by ``(-1)^(k1+k2) / n^2``).
Spectra are kept in FFT index order; ``TorusGrid.wavenumbers`` lists the
sorted one-dimensional table.

Cubic products are dealiased by zero padding to twice the resolution, which
is exact for inputs whose spectra fit in the lower half of the index range.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Literal

import numpy as np
import scipy.fft as sfft

from .errors import ConfigurationError, NumericalError

Kind = Literal["real", "complex"]
Multiplier = Callable[[np.ndarray, np.ndarray], np.ndarray]

__all__ = [
    "TorusGrid",
    "Field",
    "make_grid",
    "apply_multiplier",
    "laplacian",
    "gradient",
    "divergence",
    "sobolev_norm",
    "dealiased_product",
    "dealiased_cube",
    "inner",
    "spectral_tail_fraction",
]


@dataclass(frozen=True)
class TorusGrid:
    n_per_dim: int
    side_length: float

    def __post_init__(self):
        n = self.n_per_dim
        if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
            raise ConfigurationError(f"n_per_dim must be an integer, got {n!r}")
        if n < 8 or n % 2:
            raise ConfigurationError(f"n_per_dim must be even and >= 8, got {n}")
        if not np.isfinite(self.side_length) or self.side_length <= 0:
            raise ConfigurationError(f"side_length must be positive, got {self.side_length}")
        object.__setattr__(self, "n_per_dim", int(n))
        object.__setattr__(self, "side_length", float(self.side_length))

    @property
    def n(self) -> int:
        return self.n_per_dim

    @property
    def h(self) -> float:
        return self.side_length / self.n_per_dim

    @property
    def dk(self) -> float:
        return 2.0 * np.pi / self.side_length

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Sorted table ``2 pi k / L`` for ``k = -n/2, ..., n/2 - 1``."""
        k = np.arange(-self.n // 2, self.n // 2)
        return 2.0 * np.pi * k / self.side_length

    @cached_property
    def index(self) -> np.ndarray:
        """Integer mode numbers in FFT order."""
        return np.rint(sfft.fftfreq(self.n, 1.0 / self.n)).astype(np.int64)

    @cached_property
    def xi(self) -> np.ndarray:
        """One-dimensional wavenumbers in FFT order."""
        return 2.0 * np.pi * self.index / self.side_length

    @cached_property
    def xi_mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.xi, self.xi, indexing="ij")

    @cached_property
    def xi_sq(self) -> np.ndarray:
        k1, k2 = self.xi_mesh
        return k1 * k1 + k2 * k2

    @cached_property
    def x(self) -> np.ndarray:
        return -0.5 * self.side_length + self.h * np.arange(self.n)

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.x, indexing="ij")

    @cached_property
    def phase_sign(self) -> np.ndarray:
        # exp(i xi_k L / 2) = (-1)^k; relates raw FFT output to c_k
        s = 1.0 - 2.0 * (self.index % 2)
        return np.outer(s, s)

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """True for modes with ``k1 == -n/2`` or ``k2 == -n/2``."""
        ny = self.index == -self.n // 2
        return ny[:, None] | ny[None, :]

    @cached_property
    def top_octave_mask(self) -> np.ndarray:
        """Modes with ``max(|k1|, |k2|) >= n/4``."""
        a = np.abs(self.index)
        return np.maximum(a[:, None], a[None, :]) >= self.n // 4

    def check_same(self, *others: "TorusGrid") -> None:
        for g in others:
            if g != self:
                raise ConfigurationError(f"grid mismatch: {self} vs {g}")


def make_grid(n_per_dim: int, side_length: float) -> TorusGrid:
    return TorusGrid(n_per_dim, side_length)


def _to_raw(values: np.ndarray) -> np.ndarray:
    return sfft.fft2(values)


def _from_raw(raw: np.ndarray) -> np.ndarray:
    return sfft.ifft2(raw)


@dataclass(frozen=True, eq=False)
class Field:
    """Samples of a real or complex function on a ``TorusGrid``.

    Values are row-major with the first index along ``x1``.  The array is
    made read-only; arithmetic returns new fields.
    """

    grid: TorusGrid
    values: np.ndarray
    kind: Kind = field(default="real")

    def __post_init__(self):
        n = self.grid.n
        if self.kind not in ("real", "complex"):
            raise ConfigurationError(f"unknown field kind {self.kind!r}")
        dtype = np.float64 if self.kind == "real" else np.complex128
        v = np.asarray(self.values)
        if self.kind == "real" and np.iscomplexobj(v):
            raise ConfigurationError("complex samples given for a real field")
        v = np.array(v, dtype=dtype, copy=True).reshape(n, n)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    # construction --------------------------------------------------------
    @classmethod
    def zeros(cls, grid: TorusGrid, kind: Kind = "real") -> "Field":
        return cls(grid, np.zeros((grid.n, grid.n)), kind)

    @classmethod
    def from_function(cls, grid: TorusGrid, fn, kind: Kind | None = None) -> "Field":
        x1, x2 = grid.mesh
        v = np.asarray(fn(x1, x2))
        if kind is None:
            kind = "complex" if np.iscomplexobj(v) else "real"
        return cls(grid, np.broadcast_to(v, x1.shape), kind)

    @classmethod
    def from_spectrum(cls, grid: TorusGrid, coeffs: np.ndarray, kind: Kind = "complex") -> "Field":
        raw = np.asarray(coeffs) * grid.phase_sign * grid.n**2
        v = _from_raw(raw)
        if kind == "real":
            v = v.real
        return cls(grid, v, kind)

    @classmethod
    def _from_raw(cls, grid: TorusGrid, raw: np.ndarray, kind: Kind) -> "Field":
        v = _from_raw(raw)
        return cls(grid, v.real if kind == "real" else v, kind)

    # spectral view ----------------------------------------------------------
    @cached_property
    def raw(self) -> np.ndarray:
        r = _to_raw(self.values)
        r.flags.writeable = False
        return r

    @cached_property
    def spectrum(self) -> np.ndarray:
        """Coefficients ``c_k`` of ``exp(i xi_k . x)`` in FFT index order."""
        c = self.raw * self.grid.phase_sign / self.grid.n**2
        c.flags.writeable = False
        return c

    # arithmetic -------------------------------------------------------------
    def _coerce(self, other) -> "Field":
        if not isinstance(other, Field):
            return NotImplemented
        self.grid.check_same(other.grid)
        return other

    def _wrap(self, v: np.ndarray) -> "Field":
        kind: Kind = "complex" if np.iscomplexobj(v) else "real"
        return Field(self.grid, v, kind)

    def __add__(self, other):
        if np.isscalar(other):
            return self._wrap(self.values + other)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self._wrap(self.values + other.values)

    __radd__ = __add__

    def __sub__(self, other):
        if np.isscalar(other):
            return self._wrap(self.values - other)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self._wrap(self.values - other.values)

    def __rsub__(self, other):
        if np.isscalar(other):
            return self._wrap(other - self.values)
        return NotImplemented

    def __neg__(self):
        return Field(self.grid, -self.values, self.kind)

    def __mul__(self, other):
        # pointwise products of two fields go through dealiased_product
        if np.isscalar(other):
            return self._wrap(self.values * other)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if np.isscalar(other):
            return self._wrap(self.values / other)
        return NotImplemented

    def conj(self) -> "Field":
        if self.kind == "real":
            return self
        return Field(self.grid, np.conj(self.values), "complex")

    @property
    def real(self) -> "Field":
        return Field(self.grid, self.values.real, "real")

    @property
    def imag(self) -> "Field":
        return Field(self.grid, self.values.imag, "real")

    def as_complex(self) -> "Field":
        return self if self.kind == "complex" else Field(self.grid, self.values, "complex")

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def __repr__(self):
        return f"Field({self.kind}, n={self.grid.n}, L={self.grid.side_length:g})"


def _evaluate_multiplier(grid: TorusGrid, m) -> np.ndarray:
    if callable(m):
        k1, k2 = grid.xi_mesh
        vals = np.broadcast_to(np.asarray(m(k1, k2)), k1.shape)
    else:
        vals = np.broadcast_to(np.asarray(m), (grid.n, grid.n))
    if not np.all(np.isfinite(vals)):
        raise NumericalError("Fourier multiplier is not finite on the wavenumber table")
    return vals


def _is_real_symmetric(grid: TorusGrid, vals: np.ndarray) -> bool:
    """Check ``m(-xi) == conj(m(xi))`` on the grid, Nyquist modes excluded."""
    r = (-np.arange(grid.n)) % grid.n
    reflected = vals[np.ix_(r, r)]
    diff = np.where(grid.nyquist_mask, 0.0, reflected - np.conj(vals))
    scale = max(float(np.max(np.abs(vals))), 1e-300)
    return bool(np.max(np.abs(diff)) <= 1e-14 * scale)


def apply_multiplier(f: Field, m: Multiplier | np.ndarray | complex) -> Field:
    """Return the field with spectrum ``m(xi_k) c_k``.

    ``m`` is a callable of the two wavenumber meshes (FFT order) or an array
    on that mesh.  The result is real when ``f`` is real and ``m`` satisfies
    ``m(-xi) = conj(m(xi))``.  For such ``m`` the unpaired Nyquist modes are
    dropped whatever the kind of ``f``, so the operator commutes with taking
    real parts.
    """
    vals = _evaluate_multiplier(f.grid, m)
    raw = f.raw * vals
    if _is_real_symmetric(f.grid, vals):
        raw = np.where(f.grid.nyquist_mask, 0.0, raw)
        return Field._from_raw(f.grid, raw, f.kind)
    return Field._from_raw(f.grid, raw, "complex")


def laplacian(f: Field) -> Field:
    return apply_multiplier(f, -f.grid.xi_sq)


def gradient(f: Field) -> tuple[Field, Field]:
    return (
        apply_multiplier(f, lambda k1, k2: 1j * k1),
        apply_multiplier(f, lambda k1, k2: 1j * k2),
    )


def divergence(w: tuple[Field, Field]) -> Field:
    return (
        apply_multiplier(w[0], lambda k1, k2: 1j * k1)
        + apply_multiplier(w[1], lambda k1, k2: 1j * k2)
    )


def sobolev_norm(f: Field, s: float) -> float:
    """Spectral ``H^s`` norm ``L (sum_k (1 + |xi_k|^2)^s |c_k|^2)^(1/2)``."""
    if s < 0:
        raise ConfigurationError("Sobolev index must be non-negative")
    if not f.is_finite():
        raise NumericalError("sobolev_norm of a non-finite field")
    g = f.grid
    c2 = (f.raw.real**2 + f.raw.imag**2) / float(g.n) ** 4
    if s == 0:
        total = c2.sum()
    else:
        total = np.sum((1.0 + g.xi_sq) ** s * c2)
    return float(g.side_length * np.sqrt(total))


def inner(a: Field, b: Field) -> complex:
    """``int a conj(b) dx`` by Parseval."""
    a.grid.check_same(b.grid)
    g = a.grid
    return complex(np.vdot(b.raw, a.raw) * g.side_length**2 / float(g.n) ** 4)


# --- dealiased products ------------------------------------------------------


def pad_raw(raw: np.ndarray, n: int) -> np.ndarray:
    """Embed an n x n raw spectrum into a 2n x 2n one (Nyquist dropped)."""
    m = 2 * n
    h = n // 2
    out = np.zeros((m, m), dtype=np.complex128)
    out[:h, :h] = raw[:h, :h]
    out[:h, m - h + 1 :] = raw[:h, h + 1 :]
    out[m - h + 1 :, :h] = raw[h + 1 :, :h]
    out[m - h + 1 :, m - h + 1 :] = raw[h + 1 :, h + 1 :]
    return out


def truncate_raw(big: np.ndarray, n: int) -> np.ndarray:
    """Inverse of :func:`pad_raw`: keep modes ``|k| < n/2`` of a 2n spectrum."""
    m = 2 * n
    h = n // 2
    out = np.zeros((n, n), dtype=np.complex128)
    out[:h, :h] = big[:h, :h]
    out[:h, h + 1 :] = big[:h, m - h + 1 :]
    out[h + 1 :, :h] = big[m - h + 1 :, :h]
    out[h + 1 :, h + 1 :] = big[m - h + 1 :, m - h + 1 :]
    return out


def padded_values(f: Field) -> np.ndarray:
    """Samples of ``f`` on the twice-refined grid (spectral interpolation)."""
    v = sfft.ifft2(pad_raw(f.raw, f.grid.n)) * 4.0
    return v.real if f.kind == "real" else v


def dealiased_product(*factors: Field) -> Field:
    """Pointwise product of up to three fields without aliasing.

    Each factor is interpolated to the 2n grid, multiplied there, and the
    result is projected back onto the modes ``|k| < n/2``.
    """
    if not 1 <= len(factors) <= 3:
        raise ConfigurationError("dealiased_product takes one to three factors")
    grid = factors[0].grid
    grid.check_same(*(f.grid for f in factors[1:]))
    prod = padded_values(factors[0])
    for f in factors[1:]:
        prod = prod * padded_values(f)
    raw = truncate_raw(sfft.fft2(prod), grid.n) * 0.25
    kind: Kind = "real" if all(f.kind == "real" for f in factors) else "complex"
    out = Field._from_raw(grid, raw, kind)
    if not out.is_finite():
        raise NumericalError("non-finite dealiased product")
    return out


def dealiased_cube(a: Field, b: Field, c: Field) -> Field:
    return dealiased_product(a, b, c)


def spectral_tail_fraction(f: Field) -> float:
    """Fraction of spectral energy in the top octave of modes."""
    p = f.raw.real**2 + f.raw.imag**2
    total = p.sum()
    if total == 0:
        return 0.0
    return float(p[f.grid.top_octave_mask].sum() / total)
