"""Reference solver for ``eps^2 u_tt - Lap u + eps^-2 u + lam u^3 = 0``.

Strang splitting: half nonlinear kick, exact linear propagator, half kick.
The linear part is solved mode by mode, so the ``eps^-2`` stiffness sets no
stability limit; the step size only controls the splitting error.  Internally
the state is kept as real-FFT spectra ``(u_hat, ut_hat)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from .errors import BlowUpError, ConfigurationError
from .spectral import Field, TorusGrid, gradient, spectral_tail_fraction, sobolev_norm
from .system import SystemVector

DEFAULT_SAFETY = 1.0 / 8.0
UNDER_RESOLVED_TAIL = 1e-8


@dataclass(frozen=True)
class KGParams:
    eps: float
    lam: float
    grid: TorusGrid
    dt: float
    t_final: float
    safety: float = DEFAULT_SAFETY
    override_dt: bool = False

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise ConfigurationError(f"eps must lie in (0, 1), got {self.eps}")
        if self.dt <= 0:
            raise ConfigurationError("dt must be positive")
        if not self.override_dt and self.dt > self.safety * self.eps**2 * (1 + 1e-12):
            raise ConfigurationError(
                f"dt = {self.dt:g} exceeds {self.safety:g} * eps^2 = {self.safety * self.eps**2:g}"
            )

    @classmethod
    def default(cls, eps, lam, grid, t_final, safety=DEFAULT_SAFETY) -> "KGParams":
        return cls(eps, lam, grid, safety * eps**2, t_final, safety)


@dataclass(frozen=True)
class KGState:
    u: Field
    ut: Field
    t: float
    eps: float
    tail: float = 0.0  # largest top-octave energy fraction seen so far

    def to_system(self) -> SystemVector:
        gx, gy = gradient(self.u)
        return SystemVector((gx * self.eps, gy * self.eps), self.ut * self.eps**2, self.u, self.t, self.eps)

    @property
    def under_resolved(self) -> bool:
        return self.tail >= UNDER_RESOLVED_TAIL


def kg_init(phi: Field, psi: Field, eps: float) -> KGState:
    """``u = phi``, ``u_t = psi / eps^2`` at ``t = 0``."""
    if eps <= 0:
        raise ConfigurationError("eps must be positive")
    phi.grid.check_same(psi.grid)
    return KGState(phi, psi / eps**2, 0.0, eps)


class _KGCore:
    """rfft-based kernels for one (grid, eps)."""

    def __init__(self, grid: TorusGrid, eps: float):
        self.grid = grid
        self.eps = eps
        n = grid.n
        self.n = n
        kx = grid.xi
        ky = 2.0 * np.pi * np.arange(n // 2 + 1) / grid.side_length
        k2 = kx[:, None] ** 2 + ky[None, :] ** 2
        self.k2 = k2
        # eps^-2 sqrt(1 + eps^2 |xi|^2) avoids cancellation for small eps
        self.omega = np.sqrt(1.0 + eps * eps * k2) / (eps * eps)
        keep = np.ones((n, n // 2 + 1), dtype=bool)
        keep[n // 2, :] = False
        keep[:, n // 2] = False
        self.keep = keep
        self._flows: dict[float, tuple] = {}

    def to_hat(self, f: Field) -> np.ndarray:
        return sfft.rfft2(f.values) * self.keep

    def to_field(self, hat: np.ndarray) -> Field:
        return Field(self.grid, sfft.irfft2(hat, s=(self.n, self.n)), "real")

    def flow_coeffs(self, dt: float):
        c = self._flows.get(dt)
        if c is None:
            wt = self.omega * dt
            cs, sn = np.cos(wt), np.sin(wt)
            c = (cs, sn / self.omega, -self.omega * sn)
            if len(self._flows) < 16:
                self._flows[dt] = c
        return c

    def flow(self, uh, vh, dt):
        cs, s_over_w, minus_ws = self.flow_coeffs(dt)
        return cs * uh + s_over_w * vh, minus_ws * uh + cs * vh

    def cube(self, uh: np.ndarray) -> np.ndarray:
        n, m, h = self.n, 2 * self.n, self.n // 2
        big = np.zeros((m, n + 1), dtype=np.complex128)
        big[:h, :h] = uh[:h, :h]
        big[m - h + 1 :, :h] = uh[h + 1 :, :h]
        u = sfft.irfft2(big, s=(m, m))
        c = sfft.rfft2(u * u * u)
        out = np.zeros_like(uh)
        out[:h, :h] = c[:h, :h]
        out[h + 1 :, :h] = c[m - h + 1 :, :h]
        # padded transform scaling: 4 (interpolation) ^3 / 4 (projection)
        return out * 16.0

    def tail(self, uh: np.ndarray) -> float:
        p = np.abs(uh) ** 2
        p[:, 1:] *= 2.0  # half-plane storage
        total = p.sum()
        if total == 0:
            return 0.0
        a = np.abs(self.grid.index)
        b = np.arange(self.n // 2 + 1)
        mask = np.maximum(a[:, None], b[None, :]) >= self.n // 4
        return float(p[mask].sum() / total)


_CORES: dict[tuple, _KGCore] = {}


def _core(grid: TorusGrid, eps: float) -> _KGCore:
    key = (grid, float(eps))
    c = _CORES.get(key)
    if c is None:
        if len(_CORES) > 8:
            _CORES.clear()
        c = _CORES[key] = _KGCore(grid, eps)
    return c


def kg_linear_flow(state: KGState, dt: float) -> KGState:
    """Exact propagator of the linear Klein-Gordon equation over ``dt``."""
    core = _core(state.u.grid, state.eps)
    uh, vh = core.flow(sfft.rfft2(state.u.values), sfft.rfft2(state.ut.values), dt)
    return replace(state, u=core.to_field(uh), ut=core.to_field(vh), t=state.t + dt)


def kg_nonlinear_kick(state: KGState, dt: float, lam: float) -> KGState:
    """``u_t <- u_t - dt lam u^3 / eps^2`` (exact: u is frozen on this sub-flow)."""
    if lam == 0:
        return state
    core = _core(state.u.grid, state.eps)
    vh = sfft.rfft2(state.ut.values) - dt * lam / state.eps**2 * core.cube(core.to_hat(state.u))
    ut = core.to_field(vh)
    if not ut.is_finite():
        raise BlowUpError("non-finite nonlinear kick", state.t)
    return replace(state, ut=ut)


def kg_step(state: KGState, dt: float, lam: float) -> KGState:
    """Half kick, linear flow, half kick.  Negative ``dt`` runs backwards."""
    s = kg_nonlinear_kick(state, 0.5 * dt, lam)
    s = kg_linear_flow(s, dt)
    return kg_nonlinear_kick(s, 0.5 * dt, lam)


def kg_solve(state: KGState, params: KGParams, sample_times=None, check_every: int = 64) -> list[KGState]:
    """Integrate to ``params.t_final``; return states at each sample time and the end.

    Steps of ``params.dt`` are used, the last one before each sample time
    shortened so the time is hit exactly.  Consecutive half kicks are fused.
    """
    grid = state.u.grid
    eps, lam = state.eps, params.lam
    if abs(eps - params.eps) > 0:
        raise ConfigurationError("state and params disagree on eps")
    core = _core(grid, eps)
    uh = core.to_hat(state.u)
    vh = core.to_hat(state.ut)
    kick_scale = lam / eps**2
    t = state.t
    tail = max(state.tail, core.tail(uh))
    stops = sorted({float(s) for s in (sample_times or []) if t < s <= params.t_final} | {float(params.t_final)})
    out = []
    nstep = 0
    for stop in stops:
        nsub = max(1, math.ceil((stop - t) / params.dt - 1e-9))
        last = stop - t - params.dt * (nsub - 1)
        pending = 0.0
        for i in range(nsub):
            tau = params.dt if i < nsub - 1 else last
            pending += 0.5 * tau
            if lam:
                vh = vh - (pending * kick_scale) * core.cube(uh)
            uh, vh = core.flow(uh, vh, tau)
            pending = 0.5 * tau
            nstep += 1
            if nstep % check_every == 0:
                if not (np.all(np.isfinite(uh)) and np.all(np.isfinite(vh))):
                    raise BlowUpError("non-finite Klein-Gordon state", t)
                tail = max(tail, core.tail(uh))
            t = t + tau
        if lam:
            vh = vh - (pending * kick_scale) * core.cube(uh)
        t = stop
        if not (np.all(np.isfinite(uh)) and np.all(np.isfinite(vh))):
            raise BlowUpError("non-finite Klein-Gordon state", t)
        tail = max(tail, core.tail(uh))
        out.append(KGState(core.to_field(uh), core.to_field(vh), t, eps, tail))
    return out


def kg_energy(state: KGState, lam: float) -> float:
    """``int (eps^2/2) u_t^2 + |grad u|^2 / 2 + u^2 / (2 eps^2) + (lam/4) u^4``."""
    g = state.u.grid
    eps = state.eps
    scale = g.side_length**2 / float(g.n) ** 4
    pu = np.abs(state.u.raw) ** 2 * scale
    pv = np.abs(state.ut.raw) ** 2 * scale
    e = 0.5 * eps**2 * pv.sum() + 0.5 * np.sum(g.xi_sq * pu) + 0.5 / eps**2 * pu.sum()
    if lam:
        from .spectral import padded_values

        up = padded_values(state.u)
        e += 0.25 * lam * float(np.sum(up**4)) * (0.5 * g.h) ** 2
    return float(e)


def write_manifest(states: list[KGState], lam: float, path) -> Path:
    """CSV with columns time,energy,h1_norm,linf_norm,spectral_tail."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "energy", "h1_norm", "linf_norm", "spectral_tail"])
        for s in states:
            w.writerow(
                [
                    repr(s.t),
                    f"{kg_energy(s, lam):.16e}",
                    f"{sobolev_norm(s.u, 1.0):.16e}",
                    f"{s.u.max_abs():.16e}",
                    f"{spectral_tail_fraction(s.u):.6e}",
                ]
            )
    return path
