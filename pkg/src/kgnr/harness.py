"""Experiment engine: test data, KG-vs-WKB comparisons, rate fits and reports.

Ground truth is the Klein-Gordon solve at step ``dt/2``; the run at ``dt``
gives a Richardson estimate of its error, ``|u_dt - u_dt/2| / 3``.  The same
is done for the profile solves, and the two estimates are added to form the
self-convergence residual attached to every row.
"""

from __future__ import annotations

import csv
import io
import math
import time as _time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import (
    BlowUpError,
    ConfigurationError,
    InterpolationRefusedError,
    NumericalError,
    TailCheckError,
)
from .kg import DEFAULT_SAFETY, KGParams, kg_init, kg_solve
from .nls import NLSParams, ProfileSet, g2_initial, solve_profiles
from .spectral import Field, TorusGrid, sobolev_norm
from .wkb import build_harmonics, evaluate_u_a, leading_order, system_residual

DEFAULT_LADDER = (0.2, 0.1414, 0.1, 0.0707, 0.05)
DEFAULT_SIDE = 16.0 * math.pi
TAIL_TOLERANCE = 1e-12
CSV_COLUMNS = (
    "eps",
    "time",
    "order_k",
    "norm_s",
    "error",
    "leading_error",
    "residual",
    "self_conv_residual",
    "flags",
)


# --- data -------------------------------------------------------------------------


@dataclass(frozen=True)
class Gaussian:
    amp: float = 1.0
    width: float = 1.0
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.width > 0:
            raise ConfigurationError("Gaussian width must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if len(self.center) != 2:
            raise ConfigurationError("Gaussian center must have two coordinates")


@dataclass(frozen=True)
class DataSpec:
    """Initial data: a Gaussian each for phi and psi, or rough random data."""

    kind: str = "gaussian"
    phi: Gaussian = Gaussian()
    psi: Gaussian = Gaussian()
    s_target: float = 6.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("gaussian", "rough"):
            raise ConfigurationError(f"data.kind must be gaussian or rough, got {self.kind!r}")
        if self.kind == "rough" and not self.s_target > 1:
            raise ConfigurationError("rough data needs s_target > 1")


def tail_check(f: Field, tol: float = TAIL_TOLERANCE) -> None:
    """Raise unless ``|f|`` on the domain edge is below ``tol * max|f|``."""
    peak = f.max_abs()
    v = np.abs(f.values)
    edge = max(float(v[0, :].max()), float(v[:, 0].max()))
    if edge > tol * peak:
        raise TailCheckError(
            f"field is {edge / peak:.2e} of its peak on the domain edge (limit {tol:g}); "
            f"enlarge side_length (currently {f.grid.side_length:g})"
        )


def gaussian_data(amp: float, width: float, center, grid: TorusGrid) -> Field:
    """Samples of ``amp * exp(-|x - center|^2 / width^2)``, tail-checked."""
    if not width > 0:
        raise ConfigurationError("width must be positive")
    cx, cy = center
    f = Field.from_function(grid, lambda x, y: amp * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / width**2))
    tail_check(f)
    return f


def _splitmix64(x: np.ndarray) -> np.ndarray:
    x = x + np.uint64(0x9E3779B97F4A7C15)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def _mode_phases(seed: int, k1: np.ndarray, k2: np.ndarray) -> np.ndarray:
    """Deterministic phase in [0, 2 pi) per mode, independent of the grid size."""
    with np.errstate(over="ignore"):
        h = _splitmix64(np.full(k1.shape, np.uint64(seed & 0xFFFFFFFFFFFFFFFF)))
        h = _splitmix64(h ^ k1.astype(np.int64).view(np.uint64))
        h = _splitmix64(h ^ k2.astype(np.int64).view(np.uint64))
    return (h >> np.uint64(11)).astype(np.float64) * (2.0 * np.pi / 2.0**53)


def rough_data(s_target: float, seed: int, grid: TorusGrid) -> Field:
    """Real field with ``|c_k| = (1 + |xi_k|)^-(s_target + 1)`` and seeded phases.

    Phases depend only on ``(seed, k)``, so refining the grid adds modes
    without changing the existing ones.  Nyquist modes are zero.
    """
    if not s_target > 1:
        raise ConfigurationError("s_target must exceed 1")
    k1 = grid.index[:, None] * np.ones((1, grid.n), dtype=np.int64)
    k2 = grid.index[None, :] * np.ones((grid.n, 1), dtype=np.int64)
    canonical = (k1 > 0) | ((k1 == 0) & (k2 > 0))
    ph = np.where(canonical, _mode_phases(seed, k1, k2), -_mode_phases(seed, -k1, -k2))
    ph[(k1 == 0) & (k2 == 0)] = 0.0
    mag = (1.0 + np.sqrt(grid.xi_sq)) ** (-(s_target + 1.0))
    c = mag * np.exp(1j * ph)
    c[grid.nyquist_mask] = 0.0
    return Field.from_spectrum(grid, c, kind="real")


def make_data(data: DataSpec, grid: TorusGrid) -> tuple[Field, Field]:
    if data.kind == "rough":
        # periodic by construction: no tail check
        return rough_data(data.s_target, data.seed, grid), rough_data(data.s_target, data.seed + 1, grid)
    p, q = data.phi, data.psi
    return gaussian_data(p.amp, p.width, p.center, grid), gaussian_data(q.amp, q.width, q.center, grid)


# --- experiment description ------------------------------------------------------


@dataclass(frozen=True)
class ExperimentSpec:
    data: DataSpec = DataSpec()
    lam: float = 1.0
    eps_ladder: tuple[float, ...] = DEFAULT_LADDER
    times: tuple[float, ...] = (1.0,)
    order_k: int = 0
    norm_s: float = 1.0
    n: int = 128
    side_length: float = DEFAULT_SIDE
    dt_safety: float = DEFAULT_SAFETY
    out_dir: str = "out"
    nls_dt: float = 1e-3
    max_tighten: int = 3

    def __post_init__(self):
        ladder = tuple(float(e) for e in self.eps_ladder)
        times = tuple(float(t) for t in self.times)
        object.__setattr__(self, "eps_ladder", ladder)
        object.__setattr__(self, "times", times)
        if not ladder:
            raise ConfigurationError("eps ladder is empty")
        if any(not 0 < e <= 0.5 for e in ladder):
            raise ConfigurationError("every eps must lie in (0, 0.5]")
        if any(b >= a for a, b in zip(ladder, ladder[1:])):
            raise ConfigurationError("eps ladder must be strictly decreasing")
        if not times or any(not t > 0 for t in times):
            raise ConfigurationError("times must be positive")
        if self.order_k not in (0, 2):
            raise ConfigurationError("order_k must be 0 or 2")
        if self.norm_s < 0:
            raise ConfigurationError("norm_s must be non-negative")
        if not math.isfinite(self.lam):
            raise ConfigurationError("lambda must be finite")
        if not 0 < self.dt_safety <= 1:
            raise ConfigurationError("dt safety factor must lie in (0, 1]")
        TorusGrid(self.n, self.side_length)

    @property
    def grid(self) -> TorusGrid:
        return TorusGrid(self.n, self.side_length)


# --- rate fits ---------------------------------------------------------------------


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    points: tuple[tuple[float, float], ...]  # (log x, log y)


def _ols(lx: np.ndarray, ly: np.ndarray) -> RateFit:
    if lx.size < 3:
        raise ConfigurationError("a rate fit needs at least 3 points")
    if not (np.all(np.isfinite(lx)) and np.all(np.isfinite(ly))):
        raise NumericalError("non-finite value in rate fit")
    if np.unique(lx).size != lx.size:
        raise ConfigurationError("rate fit abscissae must be distinct")
    r = stats.linregress(lx, ly)
    return RateFit(float(r.slope), float(r.intercept), float(r.rvalue**2), tuple(zip(lx.tolist(), ly.tolist())))


def fit_rate(points: Sequence[tuple[float, float]]) -> RateFit:
    """Least squares of ``log error`` on ``log eps``: ``error ~ exp(intercept) eps^slope``."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        return _ols(np.log(pts[:, 0]), np.log(pts[:, 1]))


def fit_growth(times: Sequence[float], values: Sequence[float]) -> RateFit:
    """Exponent ``a`` in ``values ~ C (1 + t)^a``."""
    t = np.asarray(times, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return _ols(np.log1p(t), np.log(np.asarray(values, dtype=float)))


# --- limit experiment -------------------------------------------------------------------


@dataclass(frozen=True)
class LimitRow:
    eps: float
    time: float
    order_k: int
    norm_s: float
    error: float
    leading_error: float
    residual: float
    self_conv_residual: float
    flags: tuple[str, ...] = ()
    kg_dt: float = float("nan")

    @property
    def ok(self) -> bool:
        return not self.flags or set(self.flags) <= {"dt_tightened"}

    @property
    def guard_passed(self) -> bool:
        return math.isfinite(self.error) and self.self_conv_residual <= self.error / 10.0


@dataclass(frozen=True)
class FitRow:
    time: float
    error: float  # slopes
    leading_error: float
    residual: float
    r_squared: float
    flags: tuple[str, ...]


@dataclass
class LimitReport:
    spec: ExperimentSpec
    rows: list[LimitRow] = field(default_factory=list)
    fits: list[FitRow] = field(default_factory=list)

    def column(self, name: str, t: float | None = None) -> list[float]:
        return [getattr(r, name) for r in self.rows if t is None or r.time == t]

    def fit(self, t: float, column: str = "error") -> RateFit:
        rows = [r for r in self.rows if r.time == t]
        return fit_rate([(r.eps, getattr(r, column)) for r in rows])


def nls_params(lam: float, grid: TorusGrid, dt: float, t_final: float) -> NLSParams:
    """Profile solver parameters; ``lam = 0`` selects the free Schrodinger flow."""
    return NLSParams(lam, grid, dt, t_final, linear=lam == 0)


def _profile_pair(phi, psi, spec: ExperimentSpec, with_g2: bool) -> tuple[ProfileSet, ProfileSet]:
    t_final = max(spec.times)
    dt = min(spec.nls_dt, t_final)
    grid = phi.grid
    g2_0 = g2_initial(phi, psi, spec.lam) if with_g2 else None
    coarse = solve_profiles(phi, psi, nls_params(spec.lam, grid, dt, t_final), with_g2, spec.times, g2_0)
    fine = solve_profiles(phi, psi, nls_params(spec.lam, grid, dt / 2, t_final), with_g2, spec.times, g2_0)
    return coarse, fine


def _kg_pair(phi, psi, eps, spec: ExperimentSpec, target: float):
    """KG solutions at the sample times for ``dt`` and ``dt/2``, tightening ``dt``.

    ``dt`` starts at ``safety * eps^2`` and is halved (at most ``max_tighten``
    times) until the Richardson estimate drops below ``target``.
    """
    grid = phi.grid
    state0 = kg_init(phi, psi, eps)
    t_final = max(spec.times)
    dt = spec.dt_safety * eps**2
    coarse = kg_solve(state0, KGParams(eps, spec.lam, grid, dt, t_final, spec.dt_safety), spec.times)
    tightened = 0
    while True:
        fine = kg_solve(state0, KGParams(eps, spec.lam, grid, dt / 2, t_final, spec.dt_safety), spec.times)
        sc = [sobolev_norm(a.u - b.u, spec.norm_s) / 3.0 for a, b in zip(coarse, fine)]
        if max(sc) <= target or tightened >= spec.max_tighten:
            return fine, sc, dt / 2, tightened
        coarse, dt, tightened = fine, dt / 2, tightened + 1


def _nan_row(spec, eps, t, flags, dt=float("nan")) -> LimitRow:
    nan = float("nan")
    return LimitRow(eps, t, spec.order_k, spec.norm_s, nan, nan, nan, nan, tuple(flags), dt)


def run_limit_experiment(spec: ExperimentSpec, with_residual: bool = True) -> LimitReport:
    """One row per ``(eps, t)``: error of ``u_a`` (order K), of the leading term, and diagnostics."""
    grid = spec.grid
    phi, psi = make_data(spec.data, grid)
    report = LimitReport(spec)
    with_g2 = spec.order_k == 2
    coarse_p, fine_p = _profile_pair(phi, psi, spec, with_g2)
    for eps in spec.eps_ladder:
        available = [t for t in spec.times if not (fine_p.truncated and t > fine_p.truncated_at)]
        for t in spec.times:
            if t not in available:
                report.rows.append(_nan_row(spec, eps, t, ["truncated"]))
        if not available:
            continue
        sub = replace(spec, times=tuple(available))
        try:
            states, kg_sc, dt, tightened = _kg_pair(phi, psi, eps, sub, 0.1 * eps ** (spec.order_k + 1))
        except BlowUpError as exc:
            for t in available:
                report.rows.append(_nan_row(spec, eps, t, ["blow_up", f"t_fail={exc.time:.6g}"]))
            continue
        for t, state, sc in zip(available, states, kg_sc):
            report.rows.append(_measure(spec, eps, t, state, sc, coarse_p, fine_p, dt, tightened, with_residual))
    report.rows.sort(key=lambda r: (-r.eps, r.time))
    report.fits = _fits(report)
    return report


def _measure(spec, eps, t, state, kg_sc, coarse_p, fine_p, dt, tightened, with_residual) -> LimitRow:
    s = spec.norm_s
    flags = []
    try:
        ua = evaluate_u_a(build_harmonics(fine_p, t, spec.order_k), eps)
        ua_c = evaluate_u_a(build_harmonics(coarse_p, t, spec.order_k), eps)
        lead = leading_order(fine_p, t, eps)
    except InterpolationRefusedError:
        return _nan_row(spec, eps, t, ["truncated"], dt)
    error = sobolev_norm(state.u - ua, s)
    lead_err = sobolev_norm(state.u - lead, s)
    sc = kg_sc + sobolev_norm(ua - ua_c, s) / 3.0
    residual = system_residual(fine_p, t, eps, spec.order_k, s) if with_residual else float("nan")
    if not sc <= error / 10.0:
        flags.append("self_conv_guard")
    if state.under_resolved:
        flags.append("under_resolved")
    if tightened:
        flags.append("dt_tightened")
    return LimitRow(eps, t, spec.order_k, s, error, lead_err, residual, sc, tuple(flags), dt)


def _fits(report: LimitReport) -> list[FitRow]:
    out = []
    for t in report.spec.times:
        rows = [r for r in report.rows if r.time == t and math.isfinite(r.error)]
        if len(rows) < 2:
            continue
        le = np.log([r.eps for r in rows])

        def slope(col):
            ly = np.log([getattr(r, col) for r in rows])
            if not np.all(np.isfinite(ly)):
                return float("nan"), float("nan")
            if len(rows) == 2:
                return float((ly[1] - ly[0]) / (le[1] - le[0])), float("nan")
            f = _ols(le, ly)
            return f.slope, f.r_squared

        e, r2 = slope("error")
        flags = ["fit"] + (["two_point_slope"] if len(rows) == 2 else [])
        out.append(FitRow(t, e, slope("leading_error")[0], slope("residual")[0], r2, tuple(flags)))
    return out


# --- residual scaling ----------------------------------------------------------------------


def residual_scaling(spec: ExperimentSpec) -> LimitReport:
    """``system_residual`` over the eps ladder at each time (no Klein-Gordon solve)."""
    grid = spec.grid
    phi, psi = make_data(spec.data, grid)
    with_g2 = spec.order_k == 2
    g2_0 = g2_initial(phi, psi, spec.lam) if with_g2 else None
    t_final = max(spec.times)
    prof = solve_profiles(
        phi, psi, nls_params(spec.lam, grid, min(spec.nls_dt, t_final), t_final), with_g2, spec.times, g2_0
    )
    report = LimitReport(spec)
    nan = float("nan")
    for eps in spec.eps_ladder:
        for t in spec.times:
            try:
                res = system_residual(prof, t, eps, spec.order_k, spec.norm_s)
            except InterpolationRefusedError:
                report.rows.append(_nan_row(spec, eps, t, ["truncated"]))
                continue
            report.rows.append(LimitRow(eps, t, spec.order_k, spec.norm_s, nan, nan, res, nan, ("residual_only",)))
    for t in spec.times:
        rows = [r for r in report.rows if r.time == t and math.isfinite(r.residual)]
        if len(rows) >= 3:
            f = fit_rate([(r.eps, r.residual) for r in rows])
            report.fits.append(FitRow(t, nan, nan, f.slope, f.r_squared, ("fit", "residual_only")))
    return report


# --- growth in time -------------------------------------------------------------------


@dataclass
class GrowthReport:
    eps: float
    order_k: int
    times: list[float]
    scaled_errors: list[float]  # error / eps^(K+1)
    fit: RateFit | None
    limit: LimitReport


def growth_experiment(spec: ExperimentSpec, eps: float | None = None, times=(1.0, 2.0, 4.0, 8.0)) -> GrowthReport:
    """Error growth in ``t`` at fixed eps; report only, no pass/fail."""
    if spec.lam <= 0:
        raise ConfigurationError("growth experiment expects lambda > 0")
    eps = spec.eps_ladder[0] if eps is None else eps
    sub = replace(spec, eps_ladder=(eps,), times=tuple(times))
    rep = run_limit_experiment(sub, with_residual=False)
    scale = eps ** (spec.order_k + 1)
    ts = [r.time for r in rep.rows]
    vals = [r.error / scale for r in rep.rows]
    ok = [(t, v) for t, v in zip(ts, vals) if math.isfinite(v) and v > 0]
    fit = fit_growth(*zip(*ok)) if len(ok) >= 3 else None
    return GrowthReport(eps, spec.order_k, ts, vals, fit, rep)


# --- decay of g0 ---------------------------------------------------------------------------


MIN_DECAY_SIDE = 48.0 * math.pi


@dataclass(frozen=True)
class DecayConfig:
    lam: float = 1.0
    data: DataSpec = DataSpec()
    n: int = 256
    side_length: float = MIN_DECAY_SIDE
    t_final: float = 10.0
    dt: float = 1e-2
    sample_every: float = 0.1
    window: tuple[float, float] = (1.0, 10.0)
    edge_band: float = 0.4  # outer band max(|x1|, |x2|) >= edge_band * L
    edge_tolerance: float = 1e-2  # allowed max|g0| in that band relative to the peak

    def __post_init__(self):
        if self.lam <= 0:
            raise ConfigurationError("decay experiment needs lambda > 0")
        if self.side_length < MIN_DECAY_SIDE * (1 - 1e-12):
            raise ConfigurationError("decay experiment needs side_length >= 48 pi")
        lo, hi = self.window
        if not 0 <= lo < hi <= self.t_final:
            raise ConfigurationError("bad fit window")


@dataclass
class DecayReport:
    times: list[float]
    max_abs: list[float]
    edge_ratio: list[float]
    fit: RateFit | None
    window: tuple[float, float]
    flags: tuple[str, ...]


def edge_amplitude_ratio(g: Field, band: float = 0.4) -> float:
    """``max |g|`` over the outer band of the box, relative to ``max |g|``.

    Periodic images add roughly this much to the peak, so it bounds the
    wrap-around contamination of a peak-amplitude measurement.
    """
    x1, x2 = g.grid.mesh
    mask = np.maximum(np.abs(x1), np.abs(x2)) >= band * g.grid.side_length
    a = np.abs(g.values)
    peak = a.max()
    return float(a[mask].max() / peak) if peak > 0 else 0.0


def decay_experiment(cfg: DecayConfig) -> DecayReport:
    """``max |g0(t)|`` on a time grid and its log-log slope against ``1 + t``.

    If the solution reaches the edge of the box (wrap-around), the fit
    window ends at the last clean sample and the report is flagged.
    """
    grid = TorusGrid(cfg.n, cfg.side_length)
    phi, psi = make_data(cfg.data, grid)
    nsamp = int(round(cfg.t_final / cfg.sample_every))
    times = [cfg.t_final * i / nsamp for i in range(1, nsamp + 1)]
    prof = solve_profiles(phi, psi, NLSParams(cfg.lam, grid, cfg.dt, cfg.t_final), False, times)
    ts = [0.0] + times
    g0s = [prof.at(t)[0] for t in ts]
    peaks = [g.max_abs() for g in g0s]
    edges = [edge_amplitude_ratio(g, cfg.edge_band) for g in g0s]
    flags = []
    if max(peaks) == 0:
        return DecayReport(ts, peaks, edges, None, cfg.window, ("zero_datum",))
    lo, hi = cfg.window
    bad = [t for t, e in zip(ts, edges) if e > cfg.edge_tolerance]
    if bad and bad[0] <= hi:
        hi = max([t for t in ts if t < bad[0]], default=lo)
        flags.append(f"wraparound_window_end={hi:g}")
    sel = [(t, p) for t, p in zip(ts, peaks) if lo <= t <= hi]
    fit = fit_growth(*zip(*sel)) if len(sel) >= 3 else None
    if fit is None:
        flags.append("window_too_short")
    return DecayReport(ts, peaks, edges, fit, (lo, hi), tuple(flags))


# --- self-convergence --------------------------------------------------------------------


@dataclass(frozen=True)
class SelfConvergence:
    solver: str
    dts: tuple[float, ...]
    errors: tuple[float, ...]
    fit: RateFit

    @property
    def order(self) -> float:
        return self.fit.slope


def self_convergence(
    solver: str,
    eps: float = 0.2,
    lam: float = 1.0,
    n: int = 64,
    side_length: float = DEFAULT_SIDE,
    t_final: float = 0.5,
    base_dt: float | None = None,
    norm_s: float = 1.0,
) -> SelfConvergence:
    """Observed order from steps ``4h, 2h, h`` against an ``h/16`` reference."""
    grid = TorusGrid(n, side_length)
    phi = gaussian_data(1.0, 1.0, (0.0, 0.0), grid)
    psi = phi
    if solver == "kg":
        h = base_dt or eps**2 / 8.0

        def run(dt):
            p = KGParams(eps, lam, grid, dt, t_final, override_dt=True)
            return kg_solve(kg_init(phi, psi, eps), p)[-1].u

    elif solver in ("nls", "g2"):
        h = base_dt or 0.01

        def run(dt):
            prof = solve_profiles(phi, psi, nls_params(lam, grid, dt, t_final), solver == "g2")
            g0, g2 = prof.at(t_final)
            return g2 if solver == "g2" else g0

    else:
        raise ConfigurationError(f"unknown solver {solver!r} (choose nls, g2 or kg)")
    ref = run(h / 16.0)
    dts = (4 * h, 2 * h, h)
    errs = tuple(sobolev_norm(run(dt) - ref, norm_s) for dt in dts)
    fit = fit_rate(list(zip(dts, errs)))
    return SelfConvergence(solver, dts, errs, fit)


# --- config files and CSV ---------------------------------------------------------------------

CONFIG_KEYS = (
    "data.kind",
    "data.amp",
    "data.width",
    "data.center",
    "data.seed",
    "data.s_target",
    "lambda",
    "eps",
    "times",
    "order_k",
    "norm_s",
    "grid.n",
    "grid.l",
    "dt.safety",
    "out.dir",
)


def parse_real(text: str) -> float:
    """A float, optionally written as a multiple of pi (``16pi``, ``16*pi``, ``pi``)."""
    s = text.strip().lower().replace(" ", "")
    try:
        if s.endswith("pi"):
            head = s[:-2].rstrip("*")
            return (float(head) if head else 1.0) * math.pi
        return float(s)
    except ValueError:
        raise ConfigurationError(f"not a number: {text!r}") from None


def parse_list(text: str) -> tuple[float, ...]:
    parts = [p for p in text.split(",") if p.strip()]
    if not parts:
        raise ConfigurationError("empty list")
    return tuple(parse_real(p) for p in parts)


def read_config(path) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment.  Unknown keys are rejected."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigurationError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def _pair(values: tuple, name: str) -> tuple:
    if len(values) == 1:
        return values[0], values[0]
    if len(values) == 2:
        return values
    raise ConfigurationError(f"{name} takes one value or a phi,psi pair")


def _centers(text: str):
    groups = [g for g in text.split(";") if g.strip()]
    cs = [parse_list(g) for g in groups]
    if any(len(c) != 2 for c in cs):
        raise ConfigurationError("data.center is 'x,y' or 'x,y;x,y'")
    return _pair(tuple(cs), "data.center")


def spec_from_mapping(cfg: dict[str, str], base: ExperimentSpec | None = None) -> ExperimentSpec:
    """Build an ``ExperimentSpec`` from config keys (all optional)."""
    base = base or ExperimentSpec()
    d = base.data
    amp = _pair(parse_list(cfg["data.amp"]), "data.amp") if "data.amp" in cfg else (d.phi.amp, d.psi.amp)
    width = _pair(parse_list(cfg["data.width"]), "data.width") if "data.width" in cfg else (d.phi.width, d.psi.width)
    center = _centers(cfg["data.center"]) if "data.center" in cfg else (d.phi.center, d.psi.center)
    try:
        data = DataSpec(
            kind=cfg.get("data.kind", d.kind).strip(),
            phi=Gaussian(amp[0], width[0], center[0]),
            psi=Gaussian(amp[1], width[1], center[1]),
            s_target=parse_real(cfg["data.s_target"]) if "data.s_target" in cfg else d.s_target,
            seed=int(cfg["data.seed"]) if "data.seed" in cfg else d.seed,
        )
        kw = dict(data=data)
        if "lambda" in cfg:
            kw["lam"] = parse_real(cfg["lambda"])
        if "eps" in cfg:
            kw["eps_ladder"] = parse_list(cfg["eps"])
        if "times" in cfg:
            kw["times"] = parse_list(cfg["times"])
        if "order_k" in cfg:
            kw["order_k"] = int(cfg["order_k"])
        if "norm_s" in cfg:
            kw["norm_s"] = parse_real(cfg["norm_s"])
        if "grid.n" in cfg:
            kw["n"] = int(cfg["grid.n"])
        if "grid.l" in cfg:
            kw["side_length"] = parse_real(cfg["grid.l"])
        if "dt.safety" in cfg:
            kw["dt_safety"] = parse_real(cfg["dt.safety"])
        if "out.dir" in cfg:
            kw["out_dir"] = cfg["out.dir"]
    except ValueError as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(str(exc)) from None
    return replace(base, **kw)


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "nan" if not math.isfinite(x) else f"{x:.10e}"


def report_csv(report: LimitReport, timestamp: str | None = None) -> str:
    """CSV text: a ``#`` timestamp line, the header, data rows, then fit rows."""
    buf = io.StringIO()
    stamp = timestamp if timestamp is not None else _time.strftime("%Y-%m-%dT%H:%M:%S%z")
    buf.write(f"# kgnr report generated {stamp}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in report.rows:
        w.writerow(
            [
                _fmt(r.eps),
                _fmt(r.time),
                r.order_k,
                _fmt(r.norm_s),
                _fmt(r.error),
                _fmt(r.leading_error),
                _fmt(r.residual),
                _fmt(r.self_conv_residual),
                ";".join(r.flags) or "ok",
            ]
        )
    for f in report.fits:
        w.writerow(
            [
                "fit",
                _fmt(f.time),
                report.spec.order_k,
                _fmt(report.spec.norm_s),
                _fmt(f.error),
                _fmt(f.leading_error),
                _fmt(f.residual),
                _fmt(f.r_squared),
                ";".join(f.flags),
            ]
        )
    return buf.getvalue()


def write_report(report: LimitReport, path, timestamp: str | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report_csv(report, timestamp))
    return path
