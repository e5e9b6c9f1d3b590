"""Command line interface: ``kgnr <subcommand> [flags]`` or ``python -m kgnr``.

Every subcommand accepts ``--config FILE`` (key=value lines); flags given on
the command line override the file.  Exit status is 0 on success, 2 on a
validation error and 3 on a numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path

from .errors import ConfigurationError, InterpolationRefusedError, NumericalError
from .harness import (
    DecayConfig,
    ExperimentSpec,
    decay_experiment,
    growth_experiment,
    make_data,
    nls_params,
    parse_real,
    read_config,
    residual_scaling,
    run_limit_experiment,
    self_convergence,
    spec_from_mapping,
    write_report,
)
from .kg import KGParams, kg_init, kg_solve
from .kg import write_manifest as write_kg_manifest
from .nls import g2_initial, solve_profiles
from .nls import write_manifest as write_nls_manifest
from .snapshot import write_snapshot

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3

# flag dest -> config key
_FLAG_KEYS = {
    "eps": "eps",
    "k": "order_k",
    "t": "times",
    "norm_s": "norm_s",
    "lam": "lambda",
    "n": "grid.n",
    "l": "grid.l",
    "dt_safety": "dt.safety",
    "data": "data.kind",
    "amp": "data.amp",
    "width": "data.width",
    "center": "data.center",
    "seed": "data.seed",
    "s_target": "data.s_target",
    "out": "out.dir",
}


def _common(p: argparse.ArgumentParser) -> None:
    p.set_defaults(subparser=p)
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--out", help="output directory (out.dir)")
    p.add_argument("--eps", help="comma-separated, strictly decreasing eps values")
    p.add_argument("--k", help="WKB order K (0 or 2)")
    p.add_argument("--t", help="comma-separated measurement times")
    p.add_argument("--norm-s", dest="norm_s", help="Sobolev index of the error norm")
    p.add_argument("--lambda", dest="lam", help="nonlinearity coefficient")
    p.add_argument("--n", help="grid points per dimension")
    p.add_argument("--l", help="side length (accepts e.g. 16pi)")
    p.add_argument("--dt-safety", dest="dt_safety", help="KG step as a multiple of eps^2")
    p.add_argument("--data", choices=["gaussian", "rough"], help="data kind")
    p.add_argument("--amp", help="Gaussian amplitude: a or a_phi,a_psi")
    p.add_argument("--width", help="Gaussian width: w or w_phi,w_psi")
    p.add_argument("--center", help="Gaussian center: x,y or x,y;x,y")
    p.add_argument("--seed", help="rough data seed")
    p.add_argument("--s-target", dest="s_target", help="rough data regularity index")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kgnr", description="Nonrelativistic limit experiments for cubic Klein-Gordon.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-nls", help="solve the g0 (and g2) profile equations")
    _common(p)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--with-g2", action="store_true")

    p = sub.add_parser("solve-kg", help="solve Klein-Gordon at one eps")
    _common(p)

    p = sub.add_parser("limit-rate", help="KG vs WKB error over an eps ladder")
    _common(p)

    p = sub.add_parser("residual-scaling", help="system residual of the WKB ansatz over an eps ladder")
    _common(p)

    p = sub.add_parser("decay", help="decay of max|g0| in time")
    _common(p)
    p.add_argument("--t-final", dest="t_final", type=float, default=10.0)
    p.add_argument("--dt", type=float, default=1e-2)

    p = sub.add_parser("growth", help="error growth in time at fixed eps (report only)")
    _common(p)

    p = sub.add_parser("self-convergence", help="observed order of a time stepper")
    _common(p)
    p.add_argument("--solver", choices=["nls", "g2", "kg"], required=True)
    return parser


def _mapping(args) -> dict[str, str]:
    cfg = read_config(args.config) if args.config else {}
    for dest, key in _FLAG_KEYS.items():
        v = getattr(args, dest, None)
        if v is not None:
            cfg[key] = str(v)
    return cfg


def _spec(cfg: dict[str, str], **defaults) -> ExperimentSpec:
    return spec_from_mapping(cfg, ExperimentSpec(**defaults) if defaults else None)


def _print_rows(report) -> None:
    for r in report.rows:
        print(
            f"eps={r.eps:<8g} t={r.time:<6g} error={r.error:.4e} leading={r.leading_error:.4e} "
            f"residual={r.residual:.4e} self_conv={r.self_conv_residual:.3e} flags={';'.join(r.flags) or 'ok'}"
        )
    for f in report.fits:
        print(f"fit t={f.time:g}: error slope={f.error:.3f} leading slope={f.leading_error:.3f} "
              f"residual slope={f.residual:.3f} r2={f.r_squared:.4f} {';'.join(f.flags)}")


def _cmd_solve_nls(args, cfg) -> int:
    spec = _spec(cfg)
    grid = spec.grid
    phi, psi = make_data(spec.data, grid)
    t_final = max(spec.times)
    g2_0 = g2_initial(phi, psi, spec.lam) if args.with_g2 else None
    prof = solve_profiles(phi, psi, nls_params(spec.lam, grid, args.dt, t_final), args.with_g2, spec.times, g2_0)
    out = Path(spec.out_dir)
    write_nls_manifest(prof, out / "nls_manifest.csv")
    for t in spec.times:
        if prof.truncated and t > prof.truncated_at:
            continue
        g0, g2 = prof.at(t)
        write_snapshot(out / f"g0_t{t:g}.kgnr", g0, t)
        if g2 is not None:
            write_snapshot(out / f"g2_t{t:g}.kgnr", g2, t)
    if prof.truncated:
        print(f"focusing monitor tripped: trajectory truncated at t = {prof.truncated_at:g}")
    print(f"wrote {out / 'nls_manifest.csv'}")
    return EXIT_OK


def _cmd_solve_kg(args, cfg) -> int:
    spec = _spec(cfg)
    grid = spec.grid
    eps = spec.eps_ladder[0]
    phi, psi = make_data(spec.data, grid)
    t_final = max(spec.times)
    params = KGParams.default(eps, spec.lam, grid, t_final, spec.dt_safety)
    states = kg_solve(kg_init(phi, psi, eps), params, spec.times)
    out = Path(spec.out_dir)
    write_kg_manifest(states, spec.lam, out / "kg_manifest.csv")
    for s in states:
        write_snapshot(out / f"u_eps{eps:g}_t{s.t:g}.kgnr", s.u, s.t, eps)
        if s.under_resolved:
            print(f"warning: under-resolved at t = {s.t:g} (top-octave fraction {s.tail:.2e})")
    print(f"wrote {out / 'kg_manifest.csv'}")
    return EXIT_OK


def _cmd_limit_rate(args, cfg, parser) -> int:
    if "eps" not in cfg:
        parser.error("limit-rate needs --eps (or eps= in the config file)")
    spec = _spec(cfg)
    report = run_limit_experiment(spec)
    path = write_report(report, Path(spec.out_dir) / "limit_rate.csv")
    _print_rows(report)
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_residual(args, cfg, parser) -> int:
    if "eps" not in cfg:
        parser.error("residual-scaling needs --eps (or eps= in the config file)")
    spec = _spec(cfg)
    report = residual_scaling(spec)
    path = write_report(report, Path(spec.out_dir) / "residual_scaling.csv")
    _print_rows(report)
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_decay(args, cfg) -> int:
    spec = _spec(cfg, n=256, side_length=48 * math.pi)
    dc = DecayConfig(lam=spec.lam, data=spec.data, n=spec.n, side_length=spec.side_length, t_final=args.t_final, dt=args.dt,
                     window=(min(1.0, args.t_final / 2), args.t_final))
    rep = decay_experiment(dc)
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "decay.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", "max_abs", "edge_ratio"])
        for t, m, e in zip(rep.times, rep.max_abs, rep.edge_ratio):
            w.writerow([f"{t:.10e}", f"{m:.10e}", f"{e:.4e}"])
    if rep.fit is not None:
        print(f"decay slope (log max|g0| vs log(1+t)) over {rep.window}: {rep.fit.slope:.4f}  r2={rep.fit.r_squared:.4f}")
    print(f"flags: {';'.join(rep.flags) or 'ok'}")
    print(f"wrote {out / 'decay.csv'}")
    return EXIT_OK


def _cmd_growth(args, cfg) -> int:
    times = parse_times(cfg.get("times")) if "times" in cfg else (1.0, 2.0, 4.0, 8.0)
    cfg = {k: v for k, v in cfg.items() if k != "times"}
    spec = _spec(cfg, eps_ladder=(0.1,))
    rep = growth_experiment(spec, spec.eps_ladder[0], times)
    path = write_report(rep.limit, Path(spec.out_dir) / "growth.csv")
    for t, v in zip(rep.times, rep.scaled_errors):
        print(f"t={t:g}: error/eps^(K+1) = {v:.4e}")
    if rep.fit is not None:
        print(f"growth exponent vs (1+t): {rep.fit.slope:.3f} (report only)")
    print(f"wrote {path}")
    return EXIT_OK


def parse_times(text: str) -> tuple[float, ...]:
    return tuple(parse_real(p) for p in text.split(",") if p.strip())


def _cmd_self_conv(args, cfg) -> int:
    eps = float(cfg["eps"].split(",")[0]) if "eps" in cfg else 0.2
    lam = parse_real(cfg["lambda"]) if "lambda" in cfg else 1.0
    rep = self_convergence(args.solver, eps=eps, lam=lam)
    for dt, e in zip(rep.dts, rep.errors):
        print(f"dt={dt:.4e} error={e:.4e}")
    print(f"observed order: {rep.order:.3f}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _mapping(args)
        cmd = args.command
        if cmd == "solve-nls":
            return _cmd_solve_nls(args, cfg)
        if cmd == "solve-kg":
            return _cmd_solve_kg(args, cfg)
        if cmd == "limit-rate":
            return _cmd_limit_rate(args, cfg, args.subparser)
        if cmd == "residual-scaling":
            return _cmd_residual(args, cfg, args.subparser)
        if cmd == "decay":
            return _cmd_decay(args, cfg)
        if cmd == "growth":
            return _cmd_growth(args, cfg)
        return _cmd_self_conv(args, cfg)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ConfigurationError, InterpolationRefusedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
