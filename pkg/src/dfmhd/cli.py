"""Command-line entry point.

    dfmhd <subcommand> [--config FILE] [--key value ...]

Exit codes: 0 success, 1 configuration or validation error, 2 numerical
failure (solver divergence, sub-iteration overflow, blow-up).
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .solvers import CGConfig, ConvergenceError

log = logging.getLogger("dfmhd")

SUBCOMMANDS = ("basis-check", "convergence-space", "convergence-time", "iteration-profile", "longtime",
               "mhd-run", "cavity")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dfmhd", description="Divergence-free spectral MHD solver")
    sub = p.add_subparsers(dest="command", metavar="subcommand", parser_class=_Parser)
    helps = {
        "basis-check": "divergence and boundary traces of every basis function",
        "convergence-space": "errors against the manufactured solution over a sweep of N",
        "convergence-time": "errors against the manufactured solution over a sweep of tau",
        "iteration-profile": "sub-iteration counts per step",
        "longtime": "long run with per-step errors and blow-up detection",
        "mhd-run": "single run with a per-step trace",
        "cavity": "lid-driven cavity to steady state",
    }
    for name in SUBCOMMANDS:
        s = sub.add_parser(name, help=helps[name])
        s.add_argument("--config", help="key=value config file")
        s.add_argument("--dim", type=int)
        s.add_argument("--N", type=int)
        s.add_argument("--k", type=int)
        s.add_argument("--tau", type=float)
        s.add_argument("--T", type=float)
        s.add_argument("--problem")
        s.add_argument("--Re", type=float)
        s.add_argument("--Rem", type=float)
        s.add_argument("--Ha", type=float)
        s.add_argument("--eps-subiter", dest="eps_subiter", type=float)
        s.add_argument("--cg-tol", dest="cg_tol", type=float)
        s.add_argument("--out-dir", dest="out_dir")
        s.add_argument("-v", "--verbose", action="store_true")
        if name == "basis-check":
            s.add_argument("--points", type=int, default=100)
        if name in ("convergence-space", "convergence-time"):
            s.add_argument("--sweep", help="comma-separated N values or tau values")
        if name == "iteration-profile":
            s.add_argument("--steps", type=int, default=100)
        if name == "longtime":
            s.add_argument("--threshold", type=float, default=1e3)
        if name == "cavity":
            s.add_argument("--tol", type=float, default=1e-6)
            s.add_argument("--dump-points", type=int, default=41)
    return p


def _problem(cfg: RunConfig):
    from .problems import MHDParams, manufactured_2d, manufactured_3d, zero_problem

    if cfg.problem == "cavity":
        raise ConfigError("problem=cavity is only valid for the cavity subcommand")
    params = MHDParams()
    if cfg.problem == "zero":
        return zero_problem(cfg.dim, params)
    return manufactured_2d(params) if cfg.dim == 2 else manufactured_3d(params)


def _cg(cfg: RunConfig) -> CGConfig:
    return CGConfig(rtol=cfg.cg_tol)


def _sweep(text: str | None, default, cast):
    if not text:
        return default
    try:
        values = [cast(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"invalid --sweep value: {text!r}") from None
    if not values:
        raise ConfigError("--sweep is empty")
    return values


def _out(cfg: RunConfig, name: str) -> Path:
    return Path(cfg.out_dir) / name


def cmd_basis_check(cfg, args) -> int:
    from .bases import basis_check, exactness_check

    kinds = ("Hdiv2D", "H1_2D") if cfg.dim == 2 else ("Hdiv3D", "H1_3D")
    ok = True
    for kind in kinds:
        r = basis_check(kind, cfg.N, points=args.points)
        ok &= r.passed
        print(f"{kind} N={cfg.N} modes={r.modes} max_div={r.max_div:.3e} max_trace={r.max_trace:.3e}")
    if cfg.dim == 2:
        ex = exactness_check(cfg.N, trials=3)
        print(f"curl(H1) in H(div): max_div={ex.max_div:.3e} membership_residual={ex.membership_residual:.3e}")
        ok &= ex.passed
    return 0 if ok else 2


def cmd_convergence_space(cfg, args) -> int:
    from .studies import CONVERGENCE_HEADER, convergence_space, write_csv

    Ns = _sweep(args.sweep, list(range(8, cfg.N + 1, 4)) or [cfg.N], int)
    if min(Ns) < 4:
        raise ConfigError("every N in --sweep must be >= 4")
    rows = convergence_space(_problem(cfg), Ns, cfg.k, cfg.tau, cfg.T, _cg(cfg), cfg.eps_subiter)
    path = write_csv(_out(cfg, f"convergence_space_d{cfg.dim}_k{cfg.k}.csv"), CONVERGENCE_HEADER, rows)
    for r in rows:
        print(f"N={r['N']:3d} err_u_H1={r['err_u_H1']:.3e} err_B_Hcurl={r['err_B_Hcurl']:.3e}")
    print(f"wrote {path}")
    return 2 if any(math.isnan(r["err_u_H1"]) for r in rows) else 0


def cmd_convergence_time(cfg, args) -> int:
    from .studies import CONVERGENCE_HEADER, convergence_time, fitted_order, write_csv

    taus = _sweep(args.sweep, [cfg.tau * 0.5 ** j for j in range(5)], float)
    if min(taus) <= 0:
        raise ConfigError("every tau in --sweep must be > 0")
    rows = convergence_time(_problem(cfg), cfg.N, cfg.k, taus, cfg.T, _cg(cfg), cfg.eps_subiter)
    path = write_csv(_out(cfg, f"convergence_time_d{cfg.dim}_k{cfg.k}.csv"), CONVERGENCE_HEADER, rows)
    for r in rows:
        print(f"tau={r['tau']:.4g} err_u_H1={r['err_u_H1']:.3e} err_B_Hcurl={r['err_B_Hcurl']:.3e}")
    errs = [r["err_u_H1"] for r in rows]
    if any(math.isnan(e) for e in errs):
        print(f"wrote {path}")
        return 2
    if len(rows) > 1:
        print(f"fitted order (u): {fitted_order(taus, errs):.3f}")
    print(f"wrote {path}")
    return 0


def _write_trace(cfg, name, result):
    from .studies import TRACE_HEADER, trace_rows, write_csv

    return write_csv(_out(cfg, name), TRACE_HEADER, trace_rows(result))


def cmd_iteration_profile(cfg, args) -> int:
    from .studies import iteration_profile

    if args.steps < 1:
        raise ConfigError("--steps must be >= 1")
    res = iteration_profile(_problem(cfg), cfg.N, cfg.k, cfg.tau, args.steps, _cg(cfg), cfg.eps_subiter)
    path = _write_trace(cfg, f"iteration_profile_d{cfg.dim}_k{cfg.k}.csv", res)
    s = res.column("subiters")
    if len(s):
        print(f"steps={len(s)} median_subiters={np.median(s):g} max_subiters={s.max():g}")
    print(f"wrote {path}")
    if res.status != "ok":
        print(f"numerical failure: {res.message}", file=sys.stderr)
        return 2
    return 0


def cmd_longtime(cfg, args) -> int:
    from .studies import longtime_stability

    res = longtime_stability(_problem(cfg), cfg.N, cfg.k, cfg.tau, cfg.T, _cg(cfg), cfg.eps_subiter,
                             args.threshold)
    path = _write_trace(cfg, f"longtime_d{cfg.dim}_k{cfg.k}.csv", res)
    print(f"wrote {path}")
    if res.status != "ok":
        print(f"blow-up at t={res.blowup_time:.6g}: {res.message}", file=sys.stderr)
        return 2
    print(f"completed T={cfg.T:g} max err_u_H1={np.nanmax(res.column('err_u_H1')):.3e}")
    return 0


def cmd_mhd_run(cfg, args) -> int:
    from .integrator import run

    prob = _problem(cfg)
    res = run(prob, cfg.N, cfg.T, cfg.tau, cfg.k, cg=_cg(cfg), eps=cfg.eps_subiter, errors="every",
              monitor="every", track_energy=cfg.k <= 2)
    path = _write_trace(cfg, f"mhd_run_d{cfg.dim}_k{cfg.k}.csv", res)
    print(f"wrote {path}")
    if res.status != "ok":
        print(f"numerical failure: {res.message}", file=sys.stderr)
        return 2
    f = res.final
    print(f"t={f['time']:.6g} err_u_H1={f['err_u_H1']:.3e} err_B_Hcurl={f['err_B_Hcurl']:.3e}")
    return 0


def cmd_cavity(cfg, args) -> int:
    from .problems import cavity_case
    from .studies import cavity_run, write_csv

    if cfg.dim != 2:
        raise ConfigError("the cavity is available for dim=2 only")
    case = cavity_case(2, cfg.Re, cfg.Rem, cfg.Ha)
    out = cavity_run(case, cfg.N, cfg.k, cfg.tau, cfg.T, args.tol, _cg(cfg), cfg.eps_subiter)
    res = out.result
    rows = [{"step": r["step"], "time": r["time"] / case.time_scale(), "rate_u": r.get("rate_u", np.nan),
             "subiters": r["subiters"]} for r in res.records]
    trace = write_csv(_out(cfg, f"cavity_Re{cfg.Re:g}_trace.csv"), ("step", "time", "rate_u", "subiters"), rows)
    dump = write_csv(_out(cfg, f"cavity_Re{cfg.Re:g}_fields.csv"),
                     ("x", "y", "u1", "u2", "B1", "B2", "div_u", "div_B"),
                     cavity_field_rows(case, out.disc, res.state, args.dump_points))
    print(f"wrote {trace}")
    print(f"wrote {dump}")
    if res.status == "blowup":
        print(f"numerical failure: {res.message}", file=sys.stderr)
        return 2
    last = res.records[-1] if res.records else {}
    print(f"t={out.physical_time:.4g} steady={out.steady} rate_u={last.get('rate_u', float('nan')):.3e} "
          f"max_div_u={last.get('max_div_u', float('nan')):.3e} max_div_B={last.get('max_div_B', float('nan')):.3e}")
    return 0


def cavity_field_rows(case, disc, state, n: int):
    """Physical-domain samples (x, y, u, B, |div u|, |div B|) on an n x n grid."""
    from .kernels import Transform, divergence_samples
    from .orthopoly import QuadratureRule

    xi = np.linspace(-1.0, 1.0, n)
    rule = QuadratureRule(xi, np.full(n, np.nan))
    fu = Transform(disc.vel, rule).evaluate(state.u, grad=True)
    fB = Transform(disc.mag, rule).evaluate(state.B, grad=True)
    X = np.meshgrid(xi, xi, indexing="ij")
    lift = case.problem.u_lift(0.0, X)
    dlift = case.problem.grad_u_lift(0.0, X)
    u = fu.value + lift
    div_u = np.abs(divergence_samples(fu) + dlift[0, 0] + dlift[1, 1]) * 2  # d/dx = 2 d/dxi
    B = fB.value + case.B0.reshape(2, 1, 1)
    div_B = np.abs(divergence_samples(fB)) * 2
    rows = []
    for i in range(n):
        for j in range(n):
            rows.append({"x": (xi[i] + 1) / 2, "y": (xi[j] + 1) / 2, "u1": u[0, i, j], "u2": u[1, i, j],
                         "B1": B[0, i, j], "B2": B[1, i, j], "div_u": div_u[i, j], "div_B": div_B[i, j]})
    return rows


COMMANDS = {
    "basis-check": cmd_basis_check,
    "convergence-space": cmd_convergence_space,
    "convergence-time": cmd_convergence_time,
    "iteration-profile": cmd_iteration_profile,
    "longtime": cmd_longtime,
    "mhd-run": cmd_mhd_run,
    "cavity": cmd_cavity,
}


def cli_main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_help().rstrip())
        overrides = {k: getattr(args, k) for k in RunConfig.__dataclass_fields__ if hasattr(args, k)}
        cfg = load_config(args.config, overrides).validate()
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"dfmhd: error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"dfmhd: error: {exc}", file=sys.stderr)
        return 1
    except (ConvergenceError, FloatingPointError, ArithmeticError, RuntimeError) as exc:
        print(f"dfmhd: numerical failure: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
