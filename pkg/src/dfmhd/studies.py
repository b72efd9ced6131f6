"""Study drivers (spatial/temporal convergence, sub-iteration profiles, long
runs, the cavity) and deterministic CSV output."""

from __future__ import annotations

import logging
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .integrator import Discretization, RunResult, run
from .problems import CavityCase, ManufacturedProblem
from .solvers import CGConfig

__all__ = [
    "CONVERGENCE_HEADER",
    "TRACE_HEADER",
    "convergence_space",
    "convergence_time",
    "iteration_profile",
    "longtime_stability",
    "cavity_run",
    "fitted_order",
    "write_csv",
    "trace_rows",
]

log = logging.getLogger(__name__)

CONVERGENCE_HEADER = ("N", "k", "tau", "T", "err_u_H1", "err_B_Hcurl", "fitted_order", "iters_median")
TRACE_HEADER = ("step", "time", "err_u_H1", "err_B_Hcurl", "energy", "dissipation", "subiters",
                "max_div_u", "max_div_B")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return format(v, ".17g")


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[dict]) -> Path:
    """Write rows atomically (temp file then rename), LF endings, 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(row.get(h, float("nan"))) for h in header))
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def fitted_order(taus: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(tau)."""
    t = np.log(np.asarray(taus, dtype=float))
    e = np.log(np.asarray(errors, dtype=float))
    return float(np.polyfit(t, e, 1)[0])


def _median_iters(result: RunResult) -> float:
    s = result.column("subiters")
    return float(np.median(s)) if len(s) else float("nan")


def _final_errors(result: RunResult) -> tuple[float, float]:
    if result.status != "ok" or not result.records:
        return float("nan"), float("nan")
    return result.final["err_u_H1"], result.final["err_B_Hcurl"]


def convergence_space(problem: ManufacturedProblem, Ns: Sequence[int], k: int, tau: float, T: float,
                      cg: CGConfig = CGConfig(), eps: float = 1e-10) -> list[dict]:
    """One row per N; ``fitted_order`` holds the exponential rate log(e_prev/e)/(N - N_prev)."""
    rows = []
    for N in Ns:
        try:
            res = run(problem, N, T, tau, k, cg=cg, eps=eps)
            eu, eB = _final_errors(res)
            it = _median_iters(res)
        except Exception as exc:  # recorded, the sweep goes on
            log.warning("N=%d failed: %s", N, exc)
            eu = eB = it = float("nan")
        rows.append({"N": N, "k": k, "tau": tau, "T": T, "err_u_H1": eu, "err_B_Hcurl": eB,
                     "fitted_order": float("nan"), "iters_median": it})
    for a, b in zip(rows, rows[1:]):
        if a["err_u_H1"] > 0 and b["err_u_H1"] > 0:
            b["fitted_order"] = math.log(a["err_u_H1"] / b["err_u_H1"]) / (b["N"] - a["N"])
    return rows


def convergence_time(problem: ManufacturedProblem, N: int, k: int, taus: Sequence[float], T: float,
                     cg: CGConfig = CGConfig(), eps: float = 1e-10) -> list[dict]:
    """One row per tau; ``fitted_order`` is the observed order against the previous row."""
    rows = []
    disc = Discretization(N, problem.dim)
    for tau in taus:
        try:
            res = run(problem, N, T, tau, k, cg=cg, eps=eps, disc=disc)
            eu, eB = _final_errors(res)
            it = _median_iters(res)
        except Exception as exc:
            log.warning("tau=%g failed: %s", tau, exc)
            eu = eB = it = float("nan")
        rows.append({"N": N, "k": k, "tau": tau, "T": T, "err_u_H1": eu, "err_B_Hcurl": eB,
                     "fitted_order": float("nan"), "iters_median": it})
    for a, b in zip(rows, rows[1:]):
        if a["err_u_H1"] > 0 and b["err_u_H1"] > 0:
            b["fitted_order"] = math.log(a["err_u_H1"] / b["err_u_H1"]) / math.log(a["tau"] / b["tau"])
    return rows


def trace_rows(result: RunResult) -> list[dict]:
    return [{h: r.get(h, float("nan")) for h in TRACE_HEADER} for r in result.records]


def iteration_profile(problem: ManufacturedProblem, N: int, k: int, tau: float, steps: int,
                      cg: CGConfig = CGConfig(), eps: float = 1e-10) -> RunResult:
    return run(problem, N, steps * tau, tau, k, cg=cg, eps=eps, errors="none")


def longtime_stability(problem: ManufacturedProblem, N: int, k: int, tau: float, T: float,
                       cg: CGConfig = CGConfig(), eps: float = 1e-10, threshold: float = 1e3) -> RunResult:
    """Long run with errors every step; stops at the first error above ``threshold``
    or the first failed step."""
    return run(problem, N, T, tau, k, cg=cg, eps=eps, errors="every", blowup_threshold=threshold)


@dataclass
class CavityResult:
    result: RunResult
    steady: bool
    rates: list[float] = field(default_factory=list)
    physical_time: float = 0.0
    disc: Discretization | None = None


def cavity_run(case: CavityCase, N: int, k: int, tau: float, T: float, tol: float = 1e-6,
               cg: CGConfig = CGConfig(), eps: float = 1e-10) -> CavityResult:
    """March the cavity until ||u^{n+1} - u^n|| / tau < tol or physical time T.

    ``tau`` and ``T`` are physical; norms are L2 on the unit square.
    """
    tau_ref = tau * case.time_scale()
    disc = Discretization(N, 2)
    rates: list[float] = []

    def watch(row, state):
        du = state.u_hist[0] - state.u_hist[1]
        # ||.||_phys = ||.||_ref / 2 and tau_phys = tau_ref / 2
        rate = math.sqrt(max(disc.norm2(du, "u"), 0.0)) / tau_ref
        rates.append(rate)
        row["rate_u"] = rate
        return rate < tol

    nsteps = int(round(T / tau))
    res = run(case.problem, N, nsteps * tau_ref, tau_ref, k, params=case.reference, cg=cg, eps=eps,
              errors="none", callback=watch, disc=disc)
    if res.records:
        du, umax, dB, Bmax = disc.max_divergence(res.state.u, res.state.B)
        res.records[-1].update(max_div_u=du, max_div_B=dB, max_u=umax, max_B=Bmax)
    steady = res.status == "stopped"
    return CavityResult(res, steady, rates, res.state.time / case.time_scale(), disc)
