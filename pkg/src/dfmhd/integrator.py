"""DF-BDF-k time stepping for the incompressible resistive MHD system.

Each step solves the linearly coupled implicit system by a fixed-point
sub-iteration that alternates two independent SPD solves:

    (grad u', grad chi) + kappa1 (u', chi) = (F(u_r, B_r), chi),   kappa1 = gamma / (nu tau)
    (curl B', curl Phi) + kappa0 (B', Phi) = (J(u_r), Phi),        kappa0 = gamma / (eta tau)

with the advecting velocity and magnetic field frozen at their k-th order
extrapolants.  Velocity and magnetic field stay in the divergence-free
spaces by construction.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable

import numpy as np

from .bases import BasisSpace
from .kernels import (
    FieldSamples,
    Transform,
    assemble_form,
    curl_samples,
    divergence_samples,
    magnetic_space,
    trilinear_forms,
    velocity_space,
)
from .orthopoly import ParameterError, QuadratureRule, dealiased_size, gauss_legendre_rule
from .problems import ManufacturedProblem, MHDParams
from .solvers import PROJECTION_CG, CGConfig, ConvergenceError, cg_solve, magnetic_operator, mass_operator, velocity_operator

__all__ = [
    "BDFScheme",
    "bdf_scheme",
    "Discretization",
    "TimeStepperState",
    "StepReport",
    "NumericalFailure",
    "SubIterationError",
    "step",
    "energy",
    "dissipation",
    "energy_law_residual",
    "run",
    "RunResult",
]

log = logging.getLogger(__name__)


class NumericalFailure(RuntimeError):
    """A step could not be completed (solver failure, sub-iteration overflow, blow-up)."""


class SubIterationError(NumericalFailure):
    def __init__(self, message: str, history: list[float]):
        super().__init__(message)
        self.history = history


# ---------------------------------------------------------------------------
# BDF coefficients

_F = Fraction
_BDF = {
    1: (_F(1), (_F(1),), (_F(1),)),
    2: (_F(3, 2), (_F(2), _F(-1, 2)), (_F(2), _F(-1))),
    3: (_F(11, 6), (_F(3), _F(-3, 2), _F(1, 3)), (_F(3), _F(-3), _F(1))),
    4: (_F(25, 12), (_F(4), _F(-3), _F(4, 3), _F(-1, 4)), (_F(4), _F(-6), _F(4), _F(-1))),
    5: (_F(137, 60), (_F(5), _F(-5), _F(10, 3), _F(-5, 4), _F(1, 5)), (_F(5), _F(-10), _F(10), _F(-5), _F(1))),
    6: (_F(147, 60), (_F(6), _F(-15, 2), _F(20, 3), _F(-15, 4), _F(6, 5), _F(-1, 6)),
        (_F(6), _F(-15), _F(20), _F(-15), _F(6), _F(-1))),
}


@dataclass(frozen=True)
class BDFScheme:
    """k-step BDF: (gamma x^{n+1} - sum_j history[j] x^{n-j}) / tau, with the
    explicit extrapolant sum_j extrapolation[j] x^{n-j}."""

    k: int
    gamma: Fraction
    history: tuple[Fraction, ...]
    extrapolation: tuple[Fraction, ...]

    def hat(self, states) -> np.ndarray:
        return sum(float(a) * x for a, x in zip(self.history, states))

    def tilde(self, states) -> np.ndarray:
        return sum(float(b) * x for b, x in zip(self.extrapolation, states))


def bdf_scheme(k: int) -> BDFScheme:
    if k not in _BDF:
        raise ParameterError(f"BDF order must be in 1..6, got {k}")
    g, h, e = _BDF[k]
    return BDFScheme(k, g, h, e)


# ---------------------------------------------------------------------------
# Discretization and state


def _uniform_rule(n: int) -> QuadratureRule:
    return QuadratureRule(np.linspace(-1.0, 1.0, n), np.full(n, np.nan))


class Discretization:
    """Spaces, transforms and linear operators shared by every step of a run."""

    def __init__(self, N: int, dim: int, monitor_points: int = 33):
        if dim not in (2, 3):
            raise ParameterError(f"dimension must be 2 or 3, got {dim}")
        if N < 4:
            raise ParameterError(f"N must be >= 4, got {N}")
        self.N, self.dim = N, dim
        self.vel: BasisSpace = velocity_space(N, dim)
        self.mag: BasisSpace = magnetic_space(N, dim)
        self.rule = gauss_legendre_rule(dealiased_size(N))
        self.tv = Transform(self.vel, self.rule)
        self.tm = Transform(self.mag, self.rule)
        self.mass_u = mass_operator("velocity", N, dim)
        self.mass_B = mass_operator("magnetic", N, dim)
        self._stiff_u = None
        self._curl_B = None
        self.monitor_points = monitor_points
        self._mon = None

    @property
    def stiff_u(self):
        if self._stiff_u is None:
            self._stiff_u = assemble_form(self.vel, "grad")
        return self._stiff_u

    @property
    def curl_B(self):
        if self._curl_B is None:
            self._curl_B = assemble_form(self.mag, "curl")
        return self._curl_B

    def points(self) -> list[np.ndarray]:
        return self.tv.points()

    def norm2(self, x: np.ndarray, kind: str) -> float:
        M = self.mass_u if kind == "u" else self.mass_B
        return float(x @ M.apply(x))

    def max_divergence(self, u: np.ndarray, B: np.ndarray) -> tuple[float, float, float, float]:
        """Max |div| and max |field| of u and B on a uniform grid with end points."""
        if self._mon is None:
            rule = _uniform_rule(self.monitor_points)
            self._mon = (Transform(self.vel, rule), Transform(self.mag, rule))
        out = []
        for T, x in zip(self._mon, (u, B)):
            fs = T.evaluate(x, grad=True)
            out += [float(np.abs(divergence_samples(fs)).max()), float(np.abs(fs.value).max())]
        return tuple(out)


@dataclass
class TimeStepperState:
    """Most recent states first; ``time`` is the time of ``u_hist[0]``."""

    u_hist: deque
    B_hist: deque
    time: float
    step: int
    t0: float = 0.0
    tau: float = 0.0

    @classmethod
    def start(cls, u0: np.ndarray, B0: np.ndarray, kmax: int, t0: float = 0.0) -> "TimeStepperState":
        return cls(deque([u0], maxlen=kmax), deque([B0], maxlen=kmax), t0, 0, t0)

    @property
    def u(self) -> np.ndarray:
        return self.u_hist[0]

    @property
    def B(self) -> np.ndarray:
        return self.B_hist[0]

    def push(self, u: np.ndarray, B: np.ndarray, time: float) -> None:
        self.u_hist.appendleft(u)
        self.B_hist.appendleft(B)
        self.time = time
        self.step += 1


@dataclass
class StepReport:
    subiterations: int
    cg_iterations: int
    increments: list[float] = field(default_factory=list)


def step(state: TimeStepperState, tau: float, scheme: BDFScheme, params: MHDParams, disc: Discretization,
         problem: ManufacturedProblem, cg: CGConfig = CGConfig(), eps: float = 1e-10,
         max_subiter: int = 50) -> StepReport:
    """Advance ``state`` by one step of size ``tau`` (in place)."""
    if tau <= 0:
        raise ParameterError("tau must be positive")
    k = scheme.k
    if len(state.u_hist) < k:
        raise ParameterError(f"BDF-{k} needs {k} stored states, have {len(state.u_hist)}")
    nu, eta, mr = params.nu, params.eta, params.mu_rho
    t1 = state.t0 + (state.step + 1) * tau
    uh = list(state.u_hist)[:k]
    Bh = list(state.B_hist)[:k]
    u_hat, B_hat = scheme.hat(uh), scheme.hat(Bh)
    u_til, B_til = scheme.tilde(uh), scheme.tilde(Bh)
    gamma = float(scheme.gamma)
    kappa1, kappa0 = gamma / (nu * tau), gamma / (eta * tau)
    Au = velocity_operator(kappa1, disc.N, disc.dim)
    AB = magnetic_operator(kappa0, disc.N, disc.dim)

    X = disc.points()
    ut = disc.tv.evaluate(u_til, grad=True)
    Bt = disc.tm.evaluate(B_til, grad=True)
    lift = None
    if problem.u_lift is not None:
        lift = FieldSamples(problem.u_lift(t1, X), problem.grad_u_lift(t1, X))
        ut = ut + lift
    if problem.B_background is not None:
        bg = np.asarray(problem.B_background, dtype=float).reshape((-1,) + (1,) * disc.dim)
        Bt = FieldSamples(Bt.value + bg, Bt.grad)

    base_u = disc.tv.test(problem.f(t1, X)) + disc.mass_u.apply(u_hat) / tau
    base_B = disc.mass_B.apply(B_hat) / (eta * tau) + disc.tm.test(problem.g(t1, X)) / eta

    u_r, B_r = u_til, B_til
    report = StepReport(0, 0)
    for _ in range(max_subiter):
        adv, lor, ind = trilinear_forms(disc.tv, disc.tm, u_r, B_r, ut, Bt, lift)
        rhs_u = (base_u - adv + lor / mr) / nu
        rhs_B = base_B + ind / eta
        u_new, ru = cg_solve(Au, rhs_u, cg, x0=u_r)
        B_new, rB = cg_solve(AB, rhs_B, cg, x0=B_r)
        report.subiterations += 1
        report.cg_iterations += ru.iterations + rB.iterations
        for r, what in ((ru, "velocity"), (rB, "magnetic")):
            if not r.converged:
                raise ConvergenceError(f"{what} solve failed at t={t1:.6g}: residual {r.residual:.3e}", r)
        du = disc.norm2(u_new - u_r, "u") / max(disc.norm2(u_new, "u"), 1e-30)
        dB = disc.norm2(B_new - B_r, "B") / max(disc.norm2(B_new, "B"), 1e-30)
        inc = max(du, dB)
        report.increments.append(inc)
        u_r, B_r = u_new, B_new
        if not np.isfinite(inc):
            raise NumericalFailure(f"non-finite iterate at t={t1:.6g}")
        if inc < eps:
            break
    else:
        raise SubIterationError(f"sub-iteration did not reach {eps:g} in {max_subiter} iterations at t={t1:.6g}",
                                report.increments)
    state.push(u_r, B_r, t1)
    state.tau = tau
    return report


# ---------------------------------------------------------------------------
# Energy


def energy(u_hist, B_hist, params: MHDParams, tau: float, k: int, disc: Discretization) -> float:
    """Discrete energy E^n of the k = 1, 2 schemes from the newest-first histories."""
    mr = params.mu_rho
    n2u = lambda x: disc.norm2(x, "u")
    n2B = lambda x: disc.norm2(x, "B")
    if k == 1:
        return (n2u(u_hist[0]) + n2B(B_hist[0]) / mr) / (2 * tau)
    if k == 2:
        eu = n2u(u_hist[0]) + n2u(2 * u_hist[0] - u_hist[1])
        eB = n2B(B_hist[0]) + n2B(2 * B_hist[0] - B_hist[1])
        return (eu + eB / mr) / (4 * tau)
    raise ParameterError("the discrete energy is defined for k = 1, 2 only")


def dissipation(u_hist, B_hist, params: MHDParams, tau: float, k: int, disc: Discretization) -> float:
    """Artificial numerical dissipation D^{n+1} from newest-first histories (n+1 first)."""
    mr = params.mu_rho
    if k == 1:
        du, dB = u_hist[0] - u_hist[1], B_hist[0] - B_hist[1]
        return (disc.norm2(du, "u") + disc.norm2(dB, "B") / mr) / (2 * tau)
    if k == 2:
        du = u_hist[0] - 2 * u_hist[1] + u_hist[2]
        dB = B_hist[0] - 2 * B_hist[1] + B_hist[2]
        return (disc.norm2(du, "u") + disc.norm2(dB, "B") / mr) / (4 * tau)
    raise ParameterError("the artificial dissipation is defined for k = 1, 2 only")


def physical_dissipation(u: np.ndarray, B: np.ndarray, params: MHDParams, disc: Discretization) -> float:
    """nu ||grad u||^2 + (eta / mu_rho) ||curl B||^2."""
    return params.nu * float(u @ disc.stiff_u.apply(u)) + params.eta / params.mu_rho * float(B @ disc.curl_B.apply(B))


def energy_law_residual(u_hist, B_hist, params: MHDParams, tau: float, k: int, disc: Discretization,
                        relative: bool = True) -> float:
    """|E^{n+1} - E^n + D^{n+1} + nu ||grad u^{n+1}||^2 + (eta/mu_rho) ||curl B^{n+1}||^2|.

    Histories are newest first and must hold k + 1 states (n+1 down to n-k+1).
    With ``relative`` the value is divided by max(E^n, 1).
    """
    if len(u_hist) < k + 1:
        raise ParameterError(f"need {k + 1} states")
    u_hist, B_hist = list(u_hist), list(B_hist)
    E1 = energy(u_hist, B_hist, params, tau, k, disc)
    E0 = energy(u_hist[1:], B_hist[1:], params, tau, k, disc)
    D = dissipation(u_hist, B_hist, params, tau, k, disc)
    r = abs(E1 - E0 + D + physical_dissipation(u_hist[0], B_hist[0], params, disc))
    return r / max(E0, 1.0) if relative else r


# ---------------------------------------------------------------------------
# Errors and driver


def field_errors(u: np.ndarray, B: np.ndarray, t: float, problem: ManufacturedProblem,
                 disc: Discretization) -> tuple[float, float]:
    """H1 error of u and H(curl) error of B against the exact fields at time t."""
    X = disc.points()
    fu = disc.tv.evaluate(u, grad=True)
    fB = disc.tm.evaluate(B, grad=True)
    eu = fu.value - problem.u(t, X)
    egu = fu.grad - problem.grad_u(t, X)
    eB = fB.value - problem.B(t, X)
    ecB = curl_samples(FieldSamples(eB, fB.grad - problem.grad_B(t, X)))
    T = disc.tv
    h1 = np.sqrt(T.inner(eu, eu) + T.inner(egu, egu))
    hc = np.sqrt(T.inner(eB, eB) + T.inner(ecB, ecB))
    return float(h1), float(hc)


@dataclass
class RunResult:
    records: list[dict]
    status: str = "ok"  # ok | blowup | stopped (callback asked to stop)
    message: str = ""
    blowup_time: float | None = None
    state: TimeStepperState | None = None

    @property
    def final(self) -> dict:
        return self.records[-1] if self.records else {}

    def column(self, key: str) -> np.ndarray:
        """Values of ``key`` per record, NaN where a record lacks it."""
        return np.array([r.get(key, np.nan) for r in self.records], dtype=float)


def initial_state(problem: ManufacturedProblem, disc: Discretization, t: float, cg: CGConfig = CGConfig()):
    """L2 projections of the exact fields at time t (zero without exact data)."""
    if not problem.has_exact:
        return np.zeros(disc.vel.dimension), np.zeros(disc.mag.dimension)
    X = disc.points()
    pc = replace(PROJECTION_CG, rtol=min(cg.rtol, PROJECTION_CG.rtol), maxiter=cg.maxiter)
    u, ru = cg_solve(disc.mass_u, disc.tv.test(problem.u(t, X)), pc)
    B, rB = cg_solve(disc.mass_B, disc.tm.test(problem.B(t, X)), pc)
    if not (ru.converged and rB.converged):
        raise ConvergenceError("projection of the initial data failed")
    return u, B


def run(problem: ManufacturedProblem, N: int, T: float, tau: float, k: int, params: MHDParams | None = None,
        cg: CGConfig = CGConfig(), eps: float = 1e-10, max_subiter: int = 50, seed_exact: bool = True,
        errors: str = "final", monitor: str = "none", track_energy: bool = False,
        blowup_threshold: float = 1e3, callback: Callable | None = None,
        disc: Discretization | None = None, initial: tuple | None = None) -> RunResult:
    """Integrate ``problem`` from t = 0 to T with DF-BDF-k.

    errors, monitor: "none", "final" or "every" step (errors need exact data).
    With ``seed_exact`` and exact data, the first k states are projections of
    the exact solution; otherwise the run bootstraps with BDF-1, 2, ... k.
    A step failure or an error above ``blowup_threshold`` stops the run with
    status "blowup"; the records so far are kept.  ``callback(row, state)``
    runs after every step and stops the run by returning True.
    """
    params = params or problem.params
    if T <= 0 or tau <= 0:
        raise ParameterError("T and tau must be positive")
    nsteps = T / tau
    if abs(nsteps - round(nsteps)) > 1e-9 * max(1.0, nsteps):
        raise ParameterError(f"tau={tau} does not divide T={T}")
    nsteps = int(round(nsteps))
    if errors != "none" and not problem.has_exact:
        errors = "none"
    disc = disc or Discretization(N, problem.dim)
    scheme = bdf_scheme(k)
    schemes = [bdf_scheme(j) for j in range(1, k + 1)]

    exact_seed = seed_exact and problem.has_exact
    if initial is not None:
        u0, B0 = initial
    else:
        u0, B0 = initial_state(problem, disc, 0.0, cg)
    state = TimeStepperState.start(u0, B0, max(k, 3), 0.0)
    state.tau = tau
    if exact_seed:
        for j in range(1, k):
            u, B = initial_state(problem, disc, j * tau, cg)
            state.push(u, B, j * tau)

    result = RunResult([], state=state)
    prev_E = None

    def record(rep: StepReport | None, final: bool) -> dict:
        nonlocal prev_E
        t = state.time
        row = {"step": state.step, "time": t, "err_u_H1": np.nan, "err_B_Hcurl": np.nan,
               "energy": np.nan, "dissipation": np.nan,
               "subiters": rep.subiterations if rep else 0, "max_div_u": np.nan, "max_div_B": np.nan,
               "cg_iters": rep.cg_iterations if rep else 0}
        if errors == "every" or (errors == "final" and final):
            row["err_u_H1"], row["err_B_Hcurl"] = field_errors(state.u, state.B, t, problem, disc)
        if monitor == "every" or (monitor == "final" and final):
            du, umax, dB, Bmax = disc.max_divergence(state.u, state.B)
            row["max_div_u"], row["max_div_B"] = du, dB
            row["max_u"], row["max_B"] = umax, Bmax
        if track_energy:
            ke = min(k, 2)
            if len(state.u_hist) >= ke:
                row["energy"] = energy(state.u_hist, state.B_hist, params, tau, ke, disc)
            if len(state.u_hist) >= ke + 1 and rep is not None:
                row["dissipation"] = dissipation(state.u_hist, state.B_hist, params, tau, ke, disc)
                row["energy_residual"] = energy_law_residual(state.u_hist, state.B_hist, params, tau, ke, disc)
            row["energy_heuristic"] = k > 2
        return row

    while state.step < nsteps:
        have = len(state.u_hist)
        sch = scheme if have >= k else schemes[have - 1]
        try:
            rep = step(state, tau, sch, params, disc, problem, cg, eps, max_subiter)
        except (NumericalFailure, ConvergenceError) as exc:
            result.status = "blowup"
            result.message = str(exc)
            result.blowup_time = state.time + tau
            log.warning("run stopped: %s", exc)
            break
        row = record(rep, state.step == nsteps)
        result.records.append(row)
        if callback is not None and callback(row, state):
            result.status = "stopped"
            break
        err = max(row["err_u_H1"], row["err_B_Hcurl"])
        if errors == "every" and (not np.isfinite(err) or err > blowup_threshold):
            result.status = "blowup"
            result.message = f"error {err:.3e} above {blowup_threshold:g}"
            result.blowup_time = state.time
            break
    return result
