"""SPD solves for the velocity and magnetic model problems and L2 projection
onto the divergence-free spaces.

All operators are applied matrix-free; the conjugate gradient iteration is
scipy's, preconditioned by the exact operator diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .bases import BasisSpace
from .kernels import (
    KroneckerOperator,
    Transform,
    assemble_curlcurl_operator,
    assemble_form,
    assemble_velocity_operator,
    magnetic_space,
    velocity_space,
)
from .orthopoly import ParameterError, dealiased_size, gauss_legendre_rule

__all__ = [
    "CGConfig",
    "PROJECTION_CG",
    "SolveReport",
    "SpectralCoefficients",
    "ConvergenceError",
    "cg_solve",
    "solve_velocity",
    "solve_magnetic",
    "project_div0",
    "velocity_operator",
    "magnetic_operator",
    "mass_operator",
]


class ConvergenceError(RuntimeError):
    """A linear solve did not reach its tolerance."""

    def __init__(self, message: str, report: "SolveReport | None" = None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class CGConfig:
    rtol: float = 1e-12
    atol: float = 1e-14
    maxiter: int | None = None  # None means 10 * dimension
    preconditioner: str = "diagonal"
    record_trace: bool = False

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ParameterError("CG tolerances must be positive")
        if self.maxiter is not None and self.maxiter < 1:
            raise ParameterError("maxiter must be >= 1")
        if self.preconditioner not in ("none", "diagonal"):
            raise ParameterError(f"unknown preconditioner {self.preconditioner!r}")


# L2 projections: the H1 mass matrix is badly conditioned and its right-hand
# sides are small, so the absolute floor is dropped and the relative tolerance
# tightened.
PROJECTION_CG = CGConfig(rtol=1e-14, atol=1e-300)


@dataclass
class SolveReport:
    iterations: int
    residual: float
    converged: bool
    trace: list[float] = field(default_factory=list)


@dataclass
class SpectralCoefficients:
    """Coefficient vector of a field expanded in ``space``."""

    space: BasisSpace
    vector: np.ndarray

    def __post_init__(self):
        if self.vector.shape != (self.space.dimension,):
            raise ValueError(f"expected {self.space.dimension} coefficients, got {self.vector.shape}")

    @property
    def families(self) -> list[np.ndarray]:
        return self.space.split(self.vector)


def _as_apply(op) -> tuple[Callable, Callable | None, int]:
    if isinstance(op, np.ndarray):
        return (lambda x: op @ x), (lambda: np.diag(op).copy()), op.shape[0]
    return op.apply, op.diagonal, op.shape[0]


def cg_solve(op, rhs: np.ndarray, config: CGConfig = CGConfig(), x0: np.ndarray | None = None):
    """Preconditioned CG for ``op x = rhs``.

    Stops when ``||rhs - op x|| <= max(rtol ||rhs||, atol)``.  Returns
    ``(x, SolveReport)``; non-convergence is reported, not raised.
    """
    rhs = np.asarray(rhs, dtype=float)
    if not np.all(np.isfinite(rhs)):
        raise ValueError("right-hand side contains non-finite values")
    apply, diag, n = _as_apply(op)
    if rhs.shape != (n,):
        raise ValueError(f"rhs has shape {rhs.shape}, operator is {n}x{n}")
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0.0:
        return np.zeros(n), SolveReport(0, 0.0, True)
    A = LinearOperator((n, n), matvec=apply, dtype=float)
    M = None
    if config.preconditioner == "diagonal":
        d = diag()
        if np.any(d <= 0):
            raise ValueError("operator diagonal is not positive")
        inv = 1.0 / d
        M = LinearOperator((n, n), matvec=lambda r: inv * r, dtype=float)
    maxiter = config.maxiter or 10 * n
    count = [0]
    trace: list[float] = []

    def callback(xk):
        count[0] += 1
        if config.record_trace:
            trace.append(float(np.linalg.norm(rhs - apply(xk))))

    x, info = cg(A, rhs, x0=x0, rtol=config.rtol, atol=config.atol, maxiter=maxiter, M=M, callback=callback)
    res = float(np.linalg.norm(rhs - apply(x)))
    tol = max(config.rtol * bnorm, config.atol)
    # the recursive residual can drift a hair below the true one
    converged = info == 0 and res <= 10 * tol
    return x, SolveReport(count[0], res / bnorm, converged, trace)


@lru_cache(maxsize=64)
def velocity_operator(kappa1: float, N: int, dim: int) -> KroneckerOperator:
    return assemble_velocity_operator(kappa1, N, dim)


@lru_cache(maxsize=64)
def magnetic_operator(kappa0: float, N: int, dim: int) -> KroneckerOperator:
    return assemble_curlcurl_operator(kappa0, N, dim)


@lru_cache(maxsize=16)
def mass_operator(kind: str, N: int, dim: int) -> KroneckerOperator:
    space = velocity_space(N, dim) if kind == "velocity" else magnetic_space(N, dim)
    return assemble_form(space, "mass")


def _checked(x, report, what):
    if not report.converged:
        raise ConvergenceError(f"{what} solve did not converge: residual {report.residual:.3e} "
                               f"after {report.iterations} iterations", report)
    return x, report


def solve_velocity(kappa1: float, rhs: np.ndarray, N: int, dim: int, config: CGConfig = CGConfig(),
                   x0: np.ndarray | None = None):
    """Galerkin solution of (grad u, grad chi) + kappa1 (u, chi) = rhs."""
    if kappa1 < 0:
        raise ParameterError("kappa1 must be >= 0")
    x, rep = _checked(*cg_solve(velocity_operator(float(kappa1), N, dim), rhs, config, x0), "velocity")
    return SpectralCoefficients(velocity_space(N, dim), x), rep


def solve_magnetic(kappa0: float, rhs: np.ndarray, N: int, dim: int, config: CGConfig = CGConfig(),
                   x0: np.ndarray | None = None):
    """Galerkin solution of (curl B, curl Phi) + kappa0 (B, Phi) = rhs."""
    if kappa0 <= 0:
        raise ParameterError("kappa0 must be > 0")
    x, rep = _checked(*cg_solve(magnetic_operator(float(kappa0), N, dim), rhs, config, x0), "magnetic")
    return SpectralCoefficients(magnetic_space(N, dim), x), rep


def project_div0(sampler: Callable, space: BasisSpace, config: CGConfig = PROJECTION_CG,
                 transform: Transform | None = None):
    """L2 projection of an analytic vector field onto ``space``.

    ``sampler`` takes the list of grid coordinate arrays and returns
    samples of shape (d, Q, ..., Q).
    """
    T = transform or Transform(space, gauss_legendre_rule(dealiased_size(space.N)))
    samples = np.asarray(sampler(T.points()), dtype=float)
    rhs = T.test(samples)
    kind = "velocity" if space.kind.startswith("H1") else "magnetic"
    x, rep = _checked(*cg_solve(mass_operator(kind, space.N, space.dim), rhs, config), "projection")
    return SpectralCoefficients(space, x), rep
