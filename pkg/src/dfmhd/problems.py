"""Test problems: manufactured MHD solutions on the reference square/cube and
the lid-driven cavity with a boundary lifting.

Forcing terms are derived symbolically with sympy and compiled to numpy
callables, so the forcing is exact to rounding and the spatial error can
reach machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
import sympy as sp

from .orthopoly import ParameterError

__all__ = [
    "MHDParams",
    "ManufacturedProblem",
    "CavityCase",
    "manufactured_2d",
    "manufactured_3d",
    "zero_problem",
    "cavity_case",
]

_X = sp.symbols("x1 x2 x3", real=True)
_T = sp.Symbol("t", real=True)


@dataclass(frozen=True)
class MHDParams:
    """Viscosity ``nu``, magnetic diffusivity ``eta`` and the product ``mu_rho``."""

    nu: float = 1.0
    eta: float = 1.0
    mu_rho: float = 1.0

    def __post_init__(self):
        if not (self.nu > 0 and self.eta > 0 and self.mu_rho > 0):
            raise ParameterError("nu, eta and mu_rho must be positive")

    @classmethod
    def from_numbers(cls, Re: float, Rem: float, Ha: float) -> "MHDParams":
        if not (Re > 0 and Rem > 0 and Ha > 0):
            raise ParameterError("Re, Rem and Ha must be positive")
        return cls(1.0 / Re, 1.0 / Rem, Re * Rem / Ha ** 2)

    @property
    def Re(self) -> float:
        return 1.0 / self.nu

    @property
    def Rem(self) -> float:
        return 1.0 / self.eta

    @property
    def Ha(self) -> float:
        return float(np.sqrt(self.Re * self.Rem / self.mu_rho))


# Sampled callables take (t, [x1, x2(, x3)]) and return arrays of shape
# (d, ...) for vectors, (d, d, ...) for gradients, (...) for scalars.
Sampler = Callable[[float, list], np.ndarray]


@dataclass
class ManufacturedProblem:
    dim: int
    params: MHDParams
    u: Sampler
    grad_u: Sampler
    B: Sampler
    grad_B: Sampler
    p: Sampler
    f: Sampler
    g: Sampler
    u_t: Sampler | None = None
    B_t: Sampler | None = None
    lap_u: Sampler | None = None
    curlcurl_B: Sampler | None = None
    name: str = "manufactured"
    # boundary lifting (cavity only)
    u_lift: Sampler | None = None
    grad_u_lift: Sampler | None = None
    B_background: np.ndarray | None = None

    @property
    def has_exact(self) -> bool:
        return self.u is not None


def _curl2(v):
    return sp.diff(v[1], _X[0]) - sp.diff(v[0], _X[1])


def _scurl(s):
    return [sp.diff(s, _X[1]), -sp.diff(s, _X[0])]


def _curl3(v):
    x1, x2, x3 = _X
    return [sp.diff(v[2], x2) - sp.diff(v[1], x3), sp.diff(v[0], x3) - sp.diff(v[2], x1),
            sp.diff(v[1], x1) - sp.diff(v[0], x2)]


def _cross3(a, b):
    return [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]


def _residual_terms(u, B, p, dim, nu, eta, mu_rho):
    """Forcing pair (f, g) that makes (u, B, p) an exact solution."""
    X = _X[:dim]
    adv = [sum(u[j] * sp.diff(u[c], X[j]) for j in range(dim)) for c in range(dim)]
    lap = [sum(sp.diff(u[c], X[j], 2) for j in range(dim)) for c in range(dim)]
    if dim == 2:
        j = _curl2(B)
        lor = [-j * B[1], j * B[0]]
        ind = _scurl(u[0] * B[1] - u[1] * B[0])
        cc = _scurl(j)
    else:
        jv = _curl3(B)
        lor = _cross3(jv, B)
        ind = _curl3(_cross3(u, B))
        cc = _curl3(jv)
    f = [sp.diff(u[c], _T) + adv[c] - nu * lap[c] + sp.diff(p, X[c]) - lor[c] / mu_rho for c in range(dim)]
    g = [sp.diff(B[c], _T) - ind[c] + eta * cc[c] for c in range(dim)]
    return f, g, lap, cc


def _vector_fn(exprs, dim):
    args = (_T, list(_X[:dim]))
    fn = sp.lambdify(args, list(exprs), modules="numpy", cse=True)

    def sample(t, xs):
        shape = np.shape(xs[0])
        return np.stack([np.broadcast_to(np.asarray(v, dtype=float), shape) for v in fn(t, list(xs))])

    return sample


def _grad_fn(v, dim):
    inner = _vector_fn([sp.diff(v[c], _X[j]) for c in range(dim) for j in range(dim)], dim)

    def sample(t, xs):
        a = inner(t, xs)
        return a.reshape((dim, dim) + a.shape[1:])

    return sample


def _scalar_fn(expr, dim):
    inner = _vector_fn([expr], dim)
    return lambda t, xs: inner(t, xs)[0]


def _build(u, B, p, dim, params: MHDParams, name: str) -> ManufacturedProblem:
    f, g, lap, cc = _residual_terms(u, B, p, dim, params.nu, params.eta, params.mu_rho)
    return ManufacturedProblem(
        dim=dim, params=params,
        u=_vector_fn(u, dim), grad_u=_grad_fn(u, dim),
        B=_vector_fn(B, dim), grad_B=_grad_fn(B, dim),
        p=_scalar_fn(p, dim), f=_vector_fn(f, dim), g=_vector_fn(g, dim),
        u_t=_vector_fn([sp.diff(c, _T) for c in u], dim),
        B_t=_vector_fn([sp.diff(c, _T) for c in B], dim),
        lap_u=_vector_fn(lap, dim), curlcurl_B=_vector_fn(cc, dim),
        name=name,
    )


@lru_cache(maxsize=8)
def manufactured_2d(params: MHDParams = MHDParams()) -> ManufacturedProblem:
    """u = B = curl of a smooth stream function with (1 - x^2)^3 boundary factors."""
    x1, x2 = _X[:2]
    s = sp.sin(sp.pi * x1) * sp.cos(sp.pi * x2)
    stream = (1 - x1 ** 2) ** 3 * (1 - x2 ** 2) ** 3 * (1 + s) * sp.exp(s / 10) * sp.cos(_T)
    u = _scurl(stream)
    B = list(u)
    p = 10 * ((x1 - sp.Rational(1, 2)) ** 3 * x2 ** 2 + (1 - x1) ** 3 * (x2 - sp.Rational(1, 2)) ** 3)
    return _build(u, B, p, 2, params, "manufactured_2d")


@lru_cache(maxsize=8)
def manufactured_3d(params: MHDParams = MHDParams()) -> ManufacturedProblem:
    """Tensor-product solenoidal fields with cos(t) and cos(2t) time factors."""
    x = _X
    beta = [(1 - xi ** 2) * sp.sin(sp.pi * (xi + 1) / 2) for xi in x]
    gam = [sp.sin(sp.pi * (xi + 1) / 2) for xi in x]
    db = [sp.diff(b, xi) for b, xi in zip(beta, x)]
    dg = [sp.diff(c, xi) for c, xi in zip(gam, x)]
    u = [2 * beta[0] * db[1] * db[2], -db[0] * beta[1] * db[2], -db[0] * db[1] * beta[2]]
    u = [c * sp.cos(_T) for c in u]
    B = [2 * gam[0] * dg[1] * dg[2], -dg[0] * gam[1] * dg[2], -dg[0] * dg[1] * gam[2]]
    B = [(2 / sp.pi) ** 2 * c * sp.cos(2 * _T) for c in B]
    p = 10 * ((x[0] - sp.Rational(1, 2)) ** 3 * x[1] ** 2 + (1 - x[0]) ** 3 * (x[1] - sp.Rational(1, 2)) ** 3
              + (1 - x[0]) ** 2 * x[1] * (x[2] - sp.Rational(1, 2)) ** 3)
    return _build(u, B, p, 3, params, "manufactured_3d")


def zero_problem(dim: int, params: MHDParams = MHDParams()) -> ManufacturedProblem:
    """Identically zero solution and forcing."""
    zero = [sp.Integer(0)] * dim
    return _build(zero, zero, sp.Integer(0), dim, params, "zero")


def unforced(problem: ManufacturedProblem) -> ManufacturedProblem:
    """Copy of ``problem`` with both forcings removed; the exact fields are kept
    only as a source of initial data."""
    def zero(t, xs):
        return np.zeros((problem.dim,) + np.shape(xs[0]))

    return ManufacturedProblem(problem.dim, problem.params, problem.u, problem.grad_u, problem.B,
                               problem.grad_B, problem.p, zero, zero, name=problem.name + "_unforced")


@dataclass
class CavityCase:
    """Lid-driven cavity on [0, 1]^2 posed on the reference square.

    With x = (xi + 1) / 2 and t = t_ref / 2 the equations keep their form on
    the reference square with nu and eta doubled; ``reference`` holds those
    parameters.  Field values are unchanged by the map.
    """

    dim: int
    Re: float
    Rem: float
    Ha: float
    physical: MHDParams
    reference: MHDParams
    problem: ManufacturedProblem = field(repr=False)
    B0: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0]))

    @property
    def nu(self) -> float:
        return self.physical.nu

    @property
    def eta(self) -> float:
        return self.physical.eta

    @property
    def mu_rho(self) -> float:
        return self.physical.mu_rho

    @staticmethod
    def time_scale() -> float:
        """Reference time per unit physical time."""
        return 2.0


def _lid_lift_exprs():
    """Stream-function lifting on the physical square, as sympy expressions."""
    x1, x2 = _X[:2]
    s = (4 * x1 * (1 - x1)) ** 2
    h = x2 ** 2 * (x2 - 1)
    return [s * sp.diff(h, x2), -sp.diff(s, x1) * h]


def cavity_case(dim: int = 2, Re: float = 100.0, Rem: float = 100.0, Ha: float = float(np.sqrt(10.0))) -> CavityCase:
    """Cavity setup with a regularized lid profile (4 x (1 - x))^2 on the top wall.

    The unknown velocity is u - u_lift with u_lift divergence free and equal
    to the lid profile on the top wall, and the unknown magnetic field is
    B - B0 with B0 = (0, 1).
    """
    if dim != 2:
        raise ParameterError("the cavity case is provided in 2D only")
    phys = MHDParams.from_numbers(Re, Rem, Ha)
    ref = MHDParams(2 * phys.nu, 2 * phys.eta, phys.mu_rho)
    xi1, xi2 = sp.symbols("xi1 xi2", real=True)
    sub = {_X[0]: (xi1 + 1) / 2, _X[1]: (xi2 + 1) / 2}
    lift = [sp.expand(c.subs(sub)) for c in _lid_lift_exprs()]
    lift = [c.subs({xi1: _X[0], xi2: _X[1]}) for c in lift]
    lap = [sum(sp.diff(c, v, 2) for v in _X[:2]) for c in lift]
    # (grad u_lift, grad chi) moves to the right side as -(lap u_lift, chi) times nu
    f = [ref.nu * c for c in lap]
    zero = [sp.Integer(0)] * 2


    prob = ManufacturedProblem(
        dim=2, params=ref, u=None, grad_u=None, B=None, grad_B=None, p=None,
        f=_vector_fn(f, 2), g=_vector_fn(zero, 2), name="cavity",
        u_lift=_vector_fn(lift, 2), grad_u_lift=_grad_fn(lift, 2),
        B_background=np.array([0.0, 1.0]),
    )
    return CavityCase(dim, Re, Rem, Ha, phys, ref, prob)


def lid_lift_physical():
    """Numpy callables (u_lift, div u_lift) on the physical square."""
    lift = _lid_lift_exprs()
    div = sp.diff(lift[0], _X[0]) + sp.diff(lift[1], _X[1])
    return _vector_fn(lift, 2), _scalar_fn(div, 2)
