"""Exact divergence-free tensor-product bases on the reference square/cube.

Every basis function is a vector whose non-zero components are signed
products of one-dimensional family members, one per direction.  That
structure is captured by :class:`ModeFamily` and is what the Galerkin kernels
use for sum factorization; the point evaluators below are the slow,
direct counterpart used for checks.

Four spaces are provided (``n`` is the per-direction mode count):

========  ===================================  ==========================
kind      families                              dimension
========  ===================================  ==========================
Hdiv2D    interior                              (N-1)^2
H1_2D     interior                              (N-3)^2
Hdiv3D    interior1, interior2, faceX/Y/Z       2(N-1)^3 + 3(N-1)^2
H1_3D     interior1, interior2, faceX/Y/Z       2(N-3)^3 + 3(N-3)^2
========  ===================================  ==========================

Coefficients are flattened family by family, each family column-wise (first
index fastest).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .orthopoly import (
    ParameterError,
    family_eval,
    family_table,
    gauss_legendre_rule,
    gen_jacobi_derivative,
    gen_jacobi_eval,
    legendre_table,
)

__all__ = [
    "Factor",
    "ComponentTerm",
    "ModeFamily",
    "ModeIndex",
    "BasisSpace",
    "DiffeoMap",
    "GeometryError",
    "make_space",
    "eval_mode",
    "eval_hdiv2d",
    "eval_h1_2d",
    "eval_3d",
    "piola_div",
    "ExactnessReport",
    "exactness_check",
]

KINDS = ("Hdiv2D", "H1_2D", "Hdiv3D", "H1_3D")


class GeometryError(ValueError):
    """Raised when a mapping has a singular Jacobian."""


@dataclass(frozen=True)
class Factor:
    """A contiguous run ``family_{start}, ..., family_{start+count-1}``.

    ``family == "one"`` denotes the constant function 1 (count 1).
    """

    family: str
    start: int
    count: int

    def eval(self, x: float, deriv: int = 0) -> np.ndarray:
        if self.family == "one":
            return np.array([0.0 if deriv else 1.0])
        out = np.empty(self.count)
        for i in range(self.count):
            out[i] = family_eval(self.family, self.start + i, x)[deriv]
        return out


ONE = Factor("one", 0, 1)


@dataclass(frozen=True)
class ComponentTerm:
    sign: float
    factors: tuple[Factor, ...]


@dataclass(frozen=True)
class ModeFamily:
    """One family of basis functions sharing a tensor-product structure.

    ``shape`` is the coefficient array shape (1 along a pinned direction),
    ``components[c]`` is the term for vector component ``c`` or ``None``.
    """

    tag: str
    shape: tuple[int, ...]
    components: tuple[ComponentTerm | None, ...]
    pinned: tuple[int, ...] = ()

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))


@dataclass(frozen=True)
class ModeIndex:
    """A basis function: family tag plus 1-based multi-index.

    Interior modes carry ``d`` indices, face modes ``d - 1`` (the pinned
    direction is omitted, e.g. faceX carries ``(n, l)``).
    """

    family: str
    index: tuple[int, ...]


def _hdiv_families(N: int, d: int) -> tuple[ModeFamily, ...]:
    if N < 2:
        raise ParameterError(f"H(div) spaces need N >= 2, got {N}")
    n = N - 1
    psi = Factor("psi", 2, n)
    phi = Factor("phi", 1, n)
    if d == 2:
        return (ModeFamily("interior", (n, n), (ComponentTerm(1.0, (psi, phi)), ComponentTerm(-1.0, (phi, psi)))),)
    return (
        ModeFamily("interior1", (n, n, n), (
            ComponentTerm(1.0, (psi, phi, phi)), ComponentTerm(-1.0, (phi, psi, phi)), None)),
        ModeFamily("interior2", (n, n, n), (
            ComponentTerm(1.0, (psi, phi, phi)), None, ComponentTerm(-1.0, (phi, phi, psi)))),
        ModeFamily("faceX", (1, n, n), (
            None, ComponentTerm(1.0, (ONE, psi, phi)), ComponentTerm(-1.0, (ONE, phi, psi))), pinned=(0,)),
        ModeFamily("faceY", (n, 1, n), (
            ComponentTerm(1.0, (psi, ONE, phi)), None, ComponentTerm(-1.0, (phi, ONE, psi))), pinned=(1,)),
        ModeFamily("faceZ", (n, n, 1), (
            ComponentTerm(1.0, (psi, phi, ONE)), ComponentTerm(-1.0, (phi, psi, ONE)), None), pinned=(2,)),
    )


def _h1_families(N: int, d: int) -> tuple[ModeFamily, ...]:
    if N < 4:
        raise ParameterError(f"H1 spaces need N >= 4, got {N}")
    n = N - 3
    vphi = Factor("varphi", 4, n)
    psi = Factor("psi", 3, n)
    psi2 = Factor("psi", 2, 1)
    if d == 2:
        return (ModeFamily("interior", (n, n), (ComponentTerm(1.0, (vphi, psi)), ComponentTerm(-1.0, (psi, vphi)))),)
    return (
        ModeFamily("interior1", (n, n, n), (
            ComponentTerm(1.0, (vphi, psi, psi)), ComponentTerm(-1.0, (psi, vphi, psi)), None)),
        ModeFamily("interior2", (n, n, n), (
            ComponentTerm(1.0, (vphi, psi, psi)), None, ComponentTerm(-1.0, (psi, psi, vphi)))),
        ModeFamily("faceX", (1, n, n), (
            None, ComponentTerm(1.0, (psi2, vphi, psi)), ComponentTerm(-1.0, (psi2, psi, vphi))), pinned=(0,)),
        ModeFamily("faceY", (n, 1, n), (
            ComponentTerm(1.0, (vphi, psi2, psi)), None, ComponentTerm(-1.0, (psi, psi2, vphi))), pinned=(1,)),
        ModeFamily("faceZ", (n, n, 1), (
            ComponentTerm(1.0, (vphi, psi, psi2)), ComponentTerm(-1.0, (psi, vphi, psi2)), None), pinned=(2,)),
    )


@dataclass(frozen=True)
class BasisSpace:
    kind: str
    N: int
    families: tuple[ModeFamily, ...]

    @property
    def dim(self) -> int:
        """Spatial dimension d."""
        return 2 if self.kind.endswith("2D") else 3

    @property
    def dimension(self) -> int:
        return sum(f.size for f in self.families)

    @property
    def offsets(self) -> tuple[int, ...]:
        out, k = [], 0
        for f in self.families:
            out.append(k)
            k += f.size
        return tuple(out)

    def family(self, tag: str) -> ModeFamily:
        for f in self.families:
            if f.tag == tag:
                return f
        raise ParameterError(f"{self.kind} has no family {tag!r}")

    def split(self, vec: np.ndarray) -> list[np.ndarray]:
        vec = np.asarray(vec)
        if vec.shape != (self.dimension,):
            raise ValueError(f"coefficient vector has shape {vec.shape}, expected ({self.dimension},)")
        return [vec[o:o + f.size].reshape(f.shape, order="F") for o, f in zip(self.offsets, self.families)]

    def join(self, arrays: Sequence[np.ndarray]) -> np.ndarray:
        return np.concatenate([np.asarray(a).reshape(-1, order="F") for a in arrays])

    def array_index(self, mode: ModeIndex) -> tuple[int, tuple[int, ...]]:
        """Family position and 0-based array index of ``mode``."""
        for k, f in enumerate(self.families):
            if f.tag == mode.family:
                break
        else:
            raise ParameterError(f"{self.kind} has no family {mode.family!r}")
        free = [s for ax, s in enumerate(f.shape) if ax not in f.pinned]
        if len(mode.index) != len(free):
            raise ParameterError(f"{mode.family} expects {len(free)} indices, got {mode.index}")
        for i, s in zip(mode.index, free):
            if not 1 <= i <= s:
                raise ParameterError(f"mode index {mode.index} out of range 1..{s} for {self.kind}")
        it = iter(mode.index)
        idx = tuple(0 if ax in f.pinned else next(it) - 1 for ax in range(len(f.shape)))
        return k, idx

    def linearize_index(self, mode: ModeIndex) -> int:
        k, idx = self.array_index(mode)
        return self.offsets[k] + int(np.ravel_multi_index(idx, self.families[k].shape, order="F"))

    def modes(self):
        """All modes in linear order."""
        for f in self.families:
            free = [ax for ax in range(len(f.shape)) if ax not in f.pinned]
            for flat in range(f.size):
                idx = np.unravel_index(flat, f.shape, order="F")
                yield ModeIndex(f.tag, tuple(int(idx[ax]) + 1 for ax in free))


def make_space(kind: str, N: int) -> BasisSpace:
    if kind not in KINDS:
        raise ParameterError(f"unknown space kind {kind!r}")
    d = 2 if kind.endswith("2D") else 3
    fams = _hdiv_families(N, d) if kind.startswith("Hdiv") else _h1_families(N, d)
    return BasisSpace(kind, N, fams)


def eval_mode(space: BasisSpace, mode: ModeIndex, xi) -> tuple[np.ndarray, np.ndarray]:
    """Value ``v`` (d,) and Jacobian ``J[c, j] = d v_c / d xi_j`` (d, d) of one basis function."""
    xi = np.asarray(xi, dtype=float)
    d = space.dim
    if xi.shape != (d,):
        raise ValueError(f"point must have shape ({d},)")
    k, idx = space.array_index(mode)
    fam = space.families[k]
    val = np.zeros(d)
    jac = np.zeros((d, d))
    for c, term in enumerate(fam.components):
        if term is None:
            continue
        f0 = [fac.eval(xi[a])[idx[a]] for a, fac in enumerate(term.factors)]
        f1 = [fac.eval(xi[a], 1)[idx[a]] for a, fac in enumerate(term.factors)]
        val[c] = term.sign * np.prod(f0)
        for j in range(d):
            jac[c, j] = term.sign * np.prod([f1[a] if a == j else f0[a] for a in range(d)])
    return val, jac


def _check_range(m: int, n: int, hi: int) -> None:
    if not (1 <= m <= hi and 1 <= n <= hi):
        raise ParameterError(f"mode ({m}, {n}) out of range 1..{hi}")


def eval_hdiv2d(m: int, n: int, xi, with_div: bool = False):
    """Phi_{m,n}(xi) = (psi_{m+1}(x) phi_n(y), -phi_m(x) psi_{n+1}(y)).

    ``N`` is not needed for a single function; only m, n >= 1 is enforced.
    """
    if m < 1 or n < 1:
        raise ParameterError(f"mode ({m}, {n}) out of range")
    x, y = xi
    pm1, dpm1 = family_eval("psi", m + 1, x)
    fn, dfn = family_eval("phi", n, y)
    fm, dfm = family_eval("phi", m, x)
    pn1, dpn1 = family_eval("psi", n + 1, y)
    v = np.array([pm1 * fn, -fm * pn1])
    if with_div:
        return v, dpm1 * fn - fm * dpn1
    return v


def eval_h1_2d(m: int, n: int, xi, with_grad: bool = False):
    """chi_{m,n}(xi) = (varphi_{m+3}(x) psi_{n+2}(y), -psi_{m+2}(x) varphi_{n+3}(y))."""
    if m < 1 or n < 1:
        raise ParameterError(f"mode ({m}, {n}) out of range")
    x, y = xi
    a, da = family_eval("varphi", m + 3, x)
    b, db = family_eval("psi", n + 2, y)
    c, dc = family_eval("psi", m + 2, x)
    e, de = family_eval("varphi", n + 3, y)
    v = np.array([a * b, -c * e])
    if with_grad:
        return v, np.array([[da * b, a * db], [-dc * e, -c * de]])
    return v


def eval_3d(space: BasisSpace, mode: ModeIndex, xi, with_div: bool = False):
    """Value of a 3D basis function (either 3D kind)."""
    if space.dim != 3:
        raise ParameterError(f"eval_3d needs a 3D space, got {space.kind}")
    v, jac = eval_mode(space, mode, xi)
    if with_div:
        return v, float(np.trace(jac))
    return v


@dataclass(frozen=True)
class DiffeoMap:
    """A smooth map from the reference domain with an analytic Jacobian."""

    forward: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]

    def det(self, xi) -> float:
        return float(np.linalg.det(self.jacobian(np.asarray(xi, dtype=float))))

    def check_nonsingular(self, points) -> None:
        for p in points:
            if abs(self.det(p)) < 1e-14:
                raise GeometryError(f"singular Jacobian at {p}")

    @classmethod
    def identity(cls, d: int) -> "DiffeoMap":
        return cls(lambda xi: np.asarray(xi, dtype=float), lambda xi: np.eye(d))

    @classmethod
    def affine(cls, A, b) -> "DiffeoMap":
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        return cls(lambda xi: A @ np.asarray(xi, dtype=float) + b, lambda xi: A)


def piola_div(fmap: DiffeoMap, value, xi) -> np.ndarray:
    """Contravariant Piola transform of a reference vector ``value`` given at ``xi``."""
    J = np.asarray(fmap.jacobian(np.asarray(xi, dtype=float)), dtype=float)
    det = np.linalg.det(J)
    if abs(det) < 1e-14:
        raise GeometryError(f"singular Jacobian at {xi}")
    return J @ np.asarray(value, dtype=float) / det


@dataclass
class ExactnessReport:
    N: int
    max_div: float
    membership_residual: float
    trials: int

    @property
    def passed(self) -> bool:
        return self.max_div <= 1e-12 and self.membership_residual <= 1e-12


def exactness_check(N: int, trials: int = 1, seed: int = 0, coeffs=None) -> ExactnessReport:
    """Discrete exact-sequence check curl(H^1_N) subset ker(div) in H_N(div) on the square.

    A random scalar v = sum c_mn P_m^{(-1,-1)}(x) P_n^{(-1,-1)}(y) is mapped
    by the scalar curl (dv/dy, -dv/dx).  Its components are fitted in the
    H_N(div) tensor bases P^{(-1,-1)} x L and L x P^{(-1,-1)} on a Gauss grid
    (membership residual), and the divergence of the fitted field is
    evaluated from the derivative relation of P^{(-1,-1)}.
    """
    if N < 2:
        raise ParameterError(f"N must be >= 2, got {N}")
    rng = np.random.default_rng(seed)
    rule = gauss_legendre_rule(N + 3)
    x = rule.nodes
    P = np.array([gen_jacobi_eval(m, -1, x) for m in range(N + 1)])
    dP = np.array([_gj1_derivative(m, x) for m in range(N + 1)])
    L, _ = legendre_table(N - 1, x)
    # least-squares fitting operators for the two tensor factors
    fitP = np.linalg.pinv(P.T)
    fitL = np.linalg.pinv(L.T)
    worst_div = worst_res = 0.0
    for t in range(trials):
        c = rng.standard_normal((N + 1, N + 1)) if coeffs is None else np.asarray(coeffs, dtype=float)
        v1 = P.T @ c @ dP          # dv/dy on the grid
        v2 = -(dP.T @ c @ P)       # -dv/dx
        a = fitP @ v1 @ fitL.T     # v1 ~ sum a_mj P_m(x) L_j(y)
        b = fitL @ v2 @ fitP.T     # v2 ~ sum b_im L_i(x) P_n(y)
        res = max(np.max(np.abs(P.T @ a @ L - v1)), np.max(np.abs(L.T @ b @ P - v2)))
        div = dP.T @ a @ L + L.T @ b @ dP
        scale = max(1.0, np.max(np.abs(v1)), np.max(np.abs(v2)))
        worst_div = max(worst_div, float(np.max(np.abs(div))) / scale)
        worst_res = max(worst_res, float(res) / scale)
    return ExactnessReport(N, worst_div, worst_res, trials)


def _gj1_derivative(m: int, x: np.ndarray) -> np.ndarray:
    if m == 0:
        return -0.5 * np.ones_like(x)
    if m == 1:
        return 0.5 * np.ones_like(x)
    return gen_jacobi_derivative(m, -1, x)


def _factor_at(fac: Factor, x: np.ndarray, deriv: int) -> np.ndarray:
    if fac.family == "one":
        return np.full((1, len(x)), 0.0 if deriv else 1.0)
    t = family_table(fac.family, range(fac.start, fac.start + fac.count), x)
    return t.derivatives if deriv else t.values


def eval_all_modes(space: BasisSpace, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Values (dim, d, P) and Jacobians (dim, d, d, P) of every basis function
    at the points (P, d), in linear-index order."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    d = space.dim
    P = points.shape[0]
    vals, jacs = [], []
    for fam in space.families:
        v = np.zeros(fam.shape + (d, P))
        J = np.zeros(fam.shape + (d, d, P))
        for c, term in enumerate(fam.components):
            if term is None:
                continue
            t0 = [_factor_at(f, points[:, a], 0) for a, f in enumerate(term.factors)]
            t1 = [_factor_at(f, points[:, a], 1) for a, f in enumerate(term.factors)]
            spec = "ip,jp->ijp" if d == 2 else "ip,jp,kp->ijkp"
            v[..., c, :] = term.sign * np.einsum(spec, *t0)
            for j in range(d):
                tabs = [t1[a] if a == j else t0[a] for a in range(d)]
                J[..., c, j, :] = term.sign * np.einsum(spec, *tabs)
        # flatten the mode axes column-wise (first index fastest)
        vals.append(v.reshape((-1, d, P), order="F"))
        jacs.append(J.reshape((-1, d, d, P), order="F"))
    return np.concatenate(vals), np.concatenate(jacs)


@dataclass
class BasisCheckReport:
    kind: str
    N: int
    max_div: float
    max_trace: float
    modes: int
    points: int

    @property
    def passed(self) -> bool:
        return self.max_div <= 1e-12 and self.max_trace <= 1e-12


def basis_check(kind: str, N: int, points: int = 100, seed: int = 0) -> BasisCheckReport:
    """Divergence of every basis function at random points and its boundary trace.

    The divergence is relative to the largest partial derivative of the mode.
    The trace residual is |v| on the boundary for the H1 spaces and |n . v|
    for the H(div) spaces, relative to max(1, max |v|).
    """
    space = make_space(kind, N)
    d = space.dim
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-1, 1, (points, d))
    v, J = eval_all_modes(space, pts)
    div = np.abs(np.einsum("mccp->mp", J)).max(axis=1)
    scale = np.maximum(1.0, np.abs(J).max(axis=(1, 2, 3)))
    max_div = float((div / scale).max())
    # boundary points: one face per direction and sign
    bpts, normals = [], []
    for a in range(d):
        for s in (-1.0, 1.0):
            q = rng.uniform(-1, 1, (max(points // (2 * d), 4), d))
            q[:, a] = s
            bpts.append(q)
            normals += [a] * len(q)
    bpts = np.concatenate(bpts)
    vb, _ = eval_all_modes(space, bpts)
    vscale = np.maximum(1.0, np.abs(v).max(axis=(1, 2)))
    if kind.startswith("H1"):
        tr = np.abs(vb).max(axis=1)
    else:
        tr = np.abs(vb[:, normals, np.arange(len(normals))])
    max_trace = float((tr.max(axis=1) / vscale).max())
    return BasisCheckReport(kind, N, max_div, max_trace, space.dimension, points)
