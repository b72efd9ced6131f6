"""Galerkin matrices, Kronecker-structured operators and sum-factorized transforms.

The velocity operators use the closed-form one-dimensional matrices

    G_mn = (varphi_{n+3}, varphi_{m+3})    H_mn = (psi_{n+2}, psi_{m+2})
    I_mn = (phi_{n+1}, phi_{m+1})          Htilde_m = (psi_2, psi_{m+2})

for 1 <= m, n <= N-3.  Everything else (mass and curl-curl on the H(div)
spaces, the generic gradient form used as a cross-check) is assembled from
one-dimensional Gram matrices computed by exact Gauss quadrature and combined
into Kronecker terms by :func:`assemble_form`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .bases import BasisSpace, Factor, ModeFamily, make_space
from .orthopoly import (
    ParameterError,
    QuadratureRule,
    dealiased_size,
    family_table,
    gauss_legendre_rule,
)

__all__ = [
    "BandedSymmetricMatrix",
    "KroneckerOperator",
    "FieldSamples",
    "Transform",
    "matrix_G",
    "matrix_H",
    "matrix_I",
    "matrix_Htilde",
    "assemble_velocity_operator_2d",
    "assemble_velocity_operator_3d",
    "assemble_velocity_operator",
    "assemble_form",
    "assemble_curlcurl_operator",
    "assemble_mass_operator",
    "galerkin_rhs",
    "evaluate_field",
    "trilinear_forms",
    "linearize_index",
    "velocity_space",
    "magnetic_space",
]


@dataclass(frozen=True)
class BandedSymmetricMatrix:
    """Symmetric matrix stored by its upper bands ``{offset: diagonal}``."""

    size: int
    bands: dict[int, np.ndarray]

    def toarray(self) -> np.ndarray:
        A = np.zeros((self.size, self.size))
        for k, diag in self.bands.items():
            A += np.diag(diag, k)
            if k:
                A += np.diag(diag, -k)
        return A

    def __getitem__(self, ij) -> float:
        i, j = ij
        k = abs(i - j)
        if k not in self.bands:
            return 0.0
        return float(self.bands[k][min(i, j)])

    @property
    def offsets(self) -> tuple[int, ...]:
        return tuple(sorted(self.bands))


def _require_n4(N: int) -> int:
    if N < 4:
        raise ParameterError(f"velocity matrices need N >= 4, got {N}")
    return N - 3


def matrix_G(N: int) -> BandedSymmetricMatrix:
    size = _require_n4(N)
    n = np.arange(1, size + 1, dtype=float)
    d0 = (1 / (2 * n + 3)) * (
        1 / ((2 * n - 1) * (2 * n + 1) ** 2)
        + 4 * (2 * n + 3) / ((2 * n + 1) ** 2 * (2 * n + 5) ** 2)
        + 1 / ((2 * n + 5) ** 2 * (2 * n + 7))
    )
    n2 = n[: max(size - 2, 0)]
    d2 = -(1 / np.sqrt(2 * n2 + 3)) * (1 / np.sqrt(2 * n2 + 7)) * (2 / (2 * n2 + 5) ** 2) * (
        1 / (2 * n2 + 1) + 1 / (2 * n2 + 9))
    n4 = n[: max(size - 4, 0)]
    d4 = (1 / np.sqrt(2 * n4 + 3)) * (1 / np.sqrt(2 * n4 + 11)) / ((2 * n4 + 5) * (2 * n4 + 7) * (2 * n4 + 9))
    bands = {0: d0}
    if len(d2):
        bands[2] = d2
    if len(d4):
        bands[4] = d4
    return BandedSymmetricMatrix(size, bands)


def matrix_H(N: int) -> BandedSymmetricMatrix:
    size = _require_n4(N)
    n = np.arange(1, size + 1, dtype=float)
    d0 = (1 / (2 * n + 3)) * (1 / (2 * n + 1) + 1 / (2 * n + 5))
    n2 = n[: max(size - 2, 0)]
    d2 = -(1 / np.sqrt(2 * n2 + 3)) * (1 / np.sqrt(2 * n2 + 7)) / (2 * n2 + 5)
    bands = {0: d0}
    if len(d2):
        bands[2] = d2
    return BandedSymmetricMatrix(size, bands)


def matrix_I(N: int) -> BandedSymmetricMatrix:
    size = _require_n4(N)
    return BandedSymmetricMatrix(size, {0: np.ones(size)})


def matrix_Htilde(N: int) -> np.ndarray:
    """Column vector (psi_2, psi_{m+2}); single non-zero at m = 2."""
    size = _require_n4(N)
    h = np.zeros(size)
    if size >= 2:
        h[1] = -np.sqrt(3) / (15 * np.sqrt(7))
    return h


# ---------------------------------------------------------------------------
# Kronecker operators


@dataclass
class KronTerm:
    row: int
    col: int
    coef: float
    factors: tuple[np.ndarray, ...]  # per direction, shape (rows, cols)


def _contract(X: np.ndarray, mats: Sequence[np.ndarray]) -> np.ndarray:
    """Apply ``mats[a]`` along axis ``a`` of ``X`` (sum factorization)."""
    if X.ndim == 2:
        return mats[0] @ X @ mats[1].T
    a, b, c = X.shape
    T = (mats[0] @ X.reshape(a, b * c)).reshape(-1, b, c)
    T = np.matmul(mats[1], T)
    return T @ mats[2].T


@dataclass
class KroneckerOperator:
    """Block operator whose blocks are sums of Kronecker products of 1D matrices.

    Acts on flat coefficient vectors of ``space``; nothing larger than the 1D
    factors is stored.
    """

    space: BasisSpace
    terms: list[KronTerm] = field(default_factory=list)
    _plan: list | None = field(default=None, init=False, repr=False, compare=False)

    def add(self, row: int, col: int, coef: float, factors, symmetric_pair: bool = True) -> None:
        """Add a term to block (row, col) and, off the diagonal, its transpose to (col, row)."""
        factors = tuple(np.atleast_2d(np.asarray(f, dtype=float)) for f in factors)
        self.terms.append(KronTerm(row, col, float(coef), factors))
        if symmetric_pair and row != col:
            self.terms.append(KronTerm(col, row, float(coef), tuple(f.T for f in factors)))
        self._plan = None

    def _compile(self) -> list:
        # stack the terms of each block so one block costs d batched matmuls
        blocks: dict[tuple[int, int], list[KronTerm]] = {}
        for t in self.terms:
            blocks.setdefault((t.row, t.col), []).append(t)
        plan = []
        for (r, c), ts in sorted(blocks.items()):
            stacks = [np.stack([t.factors[a] for t in ts]) for a in range(self.space.dim)]
            stacks[0] = stacks[0] * np.array([t.coef for t in ts])[:, None, None]
            plan.append((r, c, stacks))
        return plan

    @property
    def shape(self) -> tuple[int, int]:
        n = self.space.dimension
        return n, n

    def apply(self, x: np.ndarray) -> np.ndarray:
        if self._plan is None:
            self._plan = self._compile()
        xs = self.space.split(x)
        ys = [np.zeros(f.shape) for f in self.space.families]
        for r, c, (Fx, *rest) in self._plan:
            X = xs[c]
            T, i, a = Fx.shape
            W = (Fx.reshape(T * i, a) @ X.reshape(a, -1)).reshape((T, i) + X.shape[1:])
            if X.ndim == 2:
                ys[r] += np.matmul(W, rest[0].transpose(0, 2, 1)).sum(0)
            else:
                W = np.matmul(rest[0][:, None], W)
                ys[r] += np.matmul(W, rest[1].transpose(0, 2, 1)[:, None]).sum(0)
        return self.space.join(ys)

    __matmul__ = apply

    def diagonal(self) -> np.ndarray:
        ds = [np.zeros(f.shape) for f in self.space.families]
        for t in self.terms:
            if t.row != t.col:
                continue
            diags = [np.diag(f) for f in t.factors]
            out = diags[0]
            for dg in diags[1:]:
                out = np.multiply.outer(out, dg)
            ds[t.row] += t.coef * out
        return self.space.join(ds)

    def todense(self) -> np.ndarray:
        n = self.space.dimension
        A = np.zeros((n, n))
        e = np.zeros(n)
        for j in range(n):
            e[j] = 1.0
            A[:, j] = self.apply(e)
            e[j] = 0.0
        return A

    def __add__(self, other: "KroneckerOperator") -> "KroneckerOperator":
        if other.space != self.space:
            raise ValueError("operators act on different spaces")
        return KroneckerOperator(self.space, self.terms + other.terms)

    def scaled(self, s: float) -> "KroneckerOperator":
        return KroneckerOperator(self.space, [KronTerm(t.row, t.col, s * t.coef, t.factors) for t in self.terms])


def velocity_space(N: int, dim: int) -> BasisSpace:
    return make_space("H1_2D" if dim == 2 else "H1_3D", N)


def magnetic_space(N: int, dim: int) -> BasisSpace:
    return make_space("Hdiv2D" if dim == 2 else "Hdiv3D", N)


def assemble_velocity_operator_2d(kappa1: float, N: int) -> KroneckerOperator:
    """U -> 2HUH + GU + UG + kappa1 (GUH + HUG) on the 2D H1 space."""
    G, H, I = matrix_G(N).toarray(), matrix_H(N).toarray(), matrix_I(N).toarray()
    op = KroneckerOperator(velocity_space(N, 2))
    op.add(0, 0, 2.0, (H, H))
    op.add(0, 0, 1.0, (G, I))
    op.add(0, 0, 1.0, (I, G))
    if kappa1:
        op.add(0, 0, kappa1, (G, H))
        op.add(0, 0, kappa1, (H, G))
    return op


def assemble_velocity_operator_3d(kappa1: float, N: int) -> KroneckerOperator:
    """The 5x5 block velocity operator on the 3D H1 space.

    Factors are listed per direction (x, y, z); a Kronecker product written
    Z (x) Y (x) X in the usual column-wise notation appears here as (X, Y, Z).
    ``Htilde`` enters as a column (1D size 1 -> N-3) or its transpose.
    """
    G, H, I = matrix_G(N).toarray(), matrix_H(N).toarray(), matrix_I(N).toarray()
    ht = matrix_Htilde(N)[:, None]
    hT = ht.T
    k = kappa1
    op = KroneckerOperator(velocity_space(N, 3))

    def block(i, j, entries):
        for coef, z, y, x in entries:
            if coef:
                op.add(i, j, coef, (x, y, z))

    block(0, 0, [(2, H, H, H), (1, I, H, G), (1, H, I, G), (1, I, G, H), (1, H, G, I), (k, H, H, G), (k, H, G, H)])
    block(1, 1, [(2, H, H, H), (1, I, H, G), (1, H, I, G), (1, G, I, H), (1, G, H, I), (k, H, H, G), (k, G, H, H)])
    face = [(0.8, None, H, H), (1, None, H, G), (1, None, G, H), (0.4, None, I, G), (0.4, None, G, I),
            (0.4 * k, None, H, G), (0.4 * k, None, G, H)]
    # faces: two free directions, the pinned one carries the scalar 1x1 factor 1
    one = np.ones((1, 1))
    for coef, _, b, a in face:
        if coef:
            op.add(2, 2, coef, (one, a, b))   # faceX: free (y, z) = (a, b)
            op.add(3, 3, coef, (a, one, b))   # faceY: free (x, z)
            op.add(4, 4, coef, (a, b, one))   # faceZ: free (x, y)
    block(0, 1, [(1, H, H, H), (1, I, H, G), (1, H, I, G), (k, H, H, G)])
    block(0, 2, [(-1, H, H, ht), (-1, I, G, ht), (-k, H, G, ht)])
    block(0, 3, [(1, H, ht, H), (1, I, ht, G), (k, H, ht, G)])
    block(0, 4, [(2, ht, H, H), (1, ht, I, G), (1, ht, G, I), (k, ht, H, G), (k, ht, G, H)])
    block(1, 2, [(1, H, H, ht), (1, G, I, ht), (k, G, H, ht)])
    block(1, 3, [(2, H, ht, H), (1, I, ht, G), (1, G, ht, I), (k, H, ht, G), (k, G, ht, H)])
    block(1, 4, [(1, ht, H, H), (1, ht, I, G), (k, ht, H, G)])
    block(2, 3, [(1, H, ht, hT), (k, G, ht, hT)])
    block(2, 4, [(-1, ht, H, hT), (-k, ht, G, hT)])
    block(3, 4, [(1, ht, hT, H), (k, ht, hT, G)])
    return op


def assemble_velocity_operator(kappa1: float, N: int, dim: int) -> KroneckerOperator:
    if kappa1 < 0:
        raise ParameterError("kappa1 must be >= 0")
    if dim == 2:
        return assemble_velocity_operator_2d(kappa1, N)
    return assemble_velocity_operator_3d(kappa1, N)


# ---------------------------------------------------------------------------
# Generic assembly from 1D Gram matrices

def _factor_table(fac: Factor, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if fac.family == "one":
        return np.ones((1, len(x))), np.zeros((1, len(x)))
    t = family_table(fac.family, range(fac.start, fac.start + fac.count), x)
    return t.values, t.derivatives


# A derivative term: (sign, output component, per-direction (factor, deriv order))
_Term = tuple[float, int, tuple[tuple[Factor, int], ...]]


def _form_terms(fam: ModeFamily, form: str, d: int) -> list[_Term]:
    out: list[_Term] = []
    for c, term in enumerate(fam.components):
        if term is None:
            continue
        base = [(f, 0) for f in term.factors]
        if form == "mass":
            out.append((term.sign, c, tuple(base)))
        elif form == "grad":
            for j in range(d):
                fs = list(base)
                fs[j] = (fs[j][0], 1)
                out.append((term.sign, c * d + j, tuple(fs)))
        elif form == "curl":
            # (curl v)_i = d_j v_k - d_k v_j for cyclic (i, j, k); in 2D only i = z
            if d == 2:
                # curl v = d_x v_2 - d_y v_1
                deriv_dir, sgn = (1, -1.0) if c == 0 else (0, 1.0)
                fs = list(base)
                fs[deriv_dir] = (fs[deriv_dir][0], 1)
                out.append((term.sign * sgn, 0, tuple(fs)))
            else:
                for i in range(3):
                    j, k = (i + 1) % 3, (i + 2) % 3
                    if c == k:        # + d_j v_k
                        fs = list(base)
                        fs[j] = (fs[j][0], 1)
                        out.append((term.sign, i, tuple(fs)))
                    elif c == j:      # - d_k v_j
                        fs = list(base)
                        fs[k] = (fs[k][0], 1)
                        out.append((-term.sign, i, tuple(fs)))
        else:
            raise ParameterError(f"unknown form {form!r}")
    return out


class _GramCache:
    def __init__(self, rule: QuadratureRule):
        self.rule = rule
        self.tables: dict[Factor, tuple[np.ndarray, np.ndarray]] = {}
        self.grams: dict[tuple, np.ndarray] = {}

    def table(self, fac: Factor, deriv: int) -> np.ndarray:
        if fac not in self.tables:
            self.tables[fac] = _factor_table(fac, self.rule.nodes)
        return self.tables[fac][deriv]

    def gram(self, a: tuple[Factor, int], b: tuple[Factor, int]) -> np.ndarray:
        key = (a, b)
        if key not in self.grams:
            Ta = self.table(*a)
            Tb = self.table(*b)
            self.grams[key] = (Ta * self.rule.weights) @ Tb.T
        return self.grams[key]


def assemble_form(space: BasisSpace, form: str, rule: QuadratureRule | None = None,
                  coef: float = 1.0) -> KroneckerOperator:
    """Kronecker operator of ``form`` in {"mass", "grad", "curl"} on ``space``.

    Entry (i, j) is the L2 inner product of ``form`` applied to basis j and i;
    1D Gram matrices are computed by Gauss quadrature exact for the
    polynomial integrands.
    """
    d = space.dim
    rule = rule or gauss_legendre_rule(space.N + 3)
    cache = _GramCache(rule)
    op = KroneckerOperator(space)
    fam_terms = [_form_terms(f, form, d) for f in space.families]
    for a in range(len(space.families)):
        for b in range(len(space.families)):
            grouped: dict[tuple, float] = {}
            for sa, ca, fa in fam_terms[a]:
                for sb, cb, fb in fam_terms[b]:
                    if ca != cb:
                        continue
                    key = tuple((fa[k], fb[k]) for k in range(d))
                    grouped[key] = grouped.get(key, 0.0) + sa * sb
            for c, key in _merge_numeric(grouped, cache, d):
                if c != 0.0:
                    op.add(a, b, coef * c, key, symmetric_pair=False)
    return op


def _merge_numeric(grouped: dict[tuple, float], cache: _GramCache, d: int):
    """Turn grouped Gram keys into factor tuples, summing over one direction
    whenever the other directions coincide."""
    items = [(c, list(key)) for key, c in grouped.items() if c != 0.0]
    best = None
    for axis in range(d):
        buckets: dict[tuple, list] = {}
        for c, key in items:
            rest = tuple(key[k] for k in range(d) if k != axis)
            buckets.setdefault(rest, []).append((c, key[axis]))
        if best is None or len(buckets) < len(best[1]):
            best = (axis, buckets)
    axis, buckets = best
    out = []
    for rest, members in buckets.items():
        M = sum(c * cache.gram(*k) for c, k in members)
        if not np.any(M):
            continue
        it = iter(rest)
        factors = tuple(M if k == axis else cache.gram(*next(it)) for k in range(d))
        out.append((1.0, factors))
    return out


def assemble_mass_operator(N: int, dim: int, kind: str = "magnetic") -> KroneckerOperator:
    space = magnetic_space(N, dim) if kind == "magnetic" else velocity_space(N, dim)
    return assemble_form(space, "mass")


def assemble_curlcurl_operator(kappa0: float, N: int, dim: int) -> KroneckerOperator:
    """(curl B, curl Phi) + kappa0 (B, Phi) on the H(div) divergence-free space."""
    if kappa0 <= 0:
        raise ParameterError("kappa0 must be > 0")
    space = magnetic_space(N, dim)
    return assemble_form(space, "curl") + assemble_form(space, "mass", coef=kappa0)


# ---------------------------------------------------------------------------
# Transforms


@dataclass
class FieldSamples:
    """Samples of a vector field on a tensor Gauss grid.

    ``value`` has shape (d, Q, ..., Q); ``grad[c, j]`` is d v_c / d x_j.
    """

    value: np.ndarray
    grad: np.ndarray | None = None

    def __add__(self, other: "FieldSamples") -> "FieldSamples":
        g = None
        if self.grad is not None and other.grad is not None:
            g = self.grad + other.grad
        return FieldSamples(self.value + other.value, g)

    def scaled(self, s: float) -> "FieldSamples":
        return FieldSamples(s * self.value, None if self.grad is None else s * self.grad)


class Transform:
    """Forward (coefficients -> grid) and Galerkin (grid -> coefficients)
    transforms of a space on the tensor grid of a 1D Gauss rule."""

    def __init__(self, space: BasisSpace, rule: QuadratureRule | None = None):
        self.space = space
        self.rule = rule or gauss_legendre_rule(dealiased_size(space.N))
        self.d = space.dim
        self._tables: dict[Factor, tuple[np.ndarray, np.ndarray]] = {}
        w = self.rule.weights
        self.weights = np.multiply.outer(w, w) if self.d == 2 else np.multiply.outer(np.multiply.outer(w, w), w)

    @property
    def grid_shape(self) -> tuple[int, ...]:
        return (self.rule.size,) * self.d

    def points(self) -> list[np.ndarray]:
        return np.meshgrid(*([self.rule.nodes] * self.d), indexing="ij")

    def table(self, fac: Factor, deriv: int = 0) -> np.ndarray:
        if fac not in self._tables:
            self._tables[fac] = _factor_table(fac, self.rule.nodes)
        return self._tables[fac][deriv]

    def _eval_term(self, X, factors, derivs) -> np.ndarray:
        return _contract(X, [self.table(f, dv).T for f, dv in zip(factors, derivs)])

    def evaluate(self, coeffs: np.ndarray, grad: bool = False) -> FieldSamples:
        xs = self.space.split(coeffs)
        d = self.d
        val = np.zeros((d,) + self.grid_shape)
        gr = np.zeros((d, d) + self.grid_shape) if grad else None
        for X, fam in zip(xs, self.space.families):
            for c, term in enumerate(fam.components):
                if term is None:
                    continue
                val[c] += term.sign * self._eval_term(X, term.factors, (0,) * d)
                if grad:
                    for j in range(d):
                        dv = tuple(1 if a == j else 0 for a in range(d))
                        gr[c, j] += term.sign * self._eval_term(X, term.factors, dv)
        return FieldSamples(val, gr)

    def test(self, samples: np.ndarray) -> np.ndarray:
        """Vector of quadrature inner products (samples, basis_k) over all modes."""
        samples = np.asarray(samples, dtype=float)
        if samples.shape != (self.d,) + self.grid_shape:
            raise ValueError(f"samples have shape {samples.shape}, expected {(self.d,) + self.grid_shape}")
        weighted = samples * self.weights
        out = []
        for fam in self.space.families:
            Y = np.zeros(fam.shape)
            for c, term in enumerate(fam.components):
                if term is None:
                    continue
                Y += term.sign * _contract(weighted[c], [self.table(f) for f in term.factors])
            out.append(Y)
        return self.space.join(out)

    def inner(self, a: np.ndarray, b: np.ndarray) -> float:
        """Quadrature inner product of two sampled fields of equal shape."""
        a = np.asarray(a)
        b = np.asarray(b)
        lead = a.shape[: a.ndim - self.d]
        return float(np.sum((a * b).reshape(int(np.prod(lead, dtype=int)), -1) @ self.weights.ravel()))


def curl_samples(f: FieldSamples) -> np.ndarray:
    """Curl from gradient samples: scalar field (1, ...) in 2D, vector in 3D."""
    g = f.grad
    if g.shape[0] == 2:
        return (g[1, 0] - g[0, 1])[None]
    return np.stack([g[2, 1] - g[1, 2], g[0, 2] - g[2, 0], g[1, 0] - g[0, 1]])


def divergence_samples(f: FieldSamples) -> np.ndarray:
    return np.einsum("ii...->...", f.grad)


def galerkin_rhs(samples: np.ndarray, transform: Transform) -> np.ndarray:
    """(f, basis_k) for every mode, computed by sum factorization."""
    return transform.test(samples)


def evaluate_field(coeffs: np.ndarray, transform: Transform, what: str = "value") -> np.ndarray:
    """Samples of the expanded field: "value", "grad", "curl" or "div"."""
    fs = transform.evaluate(coeffs, grad=what != "value")
    if what == "value":
        return fs.value
    if what == "grad":
        return fs.grad
    if what == "curl":
        return curl_samples(fs)
    if what == "div":
        return divergence_samples(fs)
    raise ParameterError(f"unknown quantity {what!r}")


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.stack([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]])


def advection_samples(u_tilde: np.ndarray, u: FieldSamples) -> np.ndarray:
    """(u_tilde . grad) u on the grid."""
    return np.einsum("j...,cj...->c...", u_tilde, u.grad)


def lorentz_samples(curl_B: np.ndarray, B_tilde: np.ndarray) -> np.ndarray:
    """curl(B) x B_tilde on the grid (2D: the scalar curl acts as a z-vector)."""
    if B_tilde.shape[0] == 2:
        j = curl_B[0]
        return np.stack([-j * B_tilde[1], j * B_tilde[0]])
    return _cross(curl_B, B_tilde)


def induction_samples(u: FieldSamples, B_tilde: FieldSamples) -> np.ndarray:
    """curl(u x B_tilde) on the grid by the product rule."""
    a, da = u.value, u.grad
    b, db = B_tilde.value, B_tilde.grad
    if a.shape[0] == 2:
        # w = a1 b2 - a2 b1 ; curl w = (d_y w, -d_x w)
        dw = [da[0, j] * b[1] + a[0] * db[1, j] - da[1, j] * b[0] - a[1] * db[0, j] for j in range(2)]
        return np.stack([dw[1], -dw[0]])
    # d_j (a x b) = d_j a x b + a x d_j b
    dw = [_cross(da[:, j], b) + _cross(a, db[:, j]) for j in range(3)]
    return np.stack([dw[1][2] - dw[2][1], dw[2][0] - dw[0][2], dw[0][1] - dw[1][0]])


def trilinear_forms(vel: Transform, mag: Transform, u_coeffs: np.ndarray, B_coeffs: np.ndarray,
                    u_tilde: FieldSamples, B_tilde: FieldSamples,
                    u_lift: FieldSamples | None = None):
    """The three nonlinear load vectors

        adv_k = (u_tilde . grad u, chi_k)
        lor_k = (curl B x B_tilde, chi_k)
        ind_k = (curl(u x B_tilde), Phi_k)

    ``u_lift`` (value and gradient samples) is added to the field expanded
    from ``u_coeffs`` when a boundary lifting is in use.
    """
    if vel.rule.size != mag.rule.size:
        raise ValueError("velocity and magnetic transforms must share one quadrature rule")
    u = vel.evaluate(u_coeffs, grad=True)
    if u_lift is not None:
        u = u + u_lift
    Bf = mag.evaluate(B_coeffs, grad=True)
    adv = vel.test(advection_samples(u_tilde.value, u))
    lor = vel.test(lorentz_samples(curl_samples(Bf), B_tilde.value))
    ind = mag.test(induction_samples(u, B_tilde))
    return adv, lor, ind


def linearize_index(space: BasisSpace, mode) -> int:
    return space.linearize_index(mode)


@lru_cache(maxsize=32)
def cached_transform(kind: str, N: int, q: int) -> Transform:
    return Transform(make_space(kind, N), gauss_legendre_rule(q))
