"""Independent reference implementations used by the tests.

Nothing here imports the package's polynomial tables or operators: the 1D
families are built as numpy Legendre series by repeated integration, modes
are composed from their defining products, and Galerkin matrices are formed
densely by brute-force tensor quadrature.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as npleg
from numpy.polynomial.legendre import Legendre


@lru_cache(maxsize=None)
def phi_poly(n: int) -> Legendre:
    return np.sqrt((2 * n + 1) / 2) * Legendre.basis(n)


@lru_cache(maxsize=None)
def psi_poly(m: int) -> Legendre:
    """psi_m = integral from -1 of phi_{m-1}."""
    return phi_poly(m - 1).integ(lbnd=-1)


@lru_cache(maxsize=None)
def varphi_poly(m: int) -> Legendre:
    """varphi_m = integral from -1 of psi_{m-1}."""
    return psi_poly(m - 1).integ(lbnd=-1)


POLY = {"phi": phi_poly, "psi": psi_poly, "varphi": varphi_poly}


def one_d_gram(fa: str, ia, fb: str, ib) -> np.ndarray:
    """Exact L2(-1, 1) inner products by polynomial integration."""
    out = np.zeros((len(ia), len(ib)))
    for r, i in enumerate(ia):
        for c, j in enumerate(ib):
            p = (POLY[fa](i) * POLY[fb](j)).integ(lbnd=-1)
            out[r, c] = p(1.0)
    return out


# ---------------------------------------------------------------------------
# Modes as explicit products. A mode is a list of d components; a component
# is None or (sign, ((family, index) per axis)); family None means the factor 1.


def _h_div_modes(N: int, d: int):
    r = range(1, N)
    if d == 2:
        return [[(1, (("psi", m + 1), ("phi", n))), (-1, (("phi", m), ("psi", n + 1)))]
                for n in r for m in r]
    modes = []
    for m3 in [(m, n, l) for l in r for n in r for m in r]:
        m, n, l = m3
        modes.append([(1, (("psi", m + 1), ("phi", n), ("phi", l))),
                      (-1, (("phi", m), ("psi", n + 1), ("phi", l))), None])
    for l in r:
        for n in r:
            for m in r:
                modes.append([(1, (("psi", m + 1), ("phi", n), ("phi", l))), None,
                              (-1, (("phi", m), ("phi", n), ("psi", l + 1)))])
    for b in r:
        for a in r:
            modes.append([None, (1, ((None, 0), ("psi", a + 1), ("phi", b))),
                          (-1, ((None, 0), ("phi", a), ("psi", b + 1)))])
    for b in r:
        for a in r:
            modes.append([(1, (("psi", a + 1), (None, 0), ("phi", b))), None,
                          (-1, (("phi", a), (None, 0), ("psi", b + 1)))])
    for b in r:
        for a in r:
            modes.append([(1, (("psi", a + 1), ("phi", b), (None, 0))),
                          (-1, (("phi", a), ("psi", b + 1), (None, 0))), None])
    return modes


def _h1_modes(N: int, d: int):
    r = range(1, N - 2)
    if d == 2:
        return [[(1, (("varphi", m + 3), ("psi", n + 2))), (-1, (("psi", m + 2), ("varphi", n + 3)))]
                for n in r for m in r]
    modes = []
    for l in r:
        for n in r:
            for m in r:
                modes.append([(1, (("varphi", m + 3), ("psi", n + 2), ("psi", l + 2))),
                              (-1, (("psi", m + 2), ("varphi", n + 3), ("psi", l + 2))), None])
    for l in r:
        for n in r:
            for m in r:
                modes.append([(1, (("varphi", m + 3), ("psi", n + 2), ("psi", l + 2))), None,
                              (-1, (("psi", m + 2), ("psi", n + 2), ("varphi", l + 3)))])
    p2 = ("psi", 2)
    for b in r:
        for a in r:
            modes.append([None, (1, (p2, ("varphi", a + 3), ("psi", b + 2))),
                          (-1, (p2, ("psi", a + 2), ("varphi", b + 3)))])
    for b in r:
        for a in r:
            modes.append([(1, (("varphi", a + 3), p2, ("psi", b + 2))), None,
                          (-1, (("psi", a + 2), p2, ("varphi", b + 3)))])
    for b in r:
        for a in r:
            modes.append([(1, (("varphi", a + 3), ("psi", b + 2), p2)),
                          (-1, (("psi", a + 2), ("varphi", b + 3), p2)), None])
    return modes


def modes(kind: str, N: int):
    d = 2 if kind.endswith("2D") else 3
    return _h_div_modes(N, d) if kind.startswith("Hdiv") else _h1_modes(N, d)


def _factor(fam, idx, x, deriv):
    if fam is None:
        return np.zeros_like(x) if deriv else np.ones_like(x)
    p = POLY[fam](idx)
    return (p.deriv() if deriv else p)(x)


def eval_modes(kind: str, N: int, points: np.ndarray):
    """Values (M, d, P) and Jacobians (M, d, d, P) at points (P, d)."""
    points = np.atleast_2d(points)
    d = points.shape[1]
    ms = modes(kind, N)
    V = np.zeros((len(ms), d, len(points)))
    J = np.zeros((len(ms), d, d, len(points)))
    for k, mode in enumerate(ms):
        for c, comp in enumerate(mode):
            if comp is None:
                continue
            sign, facs = comp
            f0 = [_factor(f, i, points[:, a], 0) for a, (f, i) in enumerate(facs)]
            f1 = [_factor(f, i, points[:, a], 1) for a, (f, i) in enumerate(facs)]
            V[k, c] = sign * np.prod(f0, axis=0)
            for j in range(d):
                J[k, c, j] = sign * np.prod([f1[a] if a == j else f0[a] for a in range(d)], axis=0)
    return V, J


def tensor_gauss(q: int, d: int):
    x, w = npleg.leggauss(q)
    grids = np.meshgrid(*([x] * d), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    wts = np.prod(np.meshgrid(*([w] * d), indexing="ij"), axis=0).ravel()
    return pts, wts


def curl_of(J: np.ndarray) -> np.ndarray:
    """Curl from Jacobians (M, d, d, P): (M, 1, P) in 2D, (M, 3, P) in 3D."""
    if J.shape[1] == 2:
        return (J[:, 1, 0] - J[:, 0, 1])[:, None]
    return np.stack([J[:, 2, 1] - J[:, 1, 2], J[:, 0, 2] - J[:, 2, 0], J[:, 1, 0] - J[:, 0, 1]], axis=1)


def dense_form(kind: str, N: int, form: str, q: int | None = None) -> np.ndarray:
    """Dense Galerkin matrix of "mass", "grad" or "curl" by tensor quadrature."""
    d = 2 if kind.endswith("2D") else 3
    pts, w = tensor_gauss(q or N + 3, d)
    V, J = eval_modes(kind, N, pts)
    if form == "mass":
        F = V.reshape(len(V), -1, len(w))
    elif form == "grad":
        F = J.reshape(len(J), -1, len(w))
    elif form == "curl":
        F = curl_of(J)
    else:
        raise ValueError(form)
    return np.einsum("acp,bcp,p->ab", F, F, w)


# ---------------------------------------------------------------------------
# Finite differences


def fd1(f, x: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Fourth-order central first derivative of f (callable on coordinate arrays)."""
    def shift(s):
        y = [c.copy() for c in x]
        y[axis] = y[axis] + s * h
        return f(y)
    return (-shift(2) + 8 * shift(1) - 8 * shift(-1) + shift(-2)) / (12 * h)


def fd2(f, x: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Fourth-order central second derivative."""
    def shift(s):
        y = [c.copy() for c in x]
        y[axis] = y[axis] + s * h
        return f(y)
    return (-shift(2) + 16 * shift(1) - 30 * shift(0) + 16 * shift(-1) - shift(-2)) / (12 * h * h)
