"""Legendre and generalized Jacobi polynomials, the normalized families
``phi``, ``psi``, ``varphi`` and Gauss-Legendre quadrature.

The three families are

    phi_n    = sqrt((2n+1)/2) L_n                          n >= 0
    psi_m    = sqrt(2(2m-1))/(m-1) P_m^{(-1,-1)}            m >= 2
    varphi_m = sqrt(8(2m-3))/((m-3)(m-2)) P_m^{(-2,-2)}     m >= 4

with psi'_{m+1} = phi_m and varphi'_{m+1} = psi_m.  ``psi`` and ``varphi`` are
evaluated through their short Legendre expansions, which avoids the loss of
accuracy of the (xi^2 - 1) prefactors near the end points.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ParameterError",
    "QuadratureRule",
    "FamilyTable",
    "legendre_eval",
    "legendre_table",
    "jacobi_eval",
    "gen_jacobi_eval",
    "gen_jacobi_derivative",
    "family_eval",
    "family_table",
    "gauss_legendre_rule",
    "dealiased_size",
    "inner_product_1d",
]

FAMILIES = ("phi", "psi", "varphi")
_MIN_INDEX = {"phi": 0, "psi": 2, "varphi": 4}


class ParameterError(ValueError):
    """Raised for an unsupported polynomial order, parameter or family."""


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre nodes and weights on (-1, 1)."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def size(self) -> int:
        return len(self.nodes)

    def integrate(self, values: np.ndarray) -> float:
        return float(np.dot(self.weights, values))


@dataclass(frozen=True)
class FamilyTable:
    """Values and first derivatives of one family at the nodes of a rule.

    Row ``i`` of ``values`` holds the member with index ``indices[i]``.
    """

    family: str
    indices: np.ndarray
    values: np.ndarray
    derivatives: np.ndarray = field(repr=False)

    def row(self, index: int) -> int:
        return int(index - self.indices[0])


def legendre_table(n: int, x) -> tuple[np.ndarray, np.ndarray]:
    """Values and derivatives of L_0..L_n at the points ``x``.

    Returns two arrays of shape ``(n + 1,) + np.shape(x)``.
    """
    if n < 0:
        raise ParameterError(f"Legendre order must be >= 0, got {n}")
    x = np.asarray(x, dtype=float)
    L = np.zeros((n + 1,) + x.shape)
    dL = np.zeros_like(L)
    L[0] = 1.0
    if n >= 1:
        L[1] = x
        dL[1] = 1.0
    for k in range(1, n):
        L[k + 1] = ((2 * k + 1) * x * L[k] - k * L[k - 1]) / (k + 1)
        dL[k + 1] = dL[k - 1] + (2 * k + 1) * L[k]
    return L, dL


def legendre_eval(n: int, x):
    """Return ``(L_n(x), L_n'(x))``."""
    L, dL = legendre_table(n, x)
    return L[n], dL[n]


def jacobi_eval(n: int, alpha: float, beta: float, x):
    """Classical Jacobi polynomial P_n^{(alpha, beta)}(x) by the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    a, b = alpha, beta
    p0 = np.ones_like(x)
    if n == 0:
        return p0
    p1 = (a + 1) + (a + b + 2) * (x - 1) / 2
    for k in range(2, n + 1):
        c = 2 * k + a + b
        a1 = 2 * k * (k + a + b) * (c - 2)
        a2 = (c - 1) * (a * a - b * b)
        a3 = (c - 2) * (c - 1) * c
        a4 = 2 * (k + a - 1) * (k + b - 1) * c
        p0, p1 = p1, ((a2 + a3 * x) * p1 - a4 * p0) / a1
    return p1


def gen_jacobi_eval(n: int, param: int, x):
    """Generalized Jacobi polynomial P_n^{(param, param)} for ``param`` in {-1, -2}.

    Uses the piecewise definition: explicit low-order members and the
    factorization through P^{(1,1)} / P^{(2,2)} for the rest.
    """
    if n < 0:
        raise ParameterError(f"order must be >= 0, got {n}")
    x = np.asarray(x, dtype=float)
    if param == -1:
        if n == 0:
            return (1 - x) / 2
        if n == 1:
            return (1 + x) / 2
        return (x * x - 1) / 4 * jacobi_eval(n - 2, 1, 1, x)
    if param == -2:
        low = {
            0: lambda t: (1 - t) ** 2 * (2 + t) / 4,
            1: lambda t: (1 - t) ** 2 * (1 + t) / 4,
            2: lambda t: (1 + t) ** 2 * (2 - t) / 4,
            3: lambda t: (1 + t) ** 2 * (t - 1) / 4,
        }
        if n in low:
            return low[n](x)
        return ((x * x - 1) / 4) ** 2 * jacobi_eval(n - 4, 2, 2, x)
    raise ParameterError(f"unsupported generalized Jacobi parameter {param}")


def gen_jacobi_derivative(n: int, param: int, x):
    """Derivative of P_n^{(param, param)}, valid for n >= 2 (param -1) and n >= 4 (param -2)."""
    x = np.asarray(x, dtype=float)
    if param == -1 and n >= 2:
        # d/dx [(x^2-1)/4 P^{(1,1)}_{n-2}], with (P^{(a,a)}_k)' = (k+2a+1)/2 P^{(a+1,a+1)}_{k-1}
        dp = (n + 1) / 2 * jacobi_eval(n - 3, 2, 2, x) if n >= 3 else 0.0 * x
        return x / 2 * jacobi_eval(n - 2, 1, 1, x) + (x * x - 1) / 4 * dp
    if param == -2 and n >= 4:
        q = (x * x - 1) / 4
        dp = (n + 1) / 2 * jacobi_eval(n - 5, 3, 3, x) if n >= 5 else 0.0 * x
        return 2 * q * (x / 2) * jacobi_eval(n - 4, 2, 2, x) + q * q * dp
    raise ParameterError(f"derivative not provided for n={n}, param={param}")


def _family_rows(family: str, indices, L: np.ndarray, dL: np.ndarray):
    vals, ders = [], []
    for m in indices:
        if family == "phi":
            c = np.sqrt((2 * m + 1) / 2)
            vals.append(c * L[m])
            ders.append(c * dL[m])
        elif family == "psi":
            c = 1 / np.sqrt(2 * (2 * m - 1))
            vals.append(c * (L[m] - L[m - 2]))
            ders.append(np.sqrt((2 * m - 1) / 2) * L[m - 1])
        else:
            c = 1 / np.sqrt(2 * (2 * m - 3))
            vals.append(c * ((L[m] - L[m - 2]) / (2 * m - 1) - (L[m - 2] - L[m - 4]) / (2 * m - 5)))
            ders.append((L[m - 1] - L[m - 3]) / np.sqrt(2 * (2 * m - 3)))
    return np.array(vals), np.array(ders)


def _check_family(family: str, indices) -> None:
    if family not in FAMILIES:
        raise ParameterError(f"unknown family {family!r}")
    lo = _MIN_INDEX[family]
    if len(indices) and min(indices) < lo:
        raise ParameterError(f"{family} index must be >= {lo}, got {min(indices)}")


def family_eval(family: str, n: int, x):
    """Return ``(value, derivative)`` of member ``n`` of ``family`` at ``x``."""
    _check_family(family, [n])
    L, dL = legendre_table(max(n, 1), x)
    v, d = _family_rows(family, [n], L, dL)
    return v[0], d[0]


def family_table(family: str, indices, x) -> FamilyTable:
    """Tabulate a contiguous run of family members at the points ``x``."""
    indices = np.asarray(list(indices), dtype=int)
    _check_family(family, indices)
    x = np.asarray(x, dtype=float)
    nmax = int(indices.max()) if len(indices) else 0
    L, dL = legendre_table(max(nmax, 1), x)
    v, d = _family_rows(family, indices, L, dL)
    v = v.reshape((len(indices),) + x.shape)
    d = d.reshape((len(indices),) + x.shape)
    v.setflags(write=False)
    d.setflags(write=False)
    return FamilyTable(family, indices, v, d)


def gauss_legendre_rule(q: int, tol: float = 1e-15, maxiter: int = 100) -> QuadratureRule:
    """Q-point Gauss-Legendre rule.

    Nodes are roots of L_Q found by Newton iteration from Chebyshev-type
    initial guesses; only the non-negative half is iterated and the rest is
    mirrored so the rule is exactly symmetric.
    """
    if q < 1:
        raise ParameterError(f"quadrature size must be >= 1, got {q}")
    half = (q + 1) // 2
    k = np.arange(1, half + 1)
    x = np.cos(np.pi * (k - 0.25) / (q + 0.5))
    for _ in range(maxiter):
        p, dp = legendre_eval(q, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) <= tol:
            break
    _, dp = legendre_eval(q, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    if q % 2:
        x[-1] = 0.0
        nodes = np.concatenate([-x, x[-2::-1]])
        weights = np.concatenate([w, w[-2::-1]])
    else:
        nodes = np.concatenate([-x, x[::-1]])
        weights = np.concatenate([w, w[::-1]])
    return QuadratureRule(nodes, weights)


def dealiased_size(N: int) -> int:
    """Gauss points per direction that integrate the cubic nonlinear forms exactly."""
    return int(np.ceil(3 * (N + 1) / 2)) + 1


def inner_product_1d(f, g, rule: QuadratureRule) -> float:
    """Quadrature value of (f, g) on (-1, 1) from nodal samples."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if f.shape != (rule.size,) or g.shape != (rule.size,):
        raise ValueError(f"sample shapes {f.shape}, {g.shape} do not match rule of size {rule.size}")
    return float(np.sum(rule.weights * f * g))
