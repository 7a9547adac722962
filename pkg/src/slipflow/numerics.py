"""Shared numerical kernels: wall-clamped Chebyshev basis, symmetric pencils, roots.

The x2 discretization used throughout is the polynomial trial space

    phi_j(x) = (1 - x**2) * T_j(x),    j = 0 .. N-1,

with T_j the Chebyshev polynomial of the first kind.  The quadratic factor
enforces the essential conditions phi(+/-1) = 0 exactly; slip conditions are
natural and never imposed on the trial space.  All inner products are formed
with a Gauss-Legendre rule on N + 4 nodes, which is exact for polynomials of
degree 2(N + 4) - 1 = 2N + 7, enough for every form assembled here (degree
at most 2N + 6).

Derivative values of the basis are tabulated once, up to fourth order, at
the quadrature nodes and at the walls; assembly and residual evaluation are
then plain weighted matrix products.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as C
from numpy.polynomial import legendre
from scipy import linalg
from scipy.optimize import brentq

__all__ = [
    "ChebBasis",
    "CoeffVector",
    "GeneralizedEigResult",
    "build_basis",
    "solve_generalized_symmetric",
    "find_root_bracketed",
    "boundary_form",
    "energy_form",
    "gram_form",
    "NonSymmetricError",
    "NotPositiveDefiniteError",
    "BracketError",
    "MAX_DERIVATIVE",
]

MAX_DERIVATIVE = 4

# (1 - x**2) in the Chebyshev-T basis: (T0 - T2) / 2
_WALL_FACTOR = np.array([0.5, 0.0, -0.5])


class NonSymmetricError(ValueError):
    """A matrix that must be symmetric is not (beyond roundoff)."""


class NotPositiveDefiniteError(ValueError):
    """The mass side of a pencil is not positive definite: assembly bug."""


class BracketError(ValueError):
    """A root bracket does not actually bracket a sign change."""


@dataclass
class ChebBasis:
    """Tabulated wall-clamped Chebyshev basis of dimension ``size``.

    ``node_tables[d][q, j]`` is the d-th derivative of phi_j at quadrature
    node q; ``wall_tables[d][s, j]`` the same at the wall x2 = -1 (s = 0)
    and x2 = +1 (s = 1).  ``cheb_coeffs[j]`` holds the raw Chebyshev-T
    coefficients of phi_j (length size + 2).
    """

    size: int
    quad_nodes: np.ndarray
    quad_weights: np.ndarray
    node_tables: list = field(repr=False)
    wall_tables: list = field(repr=False)
    cheb_coeffs: np.ndarray = field(repr=False)

    def to_chebyshev(self, coeffs: np.ndarray) -> np.ndarray:
        """Raw Chebyshev-T coefficients of sum_j coeffs[j] * phi_j."""
        coeffs = np.asarray(coeffs)
        if coeffs.shape[-1] != self.size:
            raise ValueError(f"expected {self.size} coefficients, got {coeffs.shape[-1]}")
        return coeffs @ self.cheb_coeffs

    def evaluate(self, coeffs: np.ndarray, x, deriv: int = 0) -> np.ndarray:
        """Evaluate sum_j coeffs[j] * phi_j (or a derivative) at points x."""
        if not 0 <= deriv <= MAX_DERIVATIVE + 2:
            raise ValueError(f"derivative order {deriv} not supported")
        series = self.to_chebyshev(coeffs)
        if deriv:
            series = C.chebder(series, deriv)
        return C.chebval(np.asarray(x, dtype=float), series)

    def integrate(self, values: np.ndarray) -> float:
        """Quadrature integral of values sampled at ``quad_nodes``."""
        return float(np.dot(self.quad_weights, values))


@dataclass(frozen=True)
class CoeffVector:
    """Coefficients of a function in a ChebBasis trial space."""

    coeffs: np.ndarray
    basis: ChebBasis

    def __post_init__(self):
        arr = np.asarray(self.coeffs, dtype=float)
        if arr.shape != (self.basis.size,):
            raise ValueError(
                f"coefficient vector of length {arr.shape} does not match basis size {self.basis.size}"
            )
        object.__setattr__(self, "coeffs", arr)

    def __call__(self, x, deriv: int = 0):
        return self.basis.evaluate(self.coeffs, x, deriv)

    def to_chebyshev(self) -> np.ndarray:
        return self.basis.to_chebyshev(self.coeffs)


def build_basis(N: int) -> ChebBasis:
    """Tabulate the wall-clamped Chebyshev basis of dimension N (N >= 4)."""
    if int(N) != N or N < 4:
        raise ValueError(f"basis size must be an integer >= 4, got {N}")
    N = int(N)

    coeff_rows = np.zeros((N, N + 2))
    for j in range(N):
        unit = np.zeros(j + 1)
        unit[j] = 1.0
        cj = C.chebmul(_WALL_FACTOR, unit)  # degree j + 2
        coeff_rows[j, : cj.size] = cj

    nodes, weights = legendre.leggauss(N + 4)

    # Vandermonde of T_0 .. T_{N+1} at the quadrature nodes and the walls,
    # one per derivative order; tables follow by a single matmul each.
    node_tables, wall_tables = [], []
    walls = np.array([-1.0, 1.0])
    series = coeff_rows
    for _ in range(MAX_DERIVATIVE + 1):
        deg = series.shape[1] - 1
        node_tables.append(C.chebvander(nodes, deg) @ series.T)
        wall_tables.append(C.chebvander(walls, deg) @ series.T)
        series = np.array([C.chebder(row, 1) for row in series])[:, : max(series.shape[1] - 1, 1)]
        if series.shape[1] < 1:
            series = np.zeros((N, 1))

    for arr in (nodes, weights, coeff_rows, *node_tables, *wall_tables):
        arr.flags.writeable = False

    return ChebBasis(
        size=N,
        quad_nodes=nodes,
        quad_weights=weights,
        node_tables=node_tables,
        wall_tables=wall_tables,
        cheb_coeffs=coeff_rows,
    )


@dataclass(frozen=True)
class GeneralizedEigResult:
    """Solution of a symmetric-definite pencil B v = lambda A v.

    ``eigenvalues`` are sorted descending; ``eigenvectors[:, i]`` belongs to
    ``eigenvalues[i]`` and the columns are A-orthonormal.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _fix_signs(vectors: np.ndarray, threshold: float = 1e-8) -> np.ndarray:
    """Deterministic sign convention: first significant entry positive."""
    out = np.array(vectors)
    for i in range(out.shape[1]):
        v = out[:, i]
        big = np.abs(v) > threshold * np.abs(v).max()
        if not big.any():
            continue
        if v[np.argmax(big)] < 0:
            out[:, i] = -v
    return out


def solve_generalized_symmetric(B: np.ndarray, A: np.ndarray) -> GeneralizedEigResult:
    """All eigenpairs of B v = lambda A v, B symmetric, A symmetric positive definite.

    B may be indefinite.  Eigenvalues are returned in descending order with
    A-orthonormal eigenvectors and a deterministic sign convention.
    """
    B = np.asarray(B, dtype=float)
    A = np.asarray(A, dtype=float)
    if B.ndim != 2 or B.shape[0] != B.shape[1] or B.shape != A.shape:
        raise ValueError(f"pencil matrices must be square and same shape, got {B.shape} and {A.shape}")
    for name, M in (("B", B), ("A", A)):
        scale = np.abs(M).max() or 1.0
        if np.abs(M - M.T).max() > 1e-12 * scale:
            raise NonSymmetricError(f"matrix {name} is not symmetric to relative 1e-12")
    try:
        linalg.cholesky(A, lower=True)
    except linalg.LinAlgError:
        raise NotPositiveDefiniteError(
            "mass matrix is not positive definite; the trial basis or assembly is broken"
        )
    w, V = linalg.eigh(B, A)
    order = np.argsort(w)[::-1]  # descending, stable for exact ties
    return GeneralizedEigResult(eigenvalues=w[order], eigenvectors=_fix_signs(V[:, order]))


# ---------------------------------------------------------------------------
# Quadratic forms of the stability problem, assembled in the trial basis.
# All three are exact: integrands are polynomials within the quadrature degree.
# ---------------------------------------------------------------------------


def _weighted_gram(k_even_powers, basis: ChebBasis) -> np.ndarray:
    """Sum of c_d * int(phi_i^(d) phi_j^(d)) over (d, c_d) pairs."""
    w = basis.quad_weights[:, None]
    M = np.zeros((basis.size, basis.size))
    for d, c in k_even_powers:
        T = basis.node_tables[d]
        M += c * (T * w).T @ T
    return 0.5 * (M + M.T)  # kill roundoff asymmetry


def boundary_form(slip, basis: ChebBasis) -> np.ndarray:
    """R_ij = xi_minus phi_i'(-1) phi_j'(-1) + xi_plus phi_i'(1) phi_j'(1).

    Rank <= 2, positive semidefinite: the boundary production quadratic form.
    """
    dm = basis.wall_tables[1][0]
    dp = basis.wall_tables[1][1]
    return slip.xi_minus * np.outer(dm, dm) + slip.xi_plus * np.outer(dp, dp)


def energy_form(k: float, basis: ChebBasis) -> np.ndarray:
    """E_ij = int(phi_i'' phi_j'' + 2 k^2 phi_i' phi_j' + k^4 phi_i phi_j), SPD."""
    return _weighted_gram([(2, 1.0), (1, 2.0 * k * k), (0, k ** 4)], basis)


def gram_form(k: float, basis: ChebBasis) -> np.ndarray:
    """A_ij = int(phi_i' phi_j' + k^2 phi_i phi_j), the SPD mass side of the pencil."""
    return _weighted_gram([(1, 1.0), (0, k * k)], basis)


def find_root_bracketed(f, lo: float, hi: float, tol: float = 1e-12) -> float:
    """Root of a continuous scalar function inside a sign-changing bracket.

    Requires lo < hi and f(lo) * f(hi) <= 0; returns x with the final
    bracket width below ``tol`` (plus relative machine slack).
    """
    if not lo < hi:
        raise BracketError(f"invalid bracket: lo = {lo} must be < hi = {hi}")
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return float(lo)
    if fhi == 0.0:
        return float(hi)
    if np.sign(flo) == np.sign(fhi):
        raise BracketError(f"no sign change on [{lo}, {hi}]: f(lo) = {flo:g}, f(hi) = {fhi:g}")
    return float(brentq(f, lo, hi, xtol=tol))
