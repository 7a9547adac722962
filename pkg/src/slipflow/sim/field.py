"""Fourier x Chebyshev scalar fields on the periodic channel.

A real scalar field on [0, 2 pi L) x [-1, 1] is stored as the half spectrum

    f(x1, x2) = row_0(x2) + 2 Re sum_{n=1..M} row_n(x2) exp(i n x1 / L),

one complex row per Fourier mode, each row a Chebyshev-T coefficient vector
of length P.  Conjugate symmetry of the full spectrum is built into the
storage (mode -n is never stored); reality of the field is equivalent to
row 0 having zero imaginary part.

Physical x2 nodes are the P Chebyshev-Gauss-Lobatto points in descending
order (node 0 at x2 = +1, node P-1 at x2 = -1).  Node/coefficient
transforms are type-I DCTs, so they are exact for the represented
polynomials; all norms integrate trigonometric-polynomial integrands with
Gauss-Legendre quadrature of sufficient order, so they are exact too.

Streamfunction convention used by the solver: a field interpreted as a
streamfunction carries the perturbation streamfunction in rows n >= 1 and
the x1-mean of u1 itself in row 0 (the mean flow has no canonical
streamfunction).  velocity_from_streamfunction implements that reading.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy import fft as sfft

__all__ = [
    "SpectralField2D",
    "cgl_nodes",
    "cheb_coeffs_from_values",
    "cheb_values_from_coeffs",
    "field_from_values",
    "scalar_inner",
    "scalar_norms",
    "velocity_norms",
    "velocity_from_streamfunction",
    "divergence_max",
    "field_from_mode_profile",
    "slip_residuals",
]


def cgl_nodes(P: int) -> np.ndarray:
    """Chebyshev-Gauss-Lobatto nodes, descending from +1 to -1."""
    if P < 4:
        raise ValueError("at least 4 Chebyshev points required")
    return np.cos(math.pi * np.arange(P) / (P - 1))


def cheb_coeffs_from_values(vals: np.ndarray, axis: int = -1) -> np.ndarray:
    """Chebyshev-T coefficients from values at the matching CGL nodes (exact)."""
    P = vals.shape[axis]
    c = sfft.dct(vals, type=1, axis=axis) / (P - 1)
    sl = [slice(None)] * vals.ndim
    for edge in (0, P - 1):
        sl[axis] = edge
        c[tuple(sl)] *= 0.5
    return c


def cheb_values_from_coeffs(coeffs: np.ndarray, axis: int = -1) -> np.ndarray:
    """Values at the CGL nodes of the coefficients' own length (exact inverse)."""
    P = coeffs.shape[axis]
    d = np.copy(coeffs)
    sl = [slice(None)] * coeffs.ndim
    for edge in (0, P - 1):
        sl[axis] = edge
        d[tuple(sl)] *= 2.0
    return 0.5 * sfft.dct(d, type=1, axis=axis)


@lru_cache(maxsize=16)
def _quad_rule(P: int):
    """Gauss-Legendre rule exact for the degree <= 2P-1 norm integrands."""
    x, w = np.polynomial.legendre.leggauss(P)
    V = C.chebvander(x, P - 1)
    return x, w, V


def _chebder_rows(rows: np.ndarray, order: int = 1) -> np.ndarray:
    """Chebyshev derivative along axis 1, zero padded back to P columns."""
    der = C.chebder(rows.T, order).T
    out = np.zeros_like(rows)
    out[:, : der.shape[1]] = der
    return out


@dataclass
class SpectralField2D:
    """Half-spectrum Fourier x Chebyshev scalar field, period 2 pi L in x1."""

    coefficients: np.ndarray
    L: float

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=complex)
        if self.coefficients.ndim != 2:
            raise ValueError("coefficients must be a 2D (mode, chebyshev) array")
        if not self.L > 0.0:
            raise ValueError(f"period scale L must be > 0, got {self.L}")

    @property
    def M(self) -> int:
        return self.coefficients.shape[0] - 1

    @property
    def P(self) -> int:
        return self.coefficients.shape[1]

    @property
    def reality_defect(self) -> float:
        """Max imaginary magnitude of the mean row (0 for a real field)."""
        return float(np.abs(self.coefficients[0].imag).max(initial=0.0))

    def copy(self) -> "SpectralField2D":
        return SpectralField2D(self.coefficients.copy(), self.L)

    def __add__(self, other: "SpectralField2D") -> "SpectralField2D":
        self._check_compatible(other)
        return SpectralField2D(self.coefficients + other.coefficients, self.L)

    def __sub__(self, other: "SpectralField2D") -> "SpectralField2D":
        self._check_compatible(other)
        return SpectralField2D(self.coefficients - other.coefficients, self.L)

    def __mul__(self, scalar) -> "SpectralField2D":
        return SpectralField2D(self.coefficients * float(scalar), self.L)

    __rmul__ = __mul__

    def _check_compatible(self, other: "SpectralField2D"):
        if self.coefficients.shape != other.coefficients.shape or self.L != other.L:
            raise ValueError("fields have mismatched resolutions or period")

    def d_x1(self) -> "SpectralField2D":
        n = np.arange(self.M + 1)
        return SpectralField2D(
            (1j * n / self.L)[:, None] * self.coefficients, self.L
        )

    def d_x2(self, order: int = 1) -> "SpectralField2D":
        return SpectralField2D(_chebder_rows(self.coefficients, order), self.L)

    def x1_grid(self, n1: int) -> np.ndarray:
        return 2.0 * math.pi * self.L * np.arange(n1) / n1

    def values(self, n1: int | None = None, x2: np.ndarray | None = None) -> np.ndarray:
        """Real physical samples, shape (n1, len(x2)).

        Defaults: n1 = 4M (alias-free for quadratic products), x2 = the P
        CGL nodes.
        """
        if n1 is None:
            n1 = max(4 * self.M, 8)
        if n1 < 2 * self.M + 1:
            raise ValueError("n1 too small to represent the stored modes")
        if x2 is None:
            rows_at_nodes = cheb_values_from_coeffs(self.coefficients, axis=1)
        else:
            rows_at_nodes = C.chebval(np.asarray(x2, dtype=float), self.coefficients.T)
        spec = np.zeros((n1 // 2 + 1, rows_at_nodes.shape[1]), dtype=complex)
        spec[: self.M + 1] = rows_at_nodes
        return np.fft.irfft(spec, n=n1, axis=0) * n1

    def wall_values(self, wall: int) -> np.ndarray:
        """Complex mode values at a wall: wall = +1 (x2 = 1) or -1 (x2 = -1)."""
        if wall == 1:
            basis = np.ones(self.P)
        elif wall == -1:
            basis = (-1.0) ** np.arange(self.P)
        else:
            raise ValueError("wall must be +1 or -1")
        return self.coefficients @ basis

    def mode_values_at(self, x: np.ndarray, deriv: int = 0) -> np.ndarray:
        """Per-mode profile samples, shape (M+1, len(x))."""
        rows = self.coefficients if deriv == 0 else _chebder_rows(self.coefficients, deriv)
        return C.chebval(np.asarray(x, dtype=float), rows.T)


def field_from_values(vals: np.ndarray, M: int, P: int, L: float) -> SpectralField2D:
    """Forward transform from samples on (n1 uniform) x (CGL of vals' width).

    Truncates to M+1 Fourier rows and P Chebyshev columns; exact when the
    sampled field is band limited below the sampling resolutions.
    """
    n1 = vals.shape[0]
    if n1 < 2 * M + 1:
        raise ValueError("not enough x1 samples for the requested mode count")
    spec = np.fft.rfft(vals, axis=0)[: M + 1] / n1
    rows = cheb_coeffs_from_values(spec, axis=1)
    return SpectralField2D(rows[:, :P], L)


def _mode_weights(M: int) -> np.ndarray:
    w = np.full(M + 1, 2.0)
    w[0] = 1.0
    return w


def _sq_l2(field: SpectralField2D) -> float:
    """Exact squared L2 norm over the channel."""
    _, w, V = _quad_rule(field.P)
    prof = field.coefficients @ V.T  # (M+1, P) values at GL nodes
    per_mode = (np.abs(prof) ** 2) @ w
    return float(2.0 * math.pi * field.L * (_mode_weights(field.M) @ per_mode))


def scalar_inner(f: SpectralField2D, g: SpectralField2D) -> float:
    """Exact L2 inner product of two real fields."""
    f._check_compatible(g)
    _, w, V = _quad_rule(f.P)
    pf = f.coefficients @ V.T
    pg = g.coefficients @ V.T
    per_mode = (pf * pg.conj()).real @ w
    return float(2.0 * math.pi * f.L * (_mode_weights(f.M) @ per_mode))


def scalar_norms(field: SpectralField2D):
    """(l2, h1, h2) of one scalar field; h2 uses the full multi-index sum."""
    f = field
    fx, fy = f.d_x1(), f.d_x2()
    sq = _sq_l2(f)
    sq1 = sq + _sq_l2(fx) + _sq_l2(fy)
    sq2 = sq1 + _sq_l2(fx.d_x1()) + _sq_l2(fx.d_x2()) + _sq_l2(fy.d_x2())
    return math.sqrt(sq), math.sqrt(sq1), math.sqrt(sq2)


def velocity_norms(u1: SpectralField2D, u2: SpectralField2D):
    """(l2, h1, h2) of the velocity pair, components summed in quadrature."""
    a = scalar_norms(u1)
    b = scalar_norms(u2)
    return tuple(math.sqrt(x * x + y * y) for x, y in zip(a, b))


def velocity_from_streamfunction(phi: SpectralField2D):
    """(u1, u2) from a streamfunction-convention field.

    Rows n >= 1 of ``phi`` hold streamfunction modes (u1 = d2 phi,
    u2 = -d1 phi); row 0 holds the x1-mean of u1 directly, so it is copied
    into u1 and contributes nothing to u2.
    """
    du = _chebder_rows(phi.coefficients)
    u1c = du.copy()
    u1c[0] = phi.coefficients[0]
    n = np.arange(phi.M + 1)
    u2c = -(1j * n / phi.L)[:, None] * phi.coefficients
    u2c[0] = 0.0
    return SpectralField2D(u1c, phi.L), SpectralField2D(u2c, phi.L)


def divergence_max(u1: SpectralField2D, u2: SpectralField2D) -> float:
    """Max-norm of d1 u1 + d2 u2 sampled on the quadrature grid."""
    div = u1.d_x1() + u2.d_x2()
    return float(np.abs(div.values()).max())


def field_from_mode_profile(
    profile_coeffs: np.ndarray, n_mode: int, M: int, P: int, L: float, kind: str = "sin"
) -> SpectralField2D:
    """Single-Fourier-mode field g(x2) * sin-or-cos(n x1 / L) without truncation.

    ``profile_coeffs`` is a real Chebyshev series for g.  Raises if the
    profile degree does not fit in P columns (initial data must embed
    exactly; no silent truncation).
    """
    profile_coeffs = np.asarray(profile_coeffs, dtype=float)
    if profile_coeffs.size > P:
        raise ValueError(
            f"profile degree {profile_coeffs.size - 1} does not fit in P = {P} "
            "Chebyshev columns"
        )
    if not 1 <= n_mode <= M:
        raise ValueError(f"mode index {n_mode} outside 1..{M}")
    rows = np.zeros((M + 1, P), dtype=complex)
    if kind == "sin":
        rows[n_mode, : profile_coeffs.size] = -0.5j * profile_coeffs
    elif kind == "cos":
        rows[n_mode, : profile_coeffs.size] = 0.5 * profile_coeffs
    else:
        raise ValueError(f"unknown mode kind {kind!r}")
    return SpectralField2D(rows, L)


def slip_residuals(phi: SpectralField2D, mu: float, xi_minus: float, xi_plus: float):
    """Boundary-condition residuals of a streamfunction-convention field.

    Returns (dirichlet, slip_minus, slip_plus, mean_minus, mean_plus): the
    max over modes n >= 1 of |phi|, |mu phi'' -+ xi phi'| at the walls, and
    the mean-flow Robin residuals |mu ubar' -+ xi ubar|.
    """
    c = phi.coefficients
    d1 = _chebder_rows(c)
    d2 = _chebder_rows(c, 2)
    plus = np.ones(phi.P)
    minus = (-1.0) ** np.arange(phi.P)
    dir_res = 0.0
    slip_m = slip_p = 0.0
    for rows, sign in ((plus, 1), (minus, -1)):
        vals = c[1:] @ rows
        dp = d1[1:] @ rows
        dpp = d2[1:] @ rows
        dir_res = max(dir_res, float(np.abs(vals).max(initial=0.0)))
        if sign == 1:
            slip_p = float(np.abs(mu * dpp - xi_plus * dp).max(initial=0.0))
        else:
            slip_m = float(np.abs(mu * dpp + xi_minus * dp).max(initial=0.0))
    ubar = c[0].real
    du = C.chebder(ubar)
    mean_p = abs(mu * C.chebval(1.0, du) - xi_plus * C.chebval(1.0, ubar))
    mean_m = abs(mu * C.chebval(-1.0, du) + xi_minus * C.chebval(-1.0, ubar))
    return dir_res, slip_m, slip_p, mean_m, mean_p
