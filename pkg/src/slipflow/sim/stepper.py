"""Streamfunction-vorticity channel stepper with Navier-slip walls.

Prognostic variables, per Fourier mode n in x1:

  * n >= 1: vorticity values omega_n(x2) at the P Chebyshev-Gauss-Lobatto
    nodes.  Each step solves the Crank-Nicolson Helmholtz problem
    (I - (mu dt/2)(D^2 - kappa^2)) omega^{m+1} = explicit part at interior
    nodes, with the two unknown wall values of omega fixed by requiring the
    induced streamfunction (the Poisson-Dirichlet solve of
    (D^2 - kappa^2) Phi = -omega) to satisfy the slip conditions
    mu Phi'' = +xi_+ Phi' at x2 = +1 and mu Phi'' = -xi_- Phi' at x2 = -1.
    That transfer is a precomputed 2x2 influence matrix per mode.
  * n = 0: the x1-mean of u1, advanced by Crank-Nicolson diffusion with the
    Robin slip rows mu u' = +xi_+ u (top) and mu u' = -xi_- u (bottom)
    replacing the wall equations, forced by -d2 mean(u1 u2).

Advection uses second-order Adams-Bashforth extrapolation (first step:
plain Euler weights), evaluated pseudospectrally on a grid padded to 4M
points in x1 and ceil(3P/2) Chebyshev nodes in x2, which removes quadratic
aliasing in both directions.  The streamfunction is never stored: it is
reconstructed from the vorticity at the start of every step, so the
trajectory is a pure function of (omega, advection history) and restarting
from a checkpoint reproduces the original run bit for bit.

The optional symmetry lock projects the state after every step onto the
invariant class {phi rows pure imaginary, zero mean flow} (physically:
u2 even and u1 odd under x1 -> -x1, no mean shear).  The class is exactly
preserved by the equations; the lock only removes roundoff that would
otherwise seed the faster-growing mean-shear instability during long runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from ..model import ChannelConfig, ValidationError
from .field import (
    SpectralField2D,
    cgl_nodes,
    cheb_coeffs_from_values,
    cheb_values_from_coeffs,
)

__all__ = [
    "SimConfig",
    "ChannelStepper",
    "SimulationBlowupError",
    "InfluenceConditioningError",
    "step",
    "cheb_diff_matrix",
]


class SimulationBlowupError(RuntimeError):
    """Raised when the state stops being finite or the CFL bound is lost."""


class InfluenceConditioningError(RuntimeError):
    """Raised when a per-mode influence matrix is numerically singular."""


@dataclass(frozen=True)
class SimConfig:
    """Resolution and stepping parameters for one run."""

    channel: ChannelConfig
    M: int = 32
    P: int = 64
    dt: float = 4.0e-3
    t_end: float = 1.0
    dealias: bool = True
    linearized: bool = False
    lock_symmetry: bool = False
    diagnostics_stride: int = 25
    cfl_limit: float = 0.3

    def __post_init__(self):
        if self.M < 2:
            raise ValidationError(f"M: need at least 2 Fourier modes, got {self.M}")
        if self.P < 16:
            raise ValidationError(f"P: need at least 16 Chebyshev points, got {self.P}")
        if not self.dt > 0.0:
            raise ValidationError(f"dt: must be > 0, got {self.dt}")
        if not self.t_end >= self.dt:
            raise ValidationError(f"t_end: must be >= dt, got {self.t_end}")
        if self.diagnostics_stride < 1:
            raise ValidationError("diagnostics_stride: must be >= 1")
        if not 0.0 < self.cfl_limit <= 1.0:
            raise ValidationError("cfl_limit: must lie in (0, 1]")

    @property
    def n_steps(self) -> int:
        return max(1, math.ceil(self.t_end / self.dt - 1.0e-12))


def cheb_diff_matrix(P: int) -> np.ndarray:
    """Collocation differentiation matrix on the descending CGL nodes."""
    x = cgl_nodes(P)
    c = np.ones(P)
    c[0] = c[-1] = 2.0
    c = c * (-1.0) ** np.arange(P)
    X = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (X + np.eye(P))
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


class ChannelStepper:
    """Time stepper owning the per-mode factorizations and the state."""

    def __init__(self, cfg: SimConfig, initial: SpectralField2D):
        if initial.M != cfg.M or initial.P != cfg.P:
            raise ValidationError(
                f"initial field is ({initial.M}, {initial.P}), config wants "
                f"({cfg.M}, {cfg.P})"
            )
        if initial.L != cfg.channel.L:
            raise ValidationError("initial field and config disagree on L")
        self.cfg = cfg
        self.L = cfg.channel.L
        self.mu = cfg.channel.mu
        self.slip = cfg.channel.slip
        self.t = 0.0
        self._build_operators()
        self._omega = self._state_from_streamfunction(initial)
        self._n_prev = np.zeros_like(self._omega)
        self._have_history = False
        if cfg.lock_symmetry:
            self._lock()

    # -- operator setup ------------------------------------------------

    def _build_operators(self):
        cfg = self.cfg
        M, P = cfg.M, cfg.P
        self.x2 = cgl_nodes(P)
        D = cheb_diff_matrix(P)
        D2 = D @ D
        self.D, self.D2 = D, D2
        self.kappa = np.arange(M + 1) / self.L
        alpha = 0.5 * self.mu * cfg.dt
        xi_m, xi_p = self.slip.xi_minus, self.slip.xi_plus

        # slip functionals acting on a streamfunction node vector
        self._slip_plus = self.mu * D2[0] - xi_p * D[0]
        self._slip_minus = self.mu * D2[-1] + xi_m * D[-1]

        eye = np.eye(P)
        self._explicit_base = eye + alpha * D2  # row form handles kappa below
        self._alpha = alpha

        self._helm_lu = []
        self._pois_lu = []
        self._omega_greens = []
        self._ginv = []
        for n in range(1, M + 1):
            k2 = self.kappa[n] ** 2
            H = D2 - k2 * eye
            A = eye - alpha * H
            A[0], A[-1] = eye[0], eye[-1]
            alu = sla.lu_factor(A.astype(complex))
            K = H.copy()
            K[0], K[-1] = eye[0], eye[-1]
            klu = sla.lu_factor(K.astype(complex))
            # Green columns: unit omega wall values through the implicit solve
            g = np.zeros((P, 2), dtype=complex)
            g[0, 0] = 1.0
            g[-1, 1] = 1.0
            og = sla.lu_solve(alu, g)
            rhs = -og
            rhs[0] = rhs[-1] = 0.0
            pg = sla.lu_solve(klu, rhs)
            G = np.array(
                [
                    [self._slip_plus @ pg[:, 0], self._slip_plus @ pg[:, 1]],
                    [self._slip_minus @ pg[:, 0], self._slip_minus @ pg[:, 1]],
                ]
            ).real
            det = G[0, 0] * G[1, 1] - G[0, 1] * G[1, 0]
            scale = np.abs(G).max()
            if not np.isfinite(det) or abs(det) < 1.0e-13 * scale * scale:
                raise InfluenceConditioningError(
                    f"influence matrix for mode n = {n} is singular "
                    f"(det = {det:g}, scale = {scale:g})"
                )
            self._helm_lu.append(alu)
            self._pois_lu.append(klu)
            self._omega_greens.append(og)
            self._ginv.append(np.linalg.inv(G))

        # mean mode: Crank-Nicolson diffusion with Robin wall rows
        A0 = eye - alpha * D2
        A0[0] = self.mu * D[0] - xi_p * eye[0]
        A0[-1] = self.mu * D[-1] + xi_m * eye[-1]
        self._mean_lu = sla.lu_factor(A0)

        # dealiased product grid
        if cfg.dealias:
            self._n1 = max(4 * M, 8)
            self._p_pad = math.ceil(3 * P / 2)
        else:
            self._n1 = 2 * M + 2
            self._p_pad = P

    # -- representation changes ----------------------------------------

    def _state_from_streamfunction(self, field: SpectralField2D) -> np.ndarray:
        """Internal state (vorticity rows + mean-u1 row) from coefficients."""
        from .field import _chebder_rows

        c = field.coefficients
        omega_c = -(_chebder_rows(c, 2) - (self.kappa**2)[:, None] * c)
        state = cheb_values_from_coeffs(omega_c, axis=1)
        state[0] = cheb_values_from_coeffs(c[0].real[None, :], axis=1)[0]
        return np.ascontiguousarray(state)

    def _solve_phi(self, omega: np.ndarray) -> np.ndarray:
        """Poisson-Dirichlet streamfunction node values from vorticity rows."""
        phi = np.zeros_like(omega)
        for n in range(1, self.cfg.M + 1):
            rhs = -omega[n].copy()
            rhs[0] = rhs[-1] = 0.0
            phi[n] = sla.lu_solve(self._pois_lu[n - 1], rhs)
        return phi

    def _velocity_nodes(self, phi: np.ndarray):
        """(u1, u2) node values; u1 row 0 is the mean flow."""
        u1 = phi @ self.D.T
        u1[0] = self._omega[0]
        u2 = -(1j * self.kappa)[:, None] * phi
        u2[0] = 0.0
        return u1, u2

    def streamfunction(self) -> SpectralField2D:
        """Public state: streamfunction rows plus the mean-u1 row."""
        phi = self._solve_phi(self._omega)
        coeffs = cheb_coeffs_from_values(phi, axis=1)
        coeffs[0] = cheb_coeffs_from_values(self._omega[0].real[None, :], axis=1)[0]
        return SpectralField2D(coeffs, self.L)

    def velocity(self):
        """(u1, u2) as coefficient-space fields."""
        phi = self._solve_phi(self._omega)
        u1, u2 = self._velocity_nodes(phi)
        return (
            SpectralField2D(cheb_coeffs_from_values(u1, axis=1), self.L),
            SpectralField2D(cheb_coeffs_from_values(u2, axis=1), self.L),
        )

    # -- pseudospectral products ----------------------------------------

    def _to_phys(self, rows: np.ndarray) -> np.ndarray:
        c = cheb_coeffs_from_values(rows, axis=1)
        cpad = np.zeros((rows.shape[0], self._p_pad), dtype=complex)
        cpad[:, : self.cfg.P] = c
        vpad = cheb_values_from_coeffs(cpad, axis=1)
        spec = np.zeros((self._n1 // 2 + 1, self._p_pad), dtype=complex)
        spec[: self.cfg.M + 1] = vpad
        return np.fft.irfft(spec, n=self._n1, axis=0) * self._n1

    def _from_phys(self, vals: np.ndarray) -> np.ndarray:
        spec = np.fft.rfft(vals, axis=0)[: self.cfg.M + 1] / self._n1
        c = cheb_coeffs_from_values(spec, axis=1)[:, : self.cfg.P]
        return cheb_values_from_coeffs(c, axis=1)

    def _advection(self, phi: np.ndarray) -> np.ndarray:
        """Advection rows: n >= 1 carry u . grad omega at the nodes,
        row 0 carries +d2 mean(u1 u2) (the negated mean-flow forcing)."""
        if self.cfg.linearized:
            return np.zeros_like(self._omega)
        u1, u2 = self._velocity_nodes(phi)
        wtot = self._omega.copy()
        wtot[0] = -(self._omega[0].real @ self.D.T)
        w1 = (1j * self.kappa)[:, None] * wtot
        w2 = wtot @ self.D.T
        u1p = self._to_phys(u1)
        u2p = self._to_phys(u2)
        adv = self._from_phys(u1p * self._to_phys(w1) + u2p * self._to_phys(w2))
        flux = self._from_phys(u1p * u2p)
        flux_c = cheb_coeffs_from_values(flux[0].real[None, :], axis=1)[0]
        dflux = np.zeros(self.cfg.P)
        der = np.polynomial.chebyshev.chebder(flux_c)
        dflux[: der.size] = der
        adv[0] = cheb_values_from_coeffs(dflux[None, :], axis=1)[0]
        return adv

    # -- stepping --------------------------------------------------------

    def _lock(self):
        self._omega[1:] = 1j * self._omega[1:].imag
        self._omega[0] = 0.0

    def step(self):
        """Advance one dt (Euler-weight bootstrap on the very first step)."""
        cfg = self.cfg
        phi = self._solve_phi(self._omega)
        adv = self._advection(phi)
        if self._have_history:
            adv_x = 1.5 * adv - 0.5 * self._n_prev
        else:
            adv_x = adv
        explicit = (
            self._omega @ self._explicit_base.T
            - self._alpha * (self.kappa**2)[:, None] * self._omega
        )
        rhs = explicit - cfg.dt * adv_x
        new = np.empty_like(self._omega)
        for n in range(1, cfg.M + 1):
            b = rhs[n].copy()
            b[0] = b[-1] = 0.0
            w_p = sla.lu_solve(self._helm_lu[n - 1], b)
            p_rhs = -w_p
            p_rhs[0] = p_rhs[-1] = 0.0
            phi_p = sla.lu_solve(self._pois_lu[n - 1], p_rhs)
            s = np.array([self._slip_plus @ phi_p, self._slip_minus @ phi_p])
            ab = -self._ginv[n - 1] @ s
            new[n] = w_p + self._omega_greens[n - 1] @ ab
        b0 = rhs[0].real.copy()
        b0[0] = b0[-1] = 0.0
        new[0] = sla.lu_solve(self._mean_lu, b0)
        self._omega = new
        self._n_prev = adv
        self._have_history = True
        self.t += cfg.dt
        if cfg.lock_symmetry:
            self._lock()
        if not np.isfinite(self._omega).all():
            raise SimulationBlowupError(
                f"state stopped being finite at t = {self.t:.6g}"
            )

    # -- safety estimates -------------------------------------------------

    def max_speeds(self):
        """(max |u1|, max |u2|) on the product grid at the current state."""
        phi = self._solve_phi(self._omega)
        u1, u2 = self._velocity_nodes(phi)
        m1 = float(np.abs(self._to_phys(u1)).max(initial=0.0))
        m2 = float(np.abs(self._to_phys(u2)).max(initial=0.0))
        return m1, m2

    def cfl_number(self) -> float:
        """Advective CFL of the current state at the configured dt."""
        m1, m2 = self.max_speeds()
        dx1 = 2.0 * math.pi * self.L / self._n1
        dx2_min = abs(self.x2[0] - self.x2[1])
        return self.cfg.dt * (m1 / dx1 + m2 / dx2_min)

    def stability_bound(self) -> float:
        """Largest dt with advective CFL <= cfl_limit at the current state."""
        cfl = self.cfl_number()
        if cfl == 0.0:
            return math.inf
        return self.cfg.dt * self.cfg.cfl_limit / cfl

    # -- instantaneous tendencies (for the energy budget) -----------------

    def tendency_split(self):
        """Viscous and advective tendency rows of the semi-discrete system.

        Returns (visc, adv) shaped like the state: rows n >= 1 give
        d omega_n/dt contributions, row 0 gives d ubar/dt contributions.
        """
        phi = self._solve_phi(self._omega)
        w = self._omega
        visc = self.mu * (w @ self.D2.T - (self.kappa**2)[:, None] * w)
        visc[0] = self.mu * (w[0].real @ self.D2.T)
        adv_rows = self._advection(phi)
        adv = -adv_rows
        return visc, adv

    def tendency_velocity(self, rows: np.ndarray):
        """Velocity-space image of tendency rows (same mapping as the state)."""
        dphi = self._solve_phi(rows)
        du1 = dphi @ self.D.T
        du1[0] = rows[0]
        du2 = -(1j * self.kappa)[:, None] * dphi
        du2[0] = 0.0
        return (
            SpectralField2D(cheb_coeffs_from_values(du1, axis=1), self.L),
            SpectralField2D(cheb_coeffs_from_values(du2, axis=1), self.L),
        )


def step(state: SpectralField2D, cfg: SimConfig) -> SpectralField2D:
    """One bootstrap step of the scheme as a pure function of the state.

    Requires the state to satisfy the wall conditions (impermeability and
    slip) to 1e-8 relative to its own scale.
    """
    from .field import slip_residuals

    res = slip_residuals(
        state, cfg.channel.mu, cfg.channel.slip.xi_minus, cfg.channel.slip.xi_plus
    )
    scale = max(1.0, float(np.abs(state.coefficients).max(initial=0.0)))
    if max(res) > 1.0e-8 * scale:
        raise ValidationError(
            f"state violates the boundary conditions: residual {max(res):.3e}"
        )
    stepper = ChannelStepper(cfg, state)
    stepper.step()
    return stepper.streamfunction()
