"""Physical normal modes, mode packets, the growth envelope, and escape time.

A growth-rate eigenpair (lambda, phi) of wavenumber k lifts to the physical
perturbation triple

    u1 = e^{lambda t} sin(k x1) psi(x2),      psi = -phi'/k,
    u2 = e^{lambda t} cos(k x1) phi(x2),
    q  = e^{lambda t} cos(k x1) pi(x2),       pi = (lambda psi + mu (k^2 psi - psi'')) / k,

which satisfies the linearized momentum equations

    lambda psi - k pi  + mu (k^2 psi - psi'') = 0,
    lambda phi + pi'   + mu (k^2 phi - phi'') = 0,
    k psi + phi' = 0,

together with the wall conditions phi(+/-1) = 0 and mu psi'(+/-1) =
+/- xi_{+/-} psi(+/-1).  (The pressure profile is determined by the first
momentum equation; its sign pairs with the +mu Laplacian of that system.)

Packets of the first N modes of one wavenumber, ordered by increasing
growth rate, drive the nonlinear separation experiment: their envelope
F_N(t) = sum_j |c_j| e^{lambda_j t} defines the escape time T^delta as the
unique solution of delta * F_N(T) = epsilon0.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as C

from .model import LatticeSweep, ModeProblem, validate_problem
from .numerics import ChebBasis, CoeffVector, find_root_bracketed
from .spectrum import Spectrum, assemble, solve_spectrum

__all__ = [
    "ChebSeries",
    "NormalMode",
    "ModePacket",
    "GrowthEnvelope",
    "Grid2D",
    "build_mode",
    "build_packet",
    "reduced_packet",
    "modes_from_spectrum",
    "sample_field",
    "sample_packet_field",
    "compute_capital_lambda",
    "packet_envelope_value",
    "packet_l2_norm",
    "default_epsilon0",
    "escape_time",
    "packet_streamfunction_profile",
    "PACKET_SIZE_CAP",
]

PACKET_SIZE_CAP = 8


@dataclass(frozen=True)
class ChebSeries:
    """Plain Chebyshev-T series on [-1, 1]; value objects for psi and pi.

    The slip profiles psi and pi do not vanish at the walls, so unlike phi
    they cannot live in the wall-clamped trial space; they are carried as
    raw coefficient series produced by exact differentiation of phi.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=float))

    def __call__(self, x, deriv: int = 0):
        series = self.coeffs
        if deriv:
            series = C.chebder(series, deriv)
        return C.chebval(np.asarray(x, dtype=float), series)


@dataclass(frozen=True)
class NormalMode:
    """One physical normal mode: growth rate and the three x2-profiles."""

    problem: ModeProblem
    lam: float
    phi: CoeffVector
    psi: ChebSeries
    pi: ChebSeries


@dataclass(frozen=True)
class ModePacket:
    """Modes of one wavenumber ordered by strictly increasing growth rate.

    May be empty (the reduced packet of a single-mode spectrum).  All modes
    share the same ModeProblem.
    """

    modes: tuple
    coefficients: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(
            self, "coefficients", np.asarray(self.coefficients, dtype=float)
        )
        if len(self.modes) != self.coefficients.size:
            raise ValueError("one coefficient per mode required")
        if len(self.modes) > 1:
            first = self.modes[0].problem
            for m in self.modes[1:]:
                if m.problem != first:
                    raise ValueError("packet modes must share one ModeProblem")
        lams = self.lambdas
        if np.any(np.diff(lams) < 0):
            raise ValueError("packet modes must be ordered by increasing growth rate")
        ties = np.nonzero(np.diff(lams) == 0)[0]
        if ties.size:
            warnings.warn(
                "degenerate growth rates in packet; keeping the deterministic "
                "eigensolver order",
                RuntimeWarning,
            )

    @property
    def count(self) -> int:
        return len(self.modes)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([m.lam for m in self.modes])

    @property
    def top_lambda(self) -> float:
        if not self.modes:
            raise ValueError("empty packet has no top growth rate")
        return self.modes[-1].lam


@dataclass(frozen=True)
class GrowthEnvelope:
    """F_N(t) = sum |c_j| e^{lambda_j t} for a packet, with the escape scales."""

    packet: ModePacket
    delta: float
    epsilon0: float

    def __post_init__(self):
        if self.packet.count < 1:
            raise ValueError("growth envelope needs a nonempty packet")
        if not self.delta > 0.0:
            raise ValueError(f"delta must be > 0, got {self.delta}")
        if not self.epsilon0 > 0.0:
            raise ValueError(f"epsilon0 must be > 0, got {self.epsilon0}")

    def value(self, t):
        return packet_envelope_value(self.packet, t)


def packet_envelope_value(packet: ModePacket, t):
    """Envelope F_N(t) = sum_j |c_j| e^{lambda_j t}."""
    t = np.asarray(t, dtype=float)
    lams = packet.lambdas
    absc = np.abs(packet.coefficients)
    return (absc * np.exp(np.multiply.outer(t, lams))).sum(axis=-1)


def packet_l2_norm(packet: ModePacket, L: float = 1.0) -> float:
    """L2 norm over the channel of the packet velocity at t = 0.

    The x1 integral of sin^2 or cos^2 over the 2 pi L period is pi L for
    every lattice mode, so the norm reduces to a Gauss-Legendre quadrature
    of the profile polynomials |sum c_j psi_j|^2 + |sum c_j phi_j|^2.
    """
    if packet.count == 0:
        return 0.0
    n_gl = max(m.phi.to_chebyshev().size for m in packet.modes) + 2
    x, w = np.polynomial.legendre.leggauss(n_gl)
    su = np.zeros_like(x)
    sv = np.zeros_like(x)
    for cj, mode in zip(packet.coefficients, packet.modes):
        su += cj * mode.psi(x)
        sv += cj * mode.phi(x)
    return math.sqrt(math.pi * L * float(w @ (su**2 + sv**2)))


def default_epsilon0(packet: ModePacket, L: float = 1.0, fraction: float = 0.01) -> float:
    """Escape amplitude: the given fraction of the unit packet's L2 size."""
    size = packet_l2_norm(packet, L)
    if not size > 0.0:
        raise ValueError("epsilon0 default needs a nonempty packet")
    return fraction * size


def build_mode(problem: ModeProblem, lam: float, phi: CoeffVector) -> NormalMode:
    """Lift an eigenpair to the physical mode profiles by exact differentiation."""
    validate_problem(problem)
    k, mu = problem.k, problem.mu
    if k == 0.0:
        raise ValueError("normal modes require k > 0")
    c_phi = phi.to_chebyshev()
    c_psi = -C.chebder(c_phi) / k
    c_psi2 = C.chebder(c_psi, 2)
    n = c_psi.size
    c_pi = lam * c_psi + mu * k * k * c_psi
    c_pi[: c_psi2.size] -= mu * c_psi2
    c_pi /= k
    return NormalMode(problem=problem, lam=float(lam), phi=phi, psi=ChebSeries(c_psi), pi=ChebSeries(c_pi))


def modes_from_spectrum(spectrum: Spectrum, count: int | None = None):
    """The positive-growth modes of a spectrum, ordered by increasing rate."""
    n_pos = spectrum.positive_count
    take = n_pos if count is None else min(count, n_pos)
    out = []
    for i in range(take - 1, -1, -1):  # ascending lambda
        lam = float(spectrum.eigenvalues[i])
        phi = CoeffVector(spectrum.coefficients[:, i], spectrum.basis)
        out.append(build_mode(spectrum.problem, lam, phi))
    return out


def build_packet(
    spectrum: Spectrum,
    count: int | None = None,
    coefficients=None,
) -> ModePacket:
    """Packet of the unstable modes of one wavenumber (at most 8, c_j = 1).

    Uses all positive growth rates when ``count`` is None; fewer positive
    modes than requested is not an error, the packet simply carries what
    exists.
    """
    cap = PACKET_SIZE_CAP if count is None else min(count, PACKET_SIZE_CAP)
    modes = modes_from_spectrum(spectrum, cap)
    if coefficients is None:
        coefficients = np.ones(len(modes))
    coefficients = np.asarray(coefficients, dtype=float)
    if coefficients.size != len(modes):
        raise ValueError(
            f"{coefficients.size} coefficients for a packet of {len(modes)} modes"
        )
    return ModePacket(modes=modes, coefficients=coefficients)


def reduced_packet(packet: ModePacket) -> ModePacket:
    """Drop the fastest mode: the second branch of the separation experiment."""
    if packet.count == 0:
        raise ValueError("cannot reduce an empty packet")
    return ModePacket(modes=packet.modes[:-1], coefficients=packet.coefficients[:-1])


@dataclass(frozen=True)
class Grid2D:
    """Sampling grid: n1 uniform periodic points in x1, n2 points in x2."""

    n1: int
    n2: int
    L: float = 1.0
    x2_kind: str = "uniform"

    def __post_init__(self):
        if self.n1 < 4 or self.n2 < 4:
            raise ValueError("grid resolutions must be >= 4 in each direction")
        if self.x2_kind not in ("uniform", "cheb"):
            raise ValueError(f"unknown x2 grid kind {self.x2_kind!r}")

    @property
    def x1(self) -> np.ndarray:
        return 2.0 * math.pi * self.L * np.arange(self.n1) / self.n1

    @property
    def x2(self) -> np.ndarray:
        if self.x2_kind == "uniform":
            return np.linspace(-1.0, 1.0, self.n2)
        return np.cos(math.pi * np.arange(self.n2 - 1, -1, -1) / (self.n2 - 1))


def sample_field(mode: NormalMode, t: float, grid: Grid2D):
    """Pointwise samples (u1, u2, q), each shaped (n1, n2)."""
    k = mode.problem.k
    amp = math.exp(mode.lam * t)
    x1, x2 = grid.x1, grid.x2
    s, c = np.sin(k * x1)[:, None], np.cos(k * x1)[:, None]
    u1 = amp * s * mode.psi(x2)[None, :]
    u2 = amp * c * mode.phi(x2)[None, :]
    q = amp * c * mode.pi(x2)[None, :]
    return u1, u2, q


def sample_packet_field(packet: ModePacket, t: float, grid: Grid2D):
    """Coefficient-weighted sum of the packet's mode samples."""
    shape = (grid.n1, grid.n2)
    u1 = np.zeros(shape)
    u2 = np.zeros(shape)
    q = np.zeros(shape)
    for cj, mode in zip(packet.coefficients, packet.modes):
        a, b, d = sample_field(mode, t, grid)
        u1 += cj * a
        u2 += cj * b
        q += cj * d
    return u1, u2, q


def packet_streamfunction_profile(packet: ModePacket) -> np.ndarray:
    """Chebyshev coefficients of the packet streamfunction x2-profile.

    The packet velocity at t = 0 is the curl of
    Phi = -(1/k) sin(k x1) * sum_j c_j phi_j(x2); this returns the series of
    the x2 factor -(1/k) sum_j c_j phi_j.
    """
    if packet.count == 0:
        raise ValueError("empty packet has no streamfunction profile")
    k = packet.modes[0].problem.k
    acc = None
    for cj, mode in zip(packet.coefficients, packet.modes):
        c_phi = mode.phi.to_chebyshev()
        acc = cj * c_phi if acc is None else acc + cj * c_phi
    return -acc / k


def compute_capital_lambda(sweep: LatticeSweep, basis: ChebBasis, mu: float | None = None):
    """Maximal growth rate over the wavenumber lattice: (Lambda, argmax k).

    Solves the spectrum at every k = n/L, n = 1..n_max.  Raises if the top
    rate at the last lattice point is still positive (the sweep has not
    reached the stable range, so the max may be unconverged); warns if the
    rates fail to decrease along the sweep.
    """
    validate_problem(sweep)
    mu = sweep.mu if mu is None else mu
    lam1 = []
    for n in range(1, sweep.n_max + 1):
        prob = ModeProblem(k=n / sweep.L, mu=mu, slip=sweep.slip)
        lam1.append(solve_spectrum(assemble(prob, basis)).lambda1)
    lam1 = np.array(lam1)
    if lam1[-1] > 0.0:
        raise ValueError(
            f"lambda_1 = {lam1[-1]:g} still positive at the last lattice point "
            f"k = {sweep.n_max / sweep.L:g}; increase n_max"
        )
    if np.any(np.diff(lam1) > 0.0):
        warnings.warn("lambda_1 is not decreasing along the wavenumber sweep", RuntimeWarning)
    best = int(np.argmax(lam1))
    return float(lam1[best]), (best + 1) / sweep.L


def escape_time(env: GrowthEnvelope) -> float:
    """The unique T with delta * F_N(T) = epsilon0, by bracketed root finding."""
    packet = env.packet
    lams = packet.lambdas
    if np.any(lams <= 0.0):
        raise ValueError("escape time requires every packet growth rate > 0")
    f0 = env.delta * packet_envelope_value(packet, 0.0)
    if not f0 < env.epsilon0:
        raise ValueError(
            f"already escaped at t = 0: delta * F_N(0) = {f0:g} >= epsilon0 = {env.epsilon0:g}"
        )
    cmin = np.abs(packet.coefficients).min()
    hi = math.log(env.epsilon0 / (env.delta * cmin)) / lams[0] + 1.0

    def g(t: float) -> float:
        return env.delta * packet_envelope_value(packet, t) - env.epsilon0

    return find_root_bracketed(g, 0.0, hi, tol=1e-14 * hi)
