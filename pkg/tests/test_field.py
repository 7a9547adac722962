"""Spectral fields: transforms, exact norms, curl, and wall residuals."""

import math

import numpy as np
import pytest

from slipflow.model import ModeProblem, SlipPair
from slipflow.modes import build_packet, packet_streamfunction_profile
from slipflow.numerics import build_basis
from slipflow.sim import (
    SpectralField2D,
    cgl_nodes,
    divergence_max,
    field_from_mode_profile,
    field_from_values,
    scalar_inner,
    scalar_norms,
    slip_residuals,
    velocity_from_streamfunction,
    velocity_norms,
)


def _sin_parabola_field(M=8, P=24, L=1.0):
    """u = sin(x1) (1 - x2^2) as a spectral field."""
    rows = np.zeros((M + 1, P), dtype=complex)
    # (1 - x^2) = T0/2 - T2/2; sin mode n=1 stored as -+ i/2 pair
    rows[1, 0] = -0.25j
    rows[1, 2] = 0.25j
    return SpectralField2D(rows, L)


def test_known_l2_norm():
    # int sin^2(x1) dx1 = pi, int (1-x2^2)^2 dx2 = 16/15
    f = _sin_parabola_field()
    l2, _, _ = scalar_norms(f)
    assert abs(l2 ** 2 - 16.0 * math.pi / 15.0) <= 1e-13


def test_known_h1_norm():
    f = _sin_parabola_field()
    _, h1, _ = scalar_norms(f)
    # |f|^2 + |df/dx1|^2 + |df/dx2|^2 = 16pi/15 + 16pi/15 + 8pi/3
    expected = 2.0 * 16.0 * math.pi / 15.0 + 8.0 * math.pi / 3.0
    assert abs(h1 ** 2 - expected) <= 1e-12


def test_transform_round_trip():
    rng = np.random.default_rng(3)
    M, P = 6, 12
    rows = rng.standard_normal((M + 1, P)) + 1j * rng.standard_normal((M + 1, P))
    rows[0] = rows[0].real
    f = SpectralField2D(rows, 1.0)
    vals = f.values(n1=4 * M)
    g = field_from_values(vals, M=M, P=P, L=1.0)
    assert np.allclose(g.coefficients, f.coefficients, atol=1e-13)


def test_parseval_against_direct_quadrature():
    rng = np.random.default_rng(5)
    M, P, L = 5, 16, 1.0
    rows = rng.standard_normal((M + 1, P)) * np.exp(-0.4 * np.arange(P))
    rows = rows + 1j * rng.standard_normal((M + 1, P)) * np.exp(-0.4 * np.arange(P))
    rows[0] = rows[0].real
    f = SpectralField2D(rows, L)
    l2, _, _ = scalar_norms(f)
    # direct: sample on a fine tensor grid with Gauss-Legendre in x2
    x2, w2 = np.polynomial.legendre.leggauss(P + 2)
    n1 = 4 * M
    vals = f.values(n1=n1, x2=x2)
    sq = 2.0 * math.pi * L / n1 * float(np.sum(vals ** 2 @ w2))
    assert abs(l2 ** 2 - sq) <= 1e-12 * max(1.0, sq)


def test_scalar_inner_matches_norm():
    f = _sin_parabola_field()
    l2, _, _ = scalar_norms(f)
    assert abs(scalar_inner(f, f) - l2 ** 2) <= 1e-14


def test_reality_defect():
    f = _sin_parabola_field()
    assert f.reality_defect == 0.0
    rows = np.array(f.coefficients)
    rows[0, 0] = 1j * 1e-3
    g = SpectralField2D(rows, 1.0)
    assert g.reality_defect == 1e-3


def test_arithmetic_and_compatibility():
    f = _sin_parabola_field()
    g = 2.0 * f
    assert np.allclose((g - f).coefficients, f.coefficients)
    other = _sin_parabola_field(M=4)
    with pytest.raises(ValueError):
        f + other


def test_velocity_from_streamfunction_is_divergence_free(basis48):
    from slipflow.spectrum import assemble, solve_spectrum

    problem = ModeProblem(k=1.0, mu=0.5, slip=SlipPair(1.0, 1.0))
    packet = build_packet(solve_spectrum(assemble(problem, basis48)))
    profile = packet_streamfunction_profile(packet)
    phi = field_from_mode_profile(profile, n_mode=1, M=8, P=56, L=1.0, kind="sin")
    u1, u2 = velocity_from_streamfunction(phi)
    assert divergence_max(u1, u2) <= 1e-10 * max(1.0, np.abs(u1.coefficients).max())
    # impermeability at the walls
    assert np.abs(u2.wall_values(1)).max() <= 1e-10
    assert np.abs(u2.wall_values(-1)).max() <= 1e-10


def test_slip_residuals_of_eigenmode_profile(basis48):
    from slipflow.spectrum import assemble, solve_spectrum

    problem = ModeProblem(k=1.0, mu=0.5, slip=SlipPair(1.0, 1.0))
    packet = build_packet(solve_spectrum(assemble(problem, basis48)))
    profile = packet_streamfunction_profile(packet)
    phi = field_from_mode_profile(profile, n_mode=1, M=8, P=56, L=1.0, kind="sin")
    res = slip_residuals(phi, 0.5, 1.0, 1.0)
    assert max(res) <= 1e-8
    # wrong slip coefficients must show up in the residual
    res_bad = slip_residuals(phi, 0.5, 5.0, 5.0)
    assert max(res_bad) > 1e-3


def test_field_from_mode_profile_guards():
    profile = np.ones(60)
    with pytest.raises(ValueError):
        field_from_mode_profile(profile, n_mode=1, M=8, P=56, L=1.0)
    with pytest.raises(ValueError):
        field_from_mode_profile(np.ones(4), n_mode=9, M=8, P=56, L=1.0)
    with pytest.raises(ValueError):
        field_from_mode_profile(np.ones(4), n_mode=1, M=8, P=56, L=1.0, kind="tan")


def test_field_from_mode_profile_samples():
    # g(x2) * sin(n x1 / L) round trip through physical samples
    coeffs = np.array([0.5, 0.0, -0.5])  # 1 - x2^2
    f = field_from_mode_profile(coeffs, n_mode=2, M=6, P=12, L=1.0)
    x2 = cgl_nodes(12)
    vals = f.values(n1=24)
    x1 = f.x1_grid(24)
    expected = np.sin(2.0 * x1)[:, None] * (1.0 - x2 ** 2)[None, :]
    assert np.allclose(vals, expected, atol=1e-13)


def test_values_rejects_undersampling():
    f = _sin_parabola_field(M=8)
    with pytest.raises(ValueError):
        f.values(n1=10)


def test_velocity_norms_combination():
    f = _sin_parabola_field()
    zero = SpectralField2D(np.zeros_like(f.coefficients), f.L)
    a = scalar_norms(f)
    b = velocity_norms(f, zero)
    assert np.allclose(a, b, rtol=1e-15)
    both = velocity_norms(f, f)
    assert np.allclose(both, np.array(a) * math.sqrt(2.0), rtol=1e-15)


def test_cgl_nodes_descending():
    x = cgl_nodes(9)
    assert x[0] == 1.0 and x[-1] == -1.0
    assert np.all(np.diff(x) < 0.0)
    with pytest.raises(ValueError):
        cgl_nodes(3)
