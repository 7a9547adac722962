"""Galerkin spectrum against the shooting-determinant oracle."""

import numpy as np
import pytest
from conftest import standard_cases

from slipflow.model import ModeProblem, SlipPair
from slipflow.numerics import build_basis, gram_form
from slipflow.spectrum import (
    assemble,
    characteristic_determinant,
    determinant_roots,
    lambda1_variational,
    resolved_count,
    solve_spectrum,
    spectrum_residuals,
)


@pytest.mark.parametrize("k,mu,slip", standard_cases((0.5, 0.9)))
def test_positive_eigenvalues_match_oracle(k, mu, slip, basis64):
    spectrum = solve_spectrum(assemble(ModeProblem(k=k, mu=mu, slip=slip), basis64))
    roots = np.sort(np.asarray(determinant_roots(spectrum.problem).roots))[::-1]
    assert spectrum.positive_count == roots.size
    assert roots.size >= 1
    rel = np.abs(spectrum.eigenvalues[: roots.size] - roots) / roots
    assert rel.max() <= 1e-8


@pytest.mark.parametrize("k,mu,slip", standard_cases((1.1,)))
def test_supercritical_cases_have_no_positive_eigenvalues(k, mu, slip, basis64):
    spectrum = solve_spectrum(assemble(ModeProblem(k=k, mu=mu, slip=slip), basis64))
    assert spectrum.positive_count == 0
    assert spectrum.lambda1 < 0.0
    assert determinant_roots(spectrum.problem).roots.size == 0


@pytest.mark.parametrize("mu", [0.5, 0.05])
def test_positive_set_converged_in_basis_size(mu, basis32, basis64):
    problem = ModeProblem(k=1.0, mu=mu, slip=SlipPair(1.0, 1.0))
    coarse = solve_spectrum(assemble(problem, basis32))
    fine = solve_spectrum(assemble(problem, basis64))
    assert coarse.positive_count == fine.positive_count
    n = fine.positive_count
    assert n >= 1
    gap = np.abs(coarse.eigenvalues[:n] - fine.eigenvalues[:n])
    assert gap.max() <= 1e-9 * max(1.0, np.abs(fine.eigenvalues[:n]).max())


def test_eigenvalues_sorted_descending(basis64):
    spectrum = solve_spectrum(
        assemble(ModeProblem(k=1.0, mu=0.5, slip=SlipPair(1.0, 1.0)), basis64)
    )
    assert np.all(np.diff(spectrum.eigenvalues) <= 0.0)
    assert spectrum.lambda1 == spectrum.eigenvalues[0]


def test_resolved_modes_meet_residual_gates(basis64):
    spectrum = solve_spectrum(
        assemble(ModeProblem(k=1.0, mu=0.5, slip=SlipPair(1.0, 1.0)), basis64)
    )
    strong, bc_minus, bc_plus = spectrum_residuals(spectrum)
    n = resolved_count(spectrum)
    assert n >= 8
    assert strong[:n].max() <= 1e-6
    assert bc_minus[:n].max() <= 1e-8
    assert bc_plus[:n].max() <= 1e-8


def test_normalization_and_orthogonality(basis64):
    problem = ModeProblem(k=1.0, mu=0.5, slip=SlipPair(1.0, 1.0))
    spectrum = solve_spectrum(assemble(problem, basis64))
    A = gram_form(problem.k, basis64)
    G = spectrum.coefficients.T @ A @ spectrum.coefficients
    assert np.abs(np.diag(G) - 1.0).max() <= 1e-10
    assert np.abs(G - np.diag(np.diag(G))).max() <= 1e-8


def test_lambda1_variational_matches_pencil(basis64):
    for k, mu, slip in standard_cases((0.5,)):
        problem = ModeProblem(k=k, mu=mu, slip=slip)
        lam_g = solve_spectrum(assemble(problem, basis64)).lambda1
        lam_v = lambda1_variational(problem, basis64)
        assert abs(lam_v - lam_g) <= 1e-8 * max(abs(lam_g), 1e-6)


def test_characteristic_determinant_requires_positive_lambda():
    problem = ModeProblem(k=1.0, mu=0.5, slip=SlipPair(1.0, 1.0))
    with pytest.raises(ValueError):
        characteristic_determinant(0.0, problem)
    with pytest.raises(ValueError):
        characteristic_determinant(-0.1, problem)


def test_determinant_sign_change_at_root(basis64):
    problem = ModeProblem(k=1.0, mu=0.5, slip=SlipPair(1.0, 1.0))
    lam1 = solve_spectrum(assemble(problem, basis64)).lambda1
    below = characteristic_determinant(0.9 * lam1, problem)
    above = characteristic_determinant(1.1 * lam1, problem)
    assert below * above < 0.0


def test_determinant_roots_validation():
    problem = ModeProblem(k=1.0, mu=0.5, slip=SlipPair(1.0, 1.0))
    with pytest.raises(ValueError):
        determinant_roots(problem, lambda_max=-1.0)
    with pytest.raises(ValueError):
        determinant_roots(problem, grid_points=10)
