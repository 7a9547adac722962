"""Shared fixtures: Galerkin bases, the standard case grid, session experiments.

The separation experiments are expensive (the full sweep runs three deltas
at M = 32, P = 64 for about a minute), so they are session-scoped and
shared between the experiment tests and the acceptance gate.
"""

import time

import pytest

from slipflow.model import ChannelConfig, SlipPair

STANDARD_SLIP_PAIRS = (SlipPair(1.0, 1.0), SlipPair(0.5, 3.0))
STANDARD_KS = (0.5, 1.0, 2.0)


def standard_cases(factors=(0.5, 0.9)):
    """(k, mu, slip) triples with mu at the given fractions of mu_c(k, slip)."""
    from slipflow.critical import mu_c_closed_form

    cases = []
    for slip in STANDARD_SLIP_PAIRS:
        for k in STANDARD_KS:
            mu_c = mu_c_closed_form(k, slip)
            for f in factors:
                cases.append((k, f * mu_c, slip))
    return cases


@pytest.fixture(scope="session")
def basis32():
    from slipflow.numerics import build_basis

    return build_basis(32)


@pytest.fixture(scope="session")
def basis48():
    from slipflow.numerics import build_basis

    return build_basis(48)


@pytest.fixture(scope="session")
def basis64():
    from slipflow.numerics import build_basis

    return build_basis(64)


@pytest.fixture(scope="session")
def acceptance_channel():
    """L = 1, slip (1, 1), mu = 0.5 = half the global critical viscosity."""
    return ChannelConfig(L=1.0, mu=0.5, slip=SlipPair(1.0, 1.0))


@pytest.fixture(scope="session")
def acceptance_experiment(tmp_path_factory, acceptance_channel):
    """The full separation sweep at deltas 1e-5, 1e-6, 1e-7 (about a minute)."""
    from slipflow.sim import SimConfig, run_separation_experiment

    sim = SimConfig(
        channel=acceptance_channel, M=32, P=64, dt=4.0e-3, diagnostics_stride=25
    )
    out = tmp_path_factory.mktemp("acceptance_experiment")
    t0 = time.perf_counter()
    exp = run_separation_experiment(
        acceptance_channel, sim=sim, deltas=(1.0e-5, 1.0e-6, 1.0e-7), out_dir=out
    )
    wall = time.perf_counter() - t0
    return exp, out, wall


@pytest.fixture(scope="session")
def smoke_experiment(tmp_path_factory):
    """Cheap two-unstable-mode sweep at mu = 0.1, nonempty reduced packet."""
    from slipflow.sim import SimConfig, run_separation_experiment

    channel = ChannelConfig(L=1.0, mu=0.1, slip=SlipPair(1.0, 1.0))
    sim = SimConfig(channel=channel, M=16, P=56, dt=1.0e-3, diagnostics_stride=25)
    out = tmp_path_factory.mktemp("smoke_experiment")
    exp = run_separation_experiment(
        channel, sim=sim, deltas=(1.0e-3, 1.0e-4), basis_size=48, n_max=12,
        out_dir=out,
    )
    return exp, out
