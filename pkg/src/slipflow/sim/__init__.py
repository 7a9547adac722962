"""Nonlinear channel solver: spectral fields, stepper, runs, experiments."""

from .field import (
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
from .stepper import (
    ChannelStepper,
    InfluenceConditioningError,
    SimConfig,
    SimulationBlowupError,
    step,
)
from .run import (
    RunDiagnostics,
    RunResult,
    check_boundary_conditions,
    diagnostics_to_csv,
    energy_to_csv,
    read_checkpoint,
    run,
    write_checkpoint,
)
from .energy import (
    EnergyCheck,
    boundary_production,
    energy_inequality_check,
    gradient_dissipation,
    random_solenoidal_field,
)
from .experiment import (
    DeltaOutcome,
    GateReport,
    SeparationExperiment,
    run_separation_experiment,
    write_experiment_outputs,
)

__all__ = [
    "SpectralField2D",
    "cgl_nodes",
    "divergence_max",
    "field_from_mode_profile",
    "field_from_values",
    "scalar_inner",
    "scalar_norms",
    "slip_residuals",
    "velocity_from_streamfunction",
    "velocity_norms",
    "ChannelStepper",
    "InfluenceConditioningError",
    "SimConfig",
    "SimulationBlowupError",
    "step",
    "RunDiagnostics",
    "RunResult",
    "check_boundary_conditions",
    "diagnostics_to_csv",
    "energy_to_csv",
    "read_checkpoint",
    "run",
    "write_checkpoint",
    "EnergyCheck",
    "boundary_production",
    "energy_inequality_check",
    "gradient_dissipation",
    "random_solenoidal_field",
    "DeltaOutcome",
    "GateReport",
    "SeparationExperiment",
    "run_separation_experiment",
    "write_experiment_outputs",
]
