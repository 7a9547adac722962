"""Run driver: time loop, recorded diagnostics, checkpoints, restarts.

Checkpoint format (little endian): a 72-byte header of nine 8-byte fields,

    magic "SLIPSIM1" | version u64 | M u64 | P u64 | L f64 | mu f64
    | xi_minus f64 | xi_plus f64 | t f64

followed by the complex state block ((M+1) x P complex128: vorticity rows,
mean-u1 row 0) and, when the run has taken at least one step, the advection
history block of the same shape.  Restarting with the same config resumes
the exact trajectory: the stepper is a pure function of the checkpointed
data, so diagnostics after the restart are bit-identical to the original
run's.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..model import ValidationError
from .energy import boundary_production, gradient_dissipation
from .field import (
    SpectralField2D,
    scalar_inner,
    slip_residuals,
    velocity_norms,
)
from .stepper import ChannelStepper, SimConfig, SimulationBlowupError

__all__ = [
    "RunDiagnostics",
    "RunResult",
    "run",
    "write_checkpoint",
    "read_checkpoint",
    "diagnostics_to_csv",
    "energy_to_csv",
    "check_boundary_conditions",
    "CHECKPOINT_MAGIC",
    "CHECKPOINT_HEADER_BYTES",
]

CHECKPOINT_MAGIC = b"SLIPSIM1"
CHECKPOINT_VERSION = 1
CHECKPOINT_HEADER_BYTES = 72
_FMT = "%.17g"


@dataclass
class RunDiagnostics:
    """Per-record scalar series of one run."""

    times: np.ndarray
    l2_norm: np.ndarray
    h1_norm: np.ndarray
    h2_norm: np.ndarray
    boundary_production: np.ndarray
    dissipation: np.ndarray
    growth_rate_estimate: np.ndarray
    nonlinear_flux: np.ndarray
    energy_rate: np.ndarray
    energy_residual: np.ndarray


@dataclass
class RunResult:
    diagnostics: RunDiagnostics
    final_state: SpectralField2D
    checkpoints: list = field(default_factory=list)


def check_boundary_conditions(state: SpectralField2D, cfg: SimConfig, tol: float = 1.0e-8):
    """Raise unless the streamfunction state satisfies walls + slip to tol."""
    s = cfg.channel
    res = slip_residuals(state, s.mu, s.slip.xi_minus, s.slip.xi_plus)
    scale = max(1.0, float(np.abs(state.coefficients).max(initial=0.0)))
    worst = max(res)
    if worst > tol * scale:
        raise ValidationError(
            f"initial state violates the boundary conditions: residual {worst:.3e} "
            f"exceeds {tol:.0e} x scale {scale:.3e}"
        )


def _growth_rate(times: np.ndarray, l2: np.ndarray) -> np.ndarray:
    """Centered-difference slope of log l2 (one-sided at the ends)."""
    n = times.size
    g = np.zeros(n)
    if n < 2:
        return g
    with np.errstate(divide="ignore"):
        logn = np.log(l2)
    logn[~np.isfinite(logn)] = -745.0  # log of the smallest normal double
    g[0] = (logn[1] - logn[0]) / (times[1] - times[0])
    g[-1] = (logn[-1] - logn[-2]) / (times[-1] - times[-2])
    if n > 2:
        g[1:-1] = (logn[2:] - logn[:-2]) / (times[2:] - times[:-2])
    return g


class _Recorder:
    def __init__(self, stepper: ChannelStepper):
        self.stepper = stepper
        self.rows = []

    def record(self):
        st = self.stepper
        cfg = st.cfg
        u1, u2 = st.velocity()
        l2, h1, h2 = velocity_norms(u1, u2)
        bp = boundary_production(u1, st.slip)
        diss = gradient_dissipation(u1, u2, st.mu)
        visc, adv = st.tendency_split()
        v1, v2 = st.tendency_velocity(visc)
        dedt_v = scalar_inner(u1, v1) + scalar_inner(u2, v2)
        if cfg.linearized:
            dedt_a = 0.0
        else:
            a1, a2 = st.tendency_velocity(adv)
            dedt_a = scalar_inner(u1, a1) + scalar_inner(u2, a2)
        nlf = -dedt_a
        dedt = dedt_v + dedt_a
        resid = abs(dedt - bp + diss + nlf)
        self.rows.append((st.t, l2, h1, h2, bp, diss, nlf, dedt, resid))

    def finish(self) -> RunDiagnostics:
        arr = np.array(self.rows, dtype=float).reshape(-1, 9)
        times, l2 = arr[:, 0], arr[:, 1]
        return RunDiagnostics(
            times=times,
            l2_norm=l2,
            h1_norm=arr[:, 2],
            h2_norm=arr[:, 3],
            boundary_production=arr[:, 4],
            dissipation=arr[:, 5],
            growth_rate_estimate=_growth_rate(times, l2),
            nonlinear_flux=arr[:, 6],
            energy_rate=arr[:, 7],
            energy_residual=arr[:, 8],
        )


def run(
    initial: SpectralField2D,
    cfg: SimConfig,
    out_dir: str | Path | None = None,
    checkpoint_stride: int | None = None,
) -> RunResult:
    """Advance to t_end, recording diagnostics every diagnostics_stride steps.

    Deterministic given (initial, cfg).  Optional checkpoints land in
    ``out_dir``; on a mid-run failure a truncated-run manifest and the
    partial diagnostics are written there before the error propagates.
    """
    check_boundary_conditions(initial, cfg)
    stepper = ChannelStepper(cfg, initial)
    bound = stepper.stability_bound()
    if cfg.dt > bound:
        raise ValidationError(
            f"dt = {cfg.dt:g} exceeds the advective stability bound {bound:g} "
            "estimated from the initial data"
        )
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    rec = _Recorder(stepper)
    rec.record()
    checkpoints = []
    try:
        for m in range(1, cfg.n_steps + 1):
            stepper.step()
            at_record = m % cfg.diagnostics_stride == 0 or m == cfg.n_steps
            if at_record:
                rec.record()
                if stepper.cfl_number() > 1.0:
                    raise SimulationBlowupError(
                        f"advective CFL exceeded 1 at t = {stepper.t:.6g}"
                    )
            if (
                out is not None
                and checkpoint_stride
                and (m % checkpoint_stride == 0 or m == cfg.n_steps)
            ):
                path = out / f"checkpoint_{m:08d}.bin"
                write_checkpoint(path, stepper)
                checkpoints.append(path)
    except Exception as exc:
        if out is not None:
            diagnostics_to_csv(rec.finish(), out / "diagnostics_truncated.csv")
            manifest = {
                "status": "failed",
                "error": f"{type(exc).__name__}: {exc}",
                "t_reached": stepper.t,
                "steps_completed": int(round(stepper.t / cfg.dt)),
            }
            (out / "failure_manifest.json").write_text(
                json.dumps(manifest, indent=2, sort_keys=True) + "\n"
            )
        raise
    return RunResult(
        diagnostics=rec.finish(),
        final_state=stepper.streamfunction(),
        checkpoints=checkpoints,
    )


def write_checkpoint(path: str | Path, stepper: ChannelStepper) -> Path:
    """Binary state dump allowing a bit-exact restart (same SimConfig)."""
    cfg = stepper.cfg
    header = CHECKPOINT_MAGIC + struct.pack(
        "<QQQddddd",
        CHECKPOINT_VERSION,
        cfg.M,
        cfg.P,
        stepper.L,
        stepper.mu,
        stepper.slip.xi_minus,
        stepper.slip.xi_plus,
        stepper.t,
    )
    assert len(header) == CHECKPOINT_HEADER_BYTES
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(stepper._omega).tobytes())
        if stepper._have_history:
            fh.write(np.ascontiguousarray(stepper._n_prev).tobytes())
    return path


def read_checkpoint(path: str | Path, cfg: SimConfig) -> ChannelStepper:
    """Rebuild a stepper mid-run from a checkpoint written with the same cfg."""
    raw = Path(path).read_bytes()
    if len(raw) < CHECKPOINT_HEADER_BYTES or raw[:8] != CHECKPOINT_MAGIC:
        raise ValidationError(f"{path}: not a checkpoint file")
    version, M, P = struct.unpack("<QQQ", raw[8:32])
    L, mu, xi_m, xi_p, t = struct.unpack("<ddddd", raw[32:72])
    if version != CHECKPOINT_VERSION:
        raise ValidationError(f"{path}: unsupported checkpoint version {version}")
    ch = cfg.channel
    same = (
        M == cfg.M
        and P == cfg.P
        and L == ch.L
        and mu == ch.mu
        and xi_m == ch.slip.xi_minus
        and xi_p == ch.slip.xi_plus
    )
    if not same:
        raise ValidationError(
            f"{path}: checkpoint was written for (M={M}, P={P}, L={L:g}, mu={mu:g}, "
            f"xi=({xi_m:g}, {xi_p:g})), which differs from the supplied config"
        )
    block = (M + 1) * P * np.dtype(complex).itemsize
    body = raw[CHECKPOINT_HEADER_BYTES:]
    if len(body) not in (block, 2 * block):
        raise ValidationError(f"{path}: truncated checkpoint body")
    zero = SpectralField2D(np.zeros((M + 1, P), dtype=complex), ch.L)
    stepper = ChannelStepper(cfg, zero)
    stepper._omega = np.frombuffer(body[:block], dtype=complex).reshape(M + 1, P).copy()
    if len(body) == 2 * block:
        stepper._n_prev = (
            np.frombuffer(body[block:], dtype=complex).reshape(M + 1, P).copy()
        )
        stepper._have_history = True
    stepper.t = t
    return stepper


def diagnostics_to_csv(diag: RunDiagnostics, path: str | Path) -> Path:
    """Columns: t,l2,h1,h2,boundary_production,dissipation,growth_rate."""
    path = Path(path)
    cols = (
        diag.times,
        diag.l2_norm,
        diag.h1_norm,
        diag.h2_norm,
        diag.boundary_production,
        diag.dissipation,
        diag.growth_rate_estimate,
    )
    lines = ["t,l2,h1,h2,boundary_production,dissipation,growth_rate"]
    for row in zip(*cols):
        lines.append(",".join(_FMT % v for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def energy_to_csv(diag: RunDiagnostics, path: str | Path) -> Path:
    """Energy budget columns: t,dEdt,boundary_production,dissipation,
    nonlinear_flux,residual."""
    path = Path(path)
    cols = (
        diag.times,
        diag.energy_rate,
        diag.boundary_production,
        diag.dissipation,
        diag.nonlinear_flux,
        diag.energy_residual,
    )
    lines = ["t,dEdt,boundary_production,dissipation,nonlinear_flux,residual"]
    for row in zip(*cols):
        lines.append(",".join(_FMT % v for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path
