"""Two-branch separation experiment for the nonlinear instability statement.

The experiment seeds the nonlinear solver with delta times the unstable mode
packet u^N(0) and with delta times the reduced packet (the same sum minus its
fastest mode), runs both to the escape time T^delta defined by
delta * F_N(T^delta) = epsilon0, and verifies with measured constants that

  * the H2 sizes of both branches stay below 2 * C1 * delta0  (first gate),
  * the L2 sizes stay below 3 * C1 * delta * F_N(t)           (second gate),
  * the final separation ||u_full - u_reduced||_L2 is at least
    0.5 * delta * |c_N| * exp(lambda_N * t),
  * the distance from the linearized evolution scales like delta^2
    (slope 2 in a log-log fit across the delta sweep),
  * T^delta grows by ln(10) / lambda_N per decade of delta.

Each branch is integrated alongside a linearized twin started from the same
initial data, all four with the same step size, so the recorded difference
from linear isolates the quadratic (advection) effect rather than the time
discretization error of the linear propagator.  The nonlinear branches lock
the odd-in-x1 symmetry class of the packet (pure imaginary mode rows, zero
mean flow): the mean-shear diffusion mode grows much faster than the packet
(rate 2.13 versus 0.47 at the reference configuration), so unlocked roundoff
seeding would contaminate the long delta = 1e-7 horizon.

With a single unstable mode the reduced packet is empty and its branch is
identically zero; the driver then skips the two reduced integrations (zero
is an exact fixed point) and records exact zeros instead.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ..model import ChannelConfig, LatticeSweep, ModeProblem, ValidationError
from ..critical import mu_c_global
from ..numerics import build_basis
from ..spectrum import assemble, solve_spectrum
from ..modes import (
    GrowthEnvelope,
    ModePacket,
    build_packet,
    compute_capital_lambda,
    default_epsilon0,
    escape_time,
    packet_envelope_value,
    packet_streamfunction_profile,
    reduced_packet,
)
from .field import (
    SpectralField2D,
    _sq_l2,
    field_from_mode_profile,
    velocity_from_streamfunction,
    velocity_norms,
)
from .run import _FMT, _Recorder, diagnostics_to_csv
from .stepper import (
    ChannelStepper,
    InfluenceConditioningError,
    SimConfig,
    SimulationBlowupError,
)

__all__ = [
    "GateReport",
    "DeltaOutcome",
    "SeparationExperiment",
    "run_separation_experiment",
    "write_experiment_outputs",
]


@dataclass
class GateReport:
    """Outcome of one monitored inequality over the recorded times."""

    held: bool
    first_violation_time: float | None
    max_ratio: float


@dataclass
class DeltaOutcome:
    """Everything measured for one value of delta."""

    delta: float
    t_delta: float
    t_final: float
    steps: np.ndarray
    times: np.ndarray
    sep_l2: np.ndarray
    linear_prediction: np.ndarray
    d_from_linear_full: np.ndarray
    d_from_linear_reduced: np.ndarray
    delta_f: np.ndarray
    gate_h2: GateReport
    gate_l2: GateReport
    separation: float
    bound: float
    separation_ok: bool
    c2: float
    c3: float
    c4: float
    m0: float
    diagnostics: object = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return (
            self.error is None
            and self.gate_h2.held
            and self.gate_l2.held
            and self.separation_ok
        )


@dataclass
class SeparationExperiment:
    """Completed experiment: packet data, per-delta outcomes, sweep fits."""

    channel: ChannelConfig
    k: float
    capital_lambda: float
    lambdas: np.ndarray
    coefficients: np.ndarray
    epsilon0: float
    delta0: float
    c1: float
    deltas: tuple
    outcomes: list
    slope: float
    slope_ok: bool
    escape_increments: np.ndarray
    escape_expected: float
    escape_ok: bool

    @property
    def verdict(self) -> bool:
        return (
            all(o.ok for o in self.outcomes)
            and self.slope_ok
            and self.escape_ok
        )


def _zero_velocity(M: int, P: int, L: float):
    z = SpectralField2D(np.zeros((M + 1, P), dtype=complex), L)
    return z, z


def _diff_l2(a, b) -> float:
    return math.sqrt(_sq_l2(a[0] - b[0]) + _sq_l2(a[1] - b[1]))


def _packet_initial_field(packet: ModePacket, sim: SimConfig) -> SpectralField2D:
    profile = packet_streamfunction_profile(packet)
    n_mode = int(round(packet.modes[0].problem.k * sim.channel.L))
    return field_from_mode_profile(
        profile, n_mode=n_mode, M=sim.M, P=sim.P, L=sim.channel.L, kind="sin"
    )


def _gate(times, lhs, rhs) -> GateReport:
    ratio = np.divide(lhs, rhs, out=np.zeros_like(lhs), where=rhs > 0.0)
    bad = np.nonzero(lhs > rhs)[0]
    if bad.size:
        return GateReport(False, float(times[bad[0]]), float(ratio.max()))
    return GateReport(True, None, float(ratio.max()))


def _run_one_delta(
    delta: float,
    packet: ModePacket,
    reduced: ModePacket,
    sim: SimConfig,
    epsilon0: float,
    c1: float,
    delta0: float,
) -> DeltaOutcome:
    lam_top = packet.top_lambda
    c_top = abs(float(packet.coefficients[-1]))
    t_delta = escape_time(GrowthEnvelope(packet, delta, epsilon0))
    dt = sim.dt
    n_steps = int(math.ceil(t_delta / dt - 1.0e-12))
    t_run = n_steps * dt

    base = replace(sim, t_end=t_run)
    cfg_nl = replace(base, linearized=False, lock_symmetry=True)
    cfg_li = replace(base, linearized=True, lock_symmetry=False)

    full0 = _packet_initial_field(packet, sim) * delta
    steppers = {
        "nf": ChannelStepper(cfg_nl, full0),
        "lf": ChannelStepper(cfg_li, full0),
    }
    reduced_active = reduced.count > 0
    if reduced_active:
        red0 = _packet_initial_field(reduced, sim) * delta
        steppers["nr"] = ChannelStepper(cfg_nl, red0)
        steppers["lr"] = ChannelStepper(cfg_li, red0)
    zero_pair = _zero_velocity(sim.M, sim.P, sim.channel.L)

    recorder = _Recorder(steppers["nf"])
    stride = sim.diagnostics_stride
    rec_steps, rows = [], []

    def record(m: int):
        vel = {name: st.velocity() for name, st in steppers.items()}
        u_nf, u_lf = vel["nf"], vel["lf"]
        u_nr = vel.get("nr", zero_pair)
        u_lr = vel.get("lr", zero_pair)
        t = steppers["nf"].t
        f_t = delta * packet_envelope_value(packet, t)
        l2_nf, _, h2_nf = velocity_norms(*u_nf)
        if reduced_active:
            l2_nr, _, h2_nr = velocity_norms(*u_nr)
        else:
            l2_nr = h2_nr = 0.0
        rec_steps.append(m)
        rows.append(
            (
                t,
                _diff_l2(u_nf, u_nr),
                _diff_l2(u_lf, u_lr),
                _diff_l2(u_nf, u_lf),
                _diff_l2(u_nr, u_lr) if reduced_active else 0.0,
                f_t,
                l2_nf + l2_nr,
                h2_nf + h2_nr,
            )
        )
        recorder.record()
        if steppers["nf"].cfl_number() > 1.0:
            raise SimulationBlowupError(
                f"advective CFL exceeded 1 at t = {t:.6g}"
            )

    record(0)
    for m in range(1, n_steps + 1):
        for st in steppers.values():
            st.step()
        if m % stride == 0 or m == n_steps:
            record(m)

    arr = np.array(rows)
    times = arr[:, 0]
    sep = arr[:, 1]
    linpred = arr[:, 2]
    d_full = arr[:, 3]
    d_red = arr[:, 4]
    delta_f = arr[:, 5]
    l2_sum = arr[:, 6]
    h2_sum = arr[:, 7]

    gate_h2 = _gate(times, h2_sum, np.full_like(h2_sum, 2.0 * c1 * delta0))
    gate_l2 = _gate(times, l2_sum, 3.0 * c1 * delta_f)

    separation = float(sep[-1])
    t_final = float(times[-1])
    bound = 0.5 * delta * c_top * math.exp(lam_top * t_final)
    with np.errstate(divide="ignore", invalid="ignore"):
        c2 = float(np.max(h2_sum / delta_f))
        c3_candidates = np.maximum(d_full, d_red)[delta_f > 0.0]
        c3 = float(np.max(c3_candidates / delta_f[delta_f > 0.0] ** 2))
    c4 = epsilon0 / (delta * c_top * math.exp(lam_top * t_delta))
    return DeltaOutcome(
        delta=delta,
        t_delta=t_delta,
        t_final=t_final,
        steps=np.array(rec_steps),
        times=times,
        sep_l2=sep,
        linear_prediction=linpred,
        d_from_linear_full=d_full,
        d_from_linear_reduced=d_red,
        delta_f=delta_f,
        gate_h2=gate_h2,
        gate_l2=gate_l2,
        separation=separation,
        bound=bound,
        separation_ok=bool(separation >= bound),
        c2=c2,
        c3=c3,
        c4=c4,
        m0=separation / epsilon0,
        diagnostics=recorder.finish(),
    )


def _failed_outcome(delta: float, message: str) -> DeltaOutcome:
    empty = np.array([])
    gate = GateReport(False, None, math.nan)
    return DeltaOutcome(
        delta=delta,
        t_delta=math.nan,
        t_final=math.nan,
        steps=empty,
        times=empty,
        sep_l2=empty,
        linear_prediction=empty,
        d_from_linear_full=empty,
        d_from_linear_reduced=empty,
        delta_f=empty,
        gate_h2=gate,
        gate_l2=gate,
        separation=math.nan,
        bound=math.nan,
        separation_ok=False,
        c2=math.nan,
        c3=math.nan,
        c4=math.nan,
        m0=math.nan,
        error=message,
    )


def _fit_slope(outcomes) -> float:
    """Slope of log(d_from_linear_full) vs log(delta) at a shared fixed time."""
    done = [o for o in outcomes if o.error is None]
    if len(done) < 2:
        return math.nan
    stride_steps = [int(o.steps[1]) for o in done if o.steps.size > 1]
    if not stride_steps:
        return math.nan
    m_fix = min(int(o.steps[-1]) for o in done)
    m_fix = (m_fix // stride_steps[0]) * stride_steps[0]
    if m_fix <= 0:
        return math.nan
    xs, ys = [], []
    for o in done:
        idx = np.nonzero(o.steps == m_fix)[0]
        if idx.size == 0:
            return math.nan
        d = float(o.d_from_linear_full[idx[0]])
        if d <= 0.0:
            return math.nan
        xs.append(math.log(o.delta))
        ys.append(math.log(d))
    return float(np.polyfit(xs, ys, 1)[0])


def run_separation_experiment(
    channel: ChannelConfig,
    sim: SimConfig | None = None,
    deltas=(1.0e-5, 1.0e-6, 1.0e-7),
    *,
    epsilon0: float | None = None,
    delta0: float = 0.02,
    basis_size: int = 48,
    n_max: int = 8,
    packet_count: int | None = None,
    coefficients=None,
    out_dir=None,
) -> SeparationExperiment:
    """Run the full delta sweep and return the completed experiment record.

    Preconditions: the configuration must be unstable (mu below the global
    critical viscosity) and every delta must satisfy delta * F_N(0) <
    epsilon0.  A failure inside one delta run (blow-up, CFL loss) is
    recorded in that outcome's ``error`` field; the remaining deltas still
    run.  When ``out_dir`` is given the per-delta series, diagnostics, and
    manifests are written there.
    """
    mu_threshold = mu_c_global(channel.slip)
    if not channel.mu < mu_threshold:
        raise ValidationError(
            f"stable regime: viscosity {channel.mu:g} is not below the critical "
            f"viscosity {mu_threshold:g}; no instability to measure"
        )
    if sim is None:
        sim = SimConfig(channel=channel)
    if sim.channel != channel:
        raise ValidationError("sim.channel must match the experiment channel")
    if not deltas:
        raise ValidationError("need at least one delta")
    deltas = tuple(float(d) for d in deltas)
    if any(not 0.0 < d < delta0 for d in deltas):
        raise ValidationError(f"every delta must lie in (0, delta0 = {delta0:g})")

    basis = build_basis(basis_size)
    sweep = LatticeSweep(L=channel.L, mu=channel.mu, slip=channel.slip, n_max=n_max)
    cap_lambda, k_star = compute_capital_lambda(sweep, basis)
    problem = ModeProblem(k=k_star, mu=channel.mu, slip=channel.slip)
    spectrum = solve_spectrum(assemble(problem, basis))
    packet = build_packet(spectrum, count=packet_count, coefficients=coefficients)
    if packet.count == 0:
        raise ValidationError(
            f"no unstable mode at k = {k_star:g} despite mu < mu_c; "
            "increase the basis size"
        )
    keep = packet.lambdas > 0.5 * cap_lambda
    if not keep.all():
        warnings.warn(
            "dropping packet modes with growth rate <= Lambda/2; the quadratic "
            "error bound requires 2*lambda_j > Lambda",
            RuntimeWarning,
        )
        idx = int(np.nonzero(keep)[0][0])
        packet = ModePacket(
            modes=packet.modes[idx:], coefficients=packet.coefficients[idx:]
        )
    reduced = reduced_packet(packet)

    unit_full = _packet_initial_field(packet, sim)
    u1, u2 = velocity_from_streamfunction(unit_full)
    l2_0, _, h2_0 = velocity_norms(u1, u2)
    c1 = h2_0
    if epsilon0 is None:
        epsilon0 = default_epsilon0(packet, channel.L)
    f0 = packet_envelope_value(packet, 0.0)
    for d in deltas:
        if not d * f0 < epsilon0:
            raise ValidationError(
                f"delta = {d:g} gives delta * F_N(0) = {d * f0:g} >= epsilon0 = "
                f"{epsilon0:g}; the escape time is not positive"
            )

    outcomes = []
    for d in deltas:
        try:
            outcomes.append(
                _run_one_delta(d, packet, reduced, sim, epsilon0, c1, delta0)
            )
        except (
            SimulationBlowupError,
            InfluenceConditioningError,
            ValidationError,
            FloatingPointError,
        ) as exc:
            outcomes.append(_failed_outcome(d, f"{type(exc).__name__}: {exc}"))

    slope = _fit_slope(outcomes)
    slope_ok = bool(abs(slope - 2.0) <= 0.2) if math.isfinite(slope) else False

    lam_top = packet.top_lambda
    expected = math.log(10.0) / lam_top
    increments, decade_ok = [], []
    order = np.argsort(deltas)[::-1]
    for a, b in zip(order[:-1], order[1:]):
        oa, ob = outcomes[a], outcomes[b]
        if oa.error or ob.error:
            continue
        ratio = deltas[a] / deltas[b]
        if abs(ratio - 10.0) > 1.0e-9 * 10.0:
            continue
        inc = ob.t_delta - oa.t_delta
        increments.append(inc)
        decade_ok.append(abs(inc - expected) <= 0.05 * expected)
    escape_ok = bool(decade_ok) and all(decade_ok)

    exp = SeparationExperiment(
        channel=channel,
        k=k_star,
        capital_lambda=cap_lambda,
        lambdas=packet.lambdas,
        coefficients=np.asarray(packet.coefficients, dtype=float),
        epsilon0=float(epsilon0),
        delta0=float(delta0),
        c1=float(c1),
        deltas=deltas,
        outcomes=outcomes,
        slope=slope,
        slope_ok=slope_ok,
        escape_increments=np.array(increments),
        escape_expected=expected,
        escape_ok=escape_ok,
    )
    if out_dir is not None:
        write_experiment_outputs(exp, out_dir)
    return exp


def _series_csv(o: DeltaOutcome) -> str:
    lines = ["t,sep_l2,linear_prediction,d_from_linear_full,d_from_linear_reduced"]
    for i in range(o.times.size):
        vals = (
            o.times[i],
            o.sep_l2[i],
            o.linear_prediction[i],
            o.d_from_linear_full[i],
            o.d_from_linear_reduced[i],
        )
        lines.append(",".join(_FMT % v for v in vals))
    return "\n".join(lines) + "\n"


def _gate_dict(g: GateReport) -> dict:
    return {
        "held": g.held,
        "first_violation_time": g.first_violation_time,
        "max_ratio": None if math.isnan(g.max_ratio) else g.max_ratio,
    }


def _outcome_manifest(o: DeltaOutcome, exp: SeparationExperiment) -> dict:
    def num(x):
        return None if (isinstance(x, float) and math.isnan(x)) else x

    return {
        "delta": o.delta,
        "epsilon0": exp.epsilon0,
        "t_delta": num(o.t_delta),
        "t_final": num(o.t_final),
        "gate_h2": _gate_dict(o.gate_h2),
        "gate_l2": _gate_dict(o.gate_l2),
        "constants": {
            "c1": exp.c1,
            "c2": num(o.c2),
            "c3": num(o.c3),
            "c4": num(o.c4),
            "m0": num(o.m0),
            "delta0": exp.delta0,
        },
        "separation": num(o.separation),
        "bound": num(o.bound),
        "separation_ok": o.separation_ok,
        "verdict": o.ok,
        "error": o.error,
    }


def delta_dir_name(delta: float) -> str:
    return f"delta_{delta:.0e}"


def write_experiment_outputs(exp: SeparationExperiment, out_dir) -> list:
    """Write per-delta subdirectories plus the sweep summary; return paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for o in exp.outcomes:
        sub = out / delta_dir_name(o.delta)
        sub.mkdir(exist_ok=True)
        manifest = sub / "manifest.json"
        manifest.write_text(
            json.dumps(_outcome_manifest(o, exp), indent=2, sort_keys=True) + "\n"
        )
        written.append(manifest)
        if o.error is None:
            series = sub / "separation.csv"
            series.write_text(_series_csv(o))
            diag = diagnostics_to_csv(o.diagnostics, sub / "diagnostics.csv")
            written.extend([series, diag])
    lines = ["delta,T_delta,separation,bound,verdict"]
    for o in exp.outcomes:
        lines.append(
            ",".join(
                [
                    _FMT % o.delta,
                    _FMT % o.t_delta,
                    _FMT % o.separation,
                    _FMT % o.bound,
                    "true" if o.ok else "false",
                ]
            )
        )
    summary = out / "summary.csv"
    summary.write_text("\n".join(lines) + "\n")
    written.append(summary)
    manifest = {
        "channel": {
            "period_length": exp.channel.L,
            "viscosity": exp.channel.mu,
            "xi_minus": exp.channel.slip.xi_minus,
            "xi_plus": exp.channel.slip.xi_plus,
        },
        "k": exp.k,
        "capital_lambda": exp.capital_lambda,
        "lambdas": list(exp.lambdas),
        "coefficients": list(exp.coefficients),
        "epsilon0": exp.epsilon0,
        "delta0": exp.delta0,
        "c1": exp.c1,
        "deltas": list(exp.deltas),
        "slope": None if math.isnan(exp.slope) else exp.slope,
        "slope_ok": exp.slope_ok,
        "escape_increments": list(exp.escape_increments),
        "escape_expected": exp.escape_expected,
        "escape_ok": exp.escape_ok,
        "verdict": exp.verdict,
    }
    mpath = out / "experiment_manifest.json"
    mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    written.append(mpath)
    return written
