"""Command line driver for the channel instability toolkit.

Subcommands: critical (viscosity threshold curve), spectrum (growth rates
at one wavenumber plus the shooting-determinant cross-check), dispersion
(top rate over the wavenumber lattice), modes (packet field export),
simulate (time stepping with diagnostics), experiment (two-solution
separation sweep), verify (deterministic property suites).

Only the standard library is imported at module level; numpy, scipy and
the compute modules load lazily inside the handlers.  That lets the
global --threads flag pin the BLAS/OpenMP thread pools through the usual
environment variables, which only works while numpy is not yet imported,
i.e. in a fresh process.

Configuration resolution, lowest to highest precedence: built-in defaults
(period_length 1, viscosity 0.5, slip 1/1), the --config JSON file,
SLIPFLOW_* environment variables (SLIPFLOW_VISCOSITY=0.2,
SLIPFLOW_SLIP__XI_PLUS=2 for nested keys), then command-line flags.
Every command writes a run_manifest.json carrying a sha256 digest of the
fully resolved configuration.  Rerunning an identical invocation
reproduces every output file byte for byte (floats are printed with 17
significant digits); wall-clock timings go to stderr, never into files.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

TOOL_VERSION = "slipflow 0.1.0"

_FMT = "%.17g"

_DEFAULT_CONFIG = {
    "period_length": 1.0,
    "viscosity": 0.5,
    "slip": {"xi_minus": 1.0, "xi_plus": 1.0},
}

_SIM_KEYS = {
    "M": int,
    "P": int,
    "dt": float,
    "t_end": float,
    "dealias": bool,
    "linearized": bool,
    "lock_symmetry": bool,
    "diagnostics_stride": int,
    "cfl_limit": float,
}

_EXPERIMENT_KEYS = {
    "deltas",
    "epsilon0",
    "delta0",
    "basis_size",
    "n_max",
    "packet_count",
    "coefficients",
}


def _merge_config(base: dict, extra: dict) -> dict:
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            base[key].update(value)
        else:
            base[key] = value
    return base


_TOP_LEVEL_KEYS = {"period_length", "viscosity", "slip", "sim", "experiment"}


def _resolve_raw(ns) -> dict:
    """Defaults <- config file <- environment <- channel flags, as a dict."""
    from .model import ConfigError, apply_env_overrides, load_config

    raw = json.loads(json.dumps(_DEFAULT_CONFIG))
    if ns.config is not None:
        _merge_config(raw, load_config(ns.config, environ={}))
    raw = apply_env_overrides(raw)
    unknown = sorted(set(raw) - _TOP_LEVEL_KEYS)
    if unknown:
        raise ConfigError(f"unknown configuration keys {unknown}")
    if isinstance(raw.get("slip"), dict):
        bad = sorted(set(raw["slip"]) - {"xi_minus", "xi_plus"})
        if bad:
            raise ConfigError(f"slip: unknown keys {bad}")
    if getattr(ns, "length", None) is not None:
        raw["period_length"] = ns.length
    if getattr(ns, "mu", None) is not None:
        raw["viscosity"] = ns.mu
    if getattr(ns, "xi", None) is not None:
        if not isinstance(raw.get("slip"), dict):
            raw["slip"] = {}
        raw["slip"]["xi_minus"], raw["slip"]["xi_plus"] = ns.xi
    return raw


def _sim_config(raw: dict, ns, channel):
    """SimConfig from the config's sim section plus command-line overrides."""
    from .model import ConfigError
    from .sim import SimConfig

    section = raw.get("sim", {})
    if not isinstance(section, dict):
        raise ConfigError("sim: must be a section (JSON object)")
    unknown = sorted(set(section) - set(_SIM_KEYS))
    if unknown:
        raise ConfigError(f"sim: unknown keys {unknown}")
    merged = dict(section)
    for attr, key in (
        ("m", "M"),
        ("p", "P"),
        ("dt", "dt"),
        ("t_end", "t_end"),
        ("stride", "diagnostics_stride"),
    ):
        value = getattr(ns, attr, None)
        if value is not None:
            merged[key] = value
    if getattr(ns, "linearized", False):
        merged["linearized"] = True
    clean = {}
    for key, value in merged.items():
        try:
            clean[key] = _SIM_KEYS[key](value)
        except (TypeError, ValueError):
            raise ConfigError(f"sim.{key}: bad value {value!r}")
    return SimConfig(channel=channel, **clean)


def _experiment_settings(raw: dict, ns) -> dict:
    from .model import ConfigError

    section = raw.get("experiment", {})
    if not isinstance(section, dict):
        raise ConfigError("experiment: must be a section (JSON object)")
    unknown = sorted(set(section) - _EXPERIMENT_KEYS)
    if unknown:
        raise ConfigError(f"experiment: unknown keys {unknown}")
    merged = dict(section)
    for attr, key in (
        ("deltas", "deltas"),
        ("epsilon0", "epsilon0"),
        ("delta0", "delta0"),
        ("basis", "basis_size"),
        ("n_max", "n_max"),
        ("count", "packet_count"),
    ):
        value = getattr(ns, attr, None)
        if value is not None:
            merged[key] = value
    merged.setdefault("deltas", [1.0e-5, 1.0e-6, 1.0e-7])
    merged.setdefault("delta0", 0.02)
    merged.setdefault("basis_size", 48)
    merged.setdefault("n_max", 8)
    merged["deltas"] = [float(d) for d in merged["deltas"]]
    return merged


def _config_digest(payload: dict) -> str:
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _write_csv(path: Path, lines) -> None:
    path.write_text("\n".join(lines) + "\n")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_manifest(out: Path, command: str, digest: str, outputs) -> None:
    manifest = {
        "command": command,
        "config_digest": digest,
        "tool_version": TOOL_VERSION,
        "outputs": list(outputs),
    }
    _write_json(out / "run_manifest.json", manifest)


def _cmd_critical(ns, out, channel):
    from .critical import critical_curve, mu_c_global

    k_min, k_max = ns.k
    curve = critical_curve(channel.slip, k_min, k_max, ns.points)
    mu_global = mu_c_global(channel.slip)
    lines = ["k,mu_c"]
    for k, mu in zip(curve.ks, curve.mu_cs):
        lines.append(_FMT % k + "," + _FMT % mu)
    lines.append("# mu_c_global = " + _FMT % mu_global)
    _write_csv(out / "critical.csv", lines)
    print(f"critical: {ns.points} samples on [{k_min:g}, {k_max:g}], "
          f"mu_c_global = {mu_global:.12g}")
    args = {"k_min": k_min, "k_max": k_max, "points": ns.points}
    return 0, ["critical.csv"], args


def _cmd_spectrum(ns, out, channel):
    import numpy as np

    from .model import ModeProblem
    from .numerics import build_basis
    from .spectrum import assemble, determinant_roots, solve_spectrum

    problem = ModeProblem(k=ns.k, mu=channel.mu, slip=channel.slip)
    spectrum = solve_spectrum(assemble(problem, build_basis(ns.basis)))
    lines = ["n,lambda"]
    for n, lam in enumerate(spectrum.eigenvalues, start=1):
        lines.append("%d," % n + _FMT % lam)
    _write_csv(out / "spectrum.csv", lines)

    roots = np.sort(np.asarray(determinant_roots(problem).roots))[::-1]
    n_gal = spectrum.positive_count
    n_pairs = min(n_gal, roots.size)
    if n_pairs:
        gal = spectrum.eigenvalues[:n_pairs]
        rel = np.abs(gal - roots[:n_pairs]) / np.abs(roots[:n_pairs])
        max_rel = float(rel.max())
    else:
        max_rel = 0.0
    report = {
        "positive_count_galerkin": int(n_gal),
        "positive_count_oracle": int(roots.size),
        "max_rel_mismatch": max_rel,
    }
    _write_json(out / "spectrum_report.json", report)
    ok = n_gal == roots.size and max_rel <= 1.0e-6
    print(f"spectrum: k = {ns.k:g}, positive count {n_gal} (oracle {roots.size}), "
          f"max relative mismatch {max_rel:.3e} -> {'ok' if ok else 'MISMATCH'}")
    args = {"k": ns.k, "basis": ns.basis}
    return (0 if ok else 1), ["spectrum.csv", "spectrum_report.json"], args


def _cmd_dispersion(ns, out, channel):
    from .critical import mu_c_closed_form
    from .model import LatticeSweep
    from .numerics import build_basis
    from .spectrum import assemble, solve_spectrum

    sweep = LatticeSweep(L=channel.L, mu=channel.mu, slip=channel.slip, n_max=ns.n_max)
    basis = build_basis(ns.basis)
    lines = ["k,lambda1,mu_c"]
    best_k, best_lam = None, None
    for n in range(1, ns.n_max + 1):
        problem = sweep.problem(n)
        lam1 = solve_spectrum(assemble(problem, basis)).lambda1
        mu_c = mu_c_closed_form(problem.k, channel.slip)
        lines.append(",".join(_FMT % v for v in (problem.k, lam1, mu_c)))
        if best_lam is None or lam1 > best_lam:
            best_k, best_lam = problem.k, lam1
    _write_csv(out / "dispersion.csv", lines)
    print(f"dispersion: {ns.n_max} lattice wavenumbers, "
          f"max lambda1 = {best_lam:.12g} at k = {best_k:g}")
    args = {"n_max": ns.n_max, "basis": ns.basis}
    return 0, ["dispersion.csv"], args


def _cmd_modes(ns, out, channel):
    from .model import ModeProblem, ValidationError
    from .modes import (
        Grid2D,
        GrowthEnvelope,
        build_packet,
        default_epsilon0,
        escape_time,
        sample_packet_field,
    )
    from .numerics import build_basis
    from .spectrum import assemble, solve_spectrum

    k = ns.k if ns.k is not None else 1.0 / channel.L
    problem = ModeProblem(k=k, mu=channel.mu, slip=channel.slip)
    spectrum = solve_spectrum(assemble(problem, build_basis(ns.basis)))
    packet = build_packet(spectrum, count=ns.count)
    if packet.count == 0:
        raise ValidationError(
            f"no unstable modes at k = {k:g}, mu = {channel.mu:g}; nothing to export"
        )
    n1, n2 = ns.grid
    grid = Grid2D(n1=n1, n2=n2, L=channel.L)
    u1, u2, q = sample_packet_field(packet, ns.t, grid)
    x1, x2 = grid.x1, grid.x2
    lines = ["x1,x2,u1,u2,q"]
    for i in range(n1):
        for j in range(n2):
            lines.append(
                ",".join(_FMT % v for v in (x1[i], x2[j], u1[i, j], u2[i, j], q[i, j]))
            )
    _write_csv(out / "modes.csv", lines)

    epsilon0 = default_epsilon0(packet, channel.L)
    t_delta = escape_time(GrowthEnvelope(packet=packet, delta=ns.delta, epsilon0=epsilon0))
    manifest = {
        "k": k,
        "mu": channel.mu,
        "slip": {"xi_minus": channel.slip.xi_minus, "xi_plus": channel.slip.xi_plus},
        "lambdas": [float(lam) for lam in packet.lambdas],
        "coefficients": [float(c) for c in packet.coefficients],
        "epsilon0": epsilon0,
        "delta": ns.delta,
        "T_delta": t_delta,
    }
    _write_json(out / "packet.json", manifest)
    print(f"modes: {packet.count} unstable mode(s) at k = {k:g}, "
          f"T_delta({ns.delta:g}) = {t_delta:.12g}")
    args = {
        "k": k,
        "count": ns.count,
        "delta": ns.delta,
        "t": ns.t,
        "grid": [n1, n2],
        "basis": ns.basis,
    }
    return 0, ["modes.csv", "packet.json"], args


def _packet_initial(channel, k: float, basis_size: int, sim):
    """Unit-coefficient packet at lattice wavenumber k, embedded in the grid."""
    from .model import ModeProblem, ValidationError
    from .modes import build_packet, packet_streamfunction_profile
    from .numerics import build_basis
    from .sim import field_from_mode_profile
    from .spectrum import assemble, solve_spectrum

    n_mode = round(k * channel.L)
    if abs(k * channel.L - n_mode) > 1.0e-9 or n_mode < 1:
        raise ValidationError(
            f"k = {k:g} is not a lattice wavenumber n / L with L = {channel.L:g}"
        )
    problem = ModeProblem(k=k, mu=channel.mu, slip=channel.slip)
    spectrum = solve_spectrum(assemble(problem, build_basis(basis_size)))
    packet = build_packet(spectrum)
    if packet.count == 0:
        raise ValidationError(
            f"no unstable modes at k = {k:g}, mu = {channel.mu:g}; "
            "choose initial data differently"
        )
    profile = packet_streamfunction_profile(packet)
    return field_from_mode_profile(
        profile, n_mode=int(n_mode), M=sim.M, P=sim.P, L=channel.L, kind="sin"
    )


def _cmd_simulate(ns, out, channel, raw):
    from .sim import diagnostics_to_csv, energy_to_csv, run

    cfg = _sim_config(raw, ns, channel)
    k = ns.k if ns.k is not None else 1.0 / channel.L
    initial = _packet_initial(channel, k, ns.basis, cfg) * ns.amplitude
    stride = ns.checkpoint_stride if ns.checkpoint_stride is not None else cfg.n_steps
    result = run(initial, cfg, out_dir=out, checkpoint_stride=stride)
    diagnostics_to_csv(result.diagnostics, out / "diagnostics.csv")
    energy_to_csv(result.diagnostics, out / "energy.csv")
    outputs = ["diagnostics.csv", "energy.csv"]
    outputs += [p.name for p in result.checkpoints]
    diag = result.diagnostics
    print(f"simulate: {cfg.n_steps} steps to t = {diag.times[-1]:g}, "
          f"final l2 = {diag.l2_norm[-1]:.12g}, "
          f"growth rate estimate = {diag.growth_rate_estimate[-1]:.12g}")
    args = {
        "k": k,
        "amplitude": ns.amplitude,
        "basis": ns.basis,
        "sim": {
            "M": cfg.M,
            "P": cfg.P,
            "dt": cfg.dt,
            "t_end": cfg.t_end,
            "linearized": cfg.linearized,
            "diagnostics_stride": cfg.diagnostics_stride,
        },
        "checkpoint_stride": stride,
    }
    return 0, outputs, args


def _cmd_experiment(ns, out, channel, raw):
    from .critical import mu_c_global
    from .sim import run_separation_experiment, write_experiment_outputs

    threshold = mu_c_global(channel.slip)
    if not channel.mu < threshold:
        print(f"stable regime: viscosity {channel.mu:g} is not below the "
              f"critical viscosity {threshold:.12g}; no simulation to run")
        args = {"stable_regime": True}
        return 0, [], args
    cfg = _sim_config(raw, ns, channel)
    settings = _experiment_settings(raw, ns)
    exp = run_separation_experiment(
        channel,
        sim=cfg,
        deltas=settings["deltas"],
        epsilon0=settings.get("epsilon0"),
        delta0=settings["delta0"],
        basis_size=settings["basis_size"],
        n_max=settings["n_max"],
        packet_count=settings.get("packet_count"),
        coefficients=settings.get("coefficients"),
    )
    written = write_experiment_outputs(exp, out)
    outputs = [p.relative_to(out).as_posix() for p in written]
    for o in exp.outcomes:
        if o.error is not None:
            print(f"  delta = {o.delta:.3e}  FAILED: {o.error}")
        else:
            print(f"  delta = {o.delta:.3e}  T_delta = {o.t_delta:.6g}  "
                  f"separation = {o.separation:.6g}  bound = {o.bound:.6g}  "
                  f"verdict = {'pass' if o.ok else 'FAIL'}")
    print(f"experiment: slope = {exp.slope:.6g} (want 2 +- 0.2), "
          f"escape spacing ok = {exp.escape_ok}, "
          f"verdict = {'PASS' if exp.verdict else 'FAIL'}")
    args = {
        "deltas": settings["deltas"],
        "epsilon0": settings.get("epsilon0"),
        "delta0": settings["delta0"],
        "basis_size": settings["basis_size"],
        "n_max": settings["n_max"],
        "packet_count": settings.get("packet_count"),
        "sim": {
            "M": cfg.M,
            "P": cfg.P,
            "dt": cfg.dt,
            "diagnostics_stride": cfg.diagnostics_stride,
        },
    }
    return (0 if exp.verdict else 1), outputs, args


def _cmd_verify(ns, out):
    from .verification import verification_report

    report = verification_report(seed=ns.seed)
    _write_json(out / "verify_report.json", report)
    for check in report["checks"]:
        status = "PASS" if check["passed"] else "FAIL"
        print(f"{status}  {check['name']}  (margin = {check['margin']:.3e})")
    print("verify: all properties passed" if report["all_passed"]
          else "verify: FAILURES present")
    return (0 if report["all_passed"] else 1), ["verify_report.json"], {"seed": ns.seed}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slipflow",
        description="Instability toolkit for the slip channel: critical curves, "
                    "spectra, mode export, time stepping, separation experiment.",
    )
    parser.add_argument("--config", metavar="PATH", help="JSON configuration file")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for randomized checks (default 0)")
    parser.add_argument("--out", metavar="DIR", default=".",
                        help="output directory (default: current directory)")
    parser.add_argument("--threads", type=int, metavar="N",
                        help="pin BLAS/OpenMP thread pools (fresh process only)")

    chan = argparse.ArgumentParser(add_help=False)
    chan.add_argument("--length", type=float, metavar="L", help="period scale L")
    chan.add_argument("--mu", type=float, help="viscosity")
    chan.add_argument("--xi", type=float, nargs=2, metavar=("XI_MINUS", "XI_PLUS"),
                      help="slip coefficients at the lower and upper wall")

    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("critical", parents=[chan],
                       help="critical viscosity curve mu_c(k)")
    p.add_argument("--k", type=float, nargs=2, default=[0.1, 10.0],
                   metavar=("KMIN", "KMAX"), help="wavenumber range (default 0.1 10)")
    p.add_argument("--points", type=int, default=50,
                   help="number of log-spaced samples (default 50)")

    p = sub.add_parser("spectrum", parents=[chan],
                       help="growth rates at one wavenumber plus the root oracle")
    p.add_argument("--k", type=float, default=1.0, help="wavenumber (default 1)")
    p.add_argument("--basis", type=int, default=64,
                   help="Galerkin basis size (default 64)")

    p = sub.add_parser("dispersion", parents=[chan],
                       help="lambda1 and mu_c over the wavenumber lattice")
    p.add_argument("--n-max", dest="n_max", type=int, default=8,
                   help="largest lattice index (default 8)")
    p.add_argument("--basis", type=int, default=48)

    p = sub.add_parser("modes", parents=[chan],
                       help="export the unstable packet fields on a grid")
    p.add_argument("--k", type=float, default=None,
                   help="wavenumber (default: the fundamental 1/L)")
    p.add_argument("--count", type=int, default=None,
                   help="packet size cap (default: all unstable modes)")
    p.add_argument("--delta", type=float, default=1.0e-6,
                   help="amplitude for the escape time in the manifest")
    p.add_argument("--t", type=float, default=0.0, help="sample time (default 0)")
    p.add_argument("--grid", type=int, nargs=2, default=[64, 65],
                   metavar=("N1", "N2"), help="sampling grid (default 64 65)")
    p.add_argument("--basis", type=int, default=48)

    p = sub.add_parser("simulate", parents=[chan],
                       help="time-step the nonlinear or linearized equations")
    p.add_argument("--k", type=float, default=None,
                   help="packet wavenumber of the initial data (default 1/L)")
    p.add_argument("--amplitude", type=float, default=1.0e-3,
                   help="initial data amplitude (default 1e-3)")
    p.add_argument("--basis", type=int, default=48)
    p.add_argument("--m", type=int, default=None, help="Fourier modes in x1")
    p.add_argument("--p", type=int, default=None, help="Chebyshev points in x2")
    p.add_argument("--dt", type=float, default=None, help="time step")
    p.add_argument("--t-end", dest="t_end", type=float, default=None)
    p.add_argument("--stride", type=int, default=None,
                   help="diagnostics stride in steps")
    p.add_argument("--linearized", action="store_true",
                   help="drop the nonlinear term")
    p.add_argument("--checkpoint-stride", dest="checkpoint_stride", type=int,
                   default=None, help="steps between checkpoints (default: final only)")

    p = sub.add_parser("experiment", parents=[chan],
                       help="two-solution separation experiment over a delta sweep")
    p.add_argument("--deltas", type=float, nargs="+", default=None,
                   help="amplitudes (default 1e-5 1e-6 1e-7)")
    p.add_argument("--epsilon0", type=float, default=None,
                   help="escape amplitude (default: set by the packet size)")
    p.add_argument("--delta0", type=float, default=None)
    p.add_argument("--basis", type=int, default=None)
    p.add_argument("--n-max", dest="n_max", type=int, default=None)
    p.add_argument("--count", type=int, default=None, help="packet size cap")
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--p", type=int, default=None)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--stride", type=int, default=None)

    sub.add_parser("verify",
                   help="run the deterministic property suites, write a JSON report")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    ns = parser.parse_args(argv)

    if ns.threads is not None:
        if ns.threads < 1:
            print("error: --threads must be >= 1", file=sys.stderr)
            return 2
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
            os.environ[var] = str(ns.threads)

    out = Path(ns.out)
    out.mkdir(parents=True, exist_ok=True)

    from .model import ConfigError, channel_from_config
    from .sim import InfluenceConditioningError, SimulationBlowupError

    t0 = time.perf_counter()
    try:
        raw = _resolve_raw(ns)
        t_setup = time.perf_counter() - t0
        if ns.command == "verify":
            rc, outputs, args = _cmd_verify(ns, out)
        else:
            channel = channel_from_config(raw)
            if ns.command == "critical":
                rc, outputs, args = _cmd_critical(ns, out, channel)
            elif ns.command == "spectrum":
                rc, outputs, args = _cmd_spectrum(ns, out, channel)
            elif ns.command == "dispersion":
                rc, outputs, args = _cmd_dispersion(ns, out, channel)
            elif ns.command == "modes":
                rc, outputs, args = _cmd_modes(ns, out, channel)
            elif ns.command == "simulate":
                rc, outputs, args = _cmd_simulate(ns, out, channel, raw)
            else:
                rc, outputs, args = _cmd_experiment(ns, out, channel, raw)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SimulationBlowupError, InfluenceConditioningError,
            FloatingPointError) as exc:
        print(f"run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    t_cmd = time.perf_counter() - t0 - t_setup
    print(f"timings: setup {t_setup:.3f} s, {ns.command} {t_cmd:.3f} s",
          file=sys.stderr)
    payload = {"command": ns.command, "seed": ns.seed, "config": raw, "args": args}
    _write_manifest(out, ns.command, _config_digest(payload), outputs)
    return rc


if __name__ == "__main__":
    sys.exit(main())
