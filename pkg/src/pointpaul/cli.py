"""Command-line front end.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .characterize import (
    characterize, epsilon_sweep, mathieu_q, axial_frequency, trap_height,
)
from .config import ConfigError, config_hash, load, parse_quantity
from .constants import ELECTRON_VOLT
from .crystal import crystal_equilibrium, planarity
from .dynamics import gradient_field, integrate_3d, integrate_axial
from .errors import NoTrapError, NumericalFailure
from .fieldcore import field_map
from .optimize import optimize_depth_at_height
from .spectrum import sideband_ratio

EXIT_USAGE = 2
EXIT_NUMERIC = 3
TOOL = "pointpaul"


def _clean(value):
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def emit_json(report: dict, stream=None):
    stream = stream or sys.stdout
    json.dump(_clean(report), stream, indent=2, sort_keys=False, allow_nan=False)
    stream.write("\n")


def write_csv(path, header, rows, digest):
    """Write header-plus-rows CSV atomically, led by one '#' provenance line.

    With ``path`` None the table goes to stdout. A failure while writing
    leaves no file behind.
    """
    comment = f"# config_sha256={digest} tool={TOOL} version={__version__}"
    if path is None:
        w = csv.writer(sys.stdout, lineterminator="\n")
        sys.stdout.write(comment + "\n")
        w.writerow(header)
        w.writerows(rows)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".partial-", suffix=".csv", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            fh.write(comment + "\n")
            w = csv.writer(fh, lineterminator="\r\n")
            w.writerow(header)
            for row in rows:
                w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x
                            for x in row])
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def _report(command, norm, params, results):
    return {"tool": TOOL, "version": __version__, "command": command,
            "config": norm, "parameters": params, "results": results}


def _characteristics_fields(tc):
    return {
        "z0_m": tc.z0,
        "z0_um": tc.z0 * 1e6,
        "z_max_m": tc.z_max,
        "f_geometric_per_m2": tc.f_geometric,
        "q_dimensionless": tc.q,
        "q_4rod_dimensionless": tc.q_4rod,
        "q_over_q4rod_ratio": tc.q_ratio,
        "omega_z_rad_per_s": tc.omega_z,
        "omega_z_over_2pi_khz": tc.omega_z / (2 * math.pi) / 1e3,
        "omega_rho_rad_per_s": tc.omega_rho,
        "omega_rho_over_2pi_khz": tc.omega_rho / (2 * math.pi) / 1e3,
        "omega_rho_over_omega_z_ratio": tc.frequency_ratio,
        "depth_j": tc.depth,
        "depth_ev": tc.depth / ELECTRON_VOLT,
        "d_4rod_j": tc.d_4rod,
        "d_4rod_ev": tc.d_4rod / ELECTRON_VOLT,
        "depth_over_d4rod_ratio": tc.depth_ratio,
        "epsilon_dimensionless": tc.epsilon_used,
    }


def cmd_characterize(args):
    cfg, norm = load(args.config, args.overrides)
    tc = characterize(cfg)
    emit_json(_report("characterize", norm, {}, _characteristics_fields(tc)))


def cmd_optimize(args):
    height = parse_quantity(args.height, "length", "--height")
    if not height > 0:
        raise ConfigError("--height must be > 0")
    res = optimize_depth_at_height(height)
    results = {
        "a_over_z0_ratio": res.a_over_z0,
        "b_over_z0_ratio": res.b_over_z0,
        "zmax_over_z0_ratio": res.zmax_over_z0,
        "q_over_q4rod_ratio": res.q_over_q4rod,
        "d_over_d4rod_ratio": res.d_over_d4rod,
        "a_m": res.a,
        "b_m": res.b,
        "z0_m": res.z0,
        "z_max_m": res.zmax_over_z0 * res.z0,
        "converged_flag": res.converged,
        "iterations_count": res.iterations,
    }
    emit_json(_report("optimize", None, {"height_m": height}, results))
    if not res.converged:
        raise NumericalFailure("optimization did not converge")


SWEEP_HEADER = ["epsilon_dimensionless", "z0_prime_m", "z_max_prime_m", "q_prime_dimensionless",
                "depth_prime_j", "depth_prime_ev", "depth_upper_j", "depth_lower_j",
                "valid_flag"]


def cmd_sweep(args):
    cfg, norm = load(args.config, args.overrides)
    if args.steps < 2:
        raise ConfigError("--steps must be >= 2")
    if not args.to > args.from_:
        raise ConfigError("--to must exceed --from")
    sweep = epsilon_sweep(cfg, args.from_, args.to, args.steps)
    rows = [[r.epsilon, r.z0_prime, r.z_max_prime, r.q_prime, r.depth_prime,
             r.depth_prime / ELECTRON_VOLT, r.depth_upper, r.depth_lower, int(r.valid)]
            for r in sweep.rows]
    params = {"from": args.from_, "to": args.to, "steps": args.steps}
    write_csv(args.output, SWEEP_HEADER, rows, config_hash(norm, **params))
    if args.output is not None:
        z = sweep.column("z0_prime")
        results = {
            "rows_count": len(rows),
            "valid_rows_count": sum(r.valid for r in sweep.rows),
            "cusp_epsilon_dimensionless": sweep.cusp_epsilon(),
            "z0_prime_range_m": float(np.nanmax(z) - np.nanmin(z)),
            "csv_path": args.output,
        }
        emit_json(_report("sweep-epsilon", norm, params, results))


FIELD_HEADER = ["rho_m", "z_m", "kappa_dimensionless", "grad_z_per_m", "grad_rho_per_m",
                "psi_j", "psi_ev"]


def cmd_fieldmap(args):
    cfg, norm = load(args.config, args.overrides)
    z0 = trap_height(cfg.geometry, cfg.epsilon)
    rho_max = parse_quantity(args.rho_max, "length", "--rho-max") if args.rho_max else 2 * z0
    z_min = parse_quantity(args.z_min, "length", "--z-min") if args.z_min else 0.2 * z0
    z_max = parse_quantity(args.z_max, "length", "--z-max") if args.z_max else 3 * z0
    if args.n < 2:
        raise ConfigError("--n must be >= 2")
    if not (rho_max > 0 and 0 < z_min < z_max):
        raise ConfigError("need --rho-max > 0 and 0 < --z-min < --z-max")
    fm = field_map(cfg, (0.0, rho_max), (z_min, z_max), args.n, args.n)
    rows = []
    for i, r in enumerate(fm.rho):
        for j, z in enumerate(fm.z):
            rows.append([r, z, fm.kappa[i, j], fm.grad_z[i, j], fm.grad_rho[i, j],
                         fm.psi[i, j], fm.psi[i, j] / ELECTRON_VOLT])
    params = {"rho_max_m": rho_max, "z_min_m": z_min, "z_max_m": z_max, "n": args.n}
    write_csv(args.output, FIELD_HEADER, rows, config_hash(norm, **params))
    if args.output is not None:
        emit_json(_report("fieldmap", norm, params,
                          {"points_count": len(rows), "psi_max_j": float(fm.psi.max()),
                           "csv_path": args.output}))


TRAJ_HEADER = ["t_s", "rho_m", "z_m", "v_rho_mps", "v_z_mps"]


def cmd_simulate(args):
    cfg, norm = load(args.config, args.overrides)
    z0 = trap_height(cfg.geometry, cfg.epsilon)
    duration = parse_quantity(args.duration, "time", "--duration")
    dt = parse_quantity(args.dt, "time", "--dt") if args.dt else None
    dz = parse_quantity(args.displacement, "length", "--displacement") \
        if args.displacement is not None else 0.01 * z0
    drho = parse_quantity(args.radial_displacement, "length", "--radial-displacement")
    if not duration > 0:
        raise ConfigError("--duration must be > 0")
    if args.record_every < 1:
        raise ConfigError("--record-every must be >= 1")
    try:
        if args.mode == "axial":
            traj = integrate_axial(cfg, z0 + dz, 0.0, duration, dt,
                                   record_every=args.record_every)
        else:
            field = gradient_field(cfg, (args.map_n, args.map_n))
            traj = integrate_3d(cfg, (drho, z0 + dz), (0.0, 0.0), duration, dt, field,
                                record_every=args.record_every)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    cols = traj.columns()
    rows = zip(*(cols[h] for h in TRAJ_HEADER))
    params = {"mode": args.mode, "duration_s": duration, "dt_s": dt,
              "displacement_m": dz, "radial_displacement_m": drho,
              "record_every": args.record_every}
    write_csv(args.output, TRAJ_HEADER, rows, config_hash(norm, **params))
    if args.output is None:
        return
    results = {"samples_count": len(traj.t), "node_height_m": z0,
               "z_final_m": float(traj.z[-1]), "csv_path": args.output}
    if cfg.drive.v_rf > 0 and np.ptp(traj.z) > 0 and len(traj.t) >= 8:
        wz = axial_frequency(cfg)
        omega = cfg.drive.omega_rf
        nyquist = math.pi / (traj.t[1] - traj.t[0])
        if nyquist > 1.5 * (omega + wz):
            peak, ratio = sideband_ratio(traj.t, traj.z, wz, omega)
            results.update({
                "q_dimensionless": mathieu_q(cfg),
                "omega_z_predicted_rad_per_s": wz,
                "omega_z_measured_rad_per_s": peak.frequency,
                "secular_amplitude_m": peak.amplitude,
                "micromotion_sideband_ratio": ratio,
            })
    emit_json(_report("simulate", norm, params, results))


CRYSTAL_HEADER = ["ion_index", "x_m", "y_m", "z_m"]


def cmd_crystal(args):
    cfg, norm = load(args.config, args.overrides)
    if args.n < 1 or args.restarts < 1:
        raise ConfigError("--n and --restarts must be >= 1")
    cr = crystal_equilibrium(cfg, args.n, args.seed, args.restarts, mode=args.mode)
    z0 = trap_height(cfg.geometry, cfg.epsilon)
    flat, spread = planarity(cr, 1e-3 * z0)
    rows = [[i, *p] for i, p in enumerate(cr.positions)]
    params = {"n": args.n, "seed": args.seed, "restarts": args.restarts, "mode": args.mode}
    write_csv(args.output, CRYSTAL_HEADER, rows, config_hash(norm, **params))
    if args.output is None:
        return
    results = {
        "ions_count": args.n,
        "total_energy_j": cr.total_energy,
        "converged_flag": cr.converged,
        "max_residual_force_n": cr.max_residual_force,
        "planar_flag": flat,
        "z_spread_m": spread,
        "planarity_tolerance_m": 1e-3 * z0,
        "csv_path": args.output,
    }
    emit_json(_report("crystal", norm, params, results))
    if not cr.converged:
        raise NumericalFailure("crystal minimization did not converge")


def build_parser():
    p = argparse.ArgumentParser(prog=TOOL, description="Point Paul trap model toolkit")
    p.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(sp, required=False):
        if required:
            sp.add_argument("config", help="trap configuration JSON")
        else:
            sp.add_argument("--config", help="trap configuration JSON "
                                             "(default: optimal 1 mm trap, 300 V, 8 MHz, 88Sr+)")
        sp.add_argument("--overrides", help="JSON overlaid on the config; a report works")
        return sp

    s = with_config(sub.add_parser("characterize", help="closed-form trap metrics"), True)
    s.set_defaults(func=cmd_characterize)

    s = sub.add_parser("optimize", help="maximize depth at fixed node height")
    s.add_argument("--height", required=True, help="node height, e.g. 1mm or 1e-3")
    s.set_defaults(func=cmd_optimize)

    s = with_config(sub.add_parser("sweep-epsilon", help="dual-rf height/q/depth sweep"))
    s.add_argument("--from", dest="from_", type=float, default=0.0)
    s.add_argument("--to", type=float, default=0.8)
    s.add_argument("--steps", type=int, default=81)
    s.add_argument("--output", help="CSV path (default: CSV to stdout)")
    s.set_defaults(func=cmd_sweep)

    s = with_config(sub.add_parser("fieldmap", help="kappa and Psi on a (rho, z) grid"))
    s.add_argument("--rho-max")
    s.add_argument("--z-min")
    s.add_argument("--z-max")
    s.add_argument("--n", type=int, default=101)
    s.add_argument("--output")
    s.set_defaults(func=cmd_fieldmap)

    s = with_config(sub.add_parser("simulate", help="time-domain trajectory"))
    s.add_argument("--mode", choices=("axial", "3d"), default="axial")
    s.add_argument("--duration", default="100us")
    s.add_argument("--dt", help="step (default rf period / 100)")
    s.add_argument("--displacement", help="initial axial offset from the node (default 0.01 z0)")
    s.add_argument("--radial-displacement", default="0", help="initial radial offset (3d)")
    s.add_argument("--record-every", type=int, default=10)
    s.add_argument("--map-n", type=int, default=400, help="field-map samples per axis (3d)")
    s.add_argument("--output")
    s.set_defaults(func=cmd_simulate)

    s = with_config(sub.add_parser("crystal", help="N-ion equilibrium"))
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--restarts", type=int, default=16)
    s.add_argument("--mode", choices=("harmonic", "full"), default="harmonic")
    s.add_argument("--output")
    s.set_defaults(func=cmd_crystal)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ConfigError, NoTrapError) as exc:
        print(f"{TOOL}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalFailure as exc:
        print(f"{TOOL}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    sys.exit(main())
