"""Batch front-end: characterisation, simulation, verification, comparison.

Every run writes a manifest.json with the resolved configuration and spec
hashes so results can be reproduced bit-exactly. Exit codes: 0 success,
1 usage or configuration error, 2 numerical failure, 3 verification
failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .characteristics import (
    CurveError,
    build_flux_table,
    extract_commutation_angles,
    extract_for_drive,
    conventional_commutation,
    torque_angle_curve,
)
from .drive import DriveConfig, commutation_table
from .geometry import PRESETS, MotorSpec, SpecError, load_motor_spec, preset_spec
from .mec import (
    SolverError,
    build_network,
    check_dominance,
    network_debug_dump,
    solve_closed_form,
    solve_network,
)
from .metrics import (
    MetricsError,
    compute_metrics,
    comparison_report,
    percent_matrix,
    static_summary,
)
from .plotting import line_chart_svg
from .simulate import (
    SimulationError,
    SimulationTrace,
    precompute_maps,
    simulate,
    steady_state_window,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_VERIFY = 3


class UsageError(ValueError):
    pass


def _max_workers(n_jobs: int) -> int:
    env = os.environ.get("SRM_FORGE_THREADS", "")
    cap = int(env) if env.strip().isdigit() and int(env) > 0 else (os.cpu_count() or 1)
    return max(1, min(n_jobs, cap))


def _fan_out(jobs):
    """Run independent motor jobs concurrently, results in submission order."""
    if len(jobs) == 1:
        return [jobs[0]()]
    with ThreadPoolExecutor(max_workers=_max_workers(len(jobs))) as pool:
        futures = [pool.submit(job) for job in jobs]
        return [f.result() for f in futures]


def _resolve_specs(args) -> list[tuple[str, MotorSpec]]:
    out = []
    for path in args.spec or []:
        text = Path(path).read_text()
        spec = load_motor_spec(text)
        out.append((Path(path).stem, spec))
    for name in (args.motors.split(",") if getattr(args, "motors", None) else []):
        name = name.strip()
        if not name:
            continue
        out.append((name if name not in PRESETS else PRESETS[name], preset_spec(name)))
    if not out:
        raise UsageError("no motors given: use --spec and/or --motors")
    return out


def _parse_currents(text: str) -> list[float]:
    values = [float(tok) for tok in text.split(",") if tok.strip()]
    if not values:
        raise UsageError("empty current list")
    if any(v <= 0 for v in values):
        raise UsageError("currents must be positive")
    return values


def _write(path: Path, content: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(content)


def _plain(value):
    """Coerce numpy scalars/arrays so reports serialise as plain JSON."""
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not JSON serialisable: {type(value)}")


def _write_json(path: Path, payload) -> None:
    _write(path, json.dumps(payload, indent=2, sort_keys=True, default=_plain) + "\n")


def _manifest(args, command: str, specs: list[tuple[str, MotorSpec]], extra: dict | None = None) -> dict:
    config = {
        k: v for k, v in vars(args).items()
        if k not in ("func",) and not k.startswith("_")
    }
    manifest = {
        "tool": "srm-forge",
        "version": __version__,
        "command": command,
        "config": config,
        "specs": {
            label: {"hash": spec.spec_hash(), "resolved": spec.to_dict()}
            for label, spec in specs
        },
    }
    if extra:
        manifest.update(extra)
    return manifest


# -- characterize ---------------------------------------------------------------


def _characterize_motor(label, spec, args, out_dir: Path):
    currents = _parse_currents(args.currents)
    i_max = max(currents)
    table = build_flux_table(
        spec, args.mode, theta_step=args.grid_step / 2.0,
        i_max=i_max, i_step=i_max / 60.0,
    )
    curves = torque_angle_curve(
        spec, currents, mode=args.mode, grid_step=args.grid_step, table=table
    )
    for curve in curves:
        stem = f"curve_{label}_{curve.current:g}A"
        _write(out_dir / f"{stem}.csv", curve.to_csv())
        _write_json(out_dir / f"{stem}.meta.json", dict(curve.metadata, current=curve.current,
                                                        topology=curve.topology))

    sym_curve = torque_angle_curve(
        spec.symmetric_variant(), [i_max], mode=args.mode, grid_step=args.grid_step
    )[0]
    nominal = extract_commutation_angles(sym_curve, 0.5 * spec.rotor_pitch).aligned_angle
    angles = extract_commutation_angles(
        curves[-1], 0.5 * spec.rotor_pitch, nominal_aligned=nominal
    )
    drive = DriveConfig(
        i_ref=max(i_max, 2 * args.delta + 1e-3), delta=args.delta, v_dc=args.v_dc,
        commutation=angles, n_r=spec.N_r,
    )
    _write_json(out_dir / f"angles_{label}.json", {
        "alpha": angles.alpha, "beta": angles.beta,
        "theta_on": angles.theta_on, "theta_off": angles.theta_off,
        "aligned_angle": angles.aligned_angle,
        "unaligned_angle": angles.unaligned_angle,
        "nominal_aligned": nominal,
        "windows": commutation_table(drive),
    })

    if args.plots:
        series = [
            (f"{c.current:g} A", list(map(float, c.angles)), list(map(float, c.torque)))
            for c in curves
        ]
        _write(out_dir / f"curves_{label}.svg", line_chart_svg(
            series, f"static torque, {label}", "angle [mech deg]", "torque [N.m]"
        ))
    return label


def cmd_characterize(args) -> int:
    specs = _resolve_specs(args)
    out_dir = Path(args.out)
    _parse_currents(args.currents)
    results = _fan_out([
        (lambda lb=label, sp=spec: _characterize_motor(lb, sp, args, out_dir))
        for label, spec in specs
    ])
    _write_json(out_dir / "manifest.json", _manifest(args, "characterize", specs))
    print(f"characterized {len(results)} motor(s) into {out_dir}")
    return EXIT_OK


# -- simulate ---------------------------------------------------------------------


def _simulate_motor(label, spec, args, out_dir: Path):
    maps = precompute_maps(
        spec, mode=args.mode, theta_step=args.grid_step,
        i_step=0.1, i_max=args.i_max,
    )
    if args.conventional:
        sym_curve = torque_angle_curve(
            spec.symmetric_variant(), [args.i_ref], mode=args.mode,
            grid_step=args.grid_step,
        )[0]
        nominal = extract_commutation_angles(sym_curve, 0.5 * spec.rotor_pitch).aligned_angle
        commutation = conventional_commutation(nominal, spec.rotor_pitch)
    else:
        commutation = extract_for_drive(
            spec, args.i_ref, mode=args.mode, grid_step=args.grid_step
        )
    drive = DriveConfig(
        i_ref=args.i_ref, delta=args.delta, v_dc=args.v_dc,
        commutation=commutation, n_r=spec.N_r,
    )
    trace = simulate(spec, maps, drive, args.speed_rpm, args.t_end, args.dt)
    steady = steady_state_window(trace, args.steady_cycles, args.settle_cycles)
    m = compute_metrics(steady, spec)

    _write(out_dir / f"trace_{label}.csv", trace.to_csv())
    _write_json(out_dir / f"trace_{label}.meta.json", trace.metadata)
    _write_json(out_dir / f"metrics_{label}.json", dict(
        m.as_dict(),
        steady_cycles=args.steady_cycles,
        band_low=drive.i_ref - drive.delta,
        band_high=drive.i_ref + drive.delta,
        min_total_torque=float(np.min(steady.t_total)),
    ))
    if args.plots:
        t = list(map(float, steady.time))
        for quantity, ya, yb in (
            ("current", steady.i_a, steady.i_b),
            ("voltage", steady.v_a, steady.v_b),
        ):
            _write(out_dir / f"{quantity}_{label}.svg", line_chart_svg(
                [("phase A", t, list(map(float, ya))),
                 ("phase B", t, list(map(float, yb)))],
                f"{quantity}, {label}", "t [s]", quantity,
            ))
        _write(out_dir / f"torque_{label}.svg", line_chart_svg(
            [("total", t, list(map(float, steady.t_total)))],
            f"torque, {label}", "t [s]", "torque [N.m]",
        ))
    return label, m


def cmd_simulate(args) -> int:
    specs = _resolve_specs(args)
    out_dir = Path(args.out)
    results = _fan_out([
        (lambda lb=label, sp=spec: _simulate_motor(lb, sp, args, out_dir))
        for label, spec in specs
    ])
    _write_json(out_dir / "manifest.json", _manifest(args, "simulate", specs))
    for label, m in results:
        print(f"{label}: T_mean = {m.t_mean:.4g} N.m, efficiency = {m.efficiency_pct:.4g} %")
    return EXIT_OK


# -- verify -----------------------------------------------------------------------


def _verify_motor(label, spec, args):
    rng = np.random.default_rng(args.seed)
    checks = {}

    worst = 0.0
    for _ in range(args.samples):
        theta = float(rng.uniform(0.0, spec.rotor_pitch))
        current = float(rng.uniform(0.0, 8.0))
        net = build_network(spec, theta, current, mode="linear")
        nodal = solve_network(net)
        closed = solve_closed_form(spec, theta, current)
        for a, b in ((nodal.phi_sy, closed.phi_sy), (nodal.phi_sp, closed.phi_sp),
                     (nodal.phi_g, closed.phi_g)):
            scale = max(abs(a), abs(b), 1e-30)
            worst = max(worst, abs(a - b) / scale)
    checks["closed_form_vs_network"] = {
        "max_rel_diff": worst, "tolerance": 1e-9, "passed": worst <= 1e-9,
    }

    net = build_network(spec, 0.0, 6.0, mode="linear")
    dom = check_dominance(net)
    checks["dominance"] = {
        "ratios": dom.ratios, "threshold": dom.threshold, "passed": dom.passed,
    }

    curve = torque_angle_curve(spec, [6.0], mode="linear", grid_step=args.grid_step)[0]
    peak = float(np.max(np.abs(curve.torque)))
    budget = 1e-3 * peak * np.radians(curve.period) if peak > 0 else 1e-12
    net_work = abs(curve.net_work())
    checks["net_zero_work"] = {
        "net_work": net_work, "budget": budget, "passed": net_work <= budget,
    }

    # informational: loading of the magnet branches by their own reluctance
    diff = 0.0
    if spec.pm_sets():
        for theta in np.linspace(0.0, spec.rotor_pitch, 9):
            ideal = solve_network(build_network(spec, float(theta), 6.0, mode="linear"))
            loaded = solve_network(build_network(spec, float(theta), 6.0, mode="linear",
                                                 pm_model="thevenin"))
            scale = max(abs(ideal.phi_g), 1e-30)
            diff = max(diff, abs(ideal.phi_g - loaded.phi_g) / scale)
    checks["pm_loading_rel_difference"] = {"max_rel_diff": diff, "informational": True}

    sol = solve_network(net)
    return label, checks, network_debug_dump(net, sol)


def cmd_verify(args) -> int:
    specs = _resolve_specs(args)
    out_dir = Path(args.out)
    results = _fan_out([
        (lambda lb=label, sp=spec: _verify_motor(lb, sp, args))
        for label, spec in specs
    ])
    all_passed = True
    report = {}
    for label, checks, dump in results:
        report[label] = {"checks": checks, "network": dump}
        for name, chk in checks.items():
            if chk.get("informational"):
                continue
            status = "pass" if chk["passed"] else "FAIL"
            all_passed = all_passed and chk["passed"]
            print(f"{label}: {name}: {status}")
    _write_json(out_dir / "verify_report.json", report)
    _write_json(out_dir / "manifest.json", _manifest(args, "verify", specs))
    return EXIT_OK if all_passed else EXIT_VERIFY


# -- compare ----------------------------------------------------------------------


def cmd_compare(args) -> int:
    specs = _resolve_specs(args)
    if len(specs) < 2:
        raise UsageError("compare needs at least two motors")
    labels = [label for label, _ in specs]
    if args.baseline and args.baseline not in labels:
        raise UsageError(f"baseline {args.baseline!r} not among {labels}")
    baseline_idx = labels.index(args.baseline) if args.baseline else 0
    out_dir = Path(args.out)
    currents = _parse_currents(args.currents)

    def static_job(label, spec):
        i_max = max(currents)
        table = build_flux_table(
            spec, args.mode, theta_step=args.grid_step / 2.0,
            i_max=i_max, i_step=i_max / 60.0,
        )
        curves = torque_angle_curve(spec, currents, mode=args.mode,
                                    grid_step=args.grid_step, table=table)
        window = extract_for_drive(spec, i_max, mode=args.mode,
                                   grid_step=args.grid_step, table=table)
        return label, {c.current: static_summary(c, window) for c in curves}

    static_rows = _fan_out([
        (lambda lb=label, sp=spec: static_job(lb, sp)) for label, spec in specs
    ])
    static_by_label = dict(static_rows)

    matrix_lines = ["current_A," + ",".join(
        [f"mean_{lb},peak_{lb}" for lb in labels]
        + [f"increase_pct_{lb}_vs_{labels[baseline_idx]}" for lb in labels]
    )]
    for cur in currents:
        means = {lb: static_by_label[lb][cur][0] for lb in labels}
        try:
            pct = percent_matrix(means, labels[baseline_idx])
        except MetricsError:
            pct = {lb: float("nan") for lb in labels}
        cells = [f"{cur:g}"]
        for lb in labels:
            mean, peak = static_by_label[lb][cur]
            cells += [f"{mean:.6g}", f"{peak:.6g}"]
        cells += [f"{pct[lb]:.4f}" for lb in labels]
        matrix_lines.append(",".join(cells))
    _write(out_dir / "static_percent_matrix.csv", "\n".join(matrix_lines) + "\n")

    if not args.static_only:
        sim_results = _fan_out([
            (lambda lb=label, sp=spec: _simulate_motor(lb, sp, args, out_dir))
            for label, spec in specs
        ])
        metric_list = [m for _, m in sim_results]
        report = comparison_report(
            metric_list, labels, baseline=baseline_idx,
            pm_volumes_ml=[spec.pm_volume_ml() for _, spec in specs],
        )
        _write(out_dir / "compare_report.csv", report.to_csv())
        _write(out_dir / "compare_report.txt", report.to_text())
        print(report.to_text())

    _write_json(out_dir / "manifest.json", _manifest(args, "compare", specs))
    print(f"comparison written to {out_dir}")
    return EXIT_OK


# -- metrics (re-derive from an existing trace CSV) --------------------------------


def _load_trace_csv(path: Path, speed_rpm: float, pitch: float) -> SimulationTrace:
    rows = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != SimulationTrace.CSV_HEADER:
            raise UsageError(
                f"unexpected trace header {header!r}; expected {SimulationTrace.CSV_HEADER!r}"
            )
        for line in fh:
            if line.strip():
                rows.append([float(tok) for tok in line.split(",")])
    if len(rows) < 2:
        raise UsageError("trace has fewer than two samples")
    data = np.asarray(rows)
    dt = float(data[1, 0] - data[0, 0])
    gates_a = data[:, 6].astype(np.int8)
    gates_b = data[:, 7].astype(np.int8)
    return SimulationTrace(
        time=data[:, 0], theta=data[:, 1],
        i_a=data[:, 2], i_b=data[:, 3],
        v_a=data[:, 4], v_b=data[:, 5],
        g_a=gates_a, g_b=gates_b,
        c_a=gates_a, c_b=gates_b,  # windows are not stored in the CSV
        t_a=data[:, 8], t_b=data[:, 9], t_total=data[:, 10],
        speed_rpm=speed_rpm, dt=dt,
        metadata={"pitch": pitch, "source": str(path)},
    )


def cmd_metrics(args) -> int:
    specs = _resolve_specs(args)
    if len(specs) != 1:
        raise UsageError("metrics needs exactly one motor spec")
    label, spec = specs[0]
    trace = _load_trace_csv(Path(args.trace), args.speed_rpm, spec.rotor_pitch)
    if args.steady_cycles > 0:
        trace = steady_state_window(trace, args.steady_cycles, args.settle_cycles)
    m = compute_metrics(trace, spec)
    out_dir = Path(args.out)
    _write_json(out_dir / f"metrics_{label}.json", m.as_dict())
    _write_json(out_dir / "manifest.json", _manifest(args, "metrics", specs))
    print(json.dumps(m.as_dict(), indent=2, sort_keys=True))
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------------


def _add_motor_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--spec", action="append", metavar="PATH",
                   help="motor spec JSON file (repeatable)")
    p.add_argument("--motors", metavar="LIST",
                   help="comma-separated preset names, e.g. motor1,motor4")
    p.add_argument("--mode", choices=("linear", "saturable"), default="saturable")
    p.add_argument("--out", default="srm-forge-out", metavar="DIR")
    p.add_argument("--grid-step", type=float, default=0.1, metavar="DEG")
    p.add_argument("--plots", action="store_true", help="emit SVG charts")


def _add_drive_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--i-ref", type=float, default=6.0, metavar="A")
    p.add_argument("--delta", type=float, default=0.2, metavar="A")
    p.add_argument("--v-dc", type=float, default=150.0, metavar="V")
    p.add_argument("--speed-rpm", type=float, default=600.0)
    p.add_argument("--t-end", type=float, default=0.05, metavar="S")
    p.add_argument("--dt", type=float, default=1e-6, metavar="S")
    p.add_argument("--i-max", type=float, default=8.0, metavar="A",
                   help="magnetic map current range")
    p.add_argument("--steady-cycles", type=int, default=5)
    p.add_argument("--settle-cycles", type=int, default=3)
    p.add_argument("--conventional", action="store_true",
                   help="plain half-pitch windows instead of extracted angles")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="srm-forge",
        description="two-phase C-core switched reluctance motor simulation toolkit",
    )
    parser.add_argument("--version", action="version", version=f"srm-forge {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("characterize", help="static torque-angle curves and drive angles")
    _add_motor_args(p)
    p.add_argument("--currents", default="1,2,3,4,5,6", metavar="LIST")
    p.add_argument("--delta", type=float, default=0.2)
    p.add_argument("--v-dc", type=float, default=150.0)
    p.set_defaults(func=cmd_characterize)

    p = sub.add_parser("simulate", help="constant-speed time-domain run")
    _add_motor_args(p)
    _add_drive_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="solver cross-checks and consistency gates")
    _add_motor_args(p)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--seed", type=int, default=20240901)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("compare", help="multi-motor static and dynamic comparison")
    _add_motor_args(p)
    _add_drive_args(p)
    p.add_argument("--currents", default="1,2,3,4,5,6", metavar="LIST")
    p.add_argument("--baseline", metavar="LABEL")
    p.add_argument("--static-only", action="store_true")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("metrics", help="re-derive metrics from an existing trace CSV")
    _add_motor_args(p)
    p.add_argument("--trace", required=True, metavar="CSV")
    p.add_argument("--speed-rpm", type=float, default=600.0)
    p.add_argument("--steady-cycles", type=int, default=0,
                   help="0 = use the whole trace")
    p.add_argument("--settle-cycles", type=int, default=3)
    p.set_defaults(func=cmd_metrics)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (UsageError, SpecError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverError, SimulationError, MetricsError, CurveError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
