"""Command-line interface.

Subcommands: simulate | approx | remainder-sweep | besov | verify |
partition.  Report directories receive delimited tables, versioned JSON
and rendered figures side by side.  The environment variable
ANIVISC_THREADS caps FFT worker parallelism.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import checkpoint, reporting
from .config import (
    grid_from,
    initial_data_from,
    load_config,
    stepper_from,
    sweep_from,
)
from .dyadic import BesovSpec, besov_norm, block_table
from .experiment import (
    B012,
    B112_ANISO,
    build_initial_data,
    compute_uapp_norms,
    initial_data_report,
    run_remainder_case,
    run_remainder_experiment,
    time_partition,
    verify_pressure_bounds,
    _window_product,
)
from .field import VelocityState
from .grid import Grid
from .inequalities import (
    check_bernstein_horizontal,
    check_bernstein_vertical,
    check_block_energy_balance,
    check_estimate11,
    check_inverse_bernstein,
    check_product_laws,
    check_trilinear,
    refinement_stability,
)
from .solvers import (
    SliceEnsemble,
    assemble_uapp,
    solve_nsh,
    solve_slices_and_transport,
)


def _add_config_out(p, out_required=True):
    p.add_argument("--config", help="JSON config file (defaults are merged in)")
    p.add_argument("--out", required=out_required, help="output directory")


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    grid_unit = grid_from(cfg, unit=True)
    m = int(cfg["grid"].get("m", 0))
    spec = initial_data_from(cfg)
    stepper = stepper_from(cfg)
    state0 = build_initial_data(spec, grid_unit, m)
    out = reporting.ensure_outdir(args.out)
    meta = {"config_hash": reporting.config_hash(cfg), "seed": cfg.get("seed", 0)}

    times, files, energy = [], [], []

    def on_snapshot(t, state, diss):
        name = f"state_{len(times):05d}.ansh"
        checkpoint.write_checkpoint(out / name, state)
        times.append(t)
        files.append(name)
        energy.append((t, 0.5 * state.l2_norm() ** 2, diss))

    solve_nsh(state0, stepper, on_snapshot=on_snapshot, store=False)
    checkpoint.write_trajectory_index(out, times, files, meta)
    reporting.write_csv(out / "energy.csv", ["time", "kinetic_energy", "dissipated"], energy)
    e = np.asarray(energy)
    reporting.fig_norm_series(
        e[:, 0],
        {"kinetic energy": e[:, 1], "energy + dissipated": e[:, 1] + e[:, 2]},
        out / "energy.png",
        ylabel="energy",
    )
    bal = abs(e[-1, 1] + e[-1, 2] - e[0, 1]) / e[0, 1]
    print(f"simulate: {len(times)} snapshots -> {out}  (energy balance residual {bal:.2e})")
    return 0


def cmd_approx(args) -> int:
    cfg = load_config(args.config)
    grid = grid_from(cfg, unit=True)
    m = int(cfg["grid"].get("m", 0))
    spec = initial_data_from(cfg)
    stepper = stepper_from(cfg)
    ens0, w30 = spec.build(grid)
    out = reporting.ensure_outdir(args.out)
    meta = {"config_hash": reporting.config_hash(cfg), "seed": cfg.get("seed", 0)}

    uh_traj, w_traj = solve_slices_and_transport(ens0, w30, stepper)
    times, files = [], []
    for i, t in enumerate(uh_traj.times):
        state = assemble_uapp(uh_traj.ensemble(i), w_traj.snapshots[i], m, t)
        name = f"uapp_{i:05d}.ansh"
        checkpoint.write_checkpoint(out / name, state)
        times.append(t)
        files.append(name)
    checkpoint.write_trajectory_index(out, times, files, meta)

    norms = compute_uapp_norms(uh_traj, w_traj, m)
    pressures = verify_pressure_bounds(uh_traj, w_traj, m)
    reporting.write_json(out / "approx_norms.json", {**meta, **norms, **pressures})
    reporting.write_csv(
        out / "approx_norms.csv",
        ["norm_name", "value"],
        sorted({**norms, **pressures}.items()),
    )
    print(f"approx: {len(times)} snapshots -> {out}")
    for k, v in sorted(norms.items()):
        print(f"  {k} = {v:.6g}")
    return 0


SWEEP_COLUMNS = [
    "m",
    "eps",
    "sup_R_B012",
    "L2_gradh_R",
    "uapp_Linf",
    "uapp_L2_B112",
    "d3uapp_L1_B112",
    "K_partition",
]


def cmd_remainder_sweep(args) -> int:
    cfg = load_config(args.config)
    spec = initial_data_from(cfg)
    sweep = sweep_from(cfg)
    report = run_remainder_experiment(spec, sweep)
    out = reporting.ensure_outdir(args.out)
    payload = report.to_dict()
    payload["config_hash"] = reporting.config_hash(cfg)
    payload["seed"] = cfg.get("seed", 0)
    reporting.write_json(out / "sweep.json", payload)
    rows = [
        (
            c.m,
            c.eps,
            c.sup_R_B012,
            c.L2_gradh_R,
            c.uapp_norms["uapp_Linf_B012"],
            c.uapp_norms["uapp_L2_B112"],
            c.uapp_norms["d3uapp_L1_B112"],
            c.K_partition,
        )
        for c in report.cases
    ]
    rows.append(("slope", report.slope, "residual", report.slope_residual, "", "", "", ""))
    reporting.write_csv(out / "sweep.csv", SWEEP_COLUMNS, rows)
    reporting.fig_remainder_sweep(payload, out / "sweep.png")
    print(
        f"remainder-sweep: {len(report.cases)} cases -> {out}\n"
        f"  fitted slope {report.slope:.3f} (rms residual {report.slope_residual:.3f})"
    )
    return 0


def cmd_besov(args) -> int:
    state = checkpoint.read_checkpoint(args.checkpoint)
    spec = BesovSpec(args.s, args.sprime, args.kind)
    fields = list(state.components())
    value = besov_norm(fields, spec)
    print(f"besov[{args.kind}] s={args.s} s'={args.sprime}: {value:.9g}")
    if args.out:
        out = reporting.ensure_outdir(args.out)
        table = block_table(fields, spec)
        rows = []
        if spec.kind == "vertical":
            for q, v in zip(table.q_values, table.vq):
                rows.append((state.t, q, "", v))
            rows.append((state.t, "mean", "", table.vmean))
            qs, vals = list(table.q_values), list(table.vq)
        else:
            for a, j in enumerate(table.j_values):
                for b, q in enumerate(table.q_values):
                    rows.append((state.t, q, j, table.jq[a, b]))
            qs = list(table.q_values)
            vals = list(table.jq.sum(axis=0))
        reporting.write_csv(out / "blocks.csv", ["time", "q", "j_or_blank", "block_norm"], rows)
        reporting.write_csv(
            out / "norm.csv",
            ["norm_name", "s", "s_prime", "r", "value"],
            [(f"besov_{spec.kind}", args.s, args.sprime, "", value)],
        )
        reporting.fig_block_bars(qs, np.maximum(vals, 1e-300), out / "blocks.png")
    return 0


def _verify_reports(suites, seed: int):
    reports = []
    coarse = Grid(32, 32, 0)
    fine = Grid(64, 64, 0)
    tall = Grid(4, 512, 0)
    wide = Grid(128, 4, 0)
    if "bernstein" in suites:
        reports.append(check_bernstein_vertical(tall, seed=seed))
        reports.append(check_inverse_bernstein(tall, seed=seed))
        reports.append(check_bernstein_horizontal(wide, seed=seed))
    if "product" in suites:
        rep32 = check_product_laws(coarse, seed=seed)
        rep64 = check_product_laws(fine, seed=seed)
        rep32.detail["refinement_change"] = refinement_stability(rep32, rep64)
        reports.append(rep32)
    if "estimate11" in suites:
        rep32 = check_estimate11(coarse, seed=seed)
        rep64 = check_estimate11(fine, seed=seed)
        rep32.detail["refinement_change"] = refinement_stability(rep32, rep64)
        reports.append(rep32)
    if "trilinear" in suites or "energy" in suites:
        from .experiment import InitialDataSpec
        from .solvers import StepperConfig

        rgrid = Grid(16, 32, 0)
        rcfg = StepperConfig(dt=1e-3, t_end=0.05, snapshot_stride=1)
        run = run_remainder_case(
            InitialDataSpec("default", 0.8), rgrid, rcfg, m=2, store_fields=True
        )
        if "trilinear" in suites:
            for kind in ("RR", "uR", "Ru"):
                reports.append(check_trilinear(kind, run))
        if "energy" in suites:
            for q in (-3, -2):
                res = check_block_energy_balance(run, q)
                from .inequalities import RatioReport

                reports.append(
                    RatioReport(
                        check_id=f"block_energy_q{q}",
                        n_samples=len(run.times),
                        max_ratio=res["residual_rel"],
                        spread=None,
                        passed=bool(res["residual_rel"] < 1e-4),
                        detail={k: float(v) for k, v in res.items()},
                    )
                )
    return reports


def cmd_verify(args) -> int:
    suites = [s.strip() for s in args.suite.split(",") if s.strip()]
    known = {"bernstein", "product", "trilinear", "estimate11", "energy"}
    unknown = set(suites) - known
    if unknown:
        print(f"unknown suites: {sorted(unknown)}; known: {sorted(known)}", file=sys.stderr)
        return 2
    reports = _verify_reports(suites, args.seed)
    rows = [r.to_dict() for r in reports]
    all_pass = all(r.passed for r in reports)
    for r in reports:
        spread = f"{r.spread:.3g}" if r.spread is not None else "-"
        print(f"  {r.check_id:24s} max_ratio {r.max_ratio:<12.4g} spread {spread:8s} "
              f"{'pass' if r.passed else 'FAIL'}")
    if args.out:
        out = reporting.ensure_outdir(args.out)
        reporting.write_json(out / "verify.json", {"checks": rows, "all_pass": all_pass})
        reporting.write_csv(
            out / "verify.csv",
            ["check_id", "n_samples", "max_ratio", "spread", "pass"],
            [(r.check_id, r.n_samples, r.max_ratio, r.spread, r.passed) for r in reports],
        )
        reporting.fig_ratio_sweep([r for r in reports if r.per_index], out / "verify.png")
    return 0 if all_pass else 1


def cmd_partition(args) -> int:
    cfg = load_config(args.config)
    grid = grid_from(cfg, unit=True)
    m = int(cfg["grid"].get("m", 0))
    spec = initial_data_from(cfg)
    stepper = stepper_from(cfg)
    cbar = args.cbar if args.cbar is not None else float(cfg["sweep"].get("cbar", 0.05))
    run = run_remainder_case(spec, grid, stepper, m=m)
    vert, aniso = run.approx.partition_series()
    cuts = time_partition(vert, aniso, cbar)
    out = reporting.ensure_outdir(args.out)
    rows = [(i, a, b) for i, (a, b) in enumerate(zip(cuts[:-1], cuts[1:]))]
    reporting.write_csv(out / "partition.csv", ["chunk", "t_start", "t_end"], rows)
    idx = {float(t): i for i, t in enumerate(vert.times)}
    prods = []
    k = 0
    for i, t in enumerate(vert.times):
        if t in cuts[1:-1]:
            k = i
        prods.append(_window_product(vert, aniso, k, i) if i > k else 0.0)
    reporting.fig_partition(vert.times, prods, cuts[1:-1], 1.0 / cbar, out / "partition.png")
    reporting.write_json(
        out / "partition.json",
        {
            "cbar": cbar,
            "K": len(cuts) - 1,
            "times": [float(t) for t in cuts],
            "config_hash": reporting.config_hash(cfg),
        },
    )
    print(f"partition: K={len(cuts)-1} chunks -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="anivisc",
        description=(
            "Pseudo-spectral laboratory for 3D Navier-Stokes with horizontal-only "
            "viscosity: slice-built approximations, anisotropic dyadic norms, "
            "scaling experiments"
        ),
        epilog="ANIVISC_THREADS caps FFT worker parallelism.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate the 3D system, write checkpoints")
    _add_config_out(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("approx", help="build the slice approximation trajectory")
    _add_config_out(p)
    p.set_defaults(func=cmd_approx)

    p = sub.add_parser("remainder-sweep", help="sweep the vertical scale and fit the remainder slope")
    _add_config_out(p)
    p.set_defaults(func=cmd_remainder_sweep)

    p = sub.add_parser("besov", help="dyadic block norms of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--s", type=float, default=0.0)
    p.add_argument("--sprime", type=float, default=0.5)
    p.add_argument("--kind", choices=("vertical", "anisotropic"), default="vertical")
    p.add_argument("--out", help="optional output directory")
    p.set_defaults(func=cmd_besov)

    p = sub.add_parser("verify", help="run inequality verification suites")
    p.add_argument(
        "--suite",
        default="bernstein,product,estimate11,trilinear,energy",
        help="comma list: bernstein,product,estimate11,trilinear,energy",
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="optional output directory")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("partition", help="greedy time partition of the approximation")
    _add_config_out(p)
    p.add_argument("--cbar", type=float, default=None)
    p.set_defaults(func=cmd_partition)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
