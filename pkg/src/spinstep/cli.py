"""Command-line interface: ``spinstep run | verify | section | presets``.

Exit codes: 0 success, 1 failed verification, 2 bad configuration,
3 numerical failure (no solver convergence, degenerate midpoint, collision).
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys

import numpy as np

from . import analysis, config, output
from .core import SpinstepError
from .integrators import NoConvergence, SolverOptions, integrate_trajectory, standard_observers

log = logging.getLogger("spinstep")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


def _resolve_config(args) -> config.RunConfig:
    if bool(args.config) == bool(args.preset):
        raise config.ConfigError("give exactly one of --config PATH or --preset NAME")
    cfg = config.load(args.config) if args.config else config.load_preset(args.preset)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.format is not None:
        changes["format"] = args.format
    if args.tolerance is not None or args.max_iter is not None:
        try:
            changes["solver"] = SolverOptions(
                tolerance=cfg.solver.tolerance if args.tolerance is None else args.tolerance,
                max_iterations=cfg.solver.max_iterations if args.max_iter is None else args.max_iter,
            )
        except ValueError as exc:
            raise config.ConfigError(f"solver: {exc}") from None
    if getattr(args, "no_plot", False):
        changes["plot"] = False
    return dataclasses.replace(cfg, **changes)


def _iteration_stats(iterations):
    its = np.asarray(iterations[1:], dtype=float)
    if its.size == 0 or not its.any():
        return None
    return {"mean": float(its.mean()), "median": float(np.median(its)), "max": int(its.max()), "total": int(its.sum())}


def cmd_run(args) -> int:
    cfg = _resolve_config(args)
    system = cfg.build_system()
    states = cfg.initial_states(system)
    out = args.out
    os.makedirs(out, exist_ok=True)
    observers = cfg.observers if not system.time_dependent else tuple(o for o in cfg.observers if o != "energy_error")
    runs, orbits, energy = [], {}, {}
    for method in cfg.methods:
        for k, s0 in enumerate(states):
            rec = integrate_trajectory(system, method, s0, cfg.dt, cfg.steps,
                                       standard_observers(system, observers, s0), cfg.solver)
            suffix = f"_orbit{k:02d}" if len(states) > 1 else ""
            fname = f"{cfg.name}_{method}{suffix}.{cfg.format}"
            header, rows = output.trajectory_table(rec)
            output.atomic_write_text(os.path.join(out, fname), output.table_text(header, rows, cfg.format))
            entry = {"method": method, "orbit": k, "file": fname, "iterations": _iteration_stats(rec.observables["iterations"]),
                     "max_spin_length_deviation": float(np.max(np.abs(np.linalg.norm(rec.spins, axis=-1) - 1.0)))}
            if "energy_error" in rec.observables:
                entry["max_energy_error"] = float(rec.observables["energy_error"].max())
                if k == 0:
                    energy[method] = (rec.times, rec.observables["energy_error"])
            runs.append(entry)
            if system.n_spins == 1:
                orbits[f"{method} {k}" if len(states) > 1 else method] = rec.spins[:, 0]
            log.info("wrote %s", fname)
    figures = []
    if cfg.plot:
        from . import plotting

        if orbits:
            fig = f"{cfg.name}_sphere.{cfg.plot_format}"
            plotting.plot_sphere_orbits(orbits, os.path.join(out, fig), cfg.description)
            figures.append(fig)
        if energy:
            fig = f"{cfg.name}_energy.{cfg.plot_format}"
            times = next(iter(energy.values()))[0]
            plotting.plot_energy_error(times, {m: e for m, (_, e) in energy.items()}, os.path.join(out, fig),
                                       cfg.description)
            figures.append(fig)
    meta = {"command": "run", "config": cfg.resolved(), "environment": output.environment_info(),
            "system": {"class": type(system).__name__, **system.params()}, "runs": runs, "figures": figures}
    output.write_json(os.path.join(out, f"{cfg.name}.run.json"), meta)
    for r in runs:
        extra = f", max |dH| {r['max_energy_error']:.3e}" if "max_energy_error" in r else ""
        print(f"{r['file']}: {cfg.steps} steps{extra}")
    return EXIT_OK


def cmd_section(args) -> int:
    cfg = _resolve_config(args)
    if args.periods is not None:
        cfg = dataclasses.replace(cfg, periods=args.periods)
    if args.steps_per_period is not None:
        cfg = dataclasses.replace(cfg, steps_per_period=args.steps_per_period)
    if cfg.periods < 1 or cfg.steps_per_period < 1:
        raise config.ConfigError("section: periods and steps per period must be at least 1")
    system = cfg.build_system()
    if system.period is None:
        raise config.ConfigError(f"system.name: {system.name} is not periodically forced")
    first_period = 0
    if args.resume:
        try:
            first_period, seeds = output.read_section(args.resume)
        except (OSError, ValueError) as exc:
            raise config.ConfigError(f"--resume: {exc}") from None
    else:
        seeds = np.array([s.spins for s in cfg.initial_states(system)])
    cloud = analysis.poincare_section(system, cfg.methods[0], seeds, cfg.steps_per_period, cfg.periods,
                                      cfg.solver, first_period=first_period)
    out = args.out
    os.makedirs(out, exist_ok=True)
    fname = f"{cfg.name}_section.{cfg.format}"
    header, rows = output.section_table(cloud)
    output.atomic_write_text(os.path.join(out, fname), output.table_text(header, rows, cfg.format))
    figures = []
    if cfg.plot and cloud.points.shape[2] == 1:
        from . import plotting

        fig = f"{cfg.name}_section.{cfg.plot_format}"
        plotting.plot_section(cloud.points[:, :, 0], os.path.join(out, fig), cfg.description)
        figures.append(fig)
    meta = {"command": "section", "config": cfg.resolved(), "environment": output.environment_info(),
            "system": {"class": type(system).__name__, **system.params()},
            "resumed_from": args.resume, "first_period": first_period,
            "seeds": cloud.seeds.reshape(len(cloud.seeds), -1).tolist(),
            "file": fname, "figures": figures,
            "max_spin_length_deviation": float(np.max(np.abs(np.linalg.norm(cloud.points, axis=-1) - 1.0)))}
    output.write_json(os.path.join(out, f"{cfg.name}.section.json"), meta)
    print(f"{fname}: {len(cloud.seeds)} seeds x {cloud.periods} periods")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verification import SUITES, run_verification

    if args.list:
        print("\n".join(SUITES))
        return EXIT_OK
    suites = [s for item in (args.suite or []) for s in item.split(",") if s]
    try:
        report = run_verification(suites or None, seed=args.seed or 0)
    except KeyError as exc:
        raise config.ConfigError(str(exc.args[0])) from None
    os.makedirs(args.out, exist_ok=True)
    output.atomic_write_text(os.path.join(args.out, "verify_report.txt"), report.to_text())
    output.atomic_write_text(os.path.join(args.out, "verify_report.json"), report.to_json())
    print(report.to_text(), end="")
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_presets(args) -> int:
    if args.action == "list":
        for name in config.preset_names():
            print(f"{name:8s} {config.load_preset(name).description}")
    else:
        if not args.name:
            raise config.ConfigError("presets show: missing preset name")
        print(config.preset_text(args.name), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spinstep", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_config=True):
        if with_config:
            p.add_argument("--config", metavar="PATH")
            p.add_argument("--preset", metavar="NAME")
            p.add_argument("--format", choices=config.FORMATS)
            p.add_argument("--tolerance", type=float, metavar="X")
            p.add_argument("--max-iter", type=int, metavar="N")
            p.add_argument("--no-plot", action="store_true", help="skip figure rendering")
        p.add_argument("--seed", type=int, metavar="N")
        p.add_argument("--out", default="spinstep-out", metavar="DIR")

    p = sub.add_parser("run", help="integrate a configured system and write trajectories")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("section", help="Poincare section of a periodically forced system")
    common(p)
    p.add_argument("--periods", type=int, metavar="M")
    p.add_argument("--steps-per-period", type=int, metavar="K")
    p.add_argument("--resume", metavar="CSV", help="continue from the last points of an earlier section file")
    p.set_defaults(func=cmd_section)

    p = sub.add_parser("verify", help="run the property verification battery")
    common(p, with_config=False)
    p.add_argument("--suite", action="append", metavar="NAME", help="suite to run (repeatable or comma separated)")
    p.add_argument("--list", action="store_true", help="list suite names")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("presets", help="list or show the built-in configurations")
    p.add_argument("action", choices=("list", "show"))
    p.add_argument("name", nargs="?")
    p.set_defaults(func=cmd_presets)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except config.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SpinstepError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        if isinstance(exc, NoConvergence) and exc.residuals:
            print("residual history: " + " ".join(f"{r:.3e}" for r in exc.residuals), file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
