"""Run configuration: TOML files, built-in presets and validation.

A configuration looks like::

    name = "fig2"
    seed = 0

    [system]
    name = "perturbed_top"      # remaining keys are passed to the system

    [integration]
    method = "spherical"        # or a list of methods
    dt = 0.5
    steps = 4000

    [initial]
    spins = [[0.0, 0.7248, -0.6889]]

Exactly one of ``spins`` (one configuration), ``orbits`` (several),
``preset`` or ``random`` (number of random configurations) goes in
``[initial]``.  Unknown keys anywhere are errors.
"""
from __future__ import annotations

import copy
import sys
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .analysis import sphere_seeds
from .core import SpinConfiguration
from .integrators import STEP_METHODS, SolverOptions
from .systems import CATALOG, make_system

FIG2_INITIAL = [[0.0, 0.7248, -0.6889]]
OBSERVERS = ("energy", "energy_error", "spin_length", "linear_integrals", "iterations")
FORMATS = ("csv", "jsonl")

_SCHEMA = {
    "": {"name", "description", "seed", "system", "integration", "initial", "solver", "output", "section"},
    "integration": {"method", "dt", "steps"},
    "initial": {"spins", "orbits", "preset", "random", "count"},
    "solver": {"tolerance", "max_iterations"},
    "output": {"observers", "format", "plot", "plot_format"},
    "section": {"steps_per_period", "periods"},
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass
class RunConfig:
    name: str
    system: str
    system_params: dict
    methods: tuple
    dt: float
    steps: int
    initial: dict
    seed: int = 0
    description: str = ""
    solver: SolverOptions = field(default_factory=SolverOptions)
    observers: tuple = ("energy", "energy_error", "spin_length", "iterations")
    format: str = "csv"
    plot: bool = True
    plot_format: str = "svg"
    steps_per_period: int = 20
    periods: int = 500

    def build_system(self):
        try:
            return make_system(self.system, **self.system_params)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"system: bad parameters for {self.system!r}: {exc}") from None

    def initial_states(self, system) -> list:
        """Resolve ``[initial]`` into a list of :class:`SpinConfiguration`."""
        init = self.initial
        n = system.n_spins
        if "spins" in init:
            raw = [init["spins"]]
        elif "orbits" in init:
            raw = list(init["orbits"])
        elif "preset" in init:
            raw = _initial_preset(init["preset"], int(init.get("count", 1)))
        else:
            rng = np.random.default_rng(self.seed)
            raw = [rng.standard_normal((n or 1, 3)) for _ in range(int(init["random"]))]
        states = []
        for k, spins in enumerate(raw):
            arr = np.array(spins, dtype=float)
            if arr.ndim == 1:
                arr = arr.reshape(1, -1)
            if arr.ndim != 2 or arr.shape[1] != 3:
                raise ConfigError(f"initial: configuration {k} must be a list of 3-vectors")
            if n is not None and arr.shape[0] != n:
                raise ConfigError(f"initial: configuration {k} has {arr.shape[0]} spins, {self.system} needs {n}")
            try:
                states.append(SpinConfiguration.from_vectors(arr))
            except ArithmeticError as exc:
                raise ConfigError(f"initial: configuration {k}: {exc}") from None
        return states

    def resolved(self) -> dict:
        """Plain-data form of the configuration, as stored in run metadata."""
        return {
            "name": self.name, "description": self.description, "seed": self.seed,
            "system": {"name": self.system, **self.system_params},
            "integration": {"method": list(self.methods), "dt": self.dt, "steps": self.steps},
            "initial": copy.deepcopy(self.initial),
            "solver": {"tolerance": self.solver.tolerance, "max_iterations": self.solver.max_iterations},
            "output": {"observers": list(self.observers), "format": self.format, "plot": self.plot,
                       "plot_format": self.plot_format},
            "section": {"steps_per_period": self.steps_per_period, "periods": self.periods},
        }


def _initial_preset(name, count):
    if name == "fig2":
        return [FIG2_INITIAL]
    if name == "sphere_lattice":
        return [[p] for p in sphere_seeds(count)]
    raise ConfigError(f"initial.preset: unknown preset {name!r} (expected 'fig2' or 'sphere_lattice')")


def _check_keys(doc, section):
    allowed = _SCHEMA[section]
    for key in doc:
        if key not in allowed:
            where = f"{section}.{key}" if section else key
            raise ConfigError(f"{where}: unknown key")


def _number(doc, key, where, kind=float):
    value = doc[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number, got {value!r}")
    if kind is int and value != int(value):
        raise ConfigError(f"{where}.{key}: expected an integer, got {value!r}")
    return kind(value)


def parse_config(doc: dict) -> RunConfig:
    """Validate a parsed TOML document and turn it into a :class:`RunConfig`."""
    _check_keys(doc, "")
    for section in ("integration", "initial", "solver", "output", "section"):
        if section in doc:
            if not isinstance(doc[section], dict):
                raise ConfigError(f"{section}: expected a table")
            _check_keys(doc[section], section)

    sysdoc = doc.get("system")
    if not isinstance(sysdoc, dict) or "name" not in sysdoc:
        raise ConfigError("system.name: missing")
    if sysdoc["name"] not in CATALOG:
        raise ConfigError(f"system.name: unknown system {sysdoc['name']!r}; available: {', '.join(sorted(CATALOG))}")
    params = {k: v for k, v in sysdoc.items() if k != "name"}

    integ = doc.get("integration", {})
    for key in ("dt", "steps"):
        if key not in integ:
            raise ConfigError(f"integration.{key}: missing")
    methods = integ.get("method", "spherical")
    methods = (methods,) if isinstance(methods, str) else tuple(methods)
    for m in methods:
        if m not in STEP_METHODS:
            raise ConfigError(f"integration.method: unknown method {m!r}; available: {', '.join(STEP_METHODS)}")
    dt = _number(integ, "dt", "integration")
    if dt == 0 or not np.isfinite(dt):
        raise ConfigError("integration.dt: must be finite and nonzero")
    steps = _number(integ, "steps", "integration", int)
    if steps < 1:
        raise ConfigError("integration.steps: must be at least 1")

    init = doc.get("initial")
    if init is None:
        raise ConfigError("initial: missing")
    chosen = [k for k in ("spins", "orbits", "preset", "random") if k in init]
    if len(chosen) != 1:
        raise ConfigError("initial: give exactly one of spins, orbits, preset, random")
    if "random" in init and _number(init, "random", "initial", int) < 1:
        raise ConfigError("initial.random: must be at least 1")

    solver_doc = doc.get("solver", {})
    try:
        solver = SolverOptions(
            tolerance=_number(solver_doc, "tolerance", "solver") if "tolerance" in solver_doc else 1e-12,
            max_iterations=_number(solver_doc, "max_iterations", "solver", int) if "max_iterations" in solver_doc else 100,
        )
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from None

    out = doc.get("output", {})
    observers = tuple(out.get("observers", RunConfig.observers))
    for o in observers:
        if o not in OBSERVERS:
            raise ConfigError(f"output.observers: unknown observer {o!r}; available: {', '.join(OBSERVERS)}")
    fmt = out.get("format", "csv")
    if fmt not in FORMATS:
        raise ConfigError(f"output.format: expected one of {', '.join(FORMATS)}, got {fmt!r}")
    plot_format = out.get("plot_format", "svg")
    if plot_format not in ("svg", "png", "pdf"):
        raise ConfigError(f"output.plot_format: expected svg, png or pdf, got {plot_format!r}")

    sec = doc.get("section", {})
    cfg = RunConfig(
        name=str(doc.get("name", "run")),
        description=str(doc.get("description", "")),
        seed=_number(doc, "seed", "", int) if "seed" in doc else 0,
        system=sysdoc["name"],
        system_params=params,
        methods=methods,
        dt=dt,
        steps=steps,
        initial=dict(init),
        solver=solver,
        observers=observers,
        format=fmt,
        plot=bool(out.get("plot", True)),
        plot_format=plot_format,
        steps_per_period=_number(sec, "steps_per_period", "section", int) if "steps_per_period" in sec else 20,
        periods=_number(sec, "periods", "section", int) if "periods" in sec else 500,
    )
    if cfg.steps_per_period < 1 or cfg.periods < 1:
        raise ConfigError("section: steps_per_period and periods must be at least 1")
    system = cfg.build_system()
    cfg.initial_states(system)
    return cfg


def loads(text: str) -> RunConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"syntax error: {exc}") from None
    return parse_config(doc)


def load(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from None
    try:
        return loads(text)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def preset_names() -> list:
    return sorted(p.name[:-5] for p in resources.files("spinstep.presets").iterdir() if p.name.endswith(".toml"))


def preset_text(name: str) -> str:
    if name not in preset_names():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return resources.files("spinstep.presets").joinpath(f"{name}.toml").read_text(encoding="utf-8")


def load_preset(name: str) -> RunConfig:
    try:
        return loads(preset_text(name))
    except ConfigError as exc:
        raise ConfigError(f"preset {name}: {exc}") from None
