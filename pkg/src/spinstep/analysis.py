"""Numerical certificates for the structural properties of the integrators.

Every routine takes a method name (or step callable) so the spherical and the
classical midpoint maps can be compared under identical probes.
"""
from __future__ import annotations

import concurrent.futures
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .core import SpinConfiguration, SpinSystem, area_form, normalize_rows, tangent_project
from .integrators import SolverOptions, get_method, reference_solve


@dataclass
class Check:
    """One property check: passes when ``defect <= tolerance``."""

    name: str
    defect: float
    tolerance: float
    context: str = ""

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.defect) and self.defect <= self.tolerance)

    def as_dict(self):
        return {"name": self.name, "defect": float(self.defect), "tolerance": float(self.tolerance),
                "pass": self.passed, "context": self.context}


@dataclass
class VerificationReport:
    seed: int
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self) -> str:
        """Deterministic machine-readable form (no timestamps, sorted keys)."""
        doc = {"seed": self.seed, "passed": self.passed, "checks": [c.as_dict() for c in self.checks]}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        width = max([len(c.name) for c in self.checks] + [5])
        lines = [f"verification report (seed {self.seed})", ""]
        for c in self.checks:
            flag = "PASS" if c.passed else "FAIL"
            lines.append(f"{flag}  {c.name:<{width}}  defect={c.defect:.3e}  tol={c.tolerance:.1e}  {c.context}")
        n_fail = sum(not c.passed for c in self.checks)
        lines += ["", f"{len(self.checks) - n_fail}/{len(self.checks)} checks passed"]
        return "\n".join(lines) + "\n"


def _step_map(method, system, dt, options):
    step = get_method(method)

    def phi(spins, t):
        if dt == 0:
            return np.array(spins, dtype=float)
        return step(system, SpinConfiguration(spins, t, check=False), dt, options).next.spins

    return phi


def energy_error_series(system: SpinSystem, trajectory) -> np.ndarray:
    """``|H(s_n) - H(s_0)|`` along a trajectory of an autonomous system."""
    if system.time_dependent:
        raise ValueError(f"{system.name} is time dependent; its energy is not conserved")
    energies = np.array([system.energy(s.spins, s.time) for s in trajectory.states])
    return np.abs(energies - energies[0])


def symplecticity_defect(system: SpinSystem, method, state: SpinConfiguration, dt: float,
                         probe_scale: float = 1e-5, trials: int = 50, seed: int = 0,
                         options: SolverOptions | None = None) -> float:
    """Largest change of the (weighted) area form under the step's derivative.

    Tangent vectors are pushed forward by central differences of the step map
    along the retraction ``s_i + eps u_i`` normalized back to the sphere.  The
    finite differences cost O(eps^2); solver noise contributes about
    ``tolerance / eps``.
    """
    rng = np.random.default_rng(seed)
    phi = _step_map(method, system, dt, options)
    s, t = state.spins, state.time
    weights = system.form_weights(state.n_spins)
    s_next = phi(s, t)

    def push(u):
        plus = phi(normalize_rows(s + probe_scale * u), t)
        minus = phi(normalize_rows(s - probe_scale * u), t)
        return (plus - minus) / (2.0 * probe_scale)

    worst = 0.0
    for _ in range(trials):
        u, v = (tangent_project(s, rng.standard_normal(s.shape)) for _ in range(2))
        u /= np.linalg.norm(u)
        v /= np.linalg.norm(v)
        before = float(weights @ area_form(s, u, v))
        after = float(weights @ area_form(s_next, push(u), push(v)))
        worst = max(worst, abs(after - before))
    return worst


class TransformedSystem(SpinSystem):
    """The push-forward of a spin system by an orthogonal matrix ``R``.

    Its field is ``R f(R^T x)``.  Because the cross product picks up
    ``det R``, the matching gradient is ``det(R) R grad H(R^T x)``: a
    reflection of a rotation-invariant Hamiltonian runs the dynamics backwards.
    """

    def __init__(self, system: SpinSystem, R):
        super().__init__(system.n_spins)
        self.base = system
        self.R = np.asarray(R, dtype=float)
        self.sign = float(np.sign(np.linalg.det(self.R)))
        self.name = f"{system.name}(transformed)"
        self.time_dependent = system.time_dependent
        self.period = system.period
        self.field_weights = system.field_weights

    def energy(self, s, t=0.0):
        return self.sign * self.base.energy(s @ self.R, t)

    def gradient(self, s, t=0.0):
        return self.sign * self.base.gradient(s @ self.R, t) @ self.R.T


def equivariance_defect(method, system: SpinSystem, state: SpinConfiguration, dt: float, rotations,
                        options: SolverOptions | None = None) -> float:
    """Max over ``R`` of ``|step'(R s) - R step(s)|`` (max-norm).

    ``step'`` integrates the push-forward :class:`TransformedSystem`, which
    for a rotation-invariant H and a proper rotation is the system itself.
    """
    base = _step_map(method, system, dt, options)(state.spins, state.time)
    worst = 0.0
    for R in rotations:
        R = np.asarray(R, dtype=float)
        phi = _step_map(method, TransformedSystem(system, R), dt, options)
        rotated = phi(state.spins @ R.T, state.time)
        worst = max(worst, float(np.max(np.abs(rotated - base @ R.T))))
    return worst


def self_adjointness_defect(method, system: SpinSystem, state: SpinConfiguration, dt: float,
                            options: SolverOptions | None = None) -> float:
    """``|step_{-dt}(step_{dt}(s)) - s|``; the backward step starts at ``t + dt``."""
    if dt == 0:
        return 0.0
    step = get_method(method)
    forward = step(system, state, dt, options).next
    back = step(system, forward, -dt, options).next
    return float(np.max(np.abs(back.spins - state.spins)))


def global_error(system, method, state, horizon, dt, reference=None, fine_dt=1e-3, options=None):
    """Max-norm error at ``t0 + horizon`` against :func:`reference_solve`."""
    n = int(round(horizon / dt))
    if n < 1 or abs(n * dt - horizon) > 1e-9 * max(1.0, abs(horizon)):
        raise ValueError(f"dt={dt} does not divide the horizon {horizon}")
    if reference is None:
        reference = reference_solve(system, state, state.time, state.time + horizon, fine_dt)
    step = get_method(method)
    current = state
    for i in range(n):
        current = step(system, current, dt, options).next.with_time(state.time + (i + 1) * dt)
    return float(np.max(np.abs(current.spins - reference.spins)))


def convergence_order(system: SpinSystem, method, state: SpinConfiguration, horizon: float, dts,
                      fine_dt: float = 1e-3, options: SolverOptions | None = None):
    """Least-squares slope of log(error) against log(dt).

    Returns ``(order, errors)``.
    """
    dts = np.asarray(dts, dtype=float)
    if np.any(np.diff(dts) >= 0):
        raise ValueError("time steps must be strictly decreasing")
    reference = reference_solve(system, state, state.time, state.time + horizon, fine_dt)
    errors = np.array([global_error(system, method, state, horizon, dt, reference, options=options)
                       for dt in dts])
    order = np.polyfit(np.log(dts), np.log(errors), 1)[0]
    return float(order), errors


def linear_integral_drift(trajectory, weights) -> float:
    """Max over time of the max-norm change of ``sum_i w_i s_i``."""
    spins = trajectory.spins
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (spins.shape[1],):
        raise ValueError(f"need {spins.shape[1]} weights, got {weights.shape}")
    moment = np.einsum("i,nij->nj", weights, spins)
    return float(np.max(np.abs(moment - moment[0])))


@dataclass
class SectionCloud:
    """Stroboscopic samples of a periodically forced system.

    ``points[k, m]`` is the configuration of seed ``k`` after period
    ``first_period + m + 1``; ``final`` holds the last state per seed so a
    run can be resumed.
    """

    points: np.ndarray
    seeds: np.ndarray
    first_period: int = 0

    @property
    def periods(self) -> int:
        return self.points.shape[1]

    @property
    def final(self) -> np.ndarray:
        return self.points[:, -1] if self.periods else self.seeds

    def rows(self):
        """``(seed index, period index, flattened spins)`` per section point."""
        for k in range(self.points.shape[0]):
            for m in range(self.periods):
                yield k, self.first_period + m + 1, self.points[k, m].reshape(-1)


def _section_orbit(args):
    system, method, seed, steps_per_period, periods, first_period, options = args
    step = get_method(method)
    period = system.period
    dt = period / steps_per_period
    spins = np.array(seed, dtype=float)
    out = np.empty((periods,) + spins.shape)
    for m in range(periods):
        t_start = (first_period + m) * period
        state = SpinConfiguration(spins, t_start)
        for j in range(steps_per_period):
            state = step(system, state, dt, options).next
        spins = state.spins
        out[m] = spins
    return out


def default_workers() -> int:
    try:
        cap = int(os.environ.get("SPINSTEP_THREADS", "0"))
    except ValueError:
        cap = 0
    n = os.cpu_count() or 1
    return max(1, min(cap, n) if cap > 0 else n)


def poincare_section(system: SpinSystem, method, seeds, steps_per_period: int = 20, periods: int = 500,
                     options: SolverOptions | None = None, first_period: int = 0,
                     workers: int | None = None) -> SectionCloud:
    """Sample each seed once per forcing period.

    Times inside period ``m`` are ``m * period + j * dt``, so splitting a run
    and resuming from :attr:`SectionCloud.final` with ``first_period`` set
    reproduces the same points.  Seeds run in separate processes when
    ``workers > 1`` (default: ``SPINSTEP_THREADS`` or the CPU count).
    """
    if system.period is None:
        raise ValueError(f"{system.name} is not periodically forced")
    if steps_per_period < 1 or periods < 0:
        raise ValueError("need steps_per_period >= 1 and periods >= 0")
    seeds = np.array([getattr(s, "spins", s) for s in seeds], dtype=float)
    if seeds.ndim == 2:
        seeds = seeds[:, None, :]
    jobs = [(system, method, seed, steps_per_period, periods, first_period, options) for seed in seeds]
    workers = default_workers() if workers is None else workers
    if workers > 1 and len(jobs) > 1 and periods > 0:
        with concurrent.futures.ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            orbits = list(pool.map(_section_orbit, jobs))
    else:
        orbits = [_section_orbit(job) for job in jobs]
    points = np.stack(orbits) if orbits else np.empty((0, periods) + seeds.shape[1:])
    return SectionCloud(points=points, seeds=seeds, first_period=first_period)


def sphere_seeds(n: int) -> np.ndarray:
    """``n`` points spread evenly over the unit sphere (Fibonacci lattice)."""
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(1.0 - z * z)
    phi = np.pi * (3.0 - np.sqrt(5.0)) * i
    return np.column_stack((r * np.cos(phi), r * np.sin(phi), z))
