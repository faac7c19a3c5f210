"""One-step maps for spin systems and the drivers around them.

Both midpoint methods are implicit; each step is solved by plain fixed-point
iteration started from the current state.  Time-dependent fields are
evaluated at the midpoint time ``t_n + dt/2``, which keeps the maps
second order and self-adjoint.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .core import (
    SpinConfiguration,
    SpinstepError,
    SpinSystem,
    normalize_rows,
    normalized_vector_field,
    spin_vector_field,
)


class NoConvergence(SpinstepError):
    """Fixed-point iteration did not reach the tolerance.

    ``residuals`` holds the max-norm of every update; ``step`` is filled in by
    :func:`integrate_trajectory` when the failure happens inside a run.
    """

    def __init__(self, message, residuals=(), step=None):
        super().__init__(message)
        self.residuals = list(residuals)
        self.step = step

    def __str__(self):
        msg = super().__str__()
        if self.step is not None:
            msg = f"step {self.step}: {msg}"
        return msg


@dataclass(frozen=True)
class SolverOptions:
    tolerance: float = 1e-12
    max_iterations: int = 100

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if int(self.max_iterations) < 1:
            raise ValueError("max_iterations must be at least 1")


DEFAULT_OPTIONS = SolverOptions()


@dataclass(frozen=True)
class StepResult:
    next: SpinConfiguration
    iterations: int
    residual: float


def fixed_point_solve(mapping: Callable[[np.ndarray], np.ndarray], initial, options=None):
    """Iterate ``z <- mapping(z)`` until the max-norm update drops below the tolerance.

    Returns ``(z, iterations, residual)`` where ``iterations`` counts calls to
    ``mapping`` and ``residual`` is the size of the final update.
    """
    options = options or DEFAULT_OPTIONS
    z = np.asarray(initial, dtype=float)
    history = []
    for k in range(1, options.max_iterations + 1):
        z_new = mapping(z)
        r = float(np.max(np.abs(z_new - z)))
        history.append(r)
        if not np.isfinite(r):
            raise NoConvergence(f"iteration {k} produced non-finite values", history)
        z = z_new
        if r < options.tolerance:
            return z, k, r
    raise NoConvergence(
        f"no convergence after {options.max_iterations} iterations (residual {history[-1]:.3e})",
        history,
    )


def _check_dt(dt):
    if dt == 0:
        raise ValueError("time step must be nonzero")


def spherical_midpoint_step(system: SpinSystem, state: SpinConfiguration, dt: float,
                            options: SolverOptions | None = None) -> StepResult:
    """Spherical midpoint step.

    Solves ``(s' - s)/dt = f(u)`` with ``u_i = (s_i + s'_i)/|s_i + s'_i|``
    for ``s'``.  Spin lengths are not imposed; they come out right because
    ``f_i(u)`` is orthogonal to ``s_i + s'_i``.
    """
    _check_dt(dt)
    s = state.spins
    t_mid = state.time + 0.5 * dt

    def mapping(z):
        return s + dt * spin_vector_field(system, normalize_rows(s + z), t_mid)

    z, k, r = fixed_point_solve(mapping, s, options)
    return StepResult(SpinConfiguration(z, state.time + dt), k, r)


def classical_midpoint_step(system: SpinSystem, state: SpinConfiguration, dt: float,
                            options: SolverOptions | None = None) -> StepResult:
    """Classical (Euclidean) implicit midpoint rule on the ambient spin field."""
    _check_dt(dt)
    s = state.spins
    t_mid = state.time + 0.5 * dt

    def mapping(z):
        return s + dt * spin_vector_field(system, 0.5 * (s + z), t_mid)

    z, k, r = fixed_point_solve(mapping, s, options)
    return StepResult(SpinConfiguration(z, state.time + dt), k, r)


def classical_midpoint_on_g(system: SpinSystem, state: SpinConfiguration, dt: float,
                            options: SolverOptions | None = None) -> StepResult:
    """Classical midpoint rule applied to the ray-constant field ``g(s) = f(s/|s|)``.

    Mathematically the same map as :func:`spherical_midpoint_step`; kept as a
    separate code path so the two can be checked against each other.
    """
    _check_dt(dt)
    s = state.spins
    t_mid = state.time + 0.5 * dt

    def mapping(z):
        return s + dt * normalized_vector_field(system, 0.5 * (s + z), t_mid)

    z, k, r = fixed_point_solve(mapping, s, options)
    return StepResult(SpinConfiguration(z, state.time + dt), k, r)


def _rk4_on_g(system, z, t, h):
    k1 = normalized_vector_field(system, z, t)
    k2 = normalized_vector_field(system, z + 0.5 * h * k1, t + 0.5 * h)
    k3 = normalized_vector_field(system, z + 0.5 * h * k2, t + 0.5 * h)
    k4 = normalized_vector_field(system, z + h * k3, t + h)
    return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_step(system: SpinSystem, state: SpinConfiguration, dt: float,
             options: SolverOptions | None = None) -> StepResult:
    """Explicit classical Runge-Kutta step on ``g``; not structure preserving."""
    _check_dt(dt)
    z = _rk4_on_g(system, state.spins, state.time, dt)
    return StepResult(SpinConfiguration(z, state.time + dt, check=False), 0, 0.0)


def explicit_euler_step(system: SpinSystem, state: SpinConfiguration, dt: float,
                        options: SolverOptions | None = None) -> StepResult:
    """Forward Euler on ``g``.  First order and drifts off the sphere; a control for harness tests."""
    _check_dt(dt)
    z = state.spins + dt * normalized_vector_field(system, state.spins, state.time)
    return StepResult(SpinConfiguration(z, state.time + dt, check=False), 0, 0.0)


STEP_METHODS = {
    "spherical": spherical_midpoint_step,
    "classical": classical_midpoint_step,
    "classical_g": classical_midpoint_on_g,
    "reference": rk4_step,
    "euler": explicit_euler_step,
}


def get_method(method):
    """Resolve a method name (see ``STEP_METHODS``) or pass a step callable through."""
    if callable(method):
        return method
    try:
        return STEP_METHODS[method]
    except KeyError:
        raise KeyError(f"unknown method {method!r}; available: {', '.join(STEP_METHODS)}") from None


def reference_solve(system: SpinSystem, s0, t0: float, t1: float, fine_dt: float = 1e-3) -> SpinConfiguration:
    """High-accuracy solution by fourth-order Runge-Kutta on ``g``.

    The step is shrunk so an integer number of steps lands exactly on ``t1``;
    the global error is O(fine_dt**4).  Only meant as an accuracy oracle.
    """
    z = np.array(getattr(s0, "spins", s0), dtype=float)
    if t1 == t0:
        return SpinConfiguration(z, t1, check=False)
    n = max(1, int(np.ceil(abs(t1 - t0) / fine_dt - 1e-9)))
    h = (t1 - t0) / n
    for i in range(n):
        z = _rk4_on_g(system, z, t0 + i * h, h)
    return SpinConfiguration(z, t1, check=False)


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    states: list
    observables: dict = field(default_factory=dict)
    method: str = ""
    dt: float = 0.0

    @property
    def spins(self) -> np.ndarray:
        """All states stacked into an ``(n_steps + 1, N, 3)`` array."""
        return np.stack([s.spins for s in self.states])

    def __len__(self):
        return len(self.states)


def standard_observers(system: SpinSystem, names=("energy", "spin_length"), initial=None) -> dict:
    """Named observers ``(state) -> float`` understood by :func:`integrate_trajectory`.

    ``linear_integrals`` expands into three observers, one per Cartesian
    component of ``sum_i w_i s_i``; ``energy_error`` needs ``initial``.
    """
    obs = {}
    for name in names:
        if name == "energy":
            obs["energy"] = lambda st: system.energy(st.spins, st.time)
        elif name == "energy_error":
            if initial is None:
                raise ValueError("energy_error needs the initial state")
            e0 = system.energy(initial.spins, initial.time)
            obs["energy_error"] = lambda st: abs(system.energy(st.spins, st.time) - e0)
        elif name == "spin_length":
            obs["spin_length_deviation"] = lambda st: st.norm_deviation()
        elif name == "linear_integrals":
            w = system.linear_integral_weights
            for c, axis in enumerate("xyz"):
                obs[f"linear_integral_{axis}"] = (
                    lambda st, c=c: float((np.ones(st.n_spins) if w is None else w) @ st.spins[:, c])
                )
        elif name == "iterations":
            continue  # always recorded
        else:
            raise KeyError(f"unknown observer {name!r}")
    return obs


def integrate_trajectory(system: SpinSystem, method, initial: SpinConfiguration, dt: float,
                         num_steps: int, observers: Mapping[str, Callable] | None = None,
                         options: SolverOptions | None = None) -> TrajectoryRecord:
    """Apply a one-step map ``num_steps`` times and record states and observables.

    Times are computed as ``t0 + n * dt`` rather than accumulated.  Step
    failures are re-raised with the step index attached.
    """
    if int(num_steps) < 1:
        raise ValueError("num_steps must be at least 1")
    _check_dt(dt)
    step = get_method(method)
    observers = dict(observers or {})
    t0 = initial.time
    states = [initial]
    values = {name: [fn(initial)] for name, fn in observers.items()}
    iterations = [0]
    state = initial
    for n in range(int(num_steps)):
        try:
            result = step(system, state, dt, options)
        except SpinstepError as exc:
            exc.step = n
            if not isinstance(exc, NoConvergence):
                exc.args = (f"step {n}: {exc}",) + exc.args[1:]
            raise
        state = result.next.with_time(t0 + (n + 1) * dt)
        states.append(state)
        iterations.append(result.iterations)
        for name, fn in observers.items():
            values[name].append(fn(state))
    obs = {name: np.asarray(v, dtype=float) for name, v in values.items()}
    obs["iterations"] = np.asarray(iterations, dtype=float)
    return TrajectoryRecord(
        times=t0 + dt * np.arange(int(num_steps) + 1),
        states=states,
        observables=obs,
        method=method if isinstance(method, str) else getattr(method, "__name__", "custom"),
        dt=dt,
    )
