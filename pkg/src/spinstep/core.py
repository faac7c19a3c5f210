"""Sphere geometry, spin configurations and the spin vector field.

A configuration of ``N`` spins is stored as a float array of shape ``(N, 3)``.
Every function here is pure and works on plain arrays, so the integrators can
call them inside their fixed-point loops without allocating wrapper objects.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

STATE_NORM_TOLERANCE = 1e-9
DEGENERATE_NORM_THRESHOLD = 1e-8


class SpinstepError(Exception):
    """Base class for numerical failures raised by this package."""


class DegenerateMidpoint(SpinstepError, ArithmeticError):
    """The sum of consecutive spins is (nearly) zero, so it has no direction.

    This happens when a step maps a spin close to its antipode; reduce the
    time step.
    """


class CollisionSingularity(SpinstepError, ArithmeticError):
    """Two point vortices got too close for the log interaction to be finite."""


def cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise cross product of two ``(..., 3)`` arrays.

    Written out by hand because :func:`numpy.cross` has a large fixed overhead
    for the tiny arrays used in the inner solver loop.
    """
    a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    return np.stack((a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0), axis=-1)


def normalize_to_sphere(v, threshold: float = DEGENERATE_NORM_THRESHOLD) -> np.ndarray:
    """Return ``v / |v|`` for a single 3-vector."""
    v = np.asarray(v, dtype=float)
    norm = float(np.sqrt(v @ v))
    if not norm >= threshold:
        raise DegenerateMidpoint(f"cannot normalize vector of norm {norm:.3e}")
    return v / norm


def normalize_rows(s: np.ndarray, threshold: float = DEGENERATE_NORM_THRESHOLD) -> np.ndarray:
    """Normalize every row of an ``(N, 3)`` array onto the unit sphere."""
    norms = np.sqrt((s * s).sum(axis=1))
    if not norms.min() >= threshold:
        i = int(np.argmin(norms))
        raise DegenerateMidpoint(f"spin {i} has norm {norms[i]:.3e} below {threshold:g}")
    return s / norms[:, None]


def tangent_project(s: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Remove the component of ``u`` along the unit vector ``s``.

    Broadcasts over leading axes, so it also projects a whole tangent list at
    a configuration at once.
    """
    s = np.asarray(s, dtype=float)
    u = np.asarray(u, dtype=float)
    return u - np.sum(u * s, axis=-1, keepdims=True) * s


def area_form(s: np.ndarray, u: np.ndarray, v: np.ndarray):
    """Area element ``s . (u x v)`` of the unit sphere at ``s``.

    For ``(N, 3)`` inputs an array of the N per-sphere values is returned; the
    form on the product of spheres is their (possibly weighted) sum.
    """
    s = np.asarray(s, dtype=float)
    return np.sum(s * cross(np.asarray(u, dtype=float), np.asarray(v, dtype=float)), axis=-1)


@dataclass(frozen=True, eq=False)
class SpinConfiguration:
    """N unit spins together with the time they belong to.

    The array is copied and made read-only.  Norms are checked on construction
    but never corrected: an integrator that loses spin length should be caught,
    not patched up.  Pass ``check=False`` for states that are knowingly off the
    sphere (e.g. the output of a non-conservative control method).
    """

    spins: np.ndarray
    time: float = 0.0
    check: bool = True

    def __post_init__(self):
        spins = np.array(self.spins, dtype=float)
        if spins.ndim == 1:
            spins = spins.reshape(1, -1)
        if spins.ndim != 2 or spins.shape[1] != 3 or spins.shape[0] < 1:
            raise ValueError(f"expected an (N, 3) array of spins, got shape {spins.shape}")
        if not np.all(np.isfinite(spins)):
            raise ValueError("spin configuration contains non-finite values")
        if self.check:
            dev = np.abs(np.sqrt(np.einsum("ij,ij->i", spins, spins)) - 1.0)
            if np.max(dev) > STATE_NORM_TOLERANCE:
                raise ValueError(
                    f"spin {int(np.argmax(dev))} is off the unit sphere by {np.max(dev):.3e}"
                )
        spins.setflags(write=False)
        object.__setattr__(self, "spins", spins)
        object.__setattr__(self, "time", float(self.time))

    @property
    def n_spins(self) -> int:
        return self.spins.shape[0]

    def norm_deviation(self) -> float:
        """Largest ``| |s_i| - 1 |`` over the spins."""
        return float(np.max(np.abs(np.linalg.norm(self.spins, axis=1) - 1.0)))

    def with_time(self, time: float) -> "SpinConfiguration":
        return SpinConfiguration(self.spins, time, check=False)

    @classmethod
    def from_vectors(cls, vectors, time: float = 0.0) -> "SpinConfiguration":
        """Build a configuration from arbitrary nonzero vectors by normalizing them."""
        arr = np.array(vectors, dtype=float)
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        return cls(normalize_rows(arr), time)

    @classmethod
    def random(cls, n_spins: int, rng: np.random.Generator, time: float = 0.0):
        """Spins drawn uniformly on the sphere."""
        return cls.from_vectors(rng.standard_normal((n_spins, 3)), time)


class SpinSystem:
    """A Hamiltonian on (a neighbourhood of) the product of spheres.

    Subclasses provide :meth:`energy` and :meth:`gradient`, evaluated from the
    ambient-space formula so they make sense off the sphere too.  The equations
    of motion are ``ds_i/dt = w_i s_i x grad_i H`` where the per-spin factors
    ``field_weights`` are 1 except for systems with weighted symplectic forms
    (point vortices), whose form weights are ``1 / w_i``.
    """

    name = "custom"
    time_dependent = False
    period: float | None = None

    def __init__(self, n_spins: int | None = None):
        self.n_spins = n_spins
        self.field_weights = None
        self.linear_integral_weights = None
        self.invariants: tuple[str, ...] = ()

    def energy(self, s: np.ndarray, t: float = 0.0) -> float:
        raise NotImplementedError

    def gradient(self, s: np.ndarray, t: float = 0.0) -> np.ndarray:
        raise NotImplementedError

    def form_weights(self, n_spins: int) -> np.ndarray:
        if self.field_weights is None:
            return np.ones(n_spins)
        return 1.0 / np.asarray(self.field_weights, dtype=float)

    def params(self) -> dict:
        """Parameters needed to rebuild the system, for run metadata."""
        return {}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"


class FunctionSystem(SpinSystem):
    """A system assembled from plain callables ``energy(s, t)`` and ``gradient(s, t)``."""

    def __init__(self, energy, gradient, name="custom", n_spins=None, time_dependent=False,
                 field_weights=None, linear_integral_weights=None):
        super().__init__(n_spins)
        self._energy = energy
        self._gradient = gradient
        self.name = name
        self.time_dependent = time_dependent
        self.field_weights = field_weights
        self.linear_integral_weights = linear_integral_weights

    def energy(self, s, t=0.0):
        return float(self._energy(s, t))

    def gradient(self, s, t=0.0):
        return np.asarray(self._gradient(s, t), dtype=float)


def spin_vector_field(system: SpinSystem, s: np.ndarray, t: float = 0.0) -> np.ndarray:
    """The field ``f_i = s_i x grad_{s_i} H`` at an arbitrary point of ``(R^3)^N``."""
    f = cross(s, system.gradient(s, t))
    if system.field_weights is not None:
        f = f * system.field_weights[:, None]
    return f


def normalized_vector_field(system: SpinSystem, s: np.ndarray, t: float = 0.0) -> np.ndarray:
    """The spin field evaluated at the per-spin normalization of ``s``.

    Constant along rays ``s_i -> lambda_i s_i`` with ``lambda_i > 0``.
    """
    return spin_vector_field(system, normalize_rows(s), t)


def random_orthogonal(rng: np.random.Generator, reflection: bool | None = None) -> np.ndarray:
    """Haar-random 3x3 orthogonal matrix.

    ``reflection`` forces the determinant to -1 (True) or +1 (False); by
    default the sign is left to the draw.
    """
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if reflection is not None and (np.linalg.det(q) < 0) != reflection:
        q[:, 0] = -q[:, 0]
    return q
