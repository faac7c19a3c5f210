"""Catalog of spin Hamiltonians with analytic gradients."""
from __future__ import annotations

import math

import numpy as np

from .core import CollisionSingularity, SpinSystem

COLLISION_THRESHOLD = 1e-12


def _moments(inertia) -> np.ndarray:
    inertia = np.array(inertia, dtype=float).reshape(-1)
    if inertia.shape != (3,) or not np.all(inertia > 0):
        raise ValueError(f"moments of inertia must be 3 positive numbers, got {inertia}")
    return inertia


class SpinningTop(SpinSystem):
    """Free rigid body, ``H = sum_j s_j^2 / (2 I_j)``.

    H is a homogeneous quadratic, so the spherical midpoint method conserves
    it exactly along with the spin length.
    """

    name = "spinning_top"

    def __init__(self, inertia=(1.0, 2.0, 4.0)):
        super().__init__(1)
        self.inertia = _moments(inertia)
        self.invariants = ("energy (homogeneous quadratic)", "spin length")

    def energy(self, s, t=0.0):
        return 0.5 * float(np.sum(s[0] ** 2 / self.inertia))

    def gradient(self, s, t=0.0):
        return s / self.inertia

    def quadratic_form(self) -> np.ndarray:
        return np.diag(0.5 / self.inertia)

    def params(self):
        return {"inertia": self.inertia.tolist()}


class PerturbedTop(SpinSystem):
    """Spinning top with a cubic perturbation.

    ``H = 1/2 sum_j (s_j^2 + 2/3 s_j^3) / I_j``, I = (1, 2, 4).  Integrable
    (single spin, autonomous) but H is no longer quadratic.
    """

    name = "perturbed_top"

    def __init__(self, inertia=(1.0, 2.0, 4.0)):
        super().__init__(1)
        self.inertia = _moments(inertia)
        self.invariants = ("energy", "spin length")

    def energy(self, s, t=0.0):
        x = s[0]
        return 0.5 * float(np.sum((x * x + (2.0 / 3.0) * x ** 3) / self.inertia))

    def gradient(self, s, t=0.0):
        return (s + s * s) / self.inertia

    def params(self):
        return {"inertia": self.inertia.tolist()}


class ForcedTop(SpinSystem):
    """Periodically forced top, ``H = sum_j s_j^2/(2 I_j) + eps sin(t) s_3``, I = (1, 4/3, 2)."""

    name = "forced_top"
    time_dependent = True
    period = 2.0 * math.pi

    def __init__(self, epsilon=0.07, inertia=(1.0, 4.0 / 3.0, 2.0)):
        super().__init__(1)
        self.epsilon = float(epsilon)
        self.inertia = _moments(inertia)
        self.invariants = ("spin length",)

    def energy(self, s, t=0.0):
        return 0.5 * float(np.sum(s[0] ** 2 / self.inertia)) + self.epsilon * math.sin(t) * s[0, 2]

    def gradient(self, s, t=0.0):
        g = s / self.inertia
        g[:, 2] += self.epsilon * math.sin(t)
        return g

    def unforced_energy(self, s) -> float:
        """Energy of the top without the forcing term; conserved when epsilon = 0."""
        return 0.5 * float(np.sum(np.asarray(s) ** 2 / self.inertia))

    def params(self):
        return {"epsilon": self.epsilon, "inertia": self.inertia.tolist()}


class HeisenbergChain(SpinSystem):
    """Classical Heisenberg chain ``H = -J sum_i s_i . s_{i+1}``.

    Rotation invariant, so the total spin is a vector of linear integrals.
    """

    name = "heisenberg_chain"

    def __init__(self, n_spins=100, coupling=1.0, boundary="periodic"):
        n_spins = int(n_spins)
        if n_spins < 2:
            raise ValueError("a chain needs at least 2 spins")
        if boundary not in ("periodic", "open"):
            raise ValueError(f"boundary must be 'periodic' or 'open', not {boundary!r}")
        super().__init__(n_spins)
        self.coupling = float(coupling)
        self.boundary = boundary
        self.linear_integral_weights = np.ones(n_spins)
        self.invariants = ("energy", "total spin (3 linear integrals)", "spin lengths")

    def energy(self, s, t=0.0):
        if self.boundary == "periodic":
            bonds = np.einsum("ij,ij->", s, np.roll(s, -1, axis=0))
        else:
            bonds = np.einsum("ij,ij->", s[:-1], s[1:])
        return -self.coupling * float(bonds)

    def gradient(self, s, t=0.0):
        if self.boundary == "periodic":
            nb = np.roll(s, 1, axis=0) + np.roll(s, -1, axis=0)
        else:
            nb = np.zeros_like(s)
            nb[1:] += s[:-1]
            nb[:-1] += s[1:]
        return -self.coupling * nb

    def params(self):
        return {"n_spins": self.n_spins, "coupling": self.coupling, "boundary": self.boundary}


class PointVortices(SpinSystem):
    """Point vortices on the unit sphere.

    ``H = -1/(4 pi) sum_{i<j} G_i G_j ln(2 - 2 s_i . s_j)`` with equations of
    motion ``ds_i/dt = (1/G_i) s_i x grad_i H``.  The ``1/G_i`` factors live in
    ``field_weights``; :meth:`gradient` is the plain gradient of H.
    """

    name = "point_vortices"

    def __init__(self, strengths=(1.0, 1.0)):
        strengths = np.array(strengths, dtype=float).reshape(-1)
        if strengths.size < 1 or np.any(strengths == 0):
            raise ValueError("vortex strengths must be nonzero")
        super().__init__(strengths.size)
        self.strengths = strengths
        self.field_weights = 1.0 / strengths
        self.linear_integral_weights = strengths
        self.invariants = ("energy", "moment of vorticity (3 linear integrals)")

    def _gaps(self, s):
        gaps = 2.0 - 2.0 * (s @ s.T)
        np.fill_diagonal(gaps, np.inf)
        if np.min(gaps) < COLLISION_THRESHOLD:
            i, j = np.unravel_index(np.argmin(gaps), gaps.shape)
            raise CollisionSingularity(f"vortices {i} and {j} collided (2 - 2 s_i.s_j = {gaps[i, j]:.3e})")
        return gaps

    def energy(self, s, t=0.0):
        gaps = self._gaps(s)
        gg = np.outer(self.strengths, self.strengths)
        iu = np.triu_indices(len(self.strengths), 1)
        return -float(np.sum(gg[iu] * np.log(gaps[iu]))) / (4.0 * math.pi)

    def gradient(self, s, t=0.0):
        gaps = self._gaps(s)
        coef = np.outer(self.strengths, self.strengths) / gaps
        return (coef @ s) / (2.0 * math.pi)

    def params(self):
        return {"strengths": self.strengths.tolist()}


CATALOG = {
    "spinning_top": SpinningTop,
    "perturbed_top": PerturbedTop,
    "forced_top": ForcedTop,
    "heisenberg_chain": HeisenbergChain,
    "point_vortices": PointVortices,
}


def make_system(name: str, **params) -> SpinSystem:
    """Look up a catalog system by name and build it from keyword parameters."""
    try:
        factory = CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown system {name!r}; available: {', '.join(sorted(CATALOG))}") from None
    return factory(**params)


def gradient_check(system: SpinSystem, s, t: float = 0.0, h: float = 1e-6) -> float:
    """Max componentwise gap between the analytic gradient and central differences of H."""
    if h <= 0:
        raise ValueError("h must be positive")
    s = np.array(getattr(s, "spins", s), dtype=float)
    numeric = np.empty_like(s)
    for idx in np.ndindex(*s.shape):
        orig = s[idx]
        s[idx] = orig + h
        e_plus = system.energy(s, t)
        s[idx] = orig - h
        e_minus = system.energy(s, t)
        s[idx] = orig
        numeric[idx] = (e_plus - e_minus) / (2.0 * h)
    return float(np.max(np.abs(system.gradient(s, t) - numeric)))
