import math

import numpy as np
import pytest

from spinstep.core import CollisionSingularity, FunctionSystem, SpinConfiguration, random_orthogonal, spin_vector_field
from spinstep.integrators import integrate_trajectory, spherical_midpoint_step
from spinstep.systems import (
    CATALOG,
    ForcedTop,
    HeisenbergChain,
    PerturbedTop,
    PointVortices,
    SpinningTop,
    gradient_check,
    make_system,
)

from conftest import rotation_about


def test_spinning_top_values():
    top = SpinningTop((1, 2, 4))
    s = np.array([[0.0, 1.0, 0.0]])
    assert top.energy(s) == 0.25
    np.testing.assert_array_equal(top.gradient(s), [[0, 0.5, 0]])


def test_moments_must_be_positive():
    with pytest.raises(ValueError):
        SpinningTop((1, 0, 2))


def test_perturbed_top_values():
    top = PerturbedTop()
    s = np.array([[1.0, 0.0, 0.0]])
    assert top.energy(s) == pytest.approx(5 / 6, abs=1e-15)
    np.testing.assert_array_equal(top.gradient(s), [[2, 0, 0]])


def test_forced_top_values():
    top = ForcedTop(0.07)
    assert top.time_dependent and top.period == 2 * math.pi
    np.testing.assert_allclose(top.gradient(np.array([[0.0, 0.0, 1.0]]), math.pi / 2), [[0, 0, 0.57]], atol=1e-15)
    s = np.array([[0.3, -0.4, 0.5]])
    assert ForcedTop(0.0).energy(s, 1.3) == SpinningTop((1, 4 / 3, 2)).energy(s)


def test_unforced_forced_top_matches_spinning_top(rng):
    s0 = SpinConfiguration.random(1, rng)
    a = integrate_trajectory(ForcedTop(0.0), "spherical", s0, 0.3, 50).spins
    b = integrate_trajectory(SpinningTop((1, 4 / 3, 2)), "spherical", s0, 0.3, 50).spins
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_chain_aligned_equilibrium():
    chain = HeisenbergChain(2, 1.0, "open")
    s = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 1.0]])
    assert chain.energy(s) == -1.0
    np.testing.assert_array_equal(spin_vector_field(chain, s), 0)


def test_periodic_chain_uniform_equilibrium(rng):
    v = SpinConfiguration.random(1, rng).spins[0]
    s = np.tile(v, (3, 1))
    np.testing.assert_allclose(spin_vector_field(HeisenbergChain(3), s), 0, atol=1e-15)


def test_open_chain_gradient_drops_missing_neighbours(rng):
    s = SpinConfiguration.random(4, rng).spins
    g = HeisenbergChain(4, 2.0, "open").gradient(s)
    np.testing.assert_allclose(g[0], -2.0 * s[1])
    np.testing.assert_allclose(g[2], -2.0 * (s[1] + s[3]))


def test_chain_validation():
    with pytest.raises(ValueError):
        HeisenbergChain(1)
    with pytest.raises(ValueError):
        HeisenbergChain(4, boundary="helical")


def test_chain_energy_rotation_invariant(rng):
    chain = HeisenbergChain(12)
    for _ in range(10):
        s = SpinConfiguration.random(12, rng).spins
        R = random_orthogonal(rng)
        assert chain.energy(s @ R.T) == pytest.approx(chain.energy(s), abs=1e-12)


def test_vortex_energy_rotation_invariant(rng):
    vort = PointVortices([1.0, -0.5, 2.0, 0.7])
    for _ in range(10):
        s = SpinConfiguration.random(4, rng).spins
        R = random_orthogonal(rng)
        assert vort.energy(s @ R.T) == pytest.approx(vort.energy(s), abs=1e-12)


def test_antipodal_vortices_are_at_rest(rng):
    v = SpinConfiguration.random(1, rng).spins[0]
    s = np.array([v, -v])
    np.testing.assert_allclose(spin_vector_field(PointVortices([1.0, 1.0]), s), 0, atol=1e-16)


def test_vortex_collision_raises():
    s = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 1.0]])
    with pytest.raises(CollisionSingularity):
        PointVortices([1.0, 1.0]).gradient(s)
    with pytest.raises(ValueError):
        PointVortices([1.0, 0.0])


def test_two_vortex_rigid_rotation():
    """Two equal vortices rotate rigidly about s1 + s2.

    With c = s1.s2, the field s1' = G/(4 pi (1 - c)) s1 x s2 is w x s1 for
    w = -G/(4 pi (1 - c)) (s1 + s2); w is conserved by the motion, so the exact
    solution is a rotation about w at rate |w|.
    """
    gamma = 1.3
    theta = 0.6
    s0 = np.array([[np.sin(theta), 0.0, np.cos(theta)], [-np.sin(theta) * 0.5, np.sin(theta) * np.sqrt(0.75), np.cos(theta)]])
    c = s0[0] @ s0[1]
    w = -gamma / (4 * math.pi * (1 - c)) * (s0[0] + s0[1])
    T = 2.0
    exact = s0 @ rotation_about(w, np.linalg.norm(w) * T).T
    traj = integrate_trajectory(PointVortices([gamma, gamma]), "spherical", SpinConfiguration(s0), 0.01, 200)
    np.testing.assert_allclose(traj.states[-1].spins, exact, atol=1e-5)
    # second order: halving the step cuts the error by about 4
    err1 = np.max(np.abs(traj.states[-1].spins - exact))
    err2 = np.max(np.abs(integrate_trajectory(PointVortices([gamma, gamma]), "spherical", SpinConfiguration(s0),
                                              0.005, 400).states[-1].spins - exact))
    assert 3.0 < err1 / err2 < 5.0


@pytest.mark.parametrize("name", sorted(CATALOG))
def test_catalog_gradients(name, rng):
    params = {"heisenberg_chain": {"n_spins": 5, "boundary": "open"},
              "point_vortices": {"strengths": [1.0, -0.6, 1.7]}}.get(name, {})
    system = make_system(name, **params)
    n = system.n_spins
    tol = 1e-8 if n == 1 else 1e-6
    for _ in range(20):
        s = SpinConfiguration.random(n, rng).spins
        assert gradient_check(system, s, float(rng.uniform(0, 6)), 1e-6) <= tol


def test_make_system_unknown():
    with pytest.raises(KeyError):
        make_system("double_pendulum")


def test_gradient_check_detects_corruption(rng):
    top = SpinningTop((1, 2, 4))

    def bad_gradient(s, t):
        g = top.gradient(s)
        g[0, 1] += 1e-3
        return g

    broken = FunctionSystem(top.energy, bad_gradient, n_spins=1)
    s = SpinConfiguration.random(1, rng).spins
    assert gradient_check(top, s) <= 1e-8
    assert gradient_check(broken, s) >= 0.9e-3
    with pytest.raises(ValueError):
        gradient_check(top, s, h=0)


def test_one_step_does_not_mutate_input(rng):
    s0 = SpinConfiguration.random(1, rng)
    before = s0.spins.copy()
    spherical_midpoint_step(PerturbedTop(), s0, 0.5)
    np.testing.assert_array_equal(s0.spins, before)
