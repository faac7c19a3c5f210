import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinstep.core import DegenerateMidpoint, FunctionSystem, SpinConfiguration
from spinstep.integrators import (
    NoConvergence,
    SolverOptions,
    classical_midpoint_on_g,
    classical_midpoint_step,
    fixed_point_solve,
    integrate_trajectory,
    reference_solve,
    spherical_midpoint_step,
    standard_observers,
)
from spinstep.systems import ForcedTop, HeisenbergChain, PerturbedTop, SpinningTop

from conftest import rotation_about, unit_vectors

FLAT = FunctionSystem(lambda s, t: 0.0, lambda s, t: np.zeros_like(s), name="flat")


def linear_field(B):
    B = np.asarray(B, dtype=float)
    return FunctionSystem(lambda s, t: float(np.sum(s @ B)), lambda s, t: np.broadcast_to(B, s.shape).copy(),
                          name="linear")


def symmetric_top_exact(s0, t, inertia=(1.0, 1.0, 2.0)):
    """Closed form for I1 = I2: s3 fixed, (s1, s2) turns about e3 at rate (1/I1 - 1/I3) s3."""
    rate = (1 / inertia[0] - 1 / inertia[2]) * s0[2]
    return rotation_about([0, 0, 1], rate * t) @ s0


class TestFixedPoint:
    def test_constant_map(self):
        z, k, r = fixed_point_solve(lambda z: np.array([3.0, -1.0]), np.zeros(2))
        assert k == 2 and r == 0.0
        np.testing.assert_array_equal(z, [3.0, -1.0])

    def test_halving_map(self):
        z, k, r = fixed_point_solve(lambda z: z / 2, np.array([1.0]), SolverOptions(tolerance=1e-12))
        assert abs(z[0]) < 1e-12
        assert k == math.ceil(math.log2(1e12))

    def test_no_convergence_keeps_history(self):
        with pytest.raises(NoConvergence) as info:
            fixed_point_solve(lambda z: 2 * z + 1, np.zeros(1), SolverOptions(max_iterations=5))
        assert len(info.value.residuals) == 5
        assert info.value.residuals == sorted(info.value.residuals)

    def test_non_finite_stops_early(self):
        with pytest.raises(NoConvergence):
            fixed_point_solve(lambda z: z * np.inf, np.ones(1))

    def test_options_validation(self):
        with pytest.raises(ValueError):
            SolverOptions(tolerance=0)
        with pytest.raises(ValueError):
            SolverOptions(max_iterations=0)

    def test_perturbed_top_iteration_count(self, fig2_state):
        res = spherical_midpoint_step(PerturbedTop(), fig2_state, 0.5, SolverOptions(tolerance=1e-12))
        assert 5 <= res.iterations <= 20
        assert res.residual < 1e-12


class TestSphericalStep:
    def test_flat_is_identity(self, rng):
        s = SpinConfiguration.random(3, rng)
        res = spherical_midpoint_step(FLAT, s, 0.5)
        np.testing.assert_array_equal(res.next.spins, s.spins)
        assert res.iterations == 1
        assert res.next.time == 0.5

    def test_isotropic_top_is_identity(self, rng):
        s = SpinConfiguration.random(1, rng)
        np.testing.assert_allclose(spherical_midpoint_step(SpinningTop((1, 1, 1)), s, 0.5).next.spins, s.spins,
                                   atol=1e-16)

    def test_zero_step_rejected(self, fig2_state):
        with pytest.raises(ValueError):
            spherical_midpoint_step(PerturbedTop(), fig2_state, 0.0)

    def test_symmetric_top_local_error(self):
        s0 = np.array([math.sqrt(0.5), 0.0, math.sqrt(0.5)])
        top = SpinningTop((1, 1, 2))
        errs = []
        for dt in (0.1, 0.05):
            res = spherical_midpoint_step(top, SpinConfiguration(s0), dt)
            errs.append(np.max(np.abs(res.next.spins[0] - symmetric_top_exact(s0, dt))))
        assert errs[0] <= 0.01 * 0.1 ** 3
        assert 6.0 < errs[0] / errs[1] < 10.0

    def test_antipodal_step_is_degenerate(self):
        # a huge field rotating the spin by ~pi in one step
        system = linear_field([0.0, 0.0, 1e9])
        with pytest.raises((DegenerateMidpoint, NoConvergence)):
            spherical_midpoint_step(system, SpinConfiguration([1.0, 0.0, 0.0]), 1.0)


class TestClassicalStep:
    def test_flat_is_identity(self, rng):
        s = SpinConfiguration.random(2, rng)
        np.testing.assert_array_equal(classical_midpoint_step(FLAT, s, 0.5).next.spins, s.spins)
        np.testing.assert_array_equal(classical_midpoint_on_g(FLAT, s, 0.5).next.spins, s.spins)

    def test_linear_field_matches_rotation(self, rng):
        B = np.array([0.3, -0.5, 0.8])
        system = linear_field(B)
        s0 = SpinConfiguration.random(1, rng)
        for dt in (0.2, 0.1):
            exact = rotation_about(B, -np.linalg.norm(B) * dt) @ s0.spins[0]
            sph = spherical_midpoint_step(system, s0, dt).next.spins[0]
            cls = classical_midpoint_step(system, s0, dt).next.spins[0]
            # the midpoint rule on a linear field is the Cayley transform: error ~ (|B| dt)^3 / 12
            bound = 1.2 * (np.linalg.norm(B) * dt) ** 3 / 12
            assert np.max(np.abs(sph - exact)) <= bound
            assert np.max(np.abs(cls - exact)) <= bound

    def test_classical_preserves_length(self, fig2_state):
        traj = integrate_trajectory(PerturbedTop(), "classical", fig2_state, 0.5, 200)
        assert np.max(np.abs(np.linalg.norm(traj.spins, axis=-1) - 1)) <= 1e-11


class TestEquivalence:
    def test_perturbed_top_paths(self, fig2_state):
        a = integrate_trajectory(PerturbedTop(), "spherical", fig2_state, 0.5, 100).spins
        b = integrate_trajectory(PerturbedTop(), classical_midpoint_on_g, fig2_state, 0.5, 100).spins
        assert np.max(np.abs(a - b)) <= 1e-10

    @settings(max_examples=100, deadline=None)
    @given(unit_vectors(1), st.integers(0, 2**32 - 1))
    def test_random_quadratic(self, s, seed):
        a = np.random.default_rng(seed).standard_normal((3, 3))
        a = 0.5 * (a + a.T)
        system = FunctionSystem(lambda s, t: 0.5 * s[0] @ a @ s[0], lambda s, t: s @ a, n_spins=1)
        s0 = SpinConfiguration(s)
        x = spherical_midpoint_step(system, s0, 0.1).next.spins
        y = classical_midpoint_on_g(system, s0, 0.1).next.spins
        assert np.max(np.abs(x - y)) <= 1e-10


@settings(max_examples=50, deadline=None)
@given(unit_vectors(4), st.floats(0.01, 0.4), st.floats(-1.0, 1.0))
def test_spin_length_preserved(s, dt, coupling):
    res = spherical_midpoint_step(HeisenbergChain(4, coupling), SpinConfiguration(s), dt)
    assert np.max(np.abs(np.linalg.norm(res.next.spins, axis=1) - 1)) <= 10 * 1e-12


@settings(max_examples=50, deadline=None)
@given(unit_vectors(1), st.floats(0.01, 0.5), st.floats(0.0, 6.3))
def test_self_adjoint_forced_top(s, dt, t0):
    system = ForcedTop(0.07)
    start = SpinConfiguration(s, t0)
    fwd = spherical_midpoint_step(system, start, dt).next
    back = spherical_midpoint_step(system, fwd, -dt).next
    assert np.max(np.abs(back.spins - start.spins)) <= 1e-11
    assert back.time == pytest.approx(t0, abs=1e-15)


class TestReference:
    def test_symmetric_top_closed_form(self):
        s0 = np.array([0.6, 0.0, 0.8])
        ref = reference_solve(SpinningTop((1, 1, 2)), SpinConfiguration(s0), 0.0, 1.0, 1e-4)
        assert np.max(np.abs(ref.spins[0] - symmetric_top_exact(s0, 1.0))) <= 1e-10

    def test_fourth_order(self):
        inertia = (1.0, 1.0, 0.25)
        s0 = np.array([0.6, 0.0, 0.8])
        top = SpinningTop(inertia)
        exact = symmetric_top_exact(s0, 1.0, inertia)
        e1, e2 = (np.max(np.abs(reference_solve(top, SpinConfiguration(s0), 0, 1, h).spins[0] - exact))
                  for h in (0.1, 0.05))
        assert 12.0 < e1 / e2 < 20.0

    def test_flat_is_identity(self, rng):
        s = SpinConfiguration.random(2, rng)
        np.testing.assert_allclose(reference_solve(FLAT, s, 0.0, 3.0, 0.1).spins, s.spins, atol=0)


class TestTrajectory:
    def test_rejects_zero_steps(self, fig2_state):
        with pytest.raises(ValueError):
            integrate_trajectory(PerturbedTop(), "spherical", fig2_state, 0.5, 0)

    def test_flat_stays_put(self, rng):
        s = SpinConfiguration.random(5, rng)
        traj = integrate_trajectory(FLAT, "spherical", s, 0.1, 100)
        assert len(traj) == 101
        assert np.all(traj.spins == s.spins)
        assert np.all(np.diff(traj.times) > 0)

    def test_observers(self, fig2_state):
        system = HeisenbergChain(6)
        s0 = SpinConfiguration.random(6, np.random.default_rng(3))
        obs = standard_observers(system, ("energy", "energy_error", "spin_length", "linear_integrals"), s0)
        traj = integrate_trajectory(system, "spherical", s0, 0.1, 20, obs)
        assert set(traj.observables) == {"energy", "energy_error", "spin_length_deviation", "linear_integral_x",
                                         "linear_integral_y", "linear_integral_z", "iterations"}
        assert traj.observables["energy_error"][0] == 0
        assert traj.observables["iterations"][0] == 0 and traj.observables["iterations"][1] > 0
        np.testing.assert_allclose(traj.observables["linear_integral_z"], traj.spins[:, :, 2].sum(axis=1))

    def test_failure_reports_step(self, fig2_state):
        with pytest.raises(NoConvergence) as info:
            integrate_trajectory(PerturbedTop(), "spherical", fig2_state, 0.5, 10, options=SolverOptions(max_iterations=3))
        assert info.value.step == 0
        assert "step 0" in str(info.value)

    def test_unknown_method(self, fig2_state):
        with pytest.raises(KeyError):
            integrate_trajectory(PerturbedTop(), "leapfrog", fig2_state, 0.5, 1)


class TestPerturbedTopLongRun:
    """Long runs on the perturbed top at dt = 0.5 from (0, 0.7248, -0.6889)."""

    @pytest.fixture(scope="class")
    @staticmethod
    def runs():
        s0 = SpinConfiguration.from_vectors([0.0, 0.7248, -0.6889])
        system = PerturbedTop()
        obs = standard_observers(system, ("energy_error",), s0)
        return {m: integrate_trajectory(system, m, s0, 0.5, 4000, obs) for m in ("spherical", "classical")}

    def test_spherical_orbit_recurs(self, runs):
        spins = runs["spherical"].spins[:, 0]
        dist = np.linalg.norm(spins[20:] - spins[0], axis=1)
        assert dist.min() <= 1e-2

    def test_spherical_energy_has_no_trend(self, runs):
        err = runs["spherical"].observables["energy_error"]
        assert err.max() <= 1e-2
        assert abs(err[-500:].mean() - err[1:501].mean()) <= 2e-4

    def test_classical_energy_drifts(self, runs):
        err = runs["classical"].observables["energy_error"]
        quarters = [q.mean() for q in np.array_split(err[1:], 4)]
        assert all(b > a for a, b in zip(quarters, quarters[1:]))
        assert quarters[-1] - quarters[0] > 5e-3
