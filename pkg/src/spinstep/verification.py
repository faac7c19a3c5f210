"""The verification battery behind ``spinstep verify``.

Each suite runs one family of property checks at fixed parameters and
returns a list of :class:`~spinstep.analysis.Check`.  Randomness comes from
``numpy.random.default_rng([seed, suite_index])``, so a report is a pure
function of the seed.
"""
from __future__ import annotations

import numpy as np

from . import analysis
from .analysis import Check, VerificationReport
from .core import FunctionSystem, SpinConfiguration, random_orthogonal
from .integrators import SolverOptions, integrate_trajectory
from .systems import (
    ForcedTop,
    HeisenbergChain,
    PerturbedTop,
    PointVortices,
    SpinningTop,
    gradient_check,
)

FIG2_INITIAL = (0.0, 0.7248, -0.6889)
TOL = SolverOptions(tolerance=1e-12, max_iterations=100)


def fig2_state() -> SpinConfiguration:
    """Initial condition of the perturbed-top experiments, normalized (given to 4 digits)."""
    return SpinConfiguration.from_vectors(FIG2_INITIAL)


def separated_vortices(n, rng, min_gap=0.3):
    """Random vortex positions with every chord length at least ``min_gap``."""
    while True:
        s = SpinConfiguration.random(n, rng)
        d = np.linalg.norm(s.spins[:, None] - s.spins[None], axis=-1)
        if np.min(d[np.triu_indices(n, 1)]) >= min_gap:
            return s


def _interval_defect(x, lo, hi):
    return max(lo - x, x - hi, 0.0)


def energy_drift(rng):
    system = PerturbedTop()
    s0 = fig2_state()
    sph = analysis.energy_error_series(system, integrate_trajectory(system, "spherical", s0, 0.5, 4000, options=TOL))
    cls = analysis.energy_error_series(system, integrate_trajectory(system, "classical", s0, 0.5, 4000, options=TOL))
    sph_max, cls_max = float(sph.max()), float(cls.max())
    ctx = f"spherical max {sph_max:.3e}, classical max {cls_max:.3e} over t<=2000"
    return [
        Check("energy_drift.spherical_bounded", sph_max, 1e-2, ctx),
        Check("energy_drift.classical_reaches_2e-2", 2e-2 / cls_max, 1.0, "defect = 2e-2 / classical max; " + ctx),
        Check("energy_drift.classical_5x_spherical", 5.0 * sph_max / cls_max, 1.0,
              "defect = 5 * spherical max / classical max; " + ctx),
    ]


def quadratic_conservation(rng):
    system = SpinningTop((1.0, 2.0, 4.0))
    worst = []
    for _ in range(10):
        traj = integrate_trajectory(system, "spherical", SpinConfiguration.random(1, rng), 0.5, 10_000, options=TOL)
        worst.append(float(analysis.energy_error_series(system, traj).max()))
    return [Check("quadratic_conservation.spinning_top", max(worst), 1e-10,
                  f"10 random states, dt=0.5, 1e4 steps; per-state max {', '.join(f'{w:.1e}' for w in worst)}")]


def _catalog_runs(rng):
    """Representative (system, initial state, dt) for every catalog entry."""
    return [
        (SpinningTop((1.0, 2.0, 4.0)), SpinConfiguration.random(1, rng), 0.5),
        (PerturbedTop(), fig2_state(), 0.5),
        (ForcedTop(0.07), SpinConfiguration.random(1, rng), 2 * np.pi / 20),
        (HeisenbergChain(20), SpinConfiguration.random(20, rng), 0.1),
        (PointVortices(rng.uniform(0.5, 1.5, 8) * rng.choice([-1.0, 1.0], 8)), separated_vortices(8, rng), 0.05),
    ]


def spin_length(rng):
    checks = []
    for system, s0, dt in _catalog_runs(rng):
        traj = integrate_trajectory(system, "spherical", s0, dt, 10_000, options=TOL)
        dev = float(np.max(np.abs(np.linalg.norm(traj.spins, axis=-1) - 1.0)))
        checks.append(Check(f"spin_length.{system.name}", dev, 1e-10, f"N={s0.n_spins}, dt={dt:.4g}, 1e4 steps"))
    return checks


def symplecticity(rng):
    system = PerturbedTop()
    seed = int(rng.integers(2**31))
    kw = dict(probe_scale=1e-5, trials=50, seed=seed, options=TOL)
    sph = analysis.symplecticity_defect(system, "spherical", fig2_state(), 0.5, **kw)
    cls = analysis.symplecticity_defect(system, "classical", fig2_state(), 0.5, **kw)
    ctx = f"spherical {sph:.3e}, classical {cls:.3e}; eps=1e-5, 50 tangent pairs"
    return [
        Check("symplecticity.spherical", sph, 1e-6, ctx),
        Check("symplecticity.classical_100x", 100.0 * sph / cls, 1.0, "defect = 100 * spherical / classical; " + ctx),
    ]


def _random_case(rng):
    kind = rng.integers(6)
    if kind == 0:
        return SpinningTop(rng.uniform(0.5, 3.0, 3)), 1
    if kind == 1:
        return PerturbedTop(), 1
    if kind == 2:
        return ForcedTop(rng.uniform(0.0, 0.2)), 1
    if kind == 3:
        n = int(rng.integers(2, 12))
        return HeisenbergChain(n, rng.uniform(0.2, 0.6) * rng.choice([-1.0, 1.0]), rng.choice(["periodic", "open"])), n
    if kind == 4:
        n = int(rng.integers(2, 6))
        return PointVortices(rng.uniform(0.2, 0.6, n) * rng.choice([-1.0, 1.0], n)), n
    a = rng.standard_normal((3, 3))
    a = 0.5 * (a + a.T)
    return FunctionSystem(lambda s, t: 0.5 * s[0] @ a @ s[0], lambda s, t: s @ a, name="random_quadratic", n_spins=1), 1


def equivalence(rng):
    worst, detail = 0.0, ""
    for _ in range(100):
        system, n = _random_case(rng)
        s0 = separated_vortices(n, rng) if system.name == "point_vortices" else SpinConfiguration.random(n, rng)
        dt = float(rng.uniform(0.01, 0.5))
        a = integrate_trajectory(system, "spherical", s0, dt, 100, options=TOL).spins
        b = integrate_trajectory(system, "classical_g", s0, dt, 100, options=TOL).spins
        d = float(np.max(np.abs(a - b)))
        if d >= worst:
            worst, detail = d, f"worst case {system.name} N={n} dt={dt:.3f}"
    return [Check("equivalence.classical_on_g", worst, 1e-10, "100 random cases x 100 steps; " + detail)]


def order(rng):
    order_, errors = analysis.convergence_order(PerturbedTop(), "spherical", fig2_state(), 10.0,
                                                [0.2, 0.1, 0.05, 0.025], options=TOL)
    return [Check("order.spherical", abs(order_ - 2.0), 0.2,
                  f"fitted order {order_:.4f}; errors {', '.join(f'{e:.2e}' for e in errors)}")]


def equivariance(rng):
    system = HeisenbergChain(10)
    s0 = SpinConfiguration.random(10, rng)
    rotations = [random_orthogonal(rng, reflection=bool(i % 2)) for i in range(20)]
    d = analysis.equivariance_defect("spherical", system, s0, 0.3, rotations, options=TOL)
    return [Check("equivariance.heisenberg_chain", d, 1e-10, "N=10, dt=0.3, 10 rotations + 10 reflections")]


def self_adjoint(rng):
    checks = []
    for system in (PerturbedTop(), ForcedTop(0.07)):
        d = max(analysis.self_adjointness_defect("spherical", system,
                                                 SpinConfiguration.random(1, rng, time=float(rng.uniform(0, 6))),
                                                 0.5, options=TOL)
                for _ in range(10))
        checks.append(Check(f"self_adjoint.{system.name}", d, 1e-10, "10 random states, dt=0.5"))
    return checks


def solver(rng):
    traj = integrate_trajectory(PerturbedTop(), "spherical", fig2_state(), 0.5, 4000, options=TOL)
    its = traj.observables["iterations"][1:]
    med, mx = float(np.median(its)), float(its.max())
    return [
        Check("solver.median_iterations_in_4_12", _interval_defect(med, 4, 12), 0.0, f"median {med:g}"),
        Check("solver.max_iterations", mx, 20.0, f"max {mx:g} over 4000 steps"),
    ]


def linear_integrals(rng):
    chain = HeisenbergChain(100)
    traj = integrate_trajectory(chain, "spherical", SpinConfiguration.random(100, rng), 0.1, 1000, options=TOL)
    vort = PointVortices(rng.uniform(0.5, 1.5, 8) * rng.choice([-1.0, 1.0], 8))
    vtraj = integrate_trajectory(vort, "spherical", separated_vortices(8, rng), 0.05, 1000, options=TOL)
    return [
        Check("linear_integrals.heisenberg_total_spin", analysis.linear_integral_drift(traj, chain.linear_integral_weights),
              1e-9, "N=100, dt=0.1, 1e3 steps"),
        Check("linear_integrals.vortex_moment", analysis.linear_integral_drift(vtraj, vort.linear_integral_weights),
              1e-9, "N=8, dt=0.05, 1e3 steps"),
    ]


def section(rng, periods=500):
    seeds = analysis.sphere_seeds(20)
    cloud = analysis.poincare_section(ForcedTop(0.07), "spherical", seeds, 20, periods, options=TOL)
    norm_dev = float(np.max(np.abs(np.linalg.norm(cloud.points, axis=-1) - 1.0)))
    top = ForcedTop(0.0)
    control = analysis.poincare_section(top, "spherical", seeds, 20, periods, options=TOL)
    h_dev = max(abs(top.unforced_energy(p) - top.unforced_energy(seed))
                for seed, orbit in zip(seeds, control.points) for p in orbit)
    return [
        Check("section.unit_norm", norm_dev, 1e-9, f"eps=0.07, k=20, M={periods}, 20 seeds"),
        Check("section.unforced_energy_level", h_dev, 1e-10, f"eps=0 control, k=20, M={periods}, 20 seeds"),
    ]


def gradient(rng):
    checks = []
    for system in (SpinningTop((1.0, 2.0, 4.0)), PerturbedTop(), ForcedTop(0.07), HeisenbergChain(6, 1.3, "open"),
                   PointVortices([1.0, -0.7, 2.0, 0.5])):
        n = system.n_spins
        worst = 0.0
        for _ in range(100):
            s = separated_vortices(n, rng) if system.name == "point_vortices" else SpinConfiguration.random(n, rng)
            worst = max(worst, gradient_check(system, s.spins, float(rng.uniform(0, 6.3)), 1e-6))
        checks.append(Check(f"gradient.{system.name}", worst, 1e-6, "100 random points, h=1e-6"))
    return checks


SUITES = {
    "energy_drift": energy_drift,
    "quadratic_conservation": quadratic_conservation,
    "spin_length": spin_length,
    "symplecticity": symplecticity,
    "equivalence": equivalence,
    "order": order,
    "equivariance": equivariance,
    "self_adjoint": self_adjoint,
    "solver": solver,
    "linear_integrals": linear_integrals,
    "section": section,
    "gradient": gradient,
}


def run_suite(name: str, seed: int = 0) -> list:
    index = list(SUITES).index(name)
    return SUITES[name](np.random.default_rng([seed, index]))


def run_verification(suites=None, seed: int = 0) -> VerificationReport:
    """Run the selected suites (all by default) and collect a report."""
    names = list(SUITES) if not suites else list(suites)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise KeyError(f"unknown suite(s) {', '.join(unknown)}; available: {', '.join(SUITES)}")
    report = VerificationReport(seed=seed)
    for name in names:
        report.checks.extend(run_suite(name, seed))
    return report
