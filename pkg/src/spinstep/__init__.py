"""Symplectic spherical midpoint integration for classical spin systems."""
from .core import (
    CollisionSingularity,
    DegenerateMidpoint,
    FunctionSystem,
    SpinConfiguration,
    SpinSystem,
    area_form,
    normalize_to_sphere,
    normalized_vector_field,
    spin_vector_field,
    tangent_project,
)
from .integrators import (
    NoConvergence,
    SolverOptions,
    StepResult,
    TrajectoryRecord,
    classical_midpoint_on_g,
    classical_midpoint_step,
    fixed_point_solve,
    integrate_trajectory,
    reference_solve,
    spherical_midpoint_step,
    standard_observers,
)
from .systems import make_system

__version__ = "0.1.0"
