"""Optimal rotations and small-strain limits of pure traction problems.

Rotation-group geometry in low dimension, the force functional of a
traction problem and its set of maximizing rotations, P1 finite and
linearized elasticity, and the epsilon-sweep harness built on them.
"""

__version__ = "0.1.0"

from .elasticity import (
    DensityParams,
    TractionProblem,
    limit_energy,
    minimize_nonlinear,
    minimize_over_R,
    recovery_sequence,
    reference_configuration,
    rescaled_displacement,
    solve_linear,
    total_energy,
)
from .forces import ForceField, assemble_force_matrix, builtin_field
from .geometry import exp_skew, geodesic_distance, log_principal, max_trace_rotation, skew_canonical_form
from .harness import appendix_demo, fit_rate, sweep_minimizers, sweep_recovery
from .mesh import Mesh, builtin_mesh
from .rotations import Kind, classify, normalize, project, tangent_normal

__all__ = [
    "DensityParams", "TractionProblem", "limit_energy", "minimize_nonlinear", "minimize_over_R",
    "recovery_sequence", "reference_configuration", "rescaled_displacement", "solve_linear",
    "total_energy", "ForceField", "assemble_force_matrix", "builtin_field", "exp_skew",
    "geodesic_distance", "log_principal", "max_trace_rotation", "skew_canonical_form",
    "appendix_demo", "fit_rate", "sweep_minimizers", "sweep_recovery", "Mesh", "builtin_mesh",
    "Kind", "classify", "normalize", "project", "tangent_normal",
]
