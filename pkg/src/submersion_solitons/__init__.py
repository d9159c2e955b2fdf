"""Mean-curvature-flow solitons from submersion-reduced ODEs.

Profiles of the reduction, adaptive integration of the reduced ODE, launches
through its singular points, the planar phase field of the rotator, and an
extrinsic finite-difference verifier in the half-space model.
"""

from .ode_core import (
    IntegratorOptions,
    ResidualReport,
    Trajectory,
    cubic_bounds,
    generic_rhs,
    integrate,
    ode_residual,
    read_trajectory_csv,
    write_trajectory_csv,
)
from .profiles import (
    DomainError,
    ProfileError,
    SubmersionProfile,
    custom_profile,
    dilation_profile,
    load_profile,
    rotator_profile,
    translator_profile,
)
from .singular_launch import bowl_launch, glue_wing, wing_launch

__all__ = [
    "IntegratorOptions",
    "ResidualReport",
    "Trajectory",
    "cubic_bounds",
    "generic_rhs",
    "integrate",
    "ode_residual",
    "read_trajectory_csv",
    "write_trajectory_csv",
    "DomainError",
    "ProfileError",
    "SubmersionProfile",
    "custom_profile",
    "dilation_profile",
    "load_profile",
    "rotator_profile",
    "translator_profile",
    "bowl_launch",
    "glue_wing",
    "wing_launch",
]

__version__ = "0.1.0"
