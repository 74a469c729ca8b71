"""Structure-preserving midpoint integrators for classical spin systems.

The package simulates Hamiltonian dynamics on products of 2-spheres with
implicit midpoint methods that preserve the spheres and the symplectic
structure exactly (up to solver tolerance), and ships a verification layer
that measures those properties rather than assuming them.
"""

__version__ = "0.1.0"

from .core import (
    HamiltonianModel,
    SpinConfiguration,
    Trajectory,
    eval_vector_field,
    gamma_midpoint,
    make_model,
    poisson_bracket,
    ray_extension,
    ray_project,
    rotate_model,
)
from .errors import (
    AntipodalError,
    ConfigurationError,
    GeometryError,
    SingularRayError,
    SolverSingularError,
    SpinSystemError,
    StepError,
    TrajectoryError,
)
from .integrate import (
    StepperSpec,
    classical_midpoint_step,
    collective_midpoint_step,
    extended_spherical_midpoint_step,
    geodesic_midpoint_scaled,
    make_stepper,
    riemannian_midpoint_step,
    run_trajectory,
    spherical_midpoint_step,
    step,
)
from .quat import (
    CollectiveModel,
    collective_model,
    double_cover,
    hopf,
    hopf_section,
    hopf_tangent,
    hopf_tangent_adjoint,
    qconj,
    qinv,
    qmul,
    qnorm,
    quat_hamiltonian_vf,
)
from .solve import SolveReport, SolverSettings, solve_fixed_point, solve_newton
from .verify import (
    ConvergenceReport,
    DefectReport,
    TangentBasis,
    convergence_order,
    energy_drift,
    equivariance_defect,
    field_reference_flow,
    intertwining_defect,
    orbit_defect,
    random_rotation,
    rotation_matrix,
    symplectic_defect,
    symplectic_form,
    tangent_basis,
)

__all__ = [name for name in dir() if not name.startswith("_")]
