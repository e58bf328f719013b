"""Numerical toolkit for the three-dimensional smectic-A layer energy."""

from .energy import (
    BpsDecomposition,
    EnergyBreakdown,
    bps_decomposition,
    bps_residual,
    compression_residual,
    curvature_flux_check,
    energy,
    equipartition_gap,
    gauss_curvature,
)
from .entropy import (
    Frame,
    IncompatibleJumpError,
    JumpStates,
    div_sigma,
    entropy_density_eig,
    entropy_sup_rotations,
    frame_cost,
    jump_cost,
    rotation_combo_check,
    sigma_frame,
)
from .grid import (
    Grid3,
    HessianPerp,
    ScalarField,
    VectorField3,
    Window,
    boundary_flux,
    gradient,
    integrate,
    make_grid,
    perp_hessian,
    perp_laplacian,
    sample_field,
)
from .minimize import (
    CompactnessReport,
    MinimizeConfig,
    MinimizeReport,
    compactness_diagnostics,
    cube_experiment,
    energy_gradient,
    minimize,
)
from .profile import (
    DislocationSpec,
    ProfileSolution,
    Truncation,
    ansatz_field,
    bps_verify,
    dislocation_field,
    profile_energy,
    profile_rhs,
    solve_profile,
)

__version__ = "0.1.0"
