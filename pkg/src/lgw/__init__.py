"""Localized Gaussian widths of M-point convex hulls.

Library and batch CLI: Monte Carlo width estimation with a certified inner
solver, sampling-based sparsification over the simplex, constrained ERM
estimators, closed-form rate and fixed-point formulas, and a seeded
experiment harness that checks the inequalities empirically.
"""

from .core import (
    Dictionary,
    GramMatrix,
    SimplexWeight,
    SparseGridWeight,
    gram,
    min_q_over_simplex,
    mu_of_theta,
    project_l1_ball,
    project_simplex,
    q_form,
    read_dictionary_csv,
    signed_basis_dictionary,
    write_dictionary_csv,
)
from .errors import (
    BoundNotMet,
    CapExceeded,
    DimensionMismatch,
    EmptyIntersection,
    InvalidInput,
    InvalidRegime,
    LgwError,
    NoCrossing,
    NonConvergence,
    SignSearchExhausted,
)
from .estimators import (
    DensityProblem,
    EstimatorResult,
    RegressionProblem,
    SolveOpts,
    convex_aggregate,
    density_erm,
    lasso_constrained,
    minimize_quadratic_l1,
    persistence_erm,
)
from .maurey import (
    SparsifyCertificate,
    enumerate_grid,
    expected_q_of_sample,
    grid_cardinality,
    sample_sparse,
    sparsify_certified,
)
from .rates import (
    AnisotropicBounds,
    AnisotropicConstants,
    FixedPointOpts,
    FixedPointReport,
    anisotropic_rate_bounds,
    bounded_process_bound,
    make_l1_ellipsoid_width_oracle,
    phi_convex,
    r_n_fixed_point,
    r_star_bounded,
    rademacher_sup_bound,
    s_n_fixed_point,
    t_star_convex_agg,
    t_star_finite_dim,
    t_star_kappa,
    t_star_lasso,
    verify_t_star_fixed_point,
)
from .rng import SeededStream
from .width import (
    Packing,
    SupportSolution,
    WidthEstimate,
    WidthOpts,
    build_packing,
    estimate_width,
    local_support,
    lower_bound_rip,
    rip_constant,
    upper_bound_closed_form,
    upper_bound_scaled,
)

__version__ = "0.1.0"
