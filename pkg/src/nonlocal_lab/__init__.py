"""Numerical experiments for nonlocal operators with bounded measurable kernels."""

__version__ = "0.1.0"

from .kernels import (  # noqa: E402
    FAMILIES,
    KernelDomainError,
    KernelField,
    construct_kernel,
    eval_kernel,
    rescale,
    symmetrize,
)
from .discretization import (  # noqa: E402
    ConfigurationError,
    DomainError,
    FarField,
    GridFunction,
    Mesh1D,
    StiffnessSystem,
    UnsupportedInputError,
    assemble_load,
    assemble_stiffness,
    build_mesh,
    gagliardo_seminorm,
)
from .solver import (  # noqa: E402
    SolveOptions,
    SolverError,
    comparison_check,
    solve_dirichlet,
    solve_problem,
    solve_torsion,
)
from .estimators import (  # noqa: E402
    ball_stats,
    caccioppoli_gap,
    classical_harnack_example,
    holder_exponent_fit,
    oscillation_sweep,
    s_limit_trend,
    tail,
    tail_localized_deficit,
    torsion_lower_bound_sweep,
    weak_harnack_ratio,
)
from .config import ConfigError, ExperimentConfig, parse_config  # noqa: E402
from .experiments import run_experiment  # noqa: E402
