"""Solvers for highly anisotropic 2D elliptic problems.

Three discretizations of the same problem are provided: the direct
singular-perturbation discretization (P), an asymptotic-preserving
reformulation splitting the unknown into its z-mean and a constrained
fluctuation (AP), and a hybrid model that couples the reformulation above a
chosen interface with the 1D limit model below it (APL).
"""

from .analysis import (ErrorReport, ScanResult, eoc, error_norms,
                       interface_scan, theorem1_fit, theorem2_fit)
from .assembly import (DofLayout, assemble_expanded_trace, assemble_form,
                       assemble_rhs_fluct, assemble_rhs_mean, fluct_layout,
                       zline_average)
from .basis import QuadratureRule1D, gauss_rule, p1_eval, q1_eval
from .linalg import (BlockSystem, Factorization, SingularSystemError,
                     compose_blocks, cond1_estimate, equilibrate, lu_factor,
                     lu_solve, matrix_stats, write_matrix_market)
from .mesh import (DOMAIN_A, DOMAIN_B, Domain, SubdomainSplit, TensorMesh,
                   build_mesh, find_interface_for_eps, split_at_interface)
from .models import (SolutionField, build_ap_system, build_apl_system,
                     build_p_system, derive_xi2, ess_distance, h1_distance,
                     solve_limit_1d, solve_model)
from .problems import (Coefficients, EpsProfile, ManufacturedProblem,
                       eps_tanh, make_setup, setup_a, setup_b,
                       setup_zero_fluctuation)

__version__ = "0.1.0"
