"""First Dirichlet-Neumann eigenpair of a ball perforated by many small spheres.

Asymptotic approximations in the mesoscale regime ``eps <= c d**3``: the
coefficient systems, eigenvalue terms ``Lambda_1`` and ``Lambda_2``, the
uniform eigenfield, reference oracles and the homogenized limit.
"""

__version__ = "0.1.0"

from .geometry import (  # noqa: E402
    Cluster,
    Domain,
    Inclusion,
    build_cluster,
    check_constraint,
    cluster_from_config,
    generate_ball_lattice,
    generate_cubic_lattice,
    load_cluster,
)
from .kernels import KernelContext, QuadratureSpec, context_for  # noqa: E402
from .coefficients import solve_cluster, solve_higher_order  # noqa: E402
from .spectral import (  # noqa: E402
    GridSpec,
    boundary_residuals,
    eigenfield_higher,
    eigenfield_leading,
    field_grid,
    lambda_higher,
    lambda_leading,
)

__all__ = [
    "Cluster", "Domain", "Inclusion", "build_cluster", "check_constraint", "cluster_from_config",
    "generate_ball_lattice", "generate_cubic_lattice", "load_cluster", "KernelContext", "QuadratureSpec",
    "context_for", "solve_cluster", "solve_higher_order", "GridSpec", "boundary_residuals",
    "eigenfield_higher", "eigenfield_leading", "field_grid", "lambda_higher", "lambda_leading",
]
