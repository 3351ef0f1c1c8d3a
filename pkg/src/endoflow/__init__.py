"""endoflow: discrete-time endomorphism semigroups of finite-dimensional
operator algebras — compressions, dilations, projective cocycles, and
minimality certification, with every theorem-level identity cross-checked
numerically along two independent routes."""

from .linalg import (DEFAULT_TOL, Projection, TolerancePolicy, hermitian_eig, hs_inner,
                     opnorm, projection_join, projection_leq, projection_meet,
                     range_projection)
from .algebra import (StarAlgebra, bicommutant_check, block_algebra, center,
                      central_carrier, commutant, conditional_expectation,
                      full_matrix_algebra, hereditary_corner, is_factor,
                      smallest_dominating_projection, span_closure)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_TOL", "Projection", "TolerancePolicy", "hermitian_eig", "hs_inner",
    "opnorm", "projection_join", "projection_leq", "projection_meet",
    "range_projection",
    "StarAlgebra", "bicommutant_check", "block_algebra", "center",
    "central_carrier", "commutant", "conditional_expectation",
    "full_matrix_algebra", "hereditary_corner", "is_factor",
    "smallest_dominating_projection", "span_closure",
    "__version__",
]
