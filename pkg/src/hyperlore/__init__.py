"""Low-rank factorization of hyperbolic embeddings.

An embedding matrix ``Xbar`` whose columns lie on the hyperboloid ``H^n`` is
approximated column-wise by ``[z0_i; U z_i]`` with an orthonormal ``U`` of
``r`` columns and low-dimensional hyperboloid points ``[z0_i; z_i]``.
"""

from .errors import (
    ChecksumError,
    ConstraintViolationError,
    DimensionError,
    EmptyInputError,
    HyperloreError,
    NumericError,
    ParseError,
    SingularityError,
    TangencyError,
)
from .evaluation import MapResult, ReconstructionGraph, compress, map_rank_sweep, map_score
from .losses import LossKind, euclidean_gradient, euclidean_hessian_vec, loss_value
from .product import FactoredEmbedding, ProductPoint, ProductTangent, expand, initialize
from .solver import SolveReport, TrConfig, riemannian_gradient, riemannian_hessian_vec, tr_solve
from .svd import best_rank_r_error, solve_svd

__version__ = "0.1.0"

__all__ = [
    "ChecksumError",
    "ConstraintViolationError",
    "DimensionError",
    "EmptyInputError",
    "FactoredEmbedding",
    "HyperloreError",
    "LossKind",
    "MapResult",
    "NumericError",
    "ParseError",
    "ProductPoint",
    "ProductTangent",
    "ReconstructionGraph",
    "SingularityError",
    "SolveReport",
    "TangencyError",
    "TrConfig",
    "best_rank_r_error",
    "compress",
    "euclidean_gradient",
    "euclidean_hessian_vec",
    "expand",
    "initialize",
    "loss_value",
    "map_rank_sweep",
    "map_score",
    "riemannian_gradient",
    "riemannian_hessian_vec",
    "solve_svd",
    "tr_solve",
]
