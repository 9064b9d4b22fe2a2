"""Scale estimation for finite metric spaces, empirical measures and models.

Computes box, Hausdorff, packing, local and quantization scale invariants
relative to (p, q) gauge families, checks the comparison inequalities
between them, and ships exact oracles (product spaces, Lipschitz net
counts, Brownian small balls) to verify the estimators against.
"""

from .errors import (
    BracketError,
    DepthError,
    DomainError,
    GridError,
    ResourceError,
    ScalekitError,
    SizeError,
)
from .scaling import (
    DIMENSION,
    ORDER,
    RatioSequence,
    ScaleEstimate,
    ScalingFamily,
    check_scaling_condition,
    eval_scaling,
    log_eval_scaling,
    ratio_estimate,
    scale_estimate_from_counts,
    threshold_alpha,
)

__version__ = "0.1.0"

__all__ = [
    "BracketError",
    "DepthError",
    "DomainError",
    "GridError",
    "ResourceError",
    "ScalekitError",
    "SizeError",
    "DIMENSION",
    "ORDER",
    "RatioSequence",
    "ScaleEstimate",
    "ScalingFamily",
    "check_scaling_condition",
    "eval_scaling",
    "log_eval_scaling",
    "ratio_estimate",
    "scale_estimate_from_counts",
    "threshold_alpha",
    "__version__",
]
