"""Wasserstein discriminant analysis."""

from ._wda import (
    DegenerateInputError,
    InvalidInputError,
    NumericalRangeError,
    WdaConfig,
    WdaError,
    append_noise,
    cost_matrix,
    error_rate,
    fda_fit,
    gen_toy,
    gradient,
    knn_predict,
    objective,
    pca_init,
    project_stiefel,
    regularized_distance,
    sinkhorn_plan,
    split,
    wda_fit,
)

__all__ = [
    "DegenerateInputError",
    "InvalidInputError",
    "NumericalRangeError",
    "WdaConfig",
    "WdaError",
    "append_noise",
    "cost_matrix",
    "error_rate",
    "fda_fit",
    "gen_toy",
    "gradient",
    "knn_predict",
    "objective",
    "pca_init",
    "project_stiefel",
    "regularized_distance",
    "sinkhorn_plan",
    "split",
    "wda_fit",
]
