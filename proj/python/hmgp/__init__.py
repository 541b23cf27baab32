"""Hierarchical-matrix Gaussian process toolkit.

Quasi-linear Matern log-likelihoods, maximum likelihood estimation, kriging
prediction and a kNN baseline, backed by the C++ core in ``hmgp._hmgp``.
"""

from ._hmgp import (
    MaternParams,
    assembly_stats,
    bessel_k,
    cov_dense,
    fit,
    knn_predict,
    kriging_variance,
    loglik,
    matern,
    mloe_mmom,
    predict,
    random_locations,
    rmse,
    sample_grf,
    select_k,
    tukey_gh,
)

__all__ = [
    "MaternParams",
    "assembly_stats",
    "bessel_k",
    "cov_dense",
    "fit",
    "knn_predict",
    "kriging_variance",
    "loglik",
    "matern",
    "mloe_mmom",
    "predict",
    "random_locations",
    "rmse",
    "sample_grf",
    "select_k",
    "tukey_gh",
]

__version__ = "0.1.0"
