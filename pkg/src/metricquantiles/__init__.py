"""Metric-space quantiles, ranks, signs, medians and rank-based tests."""

from .emdf import emdf_at, emdf_matrix, emdf_naive, rank_matrix
from .errors import ConfigError, DatasetError, NumericError
from .inference import (ScoreFunction, TestReport, independence_test,
                        linear_rank_statistic, null_moments, spearman_statistic,
                        standardized_statistic)
from .quantiles import (QuantileEngine, QuantileResult, breakdown_lower_bound,
                        empirical_depth, global_quantile, global_ranks,
                        global_signs, j_at, j_values, local_quantile,
                        local_ranks, local_signs, metric_median)
from .spaces import (EuclideanSpace, GaussianPoint, GaussianWassersteinSpace,
                     ProductSpace, Space, SpdSpace, SphereSpace, TreePoint,
                     TreeSpace, exact_isometry, pairwise_distances,
                     space_from_descriptor)

__all__ = [
    "ConfigError", "DatasetError", "NumericError",
    "EuclideanSpace", "SphereSpace", "SpdSpace", "GaussianWassersteinSpace",
    "TreeSpace", "ProductSpace", "Space", "GaussianPoint", "TreePoint",
    "pairwise_distances", "exact_isometry", "space_from_descriptor",
    "rank_matrix", "emdf_matrix", "emdf_at", "emdf_naive",
    "QuantileEngine", "QuantileResult", "local_quantile", "local_ranks",
    "local_signs", "j_values", "j_at", "global_quantile", "global_ranks",
    "global_signs", "metric_median", "empirical_depth", "breakdown_lower_bound",
    "ScoreFunction", "TestReport", "linear_rank_statistic", "null_moments",
    "standardized_statistic", "spearman_statistic", "independence_test",
]

__version__ = "0.1.0"
