"""Differentially private prediction: exponential projected walk, subsample-and-aggregate,
stable convex regression with output perturbation, and exact privacy audits."""

from .core import (LabeledPoint, PrivacyBudget, RandomStream, SortedDataset, group_privacy_params,
                   laplace_quantile, sigmoid_bias)
from .epw import (IntervalHypothesis, WalkParams, choose_T, empirical_error, epw_bias, epw_predict,
                  epw_value, eval_interval_hypothesis, opt_intervals)

__version__ = "0.1.0"

__all__ = [
    "IntervalHypothesis",
    "LabeledPoint",
    "PrivacyBudget",
    "RandomStream",
    "SortedDataset",
    "WalkParams",
    "choose_T",
    "empirical_error",
    "epw_bias",
    "epw_predict",
    "epw_value",
    "eval_interval_hypothesis",
    "group_privacy_params",
    "laplace_quantile",
    "opt_intervals",
    "sigmoid_bias",
]
