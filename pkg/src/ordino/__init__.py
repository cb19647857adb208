"""Approximately unimodal likelihood models for ordinal regression."""

from ordino.analysis import (
    UnimodalityProfile,
    bonferroni_compare,
    histogram_l1,
    mann_whitney_u,
    profile,
    unimodal_fraction_exact,
)
from ordino.data import Dataset, SplitSpec, load_dataset, sample_uniform_simplex, split
from ordino.errors import (
    ConfigurationError,
    ConvergenceError,
    DimensionError,
    NumericError,
    OrdinoError,
    ParameterError,
    PreconditionError,
)
from ordino.inference import MetricsReport, bayes_label, evaluate
from ordino.links import LikelihoodSpec, link_probs
from ordino.model import OrdinalModel
from ordino.simplex import hausdorff_to_unimodal, is_unimodal, project_to_simplex
from ordino.training import TrainConfig, TrialReport, fit

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "ConvergenceError",
    "Dataset",
    "DimensionError",
    "LikelihoodSpec",
    "MetricsReport",
    "NumericError",
    "OrdinalModel",
    "OrdinoError",
    "ParameterError",
    "PreconditionError",
    "SplitSpec",
    "TrainConfig",
    "TrialReport",
    "UnimodalityProfile",
    "bayes_label",
    "bonferroni_compare",
    "evaluate",
    "fit",
    "hausdorff_to_unimodal",
    "histogram_l1",
    "is_unimodal",
    "link_probs",
    "load_dataset",
    "mann_whitney_u",
    "profile",
    "project_to_simplex",
    "sample_uniform_simplex",
    "split",
    "unimodal_fraction_exact",
]
