"""Measurement layouts: Bayesian inference of cognitive profiles from task outcomes."""

__version__ = "0.1.0"

from . import expr, priors, synthetic
from .dsl import format_layout, load_layout, parse, parse_expr
from .errors import MlayoutError
from .estimator import AggregateBaselineClassifier, MeasurementLayoutClassifier, check_instance_table
from .evaluation import brier, characteristic_grid, predict, repeat_eval, rmse_profiles, split
from .inference import CognitiveProfile, infer_profile, summarize
from .layout import LayoutSpec, ValidatedLayout, override_priors, uniform_over_range, validate
from .sampler import SamplerConfig, Trace
from .table import InstanceTable

__all__ = [
    "AggregateBaselineClassifier",
    "CognitiveProfile",
    "InstanceTable",
    "LayoutSpec",
    "MeasurementLayoutClassifier",
    "MlayoutError",
    "SamplerConfig",
    "Trace",
    "ValidatedLayout",
    "brier",
    "characteristic_grid",
    "check_instance_table",
    "expr",
    "format_layout",
    "infer_profile",
    "load_layout",
    "override_priors",
    "parse",
    "parse_expr",
    "predict",
    "priors",
    "repeat_eval",
    "rmse_profiles",
    "split",
    "summarize",
    "synthetic",
    "uniform_over_range",
    "validate",
]
