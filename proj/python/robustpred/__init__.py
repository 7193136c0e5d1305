"""Robust linear prediction when some training features are missing at test time."""

from ._core import (
    Error,
    FormatError,
    NumericalError,
    RobustModel,
    ShapeError,
    SingleClassError,
    ValidationError,
    VersionError,
    evaluate,
    feature_map_quadratic,
    fit,
    generate_linear,
    generate_poly,
    run_experiment,
)

__all__ = [
    "Error",
    "FormatError",
    "NumericalError",
    "RobustModel",
    "ShapeError",
    "SingleClassError",
    "ValidationError",
    "VersionError",
    "evaluate",
    "feature_map_quadratic",
    "fit",
    "generate_linear",
    "generate_poly",
    "run_experiment",
]
