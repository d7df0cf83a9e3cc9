"""Connections with one-form-built nonmetricity and their metrizing Lagrangians.

The package pipeline: build a symmetric affine connection from a metric, a
one-form and three constants; decide which constructive Lagrangian family
metrizes it (if any); construct that Lagrangian; and verify the result by
residual sampling and trajectory integration.
"""

__version__ = "0.1.0"

from .catalog import build_free_function, build_metric, build_oneform
from .connection import (
    LeviCivitaConnection,
    NonmetricityCoefficients,
    VectorialConnection,
    classify_family,
)
from .fields import MetricField, OneFormField
from .finsler import (
    AlphaBetaLagrangian,
    GeneralizedLagrangian,
    QuadraticLagrangian,
    berwald_quadraticity,
    horizontal_derivative,
    metric_tensor,
    nondegeneracy_scan,
    spray,
)
from .metrizability import (
    DecideOptions,
    FitTolerances,
    MetrizabilityReport,
    decide,
)
from .verification import (
    integrate_autoparallel,
    integrate_geodesic,
    spray_vs_connection,
    verify_bundle,
)

__all__ = [
    "__version__",
    "build_metric",
    "build_oneform",
    "build_free_function",
    "MetricField",
    "OneFormField",
    "NonmetricityCoefficients",
    "VectorialConnection",
    "LeviCivitaConnection",
    "classify_family",
    "QuadraticLagrangian",
    "AlphaBetaLagrangian",
    "GeneralizedLagrangian",
    "metric_tensor",
    "spray",
    "horizontal_derivative",
    "berwald_quadraticity",
    "nondegeneracy_scan",
    "decide",
    "DecideOptions",
    "FitTolerances",
    "MetrizabilityReport",
    "integrate_autoparallel",
    "integrate_geodesic",
    "spray_vs_connection",
    "verify_bundle",
]
