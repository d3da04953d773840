"""Coarse Ricci curvature of random walks on finite metric spaces and their Wasserstein lifts."""

from __future__ import annotations

from .curvature import CurvatureReport, contraction_check, curvature_report, kappa
from .dynamics import convergence_trace, invariant_measure, lifted_rate_check
from .lifting import (
    build_lifted_space,
    lift_kernel,
    lifted_curvature_report,
    lifted_invariant_check,
    lifted_measure,
    verify_lift_theorem,
)
from .metric_core import (
    DiscreteMeasure,
    FiniteMetricSpace,
    RandomWalkKernel,
    convolve,
    graph_metric,
    iterate_kernel,
    pushforward,
    validate_space,
)
from .transport import dual_potentials, optimal_coupling, transport_cost, wasserstein

__version__ = "0.1.0"

__all__ = [
    "CurvatureReport",
    "DiscreteMeasure",
    "FiniteMetricSpace",
    "RandomWalkKernel",
    "build_lifted_space",
    "contraction_check",
    "convergence_trace",
    "convolve",
    "curvature_report",
    "dual_potentials",
    "graph_metric",
    "invariant_measure",
    "iterate_kernel",
    "kappa",
    "lift_kernel",
    "lifted_curvature_report",
    "lifted_invariant_check",
    "lifted_measure",
    "lifted_rate_check",
    "optimal_coupling",
    "pushforward",
    "transport_cost",
    "validate_space",
    "verify_lift_theorem",
    "wasserstein",
]
