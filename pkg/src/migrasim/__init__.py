"""Stochastic simulation and numerical analysis of migration-contagion
reactors (SIS, DOCS, AIR): single-reactor CTMC simulation, regenerative
estimation of the infected-output map, mean-field limits, closed networks,
conservation-law audits, and monotone pathwise couplings."""

from .analytic import (air_amf_means, air_threshold, air_tl_stationary,
                       air_traffic, branching_quantities, docs_mean_x,
                       docs_tl_fixed_point, docs_tl_threshold,
                       p_star_upper_bound, sis_threshold_bounds)
from .conservation import (IdentityCheck, audit_docs, audit_routing_docs,
                           audit_sis, audit_tl, correlation_probe,
                           report_json)
from .core import (Estimate, ModelParams, NumericalError, RngSeed,
                   ValidationError, derive_params)
from .couplings import (CouplingViolationError, coupled_alpha_monotonicity,
                        coupled_beta_monotonicity, coupled_p_monotonicity,
                        three_color_run)
from .fixedpoint import (GEstimate, PStarResult, ThresholdSearchResult,
                         estimate_g, estimate_g_prime0, find_eta_c,
                         find_p_star)
from .network import (extinction_time, simulate_closed, simulate_meanfield,
                      simulate_routing_docs_meanfield)
from .reactor import (MomentAverages, ReactorKind, ReactorRun, Variant,
                      palm_estimates, run_busy_cycles, simulate_reactor)

__version__ = "0.1.0"

__all__ = [
    "Estimate", "ModelParams", "NumericalError", "RngSeed",
    "ValidationError", "derive_params",
    "Variant", "ReactorKind", "ReactorRun", "MomentAverages",
    "simulate_reactor", "run_busy_cycles", "palm_estimates",
    "air_amf_means", "air_threshold", "air_tl_stationary", "air_traffic",
    "branching_quantities", "docs_mean_x", "docs_tl_fixed_point",
    "docs_tl_threshold", "p_star_upper_bound", "sis_threshold_bounds",
    "GEstimate", "PStarResult", "ThresholdSearchResult", "estimate_g",
    "estimate_g_prime0", "find_p_star", "find_eta_c",
    "IdentityCheck", "audit_sis", "audit_docs", "audit_routing_docs",
    "audit_tl", "correlation_probe", "report_json",
    "simulate_closed", "simulate_meanfield",
    "simulate_routing_docs_meanfield", "extinction_time",
    "CouplingViolationError", "coupled_p_monotonicity",
    "coupled_alpha_monotonicity", "coupled_beta_monotonicity",
    "three_color_run",
]
