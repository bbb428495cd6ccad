"""Optimal currency-band intervention under post-intervention market reactions.

Solves the free-boundary system for the optimal intervention band (a, b)
and restart point alpha when each central-bank intervention triggers a
temporary random market-reaction regime, and independently validates the
resulting policy by Monte Carlo simulation of the controlled two-regime
process.
"""

from .errors import (
    ConfigError,
    DegenerateDenominator,
    DegenerateDistribution,
    DomainViolation,
    FxbandError,
    NoConvergence,
    OrderingCollapse,
    UnsupportedLaw,
)
from .expectation import (
    BandValue,
    ReactionNodes,
    build_nodes,
    d_dalpha_expected_phi_after,
    expected_phi_after,
    expected_reaction_cost,
    intervention_value,
)
from .model import (
    CostSpec,
    ModelParams,
    ReactionLaw,
    ScalarLaw,
    ValueCoeffs,
    build_coeffs,
    gamma_roots,
    ktilde_dx,
    ktilde_fixed,
    lognormal_cdf,
    lognormal_density,
    particular_coeffs,
    phi,
)
from .simulate import (
    BandPolicy,
    CostEstimate,
    SimConfig,
    compare_policies,
    estimate_cost,
    simulate_path,
    simulate_path_events,
)
from .solver import (
    PolicySolution,
    SolverConfig,
    VerificationReport,
    calibrate_cost_to_band,
    residuals,
    solution_to_json_dict,
    solve,
    solve_t0,
    value_function,
    verify,
)

__version__ = "0.1.0"

__all__ = [
    "BandPolicy",
    "BandValue",
    "ConfigError",
    "CostEstimate",
    "CostSpec",
    "DegenerateDenominator",
    "DegenerateDistribution",
    "DomainViolation",
    "FxbandError",
    "ModelParams",
    "NoConvergence",
    "OrderingCollapse",
    "PolicySolution",
    "ReactionLaw",
    "ReactionNodes",
    "ScalarLaw",
    "SimConfig",
    "SolverConfig",
    "UnsupportedLaw",
    "ValueCoeffs",
    "VerificationReport",
    "build_coeffs",
    "build_nodes",
    "calibrate_cost_to_band",
    "compare_policies",
    "d_dalpha_expected_phi_after",
    "estimate_cost",
    "expected_phi_after",
    "expected_reaction_cost",
    "gamma_roots",
    "intervention_value",
    "ktilde_dx",
    "ktilde_fixed",
    "lognormal_cdf",
    "lognormal_density",
    "particular_coeffs",
    "phi",
    "residuals",
    "simulate_path",
    "simulate_path_events",
    "solution_to_json_dict",
    "solve",
    "solve_t0",
    "value_function",
    "verify",
]
