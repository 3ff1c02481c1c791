"""Change-point 2-PL IRT: detect within-test shifts in response behavior.

Fits a two-parameter logistic item response model in which each respondent
may switch, at a latent item position, to a degraded response process; the
shift position follows a discrete-time hazard distribution. Provides marginal
maximum likelihood estimation, posterior change-point scoring with ability
cleansing, BIC-based selection of the earliest change-point, and a simulation
study harness.
"""
from .estimation import (
    DegenerateInformationError,
    FitConfig,
    FitResult,
    InitializationError,
    fit,
    numerical_hessian_se,
    pack_parameters,
    unpack_parameters,
)
from .inference import PersonPosterior, eap_theta, posterior_tau, prob_change, score_persons
from .likelihood import (
    LikelihoodValue,
    ModelSpec,
    conditional_loglik_person,
    marginal_loglik,
    marginal_loglik_gradient,
)
from .model import (
    ChangePointSupport,
    ItemParameters,
    ResponseMatrix,
    StructuralParameters,
    irf,
    response_logmass,
)
from .selection import SelectionError, SelectionReport, default_c_grid, select_c
from .simulation import (
    MetricsTable,
    ScenarioConfig,
    SimulatedDataset,
    generate_item_parameters,
    generate_persons,
    generate_responses,
    run_scenario,
    simulate_dataset,
)
from .structural import QuadratureRule, TauDistribution, gauss_hermite_standard_normal, tau_pmf

__version__ = "0.1.0"

__all__ = [
    "ChangePointSupport",
    "DegenerateInformationError",
    "FitConfig",
    "FitResult",
    "InitializationError",
    "ItemParameters",
    "LikelihoodValue",
    "MetricsTable",
    "ModelSpec",
    "PersonPosterior",
    "QuadratureRule",
    "ResponseMatrix",
    "ScenarioConfig",
    "SelectionError",
    "SelectionReport",
    "SimulatedDataset",
    "StructuralParameters",
    "TauDistribution",
    "conditional_loglik_person",
    "default_c_grid",
    "eap_theta",
    "fit",
    "gauss_hermite_standard_normal",
    "generate_item_parameters",
    "generate_persons",
    "generate_responses",
    "irf",
    "marginal_loglik",
    "marginal_loglik_gradient",
    "numerical_hessian_se",
    "pack_parameters",
    "posterior_tau",
    "prob_change",
    "response_logmass",
    "run_scenario",
    "score_persons",
    "select_c",
    "simulate_dataset",
    "tau_pmf",
    "unpack_parameters",
]
