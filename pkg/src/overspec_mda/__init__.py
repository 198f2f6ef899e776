"""EM for an overspecified, unbalanced two-component Gaussian mixture.

Fitting ``(1-p) N(-theta, sigma^2 I) + p N(theta, sigma^2 I)`` with a fixed
weight ``p > 1/2`` to data from ``N(0, I)``, and the resulting mixture
discriminant analysis classifier.
"""

from ._version import __version__
from .errors import (
    DegenerateVarianceError,
    InvalidArgumentError,
    NumericalDomainError,
    OverspecError,
    PreconditionError,
)
from .mda import (
    LabeledDataset,
    MdaModel,
    bayes_risk,
    classify,
    decision_function,
    estimate_error,
    estimate_excess_risk,
    estimate_mu,
    fit_mda,
    generate_labeled,
    tv_gap_estimate,
)
from .mixture import MixtureParams, kl_vs_standard_normal, log_c, log_density, sample_mixture, tilt
from .numerics import QuadratureRule, RngStream, expect_std_normal, gauss_hermite_rule, rng_stream, stream_id
from .population import (
    EmTrace,
    PopulationSetting,
    contraction_rho,
    ell,
    ell_prime,
    init_radius,
    lemma3_property_report,
    m,
    m_lower_bound,
    pop_em_step,
    run_population_em,
)
from .sample_em import IterationBudget, SampleContext, em_step, fit, perturbation_sup, sample_operator

__all__ = [
    "__version__",
    "DegenerateVarianceError",
    "InvalidArgumentError",
    "NumericalDomainError",
    "OverspecError",
    "PreconditionError",
    "LabeledDataset",
    "MdaModel",
    "bayes_risk",
    "classify",
    "decision_function",
    "estimate_error",
    "estimate_excess_risk",
    "estimate_mu",
    "fit_mda",
    "generate_labeled",
    "tv_gap_estimate",
    "MixtureParams",
    "kl_vs_standard_normal",
    "log_c",
    "log_density",
    "sample_mixture",
    "tilt",
    "QuadratureRule",
    "RngStream",
    "expect_std_normal",
    "gauss_hermite_rule",
    "rng_stream",
    "stream_id",
    "EmTrace",
    "PopulationSetting",
    "contraction_rho",
    "ell",
    "ell_prime",
    "init_radius",
    "lemma3_property_report",
    "m",
    "m_lower_bound",
    "pop_em_step",
    "run_population_em",
    "IterationBudget",
    "SampleContext",
    "em_step",
    "fit",
    "perturbation_sup",
    "sample_operator",
]
