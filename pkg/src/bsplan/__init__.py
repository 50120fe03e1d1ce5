"""Bayesian reliability acceptance sampling plans for step-stress partially
accelerated life tests with competing exponential failure causes.

The package designs test plans (sample size, failure budget, stress-change
rule, inspection time) that minimize a Bayes risk combining testing costs and
a quadratic acceptance loss in the unknown failure rates, and executes the
resulting accept/reject decision on observed data.
"""

from .model import (
    ACCEPT,
    REJECT,
    ConfigurationError,
    CostModel,
    LossPoly,
    Plan,
    PriorSpec,
    Theta,
    expected_acceptance_loss,
    n_upper_bound,
    no_sampling_risk,
)
from .decision import (
    FailureCounts,
    SuffStats,
    bayes_decision,
    posterior_expected_loss,
)

__all__ = [
    "ACCEPT",
    "REJECT",
    "ConfigurationError",
    "CostModel",
    "LossPoly",
    "Plan",
    "PriorSpec",
    "Theta",
    "FailureCounts",
    "SuffStats",
    "expected_acceptance_loss",
    "n_upper_bound",
    "no_sampling_risk",
    "bayes_decision",
    "posterior_expected_loss",
]

__version__ = "1.0.0"
