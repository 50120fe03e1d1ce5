"""Problem statement: priors, test economics, acceptance-loss polynomial, and
design variables, together with the prior-moment quantities they determine.

All types are immutable after construction and validate their invariants
eagerly, so downstream numeric code can assume well-formed inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

__all__ = [
    "ConfigurationError",
    "PriorSpec",
    "CostModel",
    "LossPoly",
    "Plan",
    "Theta",
    "expected_acceptance_loss",
    "no_sampling_risk",
    "n_upper_bound",
    "ACCEPT",
    "REJECT",
]

ACCEPT = "accept"
REJECT = "reject"


class ConfigurationError(ValueError):
    """A configuration value violates a structural invariant."""


@dataclass(frozen=True)
class PriorSpec:
    """Per-cause Gamma priors on baseline rates and Uniform(1, l) priors on
    acceleration factors.

    ``alpha[j]`` and ``beta[j]`` are the Gamma shape and rate-scale of cause
    j's baseline hazard; ``l[j]`` is the upper endpoint of the uniform prior
    on its acceleration factor.
    """

    alpha: tuple[float, ...]
    beta: tuple[float, ...]
    l: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        object.__setattr__(self, "l", tuple(float(v) for v in self.l))
        if len(self.alpha) < 1:
            raise ConfigurationError("at least one competing risk is required")
        if not (len(self.alpha) == len(self.beta) == len(self.l)):
            raise ConfigurationError("alpha, beta, l must have equal length")
        for j, (a, b, lj) in enumerate(zip(self.alpha, self.beta, self.l)):
            if a <= 0:
                raise ConfigurationError(f"alpha[{j}] must be > 0")
            if b <= 0:
                raise ConfigurationError(f"beta[{j}] must be > 0")
            if lj <= 1:
                raise ConfigurationError(f"l[{j}] must be > 1")

    @property
    def n_risks(self) -> int:
        return len(self.alpha)

    @property
    def rate_means(self) -> tuple[float, ...]:
        """Prior means alpha/beta of the baseline rates."""
        return tuple(a / b for a, b in zip(self.alpha, self.beta))


@dataclass(frozen=True)
class CostModel:
    """Test economics in a common currency unit.

    c_s: per-unit sampling cost; v_s: per-surviving-unit salvage value;
    c_t: per-unit-time operating cost; c_a: per-unit accelerated-stress cost;
    c_r: lot-rejection cost.
    """

    c_s: float
    v_s: float
    c_t: float
    c_a: float
    c_r: float

    def __post_init__(self) -> None:
        if not self.c_s > self.v_s:
            raise ConfigurationError("c_s must exceed v_s")
        if self.v_s < 0:
            raise ConfigurationError("v_s must be >= 0")
        if self.c_t < 0:
            raise ConfigurationError("c_t must be >= 0")
        if self.c_a < 0:
            raise ConfigurationError("c_a must be >= 0")
        if not self.c_r > 0:
            raise ConfigurationError("c_r must be > 0")


@dataclass(frozen=True)
class LossPoly:
    """Quadratic acceptance-loss polynomial in the baseline rates.

    h(lam) = a0 + sum_j a[j] lam_j + sum_{i<=j} quad[i][j] lam_i lam_j.

    ``quad`` is an upper-triangular J x J table; entries below the diagonal are
    ignored and normalized to zero. All coefficients must be nonnegative; this
    makes h increasing in every rate, which the decision-threshold machinery
    relies on.
    """

    a0: float
    a: tuple[float, ...]
    quad: tuple[tuple[float, ...], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        j = len(self.a)
        q = [[0.0] * j for _ in range(j)]
        for i, row in enumerate(self.quad):
            for k, v in enumerate(row):
                if k >= i and float(v) != 0.0:
                    q[i][k] = float(v)
                elif k < i and float(v) != 0.0:
                    raise ConfigurationError("quad must be upper triangular (i <= j)")
        object.__setattr__(self, "quad", tuple(tuple(row) for row in q))
        if self.a0 < 0 or any(v < 0 for v in self.a) or any(v < 0 for row in self.quad for v in row):
            raise ConfigurationError("all loss coefficients must be >= 0")

    @property
    def n_risks(self) -> int:
        return len(self.a)

    def quad_pairs(self) -> Iterator[tuple[int, int, float]]:
        """Yield (i, j, coefficient) for the upper-triangular quadratic terms."""
        for i, row in enumerate(self.quad):
            for j in range(i, len(row)):
                if row[j] != 0.0:
                    yield i, j, row[j]

    def h(self, lam):
        """Evaluate h at a rate vector, vectorized over trailing axes.

        ``lam`` has shape (J,) or (J, ...); the result drops the leading axis.
        """
        import numpy as np

        lam = np.asarray(lam, dtype=float)
        out = np.full(lam.shape[1:], self.a0, dtype=float) if lam.ndim > 1 else self.a0
        for j, aj in enumerate(self.a):
            out = out + aj * lam[j]
        for i, j, q in self.quad_pairs():
            out = out + q * lam[i] * lam[j]
        return out


@dataclass(frozen=True)
class Plan:
    """Design variables: sample size n, required failures r, stress-change
    threshold m, and stress-change inspection time tau1.

    m = 0 is the never-accelerated plan and normalizes tau1 to 0 at
    construction; m = r is the always-accelerated plan.
    """

    n: int
    r: int
    m: int
    tau1: float = 0.0

    def __post_init__(self) -> None:
        if not (isinstance(self.n, int) and isinstance(self.r, int) and isinstance(self.m, int)):
            raise ConfigurationError("n, r, m must be integers")
        if not 0 <= self.m <= self.r <= self.n:
            raise ConfigurationError("plan must satisfy 0 <= m <= r <= n")
        if self.tau1 < 0:
            raise ConfigurationError("tau1 must be >= 0")
        if self.m == 0:
            object.__setattr__(self, "tau1", 0.0)

    @property
    def is_no_sampling(self) -> bool:
        return self.n == 0


@dataclass(frozen=True)
class Theta:
    """A realization of the model parameters: baseline rates and acceleration
    factors."""

    lam: tuple[float, ...]
    phi: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "lam", tuple(float(v) for v in self.lam))
        object.__setattr__(self, "phi", tuple(float(v) for v in self.phi))
        if len(self.lam) != len(self.phi):
            raise ConfigurationError("lam and phi must have equal length")
        if any(v <= 0 for v in self.lam):
            raise ConfigurationError("rates must be > 0")
        if any(v <= 1 for v in self.phi):
            raise ConfigurationError("acceleration factors must be > 1")

    @property
    def n_risks(self) -> int:
        return len(self.lam)


def expected_acceptance_loss(priors: PriorSpec, loss: LossPoly) -> float:
    """Prior expectation of the acceptance loss h under the Gamma priors.

    Uses the closed-form Gamma moments: E[lam_j] = alpha_j/beta_j and
    E[lam_j^2] = alpha_j(alpha_j + 1)/beta_j^2; cross terms factorize by
    independence.
    """
    if priors.n_risks != loss.n_risks:
        raise ConfigurationError("priors and loss must agree on the number of risks")
    means = priors.rate_means
    total = loss.a0
    for j, aj in enumerate(loss.a):
        total += aj * means[j]
    for i, j, q in loss.quad_pairs():
        if i == j:
            total += q * priors.alpha[i] * (priors.alpha[i] + 1.0) / priors.beta[i] ** 2
        else:
            total += q * means[i] * means[j]
    return total


def no_sampling_risk(priors: PriorSpec, loss: LossPoly, costs: CostModel) -> tuple[float, str]:
    """Risk and action of deciding without any life testing.

    Accepting costs the prior expected acceptance loss; rejecting costs c_r.
    Ties resolve to accept.
    """
    eh = expected_acceptance_loss(priors, loss)
    if eh <= costs.c_r:
        return eh, ACCEPT
    return costs.c_r, REJECT


def n_upper_bound(priors: PriorSpec, loss: LossPoly, costs: CostModel) -> int:
    """Largest sample size any optimal plan can use.

    The search bound floor(min{E[h], c_r} / (c_s - v_s)): beyond it the
    sampling cost alone exceeds the no-sampling risk.
    """
    margin = costs.c_s - costs.v_s
    if margin <= 0:
        raise ConfigurationError("n upper bound undefined: c_s must exceed v_s")
    risk, _ = no_sampling_risk(priors, loss, costs)
    return int(math.floor(risk / margin))
