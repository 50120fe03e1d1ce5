"""Bayes risk of a sampling plan: expected testing costs plus the expected
acceptance loss under the optimal accept/reject rule.

The decision-risk part integrates, over each attainable failure-count table,
the prior-marginal density of the sufficient statistics against the loss
reduction achieved by rejecting inside the rejection region. Test duration
and the expected number of stress-elevated units are obtained from survival
expansions mixed against the priors.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from math import comb, inf, isinf

import numpy as np
from scipy import special

from .decision import (
    FailureCounts,
    loss_exponent_table,
    threshold_c1_batch,
    threshold_c_raw,
    _gl_rule,
    _log_h1_grid,
)
from .model import (
    ConfigurationError,
    CostModel,
    LossPoly,
    Plan,
    PriorSpec,
    Theta,
    expected_acceptance_loss,
    no_sampling_risk,
)
from .numerics import (
    Bracket,
    ModelViolationError,
    QuadSettings,
    integrate_1d,
    integrate_semi_infinite,
)

__all__ = [
    "PlanEvaluation",
    "RelativeRisks",
    "bayes_risk",
    "r1",
    "decision_risk_profile",
    "expected_stress_count",
    "expected_duration",
    "joint_density",
]

_QUAD = QuadSettings(rel_tol=1e-7, abs_tol=1e-11)
_INNER_ORDER = 16


@dataclass(frozen=True)
class PlanEvaluation:
    """Bayes risk of a plan together with its additive components."""

    plan: Plan
    risk: float
    item_cost: float
    accel_cost: float
    time_cost: float
    decision_risk: float
    expected_stress_count: float
    expected_duration: float


@dataclass(frozen=True)
class RelativeRisks:
    """Percentage risk savings of the adaptive plan relative to the
    always-accelerated and never-accelerated alternatives."""

    vs_accelerated: float
    vs_conventional: float


def _compositions(total: int, parts: int):
    """Weak compositions of ``total`` into ``parts`` nonnegative ints,
    lexicographic."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _multinom(counts) -> int:
    total = sum(counts)
    out = 1
    for c in counts:
        out *= comb(total, c)
        total -= c
    return out


# ---------------------------------------------------------------------------
# expected number of stress-elevated units and expected test duration
# ---------------------------------------------------------------------------


def expected_stress_count(n: int, m: int, tau1: float, priors: PriorSpec) -> float:
    """Prior-expected number of units still on test when stress is elevated.

    Zero when the plan never elevates (m = 0); between 0 and n otherwise.
    """
    if m == 0 or n == 0:
        return 0.0
    alpha = np.array(priors.alpha)
    beta = np.array(priors.beta)
    terms = []
    for d1 in range(m):
        for i in range(d1 + 1):
            surv = float(np.prod((beta / (beta + (n - i) * tau1)) ** alpha))
            terms.append((n - d1) * comb(n, d1) * comb(d1, i) * (-1) ** (d1 - i) * surv)
    return math.fsum(terms)


@lru_cache(maxsize=4096)
def _g_integral(priors: PriorSpec, c: float) -> float:
    """int_0^c of the prior-mixed survival transform prod_j E[exp(-lam_j u)]."""
    if c == 0.0:
        return 0.0
    alpha = np.array(priors.alpha)
    beta = np.array(priors.beta)

    def f(u):
        u = np.asarray(u, dtype=float)
        return np.exp(np.sum(alpha[:, None] * (np.log(beta)[:, None] - np.log(beta[:, None] + u[None, :])), axis=0))

    return integrate_1d(lambda u: f(np.atleast_1d(u)), Bracket(0.0, c), _QUAD)


@lru_cache(maxsize=4096)
def _q_integral(priors: PriorSpec, delta: int, c: float) -> float:
    """Tail transform int_0^inf prod_j E[(beta_j/(beta_j + c + s*phi^delta))^alpha_j] ds."""
    alpha = np.array(priors.alpha)
    beta = np.array(priors.beta)
    lvec = np.array(priors.l)
    nodes, weights = _gl_rule(_INNER_ORDER)

    def f(s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if delta == 0:
            logs = alpha[:, None] * (np.log(beta)[:, None] - np.log(beta[:, None] + c + s[None, :]))
            return np.exp(logs.sum(axis=0))
        out = np.ones_like(s)
        for j in range(priors.n_risks):
            half = 0.5 * (lvec[j] - 1.0)
            phi = 1.0 + half * (nodes + 1.0)  # (Q,)
            g = (beta[j] / (beta[j] + c + s[:, None] * phi[None, :])) ** alpha[j]
            out *= (g * weights[None, :]).sum(axis=1) * half / (lvec[j] - 1.0)
        return out

    return integrate_semi_infinite(f, 0.0, _QUAD)


def expected_duration(n: int, r: int, m: int, tau1: float, priors: PriorSpec) -> float:
    """Prior-expected time at which the r-th failure ends the test.

    Finite only when the prior shape parameters sum to more than 1; otherwise
    the heavy prior tail of 1/rate makes the expectation diverge.
    """
    if r == 0 or n == 0:
        return 0.0
    if sum(priors.alpha) <= 1.0:
        raise ModelViolationError(
            "expected duration diverges unless prior shapes sum to more than 1"
        )
    pre = math.fsum(
        comb(n, d1) * comb(d1, j) * (-1) ** (d1 - j) * _g_integral(priors, (n - j) * tau1) / (n - j)
        for d1 in range(r)
        for j in range(d1 + 1)
    )
    post_terms = []
    for d1 in range(r):
        delta = 1 if d1 < m else 0
        for d2 in range(r - d1):
            d = d1 + d2
            mult = comb(n, d1) * comb(n - d1, d2)
            for j in range(d1 + 1):
                qv = _q_integral(priors, delta, (n - d1 + j) * tau1)
                for k in range(d2 + 1):
                    post_terms.append(
                        mult
                        * comb(d1, j)
                        * comb(d2, k)
                        * (-1) ** (j + k)
                        * qv
                        / (n - d + k)
                    )
    return pre + math.fsum(post_terms)


# ---------------------------------------------------------------------------
# prior-marginal decision risk
# ---------------------------------------------------------------------------


def _prior_const(priors: PriorSpec) -> float:
    """Normalizing constant of the joint prior density factors."""
    out = 1.0
    for a, b, l in zip(priors.alpha, priors.beta, priors.l):
        out *= b**a / (math.gamma(a) * (l - 1.0))
    return out


def _bracket_grid(
    w1: np.ndarray,
    w2: np.ndarray,
    counts: FailureCounts,
    delta: int,
    priors: PriorSpec,
    loss: LossPoly,
    c_r: float,
) -> np.ndarray:
    """Pointwise integrand core: prior constant times the normalizer times
    (c_r - posterior loss); negative exactly on the rejection region."""
    table, coefs = loss_exponent_table(loss)
    logs = _log_h1_grid(w1, w2, counts, delta, priors, table)
    h0 = np.exp(logs[0])
    phi = loss.a0 + (coefs[1:, None] * np.exp(logs[1:] - logs[0][None, :])).sum(axis=0)
    return _prior_const(priors) * h0 * (c_r - phi)


_OUTER_ORDER = 12


def _segment_nodes(cuts) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and combined weights for a piecewise-smooth
    integrand split at the given sorted cut points, flattened."""
    nodes, weights = _gl_rule(_OUTER_ORDER)
    a = np.array(cuts[:-1])
    b = np.array(cuts[1:])
    half = 0.5 * (b - a)
    pts = a[:, None] + half[:, None] * (nodes[None, :] + 1.0)
    jac = half[:, None] * weights[None, :]
    return pts.ravel(), jac.ravel()


def _h_case_post_only(
    counts: FailureCounts,
    delta: int,
    n: int,
    r: int,
    tau1: float,
    priors: PriorSpec,
    loss: LossPoly,
    c_r: float,
) -> float:
    """All r failures after the inspection time: the pre-inspection statistic
    is pinned at n*tau1 and only the post-inspection time varies."""
    w1v = n * tau1
    c1 = float(threshold_c1_batch(np.array([w1v]), counts, delta, priors, loss, c_r)[0])
    if c1 == 0.0:
        return 0.0
    lg = special.gammaln(r)

    def f(w2):
        w2 = np.atleast_1d(np.asarray(w2, dtype=float))
        core = _bracket_grid(np.full_like(w2, w1v), w2, counts, delta, priors, loss, c_r)
        return np.exp((r - 1) * np.log(np.maximum(w2, 1e-300)) - lg) * core

    if isinf(c1):
        val = integrate_semi_infinite(f, 0.0, _QUAD)
    else:
        val = integrate_1d(f, Bracket(0.0, c1), _QUAD)
    return _multinom(counts.d2) * val


def _inner_w2_integral(
    w1: np.ndarray,
    counts: FailureCounts,
    delta: int,
    priors: PriorSpec,
    loss: LossPoly,
    c_r: float,
    c1: np.ndarray | None = None,
) -> np.ndarray:
    """For each w1, integrate the loss-reduction core against the w2 density
    kernel over the rejection slice (0, c1(w1))."""
    d2 = counts.post_total
    if c1 is None:
        c1 = threshold_c1_batch(w1, counts, delta, priors, loss, c_r)
    out = np.zeros_like(w1)
    lg = special.gammaln(d2)
    nodes, weights = _gl_rule(_INNER_ORDER)

    fin = np.isfinite(c1) & (c1 > 0)
    if fin.any():
        half = 0.5 * c1[fin]
        w2 = half[:, None] * (nodes[None, :] + 1.0)  # (N, Q)
        w1rep = np.repeat(w1[fin], _INNER_ORDER)
        core = _bracket_grid(w1rep, w2.ravel(), counts, delta, priors, loss, c_r).reshape(w2.shape)
        kern = np.exp((d2 - 1) * np.log(np.maximum(w2, 1e-300)) - lg)
        out[fin] = (kern * core * weights[None, :]).sum(axis=1) * half

    unb = np.isinf(c1)
    if unb.any():
        # Semi-infinite slice (only when rejection is certain for this table);
        # map w2 = scale * u / (1 - u) with a high-order rule in u.
        unodes, uweights = _gl_rule(96)
        u = 0.5 * (unodes + 1.0)
        scale = float(np.mean(priors.beta)) + w1[unb][:, None]
        w2 = scale * u[None, :] / (1.0 - u[None, :])
        jac = scale * 1.0 / (1.0 - u[None, :]) ** 2 * 0.5
        w1rep = np.repeat(w1[unb], len(u))
        core = _bracket_grid(w1rep, w2.ravel(), counts, delta, priors, loss, c_r).reshape(w2.shape)
        kern = np.exp((d2 - 1) * np.log(np.maximum(w2, 1e-300)) - lg)
        out[unb] = (kern * core * uweights[None, :] * jac).sum(axis=1)
    return out


def _h_case_mixed(
    counts: FailureCounts,
    delta: int,
    n: int,
    r: int,
    tau1: float,
    priors: PriorSpec,
    loss: LossPoly,
    c_r: float,
) -> float:
    """Failures on both sides of the inspection time: two-dimensional region
    integrated as an outer adaptive pass in w1 over an inner w2 slice."""
    d1 = counts.pre_total
    cprime = min(threshold_c_raw(counts, delta, priors, loss, c_r), n * tau1)
    s0 = (n - d1) * tau1
    if cprime <= s0:
        return 0.0
    shifts = np.array([(n - d1 + t) * tau1 for t in range(d1 + 1)])
    signs = np.array([(-1) ** t * comb(d1, t) for t in range(d1 + 1)], dtype=float)
    lg = special.gammaln(d1)

    cuts = sorted({s0, cprime, *[float(s) for s in shifts if s0 < s < cprime]})
    w1pts, jac = _segment_nodes(cuts)
    diff = np.maximum(w1pts[:, None] - shifts[None, :], 0.0)
    # The indicator keeps truncated terms at zero when the exponent is 0.
    powd = np.where(diff > 0, diff ** (d1 - 1), 0.0)
    dens = (signs[None, :] * powd).sum(axis=1) / math.exp(lg)
    c1 = threshold_c1_batch(w1pts, counts, delta, priors, loss, c_r)
    inner = _inner_w2_integral(w1pts, counts, delta, priors, loss, c_r, c1=c1)
    total = float((jac * dens * inner).sum())
    return comb(n, d1) * _multinom(counts.d1) * _multinom(counts.d2) * total


@lru_cache(maxsize=512)
def _pre_only_coefs(n: int, r: int) -> tuple[int, ...]:
    """Signed integer weights of the shifted-polynomial expansion of the
    pre-inspection statistic's density when the test ends before inspection."""
    coefs = [0] * (n + 1)
    for k in range(r, n + 1):
        for jp in range(k + 1):
            coefs[n - k + jp] += comb(n, k) * comb(k, jp) * (-1) ** jp
    return tuple(coefs)


def _h_case_pre_only(
    counts: FailureCounts,
    n: int,
    r: int,
    tau1: float,
    priors: PriorSpec,
    loss: LossPoly,
    c_r: float,
) -> float:
    """All r failures before the inspection time; stress never elevates."""
    delta = 0
    cprime = min(threshold_c_raw(counts, delta, priors, loss, c_r), n * tau1)
    if cprime <= 0.0:
        return 0.0
    coefs = np.array(_pre_only_coefs(n, r), dtype=np.longdouble)
    shifts = tau1 * np.arange(n + 1, dtype=np.longdouble)
    lg = special.gammaln(r)

    cuts = sorted({0.0, cprime, *[float(s) for s in shifts if 0.0 < s < cprime]})
    w1pts, jac = _segment_nodes(cuts)
    diff = np.maximum(w1pts[:, None].astype(np.longdouble) - shifts[None, :], 0.0)
    powd = np.where(diff > 0, diff ** (r - 1), np.longdouble(0.0))
    dens = np.asarray((coefs[None, :] * powd).sum(axis=1), dtype=float) / math.exp(lg)
    core = _bracket_grid(w1pts, np.zeros_like(w1pts), counts, delta, priors, loss, c_r)
    total = float((jac * dens * core).sum())
    return _multinom(counts.d1) * total


def decision_risk_profile(
    n: int,
    r: int,
    tau1: float,
    priors: PriorSpec,
    loss: LossPoly,
    c_r: float,
    m: int | None = None,
) -> np.ndarray:
    """Loss-reduction totals by pre-inspection failure count and stress state.

    Returns an array of shape (r + 1, 2): entry [d1, delta] sums the (never
    positive) decision-risk contributions of all count tables with ``d1``
    failures before inspection, evaluated under stress state ``delta``. When
    ``m`` is given, only the stress state that plan would realize for each
    d1 is filled; the other column is NaN. Entries that a plan can never
    realize (delta = 1 with d1 = r) are NaN.
    """
    J = priors.n_risks
    out = np.full((r + 1, 2), np.nan)

    def needed(d1: int) -> list[int]:
        if m is not None:
            return [1 if d1 < m else 0]
        if d1 == 0:
            return [0, 1]
        if d1 == r:
            return [0]
        return [0, 1]

    if tau1 == 0.0:
        # Every unit survives to the (immediate) inspection, so only tables
        # with no pre-inspection failures occur.
        for delta in needed(0):
            out[0, delta] = math.fsum(
                _h_case_post_only(FailureCounts((0,) * J, c2), delta, n, r, 0.0, priors, loss, c_r)
                for c2 in _compositions(r, J)
            )
        for d1 in range(1, r + 1):
            for delta in needed(d1):
                out[d1, delta] = 0.0
        return out

    for d1 in range(r + 1):
        d2 = r - d1
        for delta in needed(d1):
            if d1 == r and delta == 1:
                continue
            acc = []
            for comp1 in _compositions(d1, J):
                for comp2 in _compositions(d2, J):
                    counts = FailureCounts(comp1, comp2)
                    if d1 == 0:
                        acc.append(
                            _h_case_post_only(counts, delta, n, r, tau1, priors, loss, c_r)
                        )
                    elif d1 == r:
                        acc.append(_h_case_pre_only(counts, n, r, tau1, priors, loss, c_r))
                    else:
                        acc.append(
                            _h_case_mixed(counts, delta, n, r, tau1, priors, loss, c_r)
                        )
            out[d1, delta] = math.fsum(acc)
    return out


@lru_cache(maxsize=65536)
def _profile_cached(
    n: int, r: int, tau1: float, priors: PriorSpec, loss: LossPoly, c_r: float
) -> tuple[tuple[float, float], ...]:
    """Hashable both-stress-state profile, shared across plan families during
    a search."""
    prof = decision_risk_profile(n, r, tau1, priors, loss, c_r, m=None)
    return tuple((float(a), float(b)) for a, b in prof)


def _r1_from_profile(profile: np.ndarray, m: int, priors: PriorSpec, loss: LossPoly) -> float:
    r = profile.shape[0] - 1
    total = expected_acceptance_loss(priors, loss)
    for d1 in range(r + 1):
        delta = 1 if d1 < m else 0
        total += profile[d1, delta]
    return total


def r1(plan: Plan, priors: PriorSpec, loss: LossPoly, costs: CostModel) -> float:
    """Expected acceptance-decision loss of the plan under the Bayes rule."""
    if plan.is_no_sampling:
        return no_sampling_risk(priors, loss, costs)[0]
    profile = decision_risk_profile(
        plan.n, plan.r, plan.tau1, priors, loss, costs.c_r, m=plan.m
    )
    return _r1_from_profile(profile, plan.m, priors, loss)


def _risk_components(
    n: int,
    r: int,
    m: int,
    tau1: float,
    priors: PriorSpec,
    loss: LossPoly,
    costs: CostModel,
    profile: np.ndarray | None = None,
) -> tuple[float, float, float, float, float, float]:
    """Raw risk assembly without plan normalization; returns
    (risk, item_cost, stress_count, duration, r1, risk) pieces."""
    if n == 0:
        base = no_sampling_risk(priors, loss, costs)[0]
        return base, 0.0, 0.0, 0.0, base, base
    item = n * (costs.c_s - costs.v_s) + r * costs.v_s
    nas = expected_stress_count(n, m, tau1, priors)
    dur = expected_duration(n, r, m, tau1, priors)
    if profile is None:
        profile = decision_risk_profile(n, r, tau1, priors, loss, costs.c_r, m=m)
    dec = _r1_from_profile(profile, m, priors, loss)
    risk = item + costs.c_a * nas + costs.c_t * dur + dec
    return risk, item, nas, dur, dec, risk


def bayes_risk(plan: Plan, priors: PriorSpec, loss: LossPoly, costs: CostModel) -> PlanEvaluation:
    """Total Bayes risk of a plan and its components.

    The degenerate no-sampling plan is costed as the better of accepting or
    rejecting outright on the prior alone.
    """
    if plan.is_no_sampling:
        base = no_sampling_risk(priors, loss, costs)[0]
        return PlanEvaluation(plan, base, 0.0, 0.0, 0.0, base, 0.0, 0.0)
    risk, item, nas, dur, dec, _ = _risk_components(
        plan.n, plan.r, plan.m, plan.tau1, priors, loss, costs
    )
    return PlanEvaluation(
        plan=plan,
        risk=risk,
        item_cost=item,
        accel_cost=costs.c_a * nas,
        time_cost=costs.c_t * dur,
        decision_risk=dec,
        expected_stress_count=nas,
        expected_duration=dur,
    )


# ---------------------------------------------------------------------------
# sampling density of the sufficient statistics given the true parameters
# ---------------------------------------------------------------------------


def _gamma_shift_density(x: float, shape: int, rate: float) -> float:
    if x <= 0.0:
        return 0.0
    return math.exp(
        shape * math.log(rate) + (shape - 1) * math.log(x) - rate * x - special.gammaln(shape)
    )


def joint_density(
    w1: float,
    w2: float,
    counts: FailureCounts,
    plan: Plan,
    theta: Theta,
) -> float:
    """Sampling density of (W1, W2) jointly with the count table, given the
    true rates and acceleration factors.

    The returned value is a density in the continuous coordinates only: in w2
    when no failure precedes inspection (W1 is then pinned at n*tau1), in w1
    when all failures precede it (W2 is then 0), and in (w1, w2) otherwise.
    """
    n, r, m, tau1 = plan.n, plan.r, plan.m, plan.tau1
    if counts.total != r:
        raise ConfigurationError("count table must total the failure budget r")
    lam = np.array(theta.lam)
    phi = np.array(theta.phi)
    big_l = float(lam.sum())
    d1, d2 = counts.pre_total, counts.post_total
    delta = 1 if d1 < m else 0
    rate2 = float((lam * phi**delta).sum())
    p1 = lam / big_l
    p2 = lam * phi**delta / rate2

    if d1 == 0:
        dens = math.exp(-n * big_l * tau1) * _multinom(counts.d2)
        dens *= float(np.prod(p2 ** np.array(counts.d2)))
        return dens * _gamma_shift_density(w2, r, rate2)

    if d1 == r:
        pref = _multinom(counts.d1) * float(np.prod(p1 ** np.array(counts.d1)))
        acc = math.fsum(
            comb(n, k)
            * comb(k, jp)
            * (-1) ** jp
            * math.exp(-big_l * (n - k + jp) * tau1)
            * _gamma_shift_density(w1 - (n - k + jp) * tau1, r, big_l)
            for k in range(r, n + 1)
            for jp in range(k + 1)
        )
        return pref * acc

    pref = (
        comb(n, d1)
        * _multinom(counts.d1)
        * _multinom(counts.d2)
        * float(np.prod(p1 ** np.array(counts.d1)))
        * float(np.prod(p2 ** np.array(counts.d2)))
    )
    acc = math.fsum(
        (-1) ** t
        * comb(d1, t)
        * math.exp(-big_l * (n - d1 + t) * tau1)
        * _gamma_shift_density(w1 - (n - d1 + t) * tau1, d1, big_l)
        for t in range(d1 + 1)
    )
    return pref * acc * _gamma_shift_density(w2, d2, rate2)
