"""Working with observed and simulated life-test data: sufficient statistics,
maximum-likelihood estimates, dataset simulation, and a Monte Carlo estimate
of a plan's Bayes risk that is independent of the analytic risk integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .decision import FailureCounts, SuffStats, posterior_loss_grid
from .model import (
    ConfigurationError,
    CostModel,
    LossPoly,
    Plan,
    PriorSpec,
    Theta,
    no_sampling_risk,
)

__all__ = [
    "RawDataset",
    "MleResult",
    "MonteCarloRisk",
    "suff_stats",
    "fit_mle",
    "reliability_curve",
    "simulate_dataset",
    "mc_bayes_risk",
]

_CHUNK = 20_000


@dataclass(frozen=True)
class RawDataset:
    """An observed (or simulated) life test.

    ``times`` are the recorded failure times in ascending order and
    ``causes`` the 0-based failure cause of each. ``stress_changed`` records
    whether the test actually elevated stress at ``tau1``. For a
    failure-count-stopped test ``censor_time`` is None and the test ended at
    the last recorded failure; for a time-stopped test it is the stopping
    time.
    """

    n: int
    n_risks: int
    tau1: float
    times: tuple[float, ...]
    causes: tuple[int, ...]
    stress_changed: bool
    censor_time: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        object.__setattr__(self, "causes", tuple(int(c) for c in self.causes))
        if len(self.times) != len(self.causes):
            raise ConfigurationError("times and causes must have equal length")
        if len(self.times) > self.n:
            raise ConfigurationError("more failures than units")
        if any(t < 0 for t in self.times):
            raise ConfigurationError("failure times must be >= 0")
        if any(self.times[i] > self.times[i + 1] for i in range(len(self.times) - 1)):
            raise ConfigurationError("failure times must be ascending")
        if any(not 0 <= c < self.n_risks for c in self.causes):
            raise ConfigurationError("cause labels must be in [0, n_risks)")
        if self.tau1 < 0:
            raise ConfigurationError("tau1 must be >= 0")
        end = self.end_time
        if self.censor_time is not None and self.times and self.times[-1] > self.censor_time:
            raise ConfigurationError("failures recorded after the stopping time")
        if self.stress_changed and end < self.tau1:
            raise ConfigurationError("stress cannot change after the test already ended")

    @property
    def r_observed(self) -> int:
        return len(self.times)

    @property
    def end_time(self) -> float:
        if self.censor_time is not None:
            return self.censor_time
        if not self.times:
            raise ConfigurationError("a count-stopped dataset must contain failures")
        return self.times[-1]


@dataclass(frozen=True)
class MleResult:
    """Closed-form maximum-likelihood estimates from one dataset.

    ``phi_defined[j]`` is False when cause j lacks failures in one of the two
    stress phases, leaving its acceleration factor unidentified (its entry in
    ``phi`` is then NaN).
    """

    lam: tuple[float, ...]
    phi: tuple[float, ...]
    lam_defined: tuple[bool, ...]
    phi_defined: tuple[bool, ...]
    stats: SuffStats


def suff_stats(dataset: RawDataset) -> SuffStats:
    """Reduce a dataset to its sufficient statistics.

    w1 accumulates test time at normal stress (before tau1) across all units,
    w2 accumulates post-tau1 time on the units still running then.
    """
    tau1 = dataset.tau1
    end = dataset.end_time
    j = dataset.n_risks
    d1 = [0] * j
    d2 = [0] * j
    pre_sum = 0.0
    post_sum = 0.0
    for t, c in zip(dataset.times, dataset.causes):
        if t <= tau1 or not dataset.stress_changed and end <= tau1:
            d1[c] += 1
            pre_sum += t
        else:
            d2[c] += 1
            post_sum += t - tau1
    survivors = dataset.n - dataset.r_observed
    if end <= tau1:
        # The test finished before the inspection ever happened.
        w1 = pre_sum + survivors * end
        w2 = 0.0
    else:
        w1 = pre_sum + (dataset.n - sum(d1)) * tau1
        w2 = post_sum + survivors * (end - tau1)
    delta = 1 if dataset.stress_changed else 0
    return SuffStats(w1=w1, w2=w2, counts=FailureCounts(tuple(d1), tuple(d2)), delta=delta)


def fit_mle(dataset: RawDataset) -> MleResult:
    """Closed-form maximum-likelihood estimates of the baseline rates and the
    acceleration factors."""
    stats = suff_stats(dataset)
    lam = []
    phi = []
    lam_def = []
    phi_def = []
    for j in range(dataset.n_risks):
        d1j, d2j = stats.counts.by_cause(j)
        if stats.w1 > 0 and d1j > 0:
            lam.append(d1j / stats.w1)
            lam_def.append(True)
        else:
            lam.append(math.nan)
            lam_def.append(False)
        if stats.delta and stats.w2 > 0 and d1j > 0 and d2j > 0 and stats.w1 > 0:
            phi.append(d2j * stats.w1 / (d1j * stats.w2))
            phi_def.append(True)
        else:
            phi.append(math.nan)
            phi_def.append(False)
    return MleResult(tuple(lam), tuple(phi), tuple(lam_def), tuple(phi_def), stats)


def reliability_curve(theta: Theta, times) -> np.ndarray:
    """Survival probability at use conditions for an item subject to all
    causes, evaluated on an array of times."""
    t = np.asarray(times, dtype=float)
    if (t < 0).any():
        raise ConfigurationError("times must be >= 0")
    return np.exp(-sum(theta.lam) * t)


def _simulate_arrays(
    n: int,
    r: int,
    m: int,
    tau1: float,
    lam: np.ndarray,
    phi: np.ndarray,
    rng: np.random.Generator,
):
    """Vectorized simulation core.

    ``lam``/``phi`` have shape (C, J); returns per-replication arrays
    (w1, w2, d1 counts, d2 counts, delta, end_time, n_stressed).
    """
    c, j = lam.shape
    x = rng.exponential(1.0, size=(c, n, j)) / lam[:, None, :]
    base_t = x.min(axis=2)
    pre_count = (base_t <= tau1).sum(axis=1)
    delta = ((pre_count < m) & (pre_count < r)).astype(int)

    resid = (x - tau1) / phi[:, None, :]
    t_acc = tau1 + resid.min(axis=2)
    survivor = base_t > tau1
    eff_t = np.where(survivor & (delta[:, None] == 1), t_acc, base_t)
    cause_base = x.argmin(axis=2)
    cause_acc = resid.argmin(axis=2)
    eff_cause = np.where(survivor & (delta[:, None] == 1), cause_acc, cause_base)

    order = np.argsort(eff_t, axis=1)
    t_sorted = np.take_along_axis(eff_t, order, axis=1)[:, :r]
    c_sorted = np.take_along_axis(eff_cause, order, axis=1)[:, :r]
    t_end = t_sorted[:, r - 1]

    pre_mask = t_sorted <= tau1
    ended_pre = t_end <= tau1
    pre_mask[ended_pre] = True

    d1 = np.zeros((c, j), dtype=int)
    d2 = np.zeros((c, j), dtype=int)
    for cause in range(j):
        is_c = c_sorted == cause
        d1[:, cause] = (is_c & pre_mask).sum(axis=1)
        d2[:, cause] = (is_c & ~pre_mask).sum(axis=1)

    pre_time = (t_sorted * pre_mask).sum(axis=1)
    post_time = ((t_sorted - tau1) * ~pre_mask).sum(axis=1)
    w1 = np.where(
        ended_pre,
        pre_time + (n - r) * t_end,
        pre_time + (n - d1.sum(axis=1)) * tau1,
    )
    w2 = np.where(ended_pre, 0.0, post_time + (n - r) * (t_end - tau1))
    delta = np.where(ended_pre, 0, delta)
    n_stressed = np.where(ended_pre, 0, (n - pre_count) * delta)
    return w1, w2, d1, d2, delta, t_end, n_stressed


def simulate_dataset(plan: Plan, theta: Theta, seed) -> RawDataset:
    """Simulate one run of the plan at the given true parameters.

    Survivors of the stress change carry their accumulated normal-stress
    exposure forward; their residual lifetimes contract by the acceleration
    factors.
    """
    if plan.is_no_sampling:
        raise ConfigurationError("cannot simulate the no-sampling plan")
    rng = np.random.default_rng(seed)
    j = len(theta.lam)
    n, r, m, tau1 = plan.n, plan.r, plan.m, plan.tau1
    x = rng.exponential(1.0, size=(n, j)) / np.array(theta.lam)
    base_t = x.min(axis=1)
    pre_count = int((base_t <= tau1).sum())
    changed = pre_count < m and pre_count < r
    if changed:
        resid = (x - tau1) / np.array(theta.phi)
        t_acc = tau1 + resid.min(axis=1)
        eff_t = np.where(base_t > tau1, t_acc, base_t)
        eff_c = np.where(base_t > tau1, resid.argmin(axis=1), x.argmin(axis=1))
    else:
        eff_t = base_t
        eff_c = x.argmin(axis=1)
    order = np.argsort(eff_t)[:r]
    times = eff_t[order]
    causes = eff_c[order]
    if times[-1] <= tau1:
        changed = False
    return RawDataset(
        n=n,
        n_risks=j,
        tau1=tau1,
        times=tuple(float(t) for t in times),
        causes=tuple(int(cv) for cv in causes),
        stress_changed=bool(changed),
    )


@dataclass(frozen=True)
class MonteCarloRisk:
    """Monte Carlo estimate of a plan's Bayes risk with its standard error
    and component means."""

    risk: float
    std_error: float
    reps: int
    item_cost: float
    accel_cost: float
    time_cost: float
    decision_risk: float


def _chunk_partials(
    plan: Plan,
    priors: PriorSpec,
    loss: LossPoly,
    costs: CostModel,
    size: int,
    seed: int,
    chunk_index: int,
) -> tuple[float, float, tuple[float, float, float, float]]:
    """Self-contained replication block: (sum, sum of squares, component sums).

    Each block draws from its own counter-based stream keyed by
    (seed, chunk_index), so blocks can be evaluated in any order - or in
    parallel - without changing the totals.
    """
    n, r, m, tau1 = plan.n, plan.r, plan.m, plan.tau1
    jn = priors.n_risks
    alpha = np.array(priors.alpha)
    beta = np.array(priors.beta)
    lvec = np.array(priors.l)
    item = n * (costs.c_s - costs.v_s) + r * costs.v_s

    rng = np.random.Generator(np.random.Philox(key=(seed, chunk_index)))
    lam = rng.gamma(alpha, size=(size, jn)) / beta
    phi = 1.0 + rng.random(size=(size, jn)) * (lvec - 1.0)
    w1, w2, d1, d2, delta, t_end, n_str = _simulate_arrays(n, r, m, tau1, lam, phi, rng)

    dec_loss = np.empty(size)
    keys = np.concatenate([d1, d2, delta[:, None]], axis=1)
    uniq, inv = np.unique(keys, axis=0, return_inverse=True)
    inv = inv.ravel()
    for g in range(len(uniq)):
        sel = inv == g
        counts = FailureCounts(tuple(uniq[g][:jn]), tuple(uniq[g][jn : 2 * jn]))
        dv = int(uniq[g][-1])
        phi_post = posterior_loss_grid(w1[sel], w2[sel], counts, dv, priors, loss)
        accept = phi_post <= costs.c_r
        hvals = loss.h(lam[sel].T)
        dec_loss[sel] = np.where(accept, hvals, costs.c_r)

    per_rep = item + costs.c_a * n_str + costs.c_t * t_end + dec_loss
    components = (
        float(item * size),
        float(costs.c_a * n_str.sum()),
        float(costs.c_t * t_end.sum()),
        float(dec_loss.sum()),
    )
    return float(per_rep.sum()), float((per_rep**2).sum()), components


def mc_bayes_risk(
    plan: Plan,
    priors: PriorSpec,
    loss: LossPoly,
    costs: CostModel,
    reps: int,
    seed: int = 0,
) -> MonteCarloRisk:
    """Estimate the Bayes risk by forward simulation from the priors.

    Deterministic for a given seed; replication blocks use independent
    counter-based streams, so their evaluation order is irrelevant. Serves as
    an independent cross-check of the analytic risk integrals.
    """
    if reps < 1000:
        raise ConfigurationError("use at least 1000 replications")
    if plan.is_no_sampling:
        base = no_sampling_risk(priors, loss, costs)[0]
        return MonteCarloRisk(base, 0.0, reps, 0.0, 0.0, 0.0, base)

    partials = []
    done = 0
    chunk_index = 0
    while done < reps:
        size = min(_CHUNK, reps - done)
        partials.append(
            _chunk_partials(plan, priors, loss, costs, size, seed, chunk_index)
        )
        done += size
        chunk_index += 1
    total = math.fsum(p[0] for p in partials)
    total_sq = math.fsum(p[1] for p in partials)
    comp = np.array([math.fsum(p[2][k] for p in partials) for k in range(4)])

    mean = total / reps
    var = max(total_sq / reps - mean**2, 0.0)
    se = math.sqrt(var / reps)
    cm = comp / reps
    return MonteCarloRisk(mean, se, reps, cm[0], cm[1], cm[2], cm[3])
