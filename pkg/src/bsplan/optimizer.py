"""Search for the Bayes-risk-optimal sampling plan.

The discrete dimensions (sample size n, failure budget r, stress-change
count m) are enumerated with lower-bound pruning; the inspection time tau1 is
minimized by a grid scan refined with golden-section steps. Three plan
families are supported: adaptive (stress elevates only if fewer than m
failures precede inspection), always-accelerated (m = r), and conventional
(never accelerated).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import (
    ConfigurationError,
    CostModel,
    LossPoly,
    Plan,
    PriorSpec,
    n_upper_bound,
    no_sampling_risk,
)
from .numerics import Bracket, _golden_section
from .risk import (
    PlanEvaluation,
    RelativeRisks,
    _profile_cached,
    _r1_from_profile,
    expected_duration,
    expected_stress_count,
)

__all__ = [
    "SearchConfig",
    "OptimizationResult",
    "ModeComparison",
    "MODE_ADAPTIVE",
    "MODE_ACCELERATED",
    "MODE_CONVENTIONAL",
    "optimize_plan",
    "compare_modes",
]

MODE_ADAPTIVE = "adaptive"
MODE_ACCELERATED = "accelerated"
MODE_CONVENTIONAL = "conventional"
_MODES = (MODE_ADAPTIVE, MODE_ACCELERATED, MODE_CONVENTIONAL)

_IMPROVE_EPS = 1e-10


@dataclass(frozen=True)
class SearchConfig:
    """Knobs of the plan search.

    ``n_max`` caps the sample sizes tried (on top of the cost-derived upper
    bound); ``tau1_hi`` caps the inspection-time bracket, defaulting to a
    multiple of the prior mean lifetime scale; ``grid_points`` and
    ``tau_tol`` control the tau1 scan; ``prune`` enables lower-bound
    skipping of dominated (n, r) pairs.
    """

    n_max: int = 30
    tau1_hi: float | None = None
    grid_points: int = 13
    tau_tol: float = 2e-3
    prune: bool = True
    stall_limit: int = 3
    bound_seed: int = 314159
    bound_draws: int = 400_000

    def tau1_bracket(self, priors: PriorSpec) -> float:
        if self.tau1_hi is not None:
            return self.tau1_hi
        mean_rate = sum(a / b for a, b in zip(priors.alpha, priors.beta))
        return 5.0 * priors.n_risks / mean_rate


@dataclass(frozen=True)
class OptimizationResult:
    """Outcome of a plan search: the winning plan's evaluation and the best
    risk found for each sample size that was fully evaluated."""

    best: PlanEvaluation
    mode: str
    n_cap: int
    per_n: tuple[tuple[int, float], ...] = field(default=())


@dataclass(frozen=True)
class ModeComparison:
    """Optima of the three plan families and the percentage savings of the
    adaptive family over the other two."""

    adaptive: OptimizationResult
    accelerated: OptimizationResult
    conventional: OptimizationResult
    rrs: RelativeRisks


def _perfect_information_bound(
    priors: PriorSpec, loss: LossPoly, costs: CostModel, config: SearchConfig
) -> float:
    """Conservative lower bound on the decision risk of any plan: the expected
    loss of a clairvoyant decider, E[min(h(rates), c_r)], minus a Monte Carlo
    margin."""
    rng = np.random.Generator(np.random.Philox(key=(config.bound_seed, 0)))
    draws = config.bound_draws
    lam = rng.gamma(
        np.array(priors.alpha), size=(draws, priors.n_risks)
    ) / np.array(priors.beta)
    vals = np.minimum(loss.h(lam.T), costs.c_r)
    margin = 3.0 * vals.std() / math.sqrt(draws) + 1e-6
    return float(vals.mean()) - margin


def _duration_rate_bound(priors: PriorSpec, config: SearchConfig) -> float:
    """Conservative lower bound on E[1/(total fully accelerated rate)], so
    that bound * sum_{i<r} 1/(n-i) under-estimates any plan's expected
    duration."""
    rng = np.random.Generator(np.random.Philox(key=(config.bound_seed, 1)))
    draws = config.bound_draws
    lam = rng.gamma(
        np.array(priors.alpha), size=(draws, priors.n_risks)
    ) / np.array(priors.beta)
    phi = np.array(priors.l)
    vals = 1.0 / (lam * phi).sum(axis=1)
    margin = 3.0 * vals.std() / math.sqrt(draws) + 1e-9
    return max(float(vals.mean()) - margin, 0.0)


def _risks_by_m(
    n: int,
    r: int,
    tau1: float,
    m_values: tuple[int, ...],
    priors: PriorSpec,
    loss: LossPoly,
    costs: CostModel,
) -> dict[int, tuple[float, float, float, float]]:
    """Risk (and components) of every requested m at one (n, r, tau1); the
    decision-risk profile is computed once and shared across m."""
    profile = np.array(_profile_cached(n, r, tau1, priors, loss, costs.c_r))
    out = {}
    item = n * (costs.c_s - costs.v_s) + r * costs.v_s
    for m in m_values:
        nas = expected_stress_count(n, m, tau1, priors)
        dur = expected_duration(n, r, m, tau1, priors)
        dec = _r1_from_profile(profile, m, priors, loss)
        risk = item + costs.c_a * nas + costs.c_t * dur + dec
        out[m] = (risk, nas, dur, dec)
    return out


def _evaluation(
    n: int, r: int, m: int, tau1: float, parts, costs: CostModel
) -> PlanEvaluation:
    risk, nas, dur, dec = parts
    return PlanEvaluation(
        plan=Plan(n=n, r=r, m=m, tau1=tau1),
        risk=risk,
        item_cost=n * (costs.c_s - costs.v_s) + r * costs.v_s,
        accel_cost=costs.c_a * nas,
        time_cost=costs.c_t * dur,
        decision_risk=dec,
        expected_stress_count=nas,
        expected_duration=dur,
    )


def _m_candidates(mode: str, r: int, tau1: float) -> tuple[int, ...]:
    if mode == MODE_CONVENTIONAL:
        return (0,)
    if mode == MODE_ACCELERATED:
        return (r,)
    if tau1 == 0.0:
        # All surviving units are elevated immediately for any m >= 1, so a
        # single representative suffices alongside the never-elevated plan.
        return (0, r)
    return tuple(range(1, r + 1))


def _best_at_tau(
    n: int,
    r: int,
    tau1: float,
    mode: str,
    priors: PriorSpec,
    loss: LossPoly,
    costs: CostModel,
) -> tuple[float, int, tuple[float, float, float, float]]:
    table = _risks_by_m(n, r, tau1, _m_candidates(mode, r, tau1), priors, loss, costs)
    best_m = min(table, key=lambda m: (table[m][0], m))
    return table[best_m][0], best_m, table[best_m]


_REFINE_MARGIN = 0.06


def _optimize_tau(
    n: int,
    r: int,
    mode: str,
    priors: PriorSpec,
    loss: LossPoly,
    costs: CostModel,
    config: SearchConfig,
    fixed_tau1: float | None,
) -> PlanEvaluation:
    """Best plan with the given n and r within one family.

    The tau1 axis is scanned on a grid concentrated near zero (where the
    inspection matters most) and then refined per stress-change count, since
    the lower envelope over m need not have a single dip.
    """
    if mode == MODE_CONVENTIONAL:
        _, m, parts = _best_at_tau(n, r, 0.0, mode, priors, loss, costs)
        return _evaluation(n, r, m, 0.0, parts, costs)
    if fixed_tau1 is not None:
        risk, m, parts = _best_at_tau(n, r, fixed_tau1, mode, priors, loss, costs)
        return _evaluation(n, r, m, fixed_tau1, parts, costs)

    hi = config.tau1_bracket(priors)
    u = np.linspace(0.0, 1.0, config.grid_points)
    taus = hi * u * u
    grid = {}
    for t in taus:
        ms = _m_candidates(mode, r, float(t))
        grid[float(t)] = _risks_by_m(n, r, float(t), ms, priors, loss, costs)

    best = None  # (risk, m, tau, parts)
    for t, table in grid.items():
        for m, parts in table.items():
            if best is None or parts[0] < best[0] - _IMPROVE_EPS:
                best = (parts[0], m, t, parts)

    m_all = sorted({m for table in grid.values() for m in table})
    for m in m_all:
        if m == 0:
            continue  # never elevating makes tau1 irrelevant
        curve = [
            (grid[float(t)][m][0] if m in grid[float(t)] else math.inf, float(t))
            for t in taus
        ]
        vals = [v for v, _ in curve]
        i = int(np.argmin(vals))
        if vals[i] > best[0] + _REFINE_MARGIN:
            continue
        lo = curve[max(i - 1, 0)][1]
        hi_t = curve[min(i + 1, len(curve) - 1)][1]

        def f(t, m=m):
            return _risks_by_m(n, r, float(t), (m,), priors, loss, costs)[m][0]

        t_star = float(_golden_section(f, lo, hi_t, config.tau_tol))
        if t_star < config.tau_tol:
            t_star = 0.0
        parts = _risks_by_m(n, r, t_star, (m,), priors, loss, costs)[m]
        if parts[0] < best[0] - _IMPROVE_EPS:
            best = (parts[0], m, t_star, parts)
    return _evaluation(n, r, best[1], best[2], best[3], costs)


def optimize_plan(
    priors: PriorSpec,
    loss: LossPoly,
    costs: CostModel,
    mode: str = MODE_ADAPTIVE,
    fixed_tau1: float | None = None,
    config: SearchConfig | None = None,
) -> OptimizationResult:
    """Exhaustively search (n, r, m, tau1) for the minimal Bayes risk plan.

    The degenerate no-sampling plan is always in the comparison set; ties
    prefer smaller n, then r, then m, then tau1.
    """
    if mode not in _MODES:
        raise ConfigurationError(f"unknown mode {mode!r}")
    if fixed_tau1 is not None and fixed_tau1 < 0:
        raise ConfigurationError("fixed_tau1 must be >= 0")
    config = config or SearchConfig()

    base_risk = no_sampling_risk(priors, loss, costs)[0]
    best = PlanEvaluation(
        plan=Plan(0, 0, 0, 0.0),
        risk=base_risk,
        item_cost=0.0,
        accel_cost=0.0,
        time_cost=0.0,
        decision_risk=base_risk,
        expected_stress_count=0.0,
        expected_duration=0.0,
    )

    n_cap = min(n_upper_bound(priors, loss, costs), config.n_max)
    dec_lb = _perfect_information_bound(priors, loss, costs, config)
    rate_lb = _duration_rate_bound(priors, config)
    per_unit = costs.c_s - costs.v_s

    per_n = []
    n_rises = 0
    prev_best_n = math.inf
    for n in range(1, n_cap + 1):
        if config.prune and n * per_unit + costs.v_s + dec_lb >= best.risk:
            break
        best_for_n = math.inf
        r_rises = 0
        prev_r = math.inf
        for r in range(1, n + 1):
            if config.prune:
                dur_lb = rate_lb * sum(1.0 / (n - i) for i in range(r))
                lb = n * per_unit + r * costs.v_s + costs.c_t * dur_lb + dec_lb
                if lb >= best.risk:
                    break
            ev = _optimize_tau(n, r, mode, priors, loss, costs, config, fixed_tau1)
            best_for_n = min(best_for_n, ev.risk)
            if ev.risk < best.risk - _IMPROVE_EPS:
                best = ev
            # The risk is smooth and single-dipped in r for fixed n; stop
            # after it has risen several times in a row.
            r_rises = r_rises + 1 if ev.risk > prev_r else 0
            prev_r = ev.risk
            if config.prune and r_rises >= config.stall_limit:
                break
        if math.isfinite(best_for_n):
            per_n.append((n, best_for_n))
            n_rises = n_rises + 1 if best_for_n > prev_best_n else 0
            prev_best_n = best_for_n
            if config.prune and n_rises >= config.stall_limit:
                break
    return OptimizationResult(best=best, mode=mode, n_cap=n_cap, per_n=tuple(per_n))


def compare_modes(
    priors: PriorSpec,
    loss: LossPoly,
    costs: CostModel,
    fixed_tau1: float | None = None,
    config: SearchConfig | None = None,
) -> ModeComparison:
    """Optimize all three plan families and report the adaptive family's
    percentage risk savings over each alternative."""
    adaptive = optimize_plan(priors, loss, costs, MODE_ADAPTIVE, fixed_tau1, config)
    accelerated = optimize_plan(priors, loss, costs, MODE_ACCELERATED, fixed_tau1, config)
    conventional = optimize_plan(priors, loss, costs, MODE_CONVENTIONAL, None, config)
    rrs = RelativeRisks(
        vs_accelerated=100.0 * (accelerated.best.risk - adaptive.best.risk) / accelerated.best.risk,
        vs_conventional=100.0 * (conventional.best.risk - adaptive.best.risk) / conventional.best.risk,
    )
    return ModeComparison(adaptive, accelerated, conventional, rrs)
