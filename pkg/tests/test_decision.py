"""Unit tests for the posterior expected loss, the accept/reject rule, and the
rejection-region thresholds.

The load-bearing check is the dual evaluation path: every posterior moment
ratio is computed both through the incomplete-beta representation and through
independent adaptive quadrature, and the two must agree tightly.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bsplan.decision import (
    ExponentVector,
    FailureCounts,
    SuffStats,
    bayes_decision,
    h1,
    h1_direct_quadrature,
    posterior_expected_loss,
    posterior_loss_grid,
    threshold_c,
    threshold_c1,
    threshold_c1_batch,
    threshold_c_raw,
)
from bsplan.model import ACCEPT, REJECT, ConfigurationError, LossPoly, PriorSpec

PRIORS = [
    PriorSpec(alpha=(2.5, 2.2), beta=(1.5, 2.0), l=(10.0, 10.0)),
    PriorSpec(alpha=(3.05, 13.0), beta=(137.35, 135.44), l=(109.072, 11.718)),
    PriorSpec(alpha=(1.7,), beta=(0.8,), l=(4.0,)),
]


def _exponents(j):
    out = [ExponentVector((0,) * j)]
    for i in range(j):
        p = [0] * j
        p[i] = 1
        out.append(ExponentVector(tuple(p)))
    for i in range(j):
        for k in range(i, j):
            p = [0] * j
            p[i] += 1
            p[k] += 1
            out.append(ExponentVector(tuple(p)))
    return out


def _stats_grid(j):
    counts = [
        FailureCounts((1,) * j, (1,) * j),
        FailureCounts((0,) * j, (2,) + (1,) * (j - 1)),
        FailureCounts((2,) + (0,) * (j - 1), (0,) * j),
    ]
    stats = []
    for c in counts:
        for w1, w2 in [(0.4, 0.0), (3.0, 0.0), (2.0, 1.5), (40.0, 12.0)]:
            for delta in (0, 1):
                if delta == 0 and w2 > 0:
                    continue
                if delta == 0 and c.post_total and w2 == 0.0:
                    # post-inspection failures at base stress never have w2=0
                    pass
                stats.append(SuffStats(w1=w1, w2=w2, counts=c, delta=delta))
    return stats


class TestDualEvaluationPath:
    @pytest.mark.parametrize("priors", PRIORS)
    def test_incomplete_beta_vs_quadrature(self, priors):
        j = priors.n_risks
        for stats in _stats_grid(j):
            for p in _exponents(j):
                a = h1(stats, priors, p)
                b = h1_direct_quadrature(stats, priors, p)
                assert a == pytest.approx(b, rel=1e-8), (stats, p)

    def test_extreme_scale_separation(self):
        # Large acceleration prior endpoint with small w2: the beta-difference
        # representation is ill-conditioned here and must fall back cleanly.
        priors = PriorSpec(alpha=(3.05, 13.0), beta=(137.35, 135.44), l=(109.072, 11.718))
        counts = FailureCounts((1, 1), (2, 1))
        for w2 in (1e-4, 0.01, 0.5, 30.0, 400.0):
            stats = SuffStats(w1=35.0, w2=w2, counts=counts, delta=1)
            for p in _exponents(2):
                a = h1(stats, priors, p)
                b = h1_direct_quadrature(stats, priors, p)
                assert a == pytest.approx(b, rel=1e-8), (w2, p)


class TestPosteriorLossShape:
    @pytest.mark.parametrize("priors", PRIORS)
    def test_decreasing_in_w1_and_w2(self, priors):
        j = priors.n_risks
        loss = LossPoly(a0=2.0, a=(3.0,) * j, quad=tuple(
            tuple(4.0 if k >= i else 0.0 for k in range(j)) for i in range(j)
        ))
        counts = FailureCounts((1,) * j, (1,) * j)
        w1s = np.linspace(0.5, 60.0, 25)
        for delta in (0, 1):
            vals = posterior_loss_grid(w1s, np.full_like(w1s, 2.0), counts, delta, priors, loss)
            assert np.all(np.diff(vals) < 0.0)
        w2s = np.linspace(0.1, 80.0, 25)
        vals = posterior_loss_grid(np.full_like(w2s, 5.0), w2s, counts, 1, priors, loss)
        assert np.all(np.diff(vals) < 0.0)

    def test_limits(self, ex1_priors, ex1_loss):
        counts = FailureCounts((1, 0), (0, 1))
        # As total test time grows without bound the rates look tiny and the
        # posterior loss approaches the intercept a0.
        big = posterior_loss_grid(1e9, 1e9, counts, 1, ex1_priors, ex1_loss)
        assert big == pytest.approx(ex1_loss.a0, rel=1e-3)

    def test_broadcasting(self, ex1_priors, ex1_loss):
        counts = FailureCounts((1, 1), (1, 0))
        w1 = np.array([1.0, 2.0, 3.0])
        out = posterior_loss_grid(w1, 0.5, counts, 1, ex1_priors, ex1_loss)
        assert out.shape == (3,)
        for i, w in enumerate(w1):
            scalar = posterior_loss_grid(w, 0.5, counts, 1, ex1_priors, ex1_loss)
            assert out[i] == pytest.approx(float(scalar), rel=1e-12)


class TestBayesDecision:
    def test_boundary_accepts(self, ex1_priors, ex1_loss):
        counts = FailureCounts((1, 1), (0, 1))
        stats = SuffStats(w1=4.0, w2=1.0, counts=counts, delta=1)
        phi = posterior_expected_loss(stats, ex1_priors, ex1_loss)
        assert bayes_decision(stats, ex1_priors, ex1_loss, c_r=phi) == ACCEPT
        assert bayes_decision(stats, ex1_priors, ex1_loss, c_r=phi - 1e-9) == REJECT


class TestThresholds:
    def test_raw_threshold_is_a_root(self, ex1_priors, ex1_loss):
        counts = FailureCounts((2, 1), (0, 0))
        c = threshold_c_raw(counts, 0, ex1_priors, ex1_loss, 40.0)
        assert 0.0 < c < math.inf
        phi = posterior_loss_grid(c, 0.0, counts, 0, ex1_priors, ex1_loss)
        assert float(phi) == pytest.approx(40.0, abs=1e-3)

    def test_raw_threshold_zero_when_always_accept(self, ex1_priors, ex1_loss):
        counts = FailureCounts((0, 0), (1, 1))
        assert threshold_c_raw(counts, 1, ex1_priors, ex1_loss, 1e6) == 0.0

    def test_raw_threshold_infinite_when_floor_rejects(self, ex1_priors):
        loss = LossPoly(a0=50.0, a=(1.0, 1.0))
        counts = FailureCounts((1, 0), (0, 1))
        assert threshold_c_raw(counts, 1, ex1_priors, loss, 40.0) == math.inf

    def test_clipped_threshold(self, ex1_priors, ex1_loss):
        counts = FailureCounts((2, 1), (0, 0))
        raw = threshold_c_raw(counts, 0, ex1_priors, ex1_loss, 40.0)
        assert threshold_c(counts, 0, ex1_priors, ex1_loss, 40.0, n=5, tau1=1e-4) == pytest.approx(
            5e-4
        )
        assert threshold_c(counts, 0, ex1_priors, ex1_loss, 40.0, n=5, tau1=1e6) == pytest.approx(
            raw
        )

    def test_w2_threshold_is_a_root(self, ex1_priors, ex1_loss):
        counts = FailureCounts((1, 0), (1, 1))
        c1 = threshold_c1(0.7, counts, 1, ex1_priors, ex1_loss, 40.0)
        assert 0.0 < c1 < math.inf
        phi = posterior_loss_grid(0.7, c1, counts, 1, ex1_priors, ex1_loss)
        assert float(phi) == pytest.approx(40.0, abs=1e-3)

    def test_batch_matches_scalar(self, ex1_priors, ex1_loss):
        counts = FailureCounts((1, 0), (1, 1))
        w1s = np.array([0.2, 0.7, 1.9, 6.0])
        batch = threshold_c1_batch(w1s, counts, 1, ex1_priors, ex1_loss, 40.0)
        for w1, c1 in zip(w1s, batch):
            assert c1 == pytest.approx(
                threshold_c1(float(w1), counts, 1, ex1_priors, ex1_loss, 40.0),
                abs=3e-5,  # root tolerance; brackets differ between the paths
            )

    @pytest.mark.parametrize("priors", PRIORS)
    def test_region_equivalence(self, priors):
        # The accept region described by the thresholds must coincide with the
        # pointwise posterior rule.
        j = priors.n_risks
        loss = LossPoly(a0=2.0, a=(3.0,) * j, quad=tuple(
            tuple(4.0 if k >= i else 0.0 for k in range(j)) for i in range(j)
        ))
        c_r = 0.6 * float(
            posterior_loss_grid(0.0, 0.0, FailureCounts((0,) * j, (0,) * j), 0, priors, loss)
        )
        counts = FailureCounts((1,) + (0,) * (j - 1), (1,) * j)
        rng = np.random.default_rng(3)
        for _ in range(60):
            w1 = float(rng.uniform(0.0, 6.0 * max(priors.beta)))
            w2 = float(rng.uniform(0.0, 6.0 * max(priors.beta)))
            stats = SuffStats(w1=w1, w2=w2, counts=counts, delta=1)
            phi = posterior_expected_loss(stats, priors, loss)
            if abs(phi - c_r) < 1e-4 * c_r:
                continue  # too close to the boundary to classify at root tolerance
            direct = bayes_decision(stats, priors, loss, c_r)
            c1 = threshold_c1(w1, counts, 1, priors, loss, c_r)
            by_region = ACCEPT if w2 >= c1 else REJECT
            assert direct == by_region, (w1, w2)


class TestValidation:
    def test_counts_reject_negative(self):
        with pytest.raises(ConfigurationError):
            FailureCounts((-1,), (0,))

    def test_stats_reject_bad_delta(self):
        with pytest.raises(ConfigurationError):
            SuffStats(w1=1.0, w2=0.0, counts=FailureCounts((0,), (1,)), delta=2)

    def test_exponent_vector_caps_degree(self):
        with pytest.raises(ConfigurationError):
            ExponentVector((2, 1))
        with pytest.raises(ConfigurationError):
            ExponentVector((3,))

    @given(st.integers(0, 3), st.integers(0, 3))
    @settings(max_examples=20)
    def test_counts_totals(self, a, b):
        c = FailureCounts((a,), (b,))
        assert c.total == a + b
        assert c.by_cause(0) == (a, b)
