"""Unit tests for the domain types and the closed-form prior moments."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bsplan.model import (
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


class TestPriorSpec:
    def test_rejects_nonpositive_shapes(self):
        with pytest.raises(ConfigurationError):
            PriorSpec(alpha=(0.0, 1.0), beta=(1.0, 1.0), l=(2.0, 2.0))

    def test_rejects_l_at_most_one(self):
        with pytest.raises(ConfigurationError):
            PriorSpec(alpha=(1.0,), beta=(1.0,), l=(1.0,))

    def test_rejects_mismatched_lengths(self):
        with pytest.raises(ConfigurationError):
            PriorSpec(alpha=(1.0, 2.0), beta=(1.0,), l=(2.0, 2.0))

    def test_hashable(self):
        a = PriorSpec(alpha=(1.0,), beta=(2.0,), l=(3.0,))
        b = PriorSpec(alpha=(1.0,), beta=(2.0,), l=(3.0,))
        assert hash(a) == hash(b) and a == b


class TestCostModel:
    def test_rejects_salvage_above_unit_cost(self):
        with pytest.raises(ConfigurationError):
            CostModel(c_s=0.2, v_s=0.3, c_t=1.0, c_a=0.1, c_r=10.0)

    def test_rejects_nonpositive_rejection_cost(self):
        with pytest.raises(ConfigurationError):
            CostModel(c_s=0.5, v_s=0.2, c_t=1.0, c_a=0.1, c_r=0.0)


class TestLossPoly:
    def test_rejects_lower_triangular_entry(self):
        with pytest.raises(ConfigurationError):
            LossPoly(a0=1.0, a=(1.0, 1.0), quad=((1.0, 0.0), (1.0, 1.0)))

    def test_rejects_negative_coefficients(self):
        with pytest.raises(ConfigurationError):
            LossPoly(a0=-1.0, a=(1.0,))

    def test_evaluation_scalar(self):
        loss = LossPoly(a0=2.0, a=(3.0, 3.0), quad=((4.0, 4.0), (0.0, 4.0)))
        lam = np.array([0.5, 0.25])
        expected = 2 + 3 * 0.75 + 4 * (0.25 + 0.125 + 0.0625)
        assert loss.h(lam) == pytest.approx(expected, rel=1e-14)

    def test_evaluation_vectorized_matches_scalar(self):
        loss = LossPoly(a0=1.0, a=(2.0, 0.5), quad=((1.0, 3.0), (0.0, 2.0)))
        rng = np.random.default_rng(7)
        lam = rng.uniform(0.01, 2.0, size=(2, 50))
        batch = loss.h(lam)
        for k in range(50):
            assert batch[k] == pytest.approx(loss.h(lam[:, k]), rel=1e-13)

    def test_quad_pairs_skips_zeros(self):
        loss = LossPoly(a0=0.0, a=(1.0, 1.0), quad=((0.0, 5.0), (0.0, 0.0)))
        assert list(loss.quad_pairs()) == [(0, 1, 5.0)]


class TestPlan:
    def test_ordering_invariant(self):
        with pytest.raises(ConfigurationError):
            Plan(n=3, r=4, m=0)
        with pytest.raises(ConfigurationError):
            Plan(n=3, r=2, m=3)

    def test_m_zero_normalizes_tau1(self):
        assert Plan(n=5, r=3, m=0, tau1=2.5).tau1 == 0.0

    def test_requires_integer_components(self):
        with pytest.raises(ConfigurationError):
            Plan(n=5.0, r=3, m=1, tau1=1.0)

    def test_no_sampling_flag(self):
        assert Plan(0, 0, 0, 0.0).is_no_sampling
        assert not Plan(1, 1, 0, 0.0).is_no_sampling


class TestTheta:
    def test_rejects_acceleration_at_most_one(self):
        with pytest.raises(ConfigurationError):
            Theta(lam=(0.1,), phi=(1.0,))

    def test_rejects_nonpositive_rate(self):
        with pytest.raises(ConfigurationError):
            Theta(lam=(0.0,), phi=(2.0,))


class TestExpectedAcceptanceLoss:
    def test_closed_form_two_causes(self, ex1_priors, ex1_loss):
        # Direct evaluation of the Gamma moments of the quadratic polynomial.
        a1, a2 = 2.5, 2.2
        b1, b2 = 1.5, 2.0
        expected = (
            2.0
            + 3.0 * (a1 / b1 + a2 / b2)
            + 4.0 * (a1 * (a1 + 1) / b1**2 + (a1 / b1) * (a2 / b2) + a2 * (a2 + 1) / b2**2)
        )
        assert expected_acceptance_loss(ex1_priors, ex1_loss) == pytest.approx(
            expected, rel=1e-13
        )

    def test_monte_carlo_agreement(self, ex2_priors, ex2_loss):
        rng = np.random.default_rng(11)
        lam = rng.gamma(np.array(ex2_priors.alpha), size=(400_000, 2)) / np.array(
            ex2_priors.beta
        )
        vals = ex2_loss.h(lam.T)
        se = vals.std() / np.sqrt(len(vals))
        analytic = expected_acceptance_loss(ex2_priors, ex2_loss)
        assert abs(analytic - vals.mean()) < 4 * se


class TestNoSamplingRisk:
    def test_reject_when_cheaper(self, ex2_priors, ex2_loss):
        costs = CostModel(c_s=0.5, v_s=0.3, c_t=0.3, c_a=0.05, c_r=70.0)
        risk, action = no_sampling_risk(ex2_priors, ex2_loss, costs)
        assert risk == 70.0
        assert action == REJECT

    def test_accept_when_cheaper(self, ex2_priors, ex2_loss):
        costs = CostModel(c_s=0.5, v_s=0.3, c_t=0.3, c_a=0.05, c_r=90.0)
        risk, action = no_sampling_risk(ex2_priors, ex2_loss, costs)
        assert risk == pytest.approx(expected_acceptance_loss(ex2_priors, ex2_loss))
        assert action == ACCEPT

    def test_tie_accepts(self):
        priors = PriorSpec(alpha=(2.0,), beta=(1.0,), l=(2.0,))
        loss = LossPoly(a0=5.0, a=(0.0,))
        costs = CostModel(c_s=0.5, v_s=0.2, c_t=1.0, c_a=0.1, c_r=5.0)
        assert no_sampling_risk(priors, loss, costs) == (5.0, ACCEPT)


class TestNUpperBound:
    @given(st.floats(0.05, 2.0), st.floats(5.0, 200.0))
    @settings(max_examples=30, deadline=None)
    def test_item_cost_alone_exceeds_base_risk_beyond_bound(self, per_unit, c_r):
        priors = PriorSpec(alpha=(2.0,), beta=(1.0,), l=(3.0,))
        loss = LossPoly(a0=1.0, a=(4.0,), quad=((2.0,),))
        costs = CostModel(c_s=per_unit + 0.1, v_s=0.1, c_t=0.5, c_a=0.1, c_r=c_r)
        bound = n_upper_bound(priors, loss, costs)
        assert isinstance(bound, int) and bound >= 0
        base = no_sampling_risk(priors, loss, costs)[0]
        # One unit past the bound, bare procurement already beats sampling.
        assert (bound + 1) * (costs.c_s - costs.v_s) + costs.v_s > base - base * 1e-12
