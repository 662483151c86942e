"""Divergence and index-inversion unit and property tests.

Frozen expected values were produced with the independent oracles in
tests/oracles.py (scipy rel_entr / Brent root finding, spot-checked against
a 40-digit mpmath evaluation).
"""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clusbandit import (
    clus_ucb_index,
    exploration_budget,
    kl_bernoulli,
    kl_plus,
    kl_ucb_index,
)
from .oracles import okl, oracle_clus, oracle_klucb

INF = math.inf

probs = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)
open_probs = st.floats(min_value=1e-6, max_value=1.0 - 1e-6)


class TestKlBernoulli:
    @pytest.mark.parametrize("p", [0.0, 0.3, 0.5, 1.0])
    def test_zero_when_equal(self, p):
        assert kl_bernoulli(p, p) == 0.0

    def test_reference_value(self):
        assert kl_bernoulli(0.4, 0.6) == pytest.approx(0.0810930216216329, abs=1e-12)

    @pytest.mark.parametrize(
        "p,q",
        [(0.5, 1.0), (0.5, 0.0), (0.0, 1.0), (1.0, 0.0), (0.999, 1.0)],
    )
    def test_boundary_mismatch_is_infinite(self, p, q):
        assert kl_bernoulli(p, q) == INF

    def test_degenerate_p_finite(self):
        assert kl_bernoulli(0.0, 0.5) == pytest.approx(math.log(2.0))
        assert kl_bernoulli(1.0, 0.5) == pytest.approx(math.log(2.0))

    @given(p=probs, q=open_probs)
    @settings(max_examples=300)
    def test_matches_scipy_kernel(self, p, q):
        assert kl_bernoulli(p, q) == pytest.approx(okl(p, q), abs=1e-12, rel=1e-9)

    @given(p=probs, q=probs)
    @settings(max_examples=300)
    def test_nonnegative_no_nan(self, p, q):
        d = kl_bernoulli(p, q)
        assert d >= 0.0
        assert not math.isnan(d)
        if 0.0 < q < 1.0:
            assert (d == 0.0) == (p == q)

    def test_monotone_in_q(self):
        qs = np.linspace(0.301, 0.999, 60)
        vals = [kl_bernoulli(0.3, q) for q in qs]
        assert all(b > a for a, b in zip(vals, vals[1:]))
        qs = np.linspace(0.001, 0.299, 60)
        vals = [kl_bernoulli(0.3, q) for q in qs]
        assert all(b < a for a, b in zip(vals, vals[1:]))


class TestKlPlus:
    def test_not_greater_branch(self):
        assert kl_plus(0.6, 0.4) == 0.0
        assert kl_plus(0.3, 0.3) == 0.0

    def test_greater_branch(self):
        assert kl_plus(0.4, 0.6) == pytest.approx(0.0810930216216329, abs=1e-12)

    @given(p=probs, q=probs)
    @settings(max_examples=300)
    def test_dominated_by_two_sided(self, p, q):
        assert kl_plus(p, q) <= kl_bernoulli(p, q)


class TestExplorationBudget:
    def test_round_one(self):
        assert exploration_budget(1, 5.0) == 0.0

    def test_a_zero_reduces_to_log(self):
        assert exploration_budget(math.e**2, 0.0) == pytest.approx(2.0, abs=1e-12)

    def test_reference_value(self):
        # log(1000) + 5 log(log(1000))
        assert exploration_budget(1000, 5.0) == pytest.approx(16.570978948562464, abs=1e-9)

    def test_clamped_below_e(self):
        assert exploration_budget(2, 5.0) == pytest.approx(math.log(2.0), abs=1e-15)

    def test_rejects_bad_args(self):
        with pytest.raises(ValueError):
            exploration_budget(0, 1.0)
        with pytest.raises(ValueError):
            exploration_budget(10, -0.1)

    def test_nondecreasing_in_n(self):
        vals = [exploration_budget(n, 4.0) for n in range(1, 500)]
        assert all(b >= a for a, b in zip(vals, vals[1:]))


class TestKlUcbIndex:
    def test_zero_budget_pins_to_mean(self):
        assert kl_ucb_index(0.5, 1000, 0.0, 1e-9) == 0.5

    def test_mean_one_stays_one(self):
        assert kl_ucb_index(1.0, 10, 2.0, 1e-9) == 1.0

    def test_reference_value(self):
        got = kl_ucb_index(0.2, 10, 4.6052, 1e-6)
        assert got == pytest.approx(0.6671137171030117, abs=2e-6)

    @given(
        p=st.floats(min_value=0.0, max_value=1.0 - 1e-9),
        pulls=st.integers(min_value=1, max_value=10_000),
        budget=st.floats(min_value=0.0, max_value=30.0),
    )
    @settings(max_examples=200)
    def test_bracket_and_feasibility(self, p, pulls, budget):
        q = kl_ucb_index(p, pulls, budget, 1e-9)
        assert p <= q <= 1.0
        assert pulls * kl_bernoulli(p, q) <= budget

    def test_monotone_in_pulls_and_budget(self):
        idx = [kl_ucb_index(0.3, t, 5.0, 1e-9) for t in (1, 2, 5, 20, 100, 1000)]
        assert all(b <= a for a, b in zip(idx, idx[1:]))
        idx = [kl_ucb_index(0.3, 10, b, 1e-9) for b in (0.0, 0.5, 1.0, 4.0, 9.0)]
        assert all(b >= a for a, b in zip(idx, idx[1:]))

    def test_rejects_bad_args(self):
        with pytest.raises(ValueError):
            kl_ucb_index(0.5, 0, 1.0, 1e-9)
        with pytest.raises(ValueError):
            kl_ucb_index(0.5, 1, 1.0, 0.0)


class TestClusUcbIndex:
    def test_idle_mates_match_plain_index(self):
        budget = 3.7
        for p, t in [(0.3, 7), (0.9, 2), (0.0, 5)]:
            assert clus_ucb_index((p, t), [(0.5, 0), (0.1, 0)], 0.05, budget, 1e-9) == (
                kl_ucb_index(p, t, budget, 1e-9)
            )

    def test_zero_budget(self):
        assert clus_ucb_index((0.4, 50), [], 0.02, 0.0, 1e-9) == 0.4

    def test_reference_value(self):
        got = clus_ucb_index((0.4, 50), [(0.4, 50)], 0.02, math.log(1e4), 1e-6)
        assert got == pytest.approx(0.6224501121131907, abs=2e-6)

    def test_floor_at_empirical_mean(self):
        # mates carrying heavy evidence far below q - beta exhaust the budget at q = p
        got = clus_ucb_index((0.9, 5), [(0.05, 4000)], 0.1, 1.0, 1e-9)
        assert got == 0.9

    def test_mean_one_with_heavy_mates_floors_at_one(self):
        assert clus_ucb_index((1.0, 3), [(0.05, 4000)], 0.1, 1.0, 1e-9) == 1.0

    @given(
        p=st.floats(min_value=0.0, max_value=1.0 - 1e-9),
        t=st.integers(min_value=1, max_value=500),
        p2=st.floats(min_value=0.0, max_value=1.0),
        t2=st.integers(min_value=0, max_value=500),
        beta=st.floats(min_value=0.0, max_value=1.0),
        budget=st.floats(min_value=0.0, max_value=20.0),
    )
    @settings(max_examples=200)
    def test_never_exceeds_plain_index(self, p, t, p2, t2, beta, budget):
        coupled = clus_ucb_index((p, t), [(p2, t2)], beta, budget, 1e-9)
        assert p <= coupled <= kl_ucb_index(p, t, budget, 1e-9) + 1e-12

    @given(
        p=st.floats(min_value=0.0, max_value=1.0),
        t=st.integers(min_value=1, max_value=500),
        p2=st.floats(min_value=0.0, max_value=1.0),
        t2=st.integers(min_value=0, max_value=500),
        beta=st.floats(min_value=0.0, max_value=1.0),
        budget=st.floats(min_value=0.0, max_value=20.0),
    )
    @settings(max_examples=200)
    def test_feasible_or_floored(self, p, t, p2, t2, beta, budget):
        q = clus_ucb_index((p, t), [(p2, t2)], beta, budget, 1e-9)
        if q > p:
            val = t * kl_bernoulli(p, q)
            if q - beta > 0.0:
                val += t2 * kl_plus(p2, q - beta)
            assert val <= budget


class TestAgainstRootFindingOracle:
    """Randomized cross-checks against the Brent-based reference solvers."""

    def test_klucb_random_cases(self):
        rng = np.random.default_rng(20250810)
        for _ in range(400):
            p = rng.uniform(0.001, 0.999)
            t = int(rng.integers(1, 2000))
            budget = rng.uniform(0.0, 15.0)
            got = kl_ucb_index(p, t, budget, 1e-9)
            want = oracle_klucb(p, t, budget)
            assert abs(got - want) <= 1e-6

    def test_clus_random_cases(self):
        rng = np.random.default_rng(20250811)
        for _ in range(400):
            p = rng.uniform(0.001, 0.999)
            t = int(rng.integers(1, 500))
            others = [
                (rng.uniform(0.0, 1.0), int(rng.integers(0, 500)))
                for _ in range(int(rng.integers(0, 4)))
            ]
            beta = rng.uniform(0.0, 1.0)
            budget = rng.uniform(0.0, 15.0)
            got = clus_ucb_index((p, t), others, beta, budget, 1e-9)
            want = oracle_clus((p, t), others, beta, budget)
            assert abs(got - want) <= 1e-6
