"""Assignment generation, pair counts, entropy, and balancing."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dprsim.assignment import (
    Assignment,
    Constraints,
    InfeasibleAssignmentError,
    NoTradeWarning,
    balance,
    entropy,
    max_entropy,
    pair_counts,
    random_assignment,
)
from dprsim.cigr import AnnealParams


def check_valid(a: Assignment, n: int, m: int, constraints: Constraints) -> None:
    assert a.n == n
    assert all(len(r) == m for r in a.reviews)
    assert np.all(a.review_counts(n) == m)
    assert a.satisfies(constraints)


class TestConstraints:
    def test_self_always_included(self):
        c = Constraints((frozenset(), frozenset({0})))
        assert 0 in c.forbidden[0]
        assert 1 in c.forbidden[1]

    def test_from_mapping(self):
        c = Constraints.from_mapping(3, {0: [2]})
        assert c.forbidden[0] == frozenset({0, 2})
        assert c.forbidden[1] == frozenset({1})


class TestRandomAssignment:
    def test_small_regular_no_self_review(self):
        a = random_assignment(4, 2, seed=0)
        check_valid(a, 4, 2, Constraints.self_review(4))

    def test_three_by_two_is_forced(self):
        a = random_assignment(3, 2, seed=5)
        for i, props in enumerate(a.reviews):
            assert set(props) == {0, 1, 2} - {i}

    def test_fully_forbidden_reviewer_is_infeasible(self):
        constraints = Constraints.from_mapping(4, {1: [0, 1, 2, 3]})
        with pytest.raises(InfeasibleAssignmentError) as err:
            random_assignment(4, 2, constraints, seed=0)
        assert "1" in str(err.value)

    def test_extra_constraints_respected(self):
        constraints = Constraints.from_mapping(8, {0: [1, 2], 3: [6], 5: [0, 7]})
        for seed in range(5):
            a = random_assignment(8, 3, constraints, seed=seed)
            check_valid(a, 8, 3, constraints)

    def test_bad_shape_rejected(self):
        with pytest.raises(ValueError):
            random_assignment(4, 4)
        with pytest.raises(ValueError):
            random_assignment(4, 1)

    def test_deterministic_per_seed(self):
        assert random_assignment(10, 4, seed=9) == random_assignment(10, 4, seed=9)

    @settings(max_examples=60, deadline=None)
    @given(
        st.integers(min_value=3, max_value=14),
        st.integers(min_value=2, max_value=6),
        st.integers(min_value=0, max_value=10_000),
    )
    def test_regularity_property(self, n, m, seed):
        if m >= n:
            m = n - 1
        a = random_assignment(n, m, seed=seed)
        check_valid(a, n, m, Constraints.self_review(n))


class TestPairCounts:
    def test_cycle_assignment(self):
        # reviewers hold {1,2},{2,3},{3,0},{0,1}: four distinct pairs
        a = Assignment(((1, 2), (2, 3), (3, 0), (0, 1)))
        alpha = pair_counts(a, 4)
        assert alpha[1, 2] == 1 and alpha[2, 3] == 1
        assert alpha[0, 3] == 1 and alpha[0, 1] == 1
        assert alpha.sum() == 8  # symmetric storage

    def test_duplicated_pairs(self):
        a = Assignment(((2, 3), (2, 3), (0, 1), (0, 1)))
        alpha = pair_counts(a, 4)
        assert alpha[2, 3] == 2
        assert alpha[0, 1] == 2

    def test_total_mass(self):
        a = random_assignment(40, 7, seed=1)
        alpha = pair_counts(a, 40)
        assert alpha[np.triu_indices(40, 1)].sum() == 40 * 21


class TestEntropy:
    def test_four_distinct_pairs(self):
        a = Assignment(((1, 2), (2, 3), (3, 0), (0, 1)))
        assert entropy(pair_counts(a, 4), 4, 2) == pytest.approx(math.log(4))

    def test_two_doubled_pairs(self):
        a = Assignment(((2, 3), (2, 3), (0, 1), (0, 1)))
        assert entropy(pair_counts(a, 4), 4, 2) == pytest.approx(math.log(2))

    def test_single_cell_is_zero(self):
        alpha = np.zeros((3, 3), dtype=np.int64)
        alpha[0, 1] = alpha[1, 0] = 4
        assert entropy(alpha, 4, 2) == 0.0

    def test_mass_mismatch_rejected(self):
        with pytest.raises(ValueError):
            entropy(np.zeros((4, 4), dtype=np.int64), 4, 2)

    def test_upper_bound(self):
        for n, m in ((8, 3), (12, 4), (40, 7)):
            a = random_assignment(n, m, seed=3)
            h = entropy(pair_counts(a, n), n, m)
            mass = n * m * (m - 1) // 2
            assert h <= math.log(min(mass, n * (n - 1) // 2)) + 1e-12

    def test_max_entropy_matches_perfect_profile(self):
        # mass 840 over 780 cells: 60 doubled cells, 720 singles
        mass = 840
        expected = -(
            720 * (1 / mass) * math.log(1 / mass)
            + 60 * (2 / mass) * math.log(2 / mass)
        )
        assert max_entropy(40, 7) == pytest.approx(expected)


class TestBalance:
    def test_reaches_maximum_on_tiny_instance(self):
        start = Assignment(((2, 3), (2, 3), (0, 1), (0, 1)))
        out = balance(start, params=AnnealParams(seed=4))
        h = entropy(pair_counts(out, 4), 4, 2)
        assert h == pytest.approx(math.log(4))

    def test_perfectly_balanced_input_unchanged_value(self):
        start = Assignment(((1, 2), (2, 3), (3, 0), (0, 1)))
        out = balance(start, params=AnnealParams(seed=8))
        assert entropy(pair_counts(out, 4), 4, 2) == pytest.approx(math.log(4))

    def test_never_worse_than_input(self):
        for seed in range(6):
            a = random_assignment(12, 4, seed=seed)
            h_in = entropy(pair_counts(a, 12), 12, 4)
            out = balance(
                a, params=AnnealParams(seed=seed, max_iters=2000), polish_budget=500
            )
            h_out = entropy(pair_counts(out, 12), 12, 4)
            assert h_out >= h_in - 1e-12

    def test_preserves_regularity_and_constraints(self):
        constraints = Constraints.from_mapping(10, {2: [5, 6], 7: [1]})
        a = random_assignment(10, 3, constraints, seed=2)
        out = balance(
            a, constraints, AnnealParams(seed=3, max_iters=3000), polish_budget=800
        )
        check_valid(out, 10, 3, constraints)

    def test_no_tradeable_pair_warns_and_returns_input(self):
        # duplicated pairs (entropy below cap) but constraints block every trade
        a = Assignment(((2, 3), (2, 3), (0, 1), (0, 1)))
        locked = Constraints.from_mapping(4, {0: [0, 1], 1: [0, 1], 2: [2, 3], 3: [2, 3]})
        with pytest.warns(NoTradeWarning):
            out = balance(a, locked, AnnealParams(seed=1))
        assert out == a

    def test_already_at_cap_returns_without_trades(self):
        a = random_assignment(3, 2, seed=0)  # unique structure, maximal entropy
        out = balance(a, params=AnnealParams(seed=1))
        assert out == a

    def test_deterministic_per_seed(self):
        a = random_assignment(12, 4, seed=6)
        kwargs = dict(params=AnnealParams(seed=9, max_iters=2000), polish_budget=500)
        assert balance(a, **kwargs) == balance(a, **kwargs)

    def test_input_violating_constraints_rejected(self):
        a = Assignment(((1, 0), (2, 3), (3, 0), (1, 2)))  # reviewer 1 holds 2: fine
        bad = Constraints.from_mapping(4, {0: [1]})
        with pytest.raises(ValueError):
            balance(a, bad)

    def test_moderate_instance_quality(self):
        # a 20/4 instance balances to a near-uniform pair spread quickly
        a = random_assignment(20, 4, seed=11)
        out = balance(a, params=AnnealParams(t0=0.002, beta=0.9995, max_iters=4000, seed=12))
        alpha = pair_counts(out, 20)
        cap = max_entropy(20, 4)
        assert entropy(alpha, 20, 4) >= 0.99 * cap
        assert alpha.max() <= 2
