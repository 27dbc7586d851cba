"""Sampling rules: marginal fidelity, fixed-size draws, deterministic
baselines and budget accounting."""

import math

import numpy as np
import pytest

import seqanom as sa
from seqanom import llr, sampling
from seqanom._rng import TrialStream
from seqanom.errors import CombinatorialBlowupError, UnsupportedRuleError
from seqanom.sampling import (
    BernoulliRule,
    ChernoffRule,
    EqualizingRule,
    OrderingRule,
    TandemRule,
    budget_ratio,
    enumerate_decision_sets,
    pad_marginals,
    systematic_draw,
)


def homog(M, l, u, K, alpha=1e-3, beta=1e-3):
    return sa.homogeneous_gaussian_spec(M, l, u, K, alpha, beta, 0.5)


class TestEnumeration:
    def test_counts(self):
        assert len(enumerate_decision_sets(10, 1, 6)) == sum(
            math.comb(10, k) for k in range(1, 7)
        )
        assert enumerate_decision_sets(3, 0, 3) == sorted(range(8))

    def test_cap(self):
        with pytest.raises(CombinatorialBlowupError):
            enumerate_decision_sets(40, 0, 40, cap=200_000)


class TestPadding:
    def test_no_slack_is_identity(self):
        c = np.array([0.5] * 10)
        assert pad_marginals(c, 5.0) == pytest.approx(c)

    def test_waterfill_properties(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            M = int(rng.integers(2, 9))
            c = rng.uniform(0, 1, M)
            K = float(rng.uniform(c.sum(), M))
            padded = pad_marginals(c, K)
            assert padded.sum() == pytest.approx(K, abs=1e-9)
            assert (padded >= c - 1e-12).all()
            assert (padded <= 1.0 + 1e-12).all()

    def test_hits_ones(self):
        padded = pad_marginals([0.9, 0.1, 0.0], 2.0)
        assert padded.sum() == pytest.approx(2.0)
        assert padded.max() <= 1.0 + 1e-12
        assert padded[0] == pytest.approx(1.0)


class TestFrequencyTable:
    def test_interior_flat(self):
        masks, c, xy = sampling.build_frequency_table(homog(10, 1, 6, 5.0))
        row = c[list(masks).index(sampling.mask_of({0, 1, 2}))]
        assert row == pytest.approx(np.full(10, 0.5))

    def test_lower_edge_row(self):
        spec = homog(10, 1, 6, 5.0)
        rule = BernoulliRule(spec)
        row = rule.marginals(frozenset({3}))
        assert row[3] == 0.0
        mask = np.ones(10, bool)
        mask[3] = False
        assert row[mask] == pytest.approx(np.full(9, 5.0 / 9.0))

    def test_known_count_row(self):
        rule = BernoulliRule(homog(10, 2, 2, 5.0))
        row = rule.marginals(frozenset({0, 1}))
        assert row[:2] == pytest.approx([1.0, 1.0])
        assert row[2:] == pytest.approx(np.full(8, 0.375))

    def test_lazy_cache_matches_eager(self):
        spec = homog(6, 1, 4, 3.0)
        masks, c, xy = sampling.build_frequency_table(spec)
        rule = BernoulliRule(spec)
        for k, m in enumerate(masks):
            D = sampling.set_of(int(m), 6)
            assert rule.marginals(D) == pytest.approx(c[k])
            assert rule.table.xy(D) == pytest.approx(tuple(xy[k]))

    def test_every_row_within_budget(self):
        for spec in (homog(7, 1, 5, 3.5), homog(6, 2, 2, 2.0)):
            _, c, _ = sampling.build_frequency_table(spec)
            assert (c.sum(axis=1) <= spec.K + 1e-9).all()
            assert ((0.0 <= c) & (c <= 1.0 + 1e-12)).all()
        # fixed-size rows are padded to use the budget exactly
        _, padded, _ = sampling.build_frequency_table(homog(8, 1, 5, 4.0), pad_to_budget=True)
        assert padded.sum(axis=1) == pytest.approx(np.full(len(padded), 4.0), abs=1e-9)


class TestBernoulliSampling:
    def test_degenerate_rows(self):
        spec = homog(10, 2, 2, 5.0)
        rule = BernoulliRule(spec)
        stream = TrialStream(0)
        D = frozenset({0, 1})
        # row is (1,1,0.375...): the two estimated sources always included
        for _ in range(50):
            assert D <= rule.sample(D, stream)
        # a zero row never includes its source
        spec2 = homog(10, 1, 6, 5.0)
        rule2 = BernoulliRule(spec2)
        for _ in range(50):
            assert 3 not in rule2.sample(frozenset({3}), TrialStream(1))

    def test_inclusion_concentration(self):
        spec = homog(10, 1, 6, 5.0)
        rule = BernoulliRule(spec)
        stream = TrialStream(5)
        D = frozenset({0, 1, 2})
        hits = np.zeros(10)
        n = 100_000
        for _ in range(n):
            for i in rule.sample(D, stream):
                hits[i] += 1
        assert hits / n == pytest.approx(np.full(10, 0.5), abs=5e-3)


class TestChernoffSampling:
    def test_exact_size_and_marginals(self):
        spec = homog(10, 1, 6, 5.0)
        rule = ChernoffRule(spec)
        stream = TrialStream(6)
        D = frozenset({0, 1, 2})
        hits = np.zeros(10)
        n = 100_000
        for _ in range(n):
            s = rule.sample(D, stream)
            assert len(s) == 5
            for i in s:
                hits[i] += 1
        c = rule.marginals(D)
        se = np.sqrt(c * (1 - c) / n)
        assert (np.abs(hits / n - c) <= 5 * se + 1e-12).all()

    def test_full_budget(self):
        spec = homog(4, 1, 3, 4.0)
        rule = ChernoffRule(spec)
        assert rule.sample(frozenset({0}), TrialStream(2)) == frozenset(range(4))

    def test_deterministic_support(self):
        # marginals (1,1,0,...) with K=2 always return exactly those two
        got = systematic_draw(np.array([1.0, 1.0, 0.0, 0.0]), [2, 0, 3, 1], 2, 0.63)
        assert got == {0, 1}

    def test_systematic_count_is_exact_under_float_slop(self):
        rng = np.random.default_rng(8)
        for _ in range(300):
            M = int(rng.integers(3, 12))
            K = int(rng.integers(1, M + 1))
            c = pad_marginals(rng.uniform(0, 1, M) * (K / M), float(K))
            perm = rng.permutation(M).tolist()
            got = systematic_draw(c, perm, K, float(rng.uniform(0.0001, 0.9999)))
            assert len(got) == K

    def test_non_integer_budget_rejected(self):
        with pytest.raises(UnsupportedRuleError):
            ChernoffRule(homog(10, 1, 6, 4.5))

    def test_padded_edge_row(self):
        # lower-edge rows leave budget slack; padding must restore sum K
        spec = homog(10, 1, 6, 5.0)
        rule = ChernoffRule(spec)
        row = rule.marginals(frozenset({3}))
        assert row.sum() == pytest.approx(5.0, abs=1e-9)


class TestTandem:
    def test_wraparound_windows(self):
        rule = TandemRule(homog(10, 1, 6, 5.0))
        assert rule.sample(1) == set(range(0, 5))
        assert rule.sample(2) == set(range(5, 10))
        assert rule.sample(3) == set(range(0, 5))

    def test_small_cycle(self):
        rule = TandemRule(homog(3, 0, 3, 2.0))
        windows = [rule.sample(n) for n in (1, 2, 3)]
        assert windows == [{0, 1}, {2, 0}, {1, 2}]
        counts = np.zeros(3, int)
        for w in windows:
            for i in w:
                counts[i] += 1
        assert (counts == 2).all()

    def test_full_budget(self):
        rule = TandemRule(homog(4, 1, 3, 4.0))
        for n in range(1, 9):
            assert rule.sample(n) == frozenset(range(4))

    def test_non_integer_budget_rejected(self):
        with pytest.raises(UnsupportedRuleError):
            TandemRule(homog(10, 1, 6, 2.5))


class TestEqualizing:
    def exp_spec(self, lam=2.0):
        return sa.ProblemSpec(
            3, 0, 3, 1.0, 1e-2, 1e-2, tuple(sa.exponential_rate(lam) for _ in range(3))
        )

    def test_sticks_to_saturated_source(self):
        rule = EqualizingRule(self.exp_spec())
        D = frozenset({0})
        x, y = rule.table.xy(D)
        assert x + y < 1.0
        assert rule.sample(D, [1.0, 0.0, 0.0]) == {0}

    def test_tie_goes_to_smallest_index(self):
        rule = EqualizingRule(self.exp_spec())
        D = frozenset({0})
        x, y = rule.table.xy(D)
        assert rule.sample(D, [x, y, y]) == {0}

    def test_plain_argmax(self):
        # lam < 1 makes y > x, so the zero-frequency distances (x, y, y)
        # favour the first source outside the estimate
        rule = EqualizingRule(self.exp_spec(lam=0.5))
        D = frozenset({0})
        x, y = rule.table.xy(D)
        assert y > x
        assert rule.sample(D, [0.0, 0.0, 0.0]) == {1}

    def test_requires_unit_budget_and_homogeneous(self):
        with pytest.raises(UnsupportedRuleError):
            EqualizingRule(homog(10, 1, 6, 5.0))
        mixed = sa.ProblemSpec(
            3, 0, 3, 1.0, 1e-2, 1e-2,
            (sa.exponential_rate(2.0), sa.exponential_rate(3.0), sa.exponential_rate(2.0)),
        )
        with pytest.raises(UnsupportedRuleError):
            EqualizingRule(mixed)


class TestOrdering:
    def state(self, values):
        return llr.update(
            llr.initial_state(len(values)), range(len(values)), dict(enumerate(map(float, values)))
        )

    def test_smallest_absolute(self):
        rule = OrderingRule(homog(3, 1, 2, 1.0))
        assert rule.sample(self.state([5.0, -0.1, 3.0])) == {1}

    def test_tie_prefix(self):
        rule = OrderingRule(homog(4, 1, 3, 2.0))
        assert rule.sample(self.state([1.0, 1.0, 1.0, 1.0])) == {0, 1}

    def test_two_smallest(self):
        rule = OrderingRule(homog(4, 1, 3, 2.0))
        assert rule.sample(self.state([-2.0, 1.0, -0.5, 4.0])) == {2, 1}

    def test_non_integer_budget_rejected(self):
        with pytest.raises(UnsupportedRuleError):
            OrderingRule(homog(4, 1, 3, 1.5))


class TestBudgetRatio:
    def test_fixed_size_rules_exact(self, homog_spec):
        th = sa.conservative_thresholds(homog_spec).scaled(0.4)
        batch = sa.simulate_batch(homog_spec, "chernoff", th, frozenset(range(3)), 300, 21)
        assert budget_ratio(batch.records()) == pytest.approx(5.0, abs=1e-12)
        batch = sa.simulate_batch(homog_spec, "tandem", th, frozenset(range(3)), 300, 22)
        assert budget_ratio(batch.records()) == pytest.approx(5.0, abs=1e-12)

    def test_bernoulli_close_to_budget(self, homog_spec):
        th = sa.conservative_thresholds(homog_spec).scaled(0.4)
        batch = sa.simulate_batch(homog_spec, "bernoulli", th, frozenset(range(3)), 2000, 23)
        # interior rows use the whole budget in expectation
        assert budget_ratio(batch.records()) == pytest.approx(5.0, abs=0.05)

    def test_empty_records_rejected(self):
        with pytest.raises(ValueError):
            budget_ratio([])
