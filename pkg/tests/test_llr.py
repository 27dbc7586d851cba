"""Running-statistics engine: recursion, order statistics, replay oracle."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqanom import llr


def state_from(values, counts=None):
    arr = np.asarray(values, dtype=float)
    s = llr.initial_state(len(arr))
    inc = {i: float(v) for i, v in enumerate(arr)}
    return llr.update(s, range(len(arr)), inc)


class TestUpdate:
    def test_empty_step(self):
        s = llr.initial_state(3)
        s2 = llr.update(s, set(), {})
        assert s2.n == 1
        assert (s2.lam == 0).all() and (s2.counts == 0).all()

    def test_single_source(self):
        s = llr.update(llr.initial_state(3), {0}, {0: 0.4})
        assert s.lam.tolist() == [0.4, 0.0, 0.0]
        assert s.pos_count == 1
        assert s.sorted_index[0] == 0

    def test_two_sources(self):
        s = llr.update(llr.initial_state(2), {0, 1}, {0: 1.0, 1: 2.0})
        s = llr.update(s, {0, 1}, {0: 1.5, 1: -0.5})
        assert s.lam.tolist() == [2.5, 1.5]
        assert s.sorted_index.tolist() == [0, 1]
        assert s.counts.tolist() == [2, 2]

    def test_key_mismatch_rejected(self):
        s = llr.initial_state(2)
        with pytest.raises(ValueError):
            llr.update(s, {0}, {0: 1.0, 1: 2.0})
        with pytest.raises(ValueError):
            llr.update(s, {0, 1}, {0: 1.0})

    def test_replay_oracle(self):
        # independent reconstruction: per-source sum of logged increments
        rng = np.random.default_rng(5)
        M, steps = 7, 10_000
        state = llr.initial_state(M)
        log = []
        for _ in range(steps):
            k = int(rng.integers(0, M + 1))
            sampled = tuple(int(i) for i in rng.choice(M, size=k, replace=False))
            inc = {i: float(rng.normal()) for i in sampled}
            log.append((sampled, inc))
            state = llr.update(state, sampled, inc)
        direct = np.zeros(M)
        counts = np.zeros(M, dtype=int)
        for sampled, inc in log:
            for i in sampled:
                direct[i] += inc[i]
                counts[i] += 1
        assert np.allclose(state.lam, direct, atol=1e-12, rtol=0)
        assert (state.counts == counts).all()
        assert counts.sum() == sum(len(s) for s, _ in log)
        # and the packaged replay agrees with the incremental state
        replayed = llr.replay(M, log)
        assert np.array_equal(replayed.lam, state.lam)


class TestPairwiseAndGaps:
    def test_pairwise(self):
        s = state_from([2.5, 1.5])
        assert llr.pairwise_llr(s, 0, 1) == pytest.approx(1.0)
        assert llr.pairwise_llr(s, 1, 0) == pytest.approx(-1.0)
        with pytest.raises(ValueError):
            llr.pairwise_llr(s, 1, 1)

    @given(st.lists(st.floats(-50, 50), min_size=2, max_size=8))
    def test_pairwise_antisymmetry(self, values):
        s = state_from(values)
        for i in range(len(values)):
            for j in range(len(values)):
                if i != j:
                    assert llr.pairwise_llr(s, i, j) == -llr.pairwise_llr(s, j, i)

    def test_gap_values(self):
        s = state_from([3.0, 1.0])
        assert llr.gap_at(s, 1) == pytest.approx(2.0)
        assert llr.gap_at(s, 0) == np.inf
        assert llr.gap_at(s, 2) == np.inf
        with pytest.raises(ValueError):
            llr.gap_at(s, 3)


class TestOrderStatistics:
    @settings(max_examples=200)
    @given(st.lists(st.floats(-100, 100), min_size=1, max_size=10))
    def test_sorted_and_positive_count(self, values):
        s = state_from(values)
        ranked = s.lam[s.sorted_index]
        assert (np.diff(ranked) <= 0).all()
        assert s.pos_count == sum(1 for v in s.lam if v > 0)

    def test_tie_break_by_index(self):
        s = state_from([1.0, 2.0, 1.0, 2.0])
        assert s.sorted_index.tolist() == [1, 3, 0, 2]


class TestConsistencyTime:
    A = frozenset({0, 1})
    B = frozenset({2})

    def test_examples(self):
        assert llr.consistency_time([self.A, self.A, self.A], self.A) == 1
        assert llr.consistency_time([self.B, self.A, self.A], self.A) == 2
        # equality must hold for every later index, so a relapse pushes it out
        assert llr.consistency_time([self.A, self.B, self.A], self.A) == 3

    def test_censored(self):
        assert llr.consistency_time([self.A, self.B], self.A) is None
        assert llr.consistency_time([], self.A) is None
