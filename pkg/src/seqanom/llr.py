"""Running log-likelihood-ratio statistics for all sources.

Tracks, per source i, the cumulative LLR ``lam[i]`` over its sampled
observations, the sample count ``counts[i]``, the descending order statistics
with their index permutation, and the number of positive LLRs.  Ties in the
ordering break toward the smaller source index so that runs are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Set, Union

import numpy as np

Censored = None  # sentinel for "never stabilized within the trace"


def stable_desc_order(lam: Sequence[float]) -> np.ndarray:
    """Indices sorting lam in non-increasing order, ties to smaller index."""
    arr = np.asarray(lam, dtype=np.float64)
    return np.argsort(-arr, kind="stable")


@dataclass(frozen=True)
class LlrState:
    """Immutable snapshot of the per-source statistics at time ``n``."""

    n: int
    lam: np.ndarray  # float64[M], cumulative LLRs in nats
    counts: np.ndarray  # int64[M], observations taken per source
    sorted_index: np.ndarray  # int64[M], descending order permutation
    pos_count: int  # number of strictly positive LLRs

    @property
    def M(self) -> int:
        return self.lam.shape[0]

    def sampling_fractions(self) -> np.ndarray:
        """counts / n, the empirical sampling frequencies (zeros at n = 0)."""
        if self.n == 0:
            return np.zeros(self.M)
        return self.counts / self.n

    def rank_value(self, k: int) -> float:
        """k-th largest LLR for k in [1, M]; +inf at rank 0, -inf at M+1."""
        if k == 0:
            return np.inf
        if k == self.M + 1:
            return -np.inf
        if not 1 <= k <= self.M:
            raise ValueError(f"rank must lie in [0, M+1], got {k}")
        return float(self.lam[self.sorted_index[k - 1]])


def initial_state(M: int) -> LlrState:
    if M < 1:
        raise ValueError(f"need at least one source, got M={M}")
    lam = np.zeros(M)
    return LlrState(0, lam, np.zeros(M, dtype=np.int64), stable_desc_order(lam), 0)


def update(
    state: LlrState,
    sampled_set: Iterable[int],
    increments: Dict[int, float],
) -> LlrState:
    """Advance one time step: only sampled sources accumulate evidence.

    ``increments`` must be keyed exactly by ``sampled_set``; sources outside
    it keep their LLR and count unchanged.
    """
    sampled = set(sampled_set)
    if sampled != set(increments):
        raise ValueError(
            f"increments keyed by {sorted(increments)} but sampled set is {sorted(sampled)}"
        )
    lam = state.lam.copy()
    counts = state.counts.copy()
    for i in sampled:
        if not 0 <= i < state.M:
            raise ValueError(f"source index {i} outside [0, {state.M})")
        lam[i] += increments[i]
        counts[i] += 1
    pos = int(np.sum(lam > 0.0))
    return LlrState(state.n + 1, lam, counts, stable_desc_order(lam), pos)


def pairwise_llr(state: LlrState, i: int, j: int) -> float:
    """LLR of 'i anomalous, j normal' vs 'j anomalous, i normal'."""
    if i == j:
        raise ValueError(f"pairwise LLR needs two distinct sources, got {i}")
    return float(state.lam[i] - state.lam[j])


def gap_at(state: LlrState, k: int) -> float:
    """Gap between the k-th and (k+1)-th largest LLRs, with sentinel ranks
    0 -> +inf and M+1 -> -inf, so gap_at(0) = gap_at(M) = +inf."""
    if not 0 <= k <= state.M:
        raise ValueError(f"rank must lie in [0, M], got {k}")
    return state.rank_value(k) - state.rank_value(k + 1)


def consistency_time(
    trace: Sequence[Union[Set[int], frozenset]],
    true_set: Set[int],
) -> Union[int, None]:
    """First 1-based index from which every decision in the trace equals the
    true set; ``None`` (censored) if the trace does not end in agreement."""
    target = frozenset(true_set)
    last_mismatch = 0
    for pos, decided in enumerate(trace, start=1):
        if frozenset(decided) != target:
            last_mismatch = pos
    if not trace or last_mismatch == len(trace):
        return Censored
    return last_mismatch + 1


def replay(M: int, log: List[tuple]) -> LlrState:
    """Reconstruct the state from a full observation log of
    ``(sampled_set, increments)`` pairs; test oracle for `update`."""
    state = initial_state(M)
    for sampled_set, increments in log:
        state = update(state, sampled_set, increments)
    return state
