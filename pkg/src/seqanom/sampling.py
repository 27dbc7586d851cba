"""Sampling rules: which sources to observe at each step.

Probabilistic rules look at the past only through the current estimate D of
the anomalous set and sample source i with marginal probability c_i(D):

* ``bernoulli``: independent inclusions at the optimal frequencies c*_i(D);
* ``chernoff``: exactly floor(K) sources per step with marginals padded up
  from c*_i(D) to sum exactly to K (systematic sampling over a random
  permutation gives the fixed size with exact marginals);
* ``uniform``: independent inclusions at the flat rate K/M.

Non-probabilistic baselines:

* ``tandem``: deterministic round-robin window of K sources;
* ``equalizing``: K = 1, homogeneous setups; chases the per-source gap
  between empirical frequencies and the design levels (x_D, y_D) — known to
  lock onto a single source with positive probability, kept as a failure
  demonstration;
* ``ordering``: the K sources with the smallest |LLR|, experimental.

Frequency rows are computed lazily per decision set actually visited; the
simulation kernel materializes the full table eagerly (size-capped) instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import theory
from ._rng import TrialStream
from .errors import CombinatorialBlowupError, UnsupportedRuleError
from .llr import LlrState
from .models import ProblemSpec

BERNOULLI_RULE = "bernoulli"
CHERNOFF_RULE = "chernoff"
UNIFORM_RULE = "uniform"
TANDEM_RULE = "tandem"
EQUALIZING_RULE = "equalizing"
ORDERING_RULE = "ordering"

RULE_KINDS = (
    BERNOULLI_RULE,
    CHERNOFF_RULE,
    UNIFORM_RULE,
    TANDEM_RULE,
    EQUALIZING_RULE,
    ORDERING_RULE,
)

DEFAULT_SET_CAP = 200_000


def mask_of(A: Iterable[int]) -> int:
    m = 0
    for i in A:
        m |= 1 << i
    return m


def set_of(mask: int, M: int) -> FrozenSet[int]:
    return frozenset(i for i in range(M) if mask >> i & 1)


def enumerate_decision_sets(M: int, l: int, u: int, cap: int = DEFAULT_SET_CAP) -> List[int]:
    """All candidate-set bitmasks with l <= size <= u, numerically sorted."""
    total = sum(math.comb(M, k) for k in range(l, u + 1))
    if total > cap:
        raise CombinatorialBlowupError(
            f"{total} candidate sets exceed the cap of {cap}; "
            "raise the cap only if the eager table fits in memory"
        )
    masks = []
    for k in range(l, u + 1):
        for combo in combinations(range(M), k):
            masks.append(mask_of(combo))
    masks.sort()
    return masks


def pad_marginals(c: Sequence[float], K: float) -> np.ndarray:
    """Water-fill the slack K - sum(c) uniformly over sources below 1.

    Returns padded marginals with the same order, each in [c_i, 1], summing
    to K up to float error.  Requires sum(c) <= K <= len(c).
    """
    out = np.asarray(c, dtype=np.float64).copy()
    M = out.shape[0]
    if K > M + 1e-9:
        raise ValueError(f"cannot reach sum {K} with {M} sources")
    slack = K - float(out.sum())
    if slack < -1e-9:
        raise ValueError(f"marginals already exceed the budget by {-slack}")
    while slack > 1e-12:
        free = np.flatnonzero(out < 1.0 - 1e-12)
        if free.size == 0:
            break
        share = slack / free.size
        room = 1.0 - out[free]
        inc = min(share, float(room.min()))
        out[free] += inc
        slack -= inc * free.size
        if inc == share:
            break
    return out


@dataclass
class FrequencyTable:
    """Per-decision-set marginals, built lazily as sets are visited."""

    spec: ProblemSpec
    r: float
    pad_to_budget: bool = False  # pad rows to sum exactly K (fixed-size rules)
    _rows: Dict[int, np.ndarray] = field(default_factory=dict)
    _xy: Dict[int, Tuple[float, float]] = field(default_factory=dict)

    def row(self, D: FrozenSet[int]) -> np.ndarray:
        m = mask_of(D)
        if m not in self._rows:
            prof = theory.profile(self.spec, D, self.r)
            c = np.asarray(prof.c_star, dtype=np.float64)
            if self.pad_to_budget:
                c = pad_marginals(c, self.spec.K)
            self._rows[m] = c
            self._xy[m] = (prof.x, prof.y)
        return self._rows[m]

    def xy(self, D: FrozenSet[int]) -> Tuple[float, float]:
        self.row(D)
        return self._xy[mask_of(D)]


def build_frequency_table(
    spec: ProblemSpec, r: Optional[float] = None, pad_to_budget: bool = False,
    cap: int = DEFAULT_SET_CAP,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Eagerly materialize (masks, c_table, xy_table) over every candidate set.

    Rows follow the numerically sorted masks, so the simulation kernel can
    binary-search a decision mask.  Raises CombinatorialBlowupError when the
    family exceeds ``cap``.
    """
    r = spec.error_exponent_ratio if r is None else float(r)
    masks = enumerate_decision_sets(spec.M, spec.l, spec.u, cap)
    c_table = np.empty((len(masks), spec.M))
    xy_table = np.empty((len(masks), 2))
    for k, m in enumerate(masks):
        prof = theory.profile(spec, set_of(m, spec.M), r)
        row = np.asarray(prof.c_star)
        if pad_to_budget:
            row = pad_marginals(row, spec.K)
        c_table[k] = row
        xy_table[k] = (prof.x, prof.y)
    return np.asarray(masks, dtype=np.uint64), c_table, xy_table


def _require_integer_budget(K: float, kind: str) -> int:
    if K != int(K):
        raise UnsupportedRuleError(f"the {kind} rule needs an integer budget, got {K}")
    return int(K)


class BernoulliRule:
    """Independent per-source inclusion at the optimal frequencies."""

    kind = BERNOULLI_RULE

    def __init__(self, spec: ProblemSpec, r: Optional[float] = None):
        self.spec = spec
        self.table = FrequencyTable(spec, spec.error_exponent_ratio if r is None else r)

    def marginals(self, D: FrozenSet[int]) -> np.ndarray:
        return self.table.row(D)

    def sample(self, D: FrozenSet[int], stream: TrialStream) -> FrozenSet[int]:
        c = self.marginals(D)
        # one uniform per source, ascending index, regardless of c values
        return frozenset(i for i in range(self.spec.M) if stream.uniform() < c[i])


class UniformRule(BernoulliRule):
    """Independent inclusion of every source at the flat rate K/M."""

    kind = UNIFORM_RULE

    def __init__(self, spec: ProblemSpec, r: Optional[float] = None):
        super().__init__(spec, r)
        self._flat = np.full(spec.M, spec.K / spec.M)

    def marginals(self, D: FrozenSet[int]) -> np.ndarray:
        return self._flat


class ChernoffRule:
    """Exactly floor(K) sources per step, marginals padded up from c*."""

    kind = CHERNOFF_RULE

    def __init__(self, spec: ProblemSpec, r: Optional[float] = None):
        self.K = _require_integer_budget(spec.K, CHERNOFF_RULE)
        self.spec = spec
        self.table = FrequencyTable(
            spec, spec.error_exponent_ratio if r is None else r, pad_to_budget=True
        )

    def marginals(self, D: FrozenSet[int]) -> np.ndarray:
        return self.table.row(D)

    def sample(self, D: FrozenSet[int], stream: TrialStream) -> FrozenSet[int]:
        c = self.marginals(D)
        M = self.spec.M
        perm = list(range(M))
        for i in range(M - 1, 0, -1):
            j = stream.randint(i + 1)
            perm[i], perm[j] = perm[j], perm[i]
        return systematic_draw(c, perm, self.K, stream.uniform())


def systematic_draw(c: np.ndarray, perm: Sequence[int], K: int, u: float) -> FrozenSet[int]:
    """Fixed-size unequal-probability draw: lay the marginals on [0, K] in
    permutation order and select the intervals hit by u, u+1, ..., u+K-1.
    Inclusion probability of each source equals its marginal exactly."""
    picked = []
    cum = 0.0
    M = len(perm)
    for t, src in enumerate(perm):
        lo = cum
        cum = float(K) if t == M - 1 else cum + float(c[src])
        if math.floor(cum - u) > math.floor(lo - u):
            picked.append(src)
    return frozenset(picked)


class TandemRule:
    """Deterministic wrap-around window: K consecutive sources per step, so
    each source is observed exactly K times per M-step cycle."""

    kind = TANDEM_RULE

    def __init__(self, spec: ProblemSpec):
        self.K = _require_integer_budget(spec.K, TANDEM_RULE)
        self.M = spec.M

    def sample(self, n: int) -> FrozenSet[int]:
        """Sampled set at 1-based time n."""
        if n < 1:
            raise ValueError(f"time index must be >= 1, got {n}")
        start = ((n - 1) * self.K) % self.M
        return frozenset((start + t) % self.M for t in range(self.K))


class EqualizingRule:
    """Sample the single source whose empirical frequency is farthest from
    its design level (x_D inside D, y_D outside); ties to the smallest index.

    Requires K = 1 and a homogeneous model set.  This rule can lock onto one
    source forever on a positive-probability event; the harness records such
    runs rather than preventing them.
    """

    kind = EQUALIZING_RULE

    def __init__(self, spec: ProblemSpec, r: Optional[float] = None):
        if spec.K != 1:
            raise UnsupportedRuleError(
                f"the equalizing rule is defined for budget K = 1, got {spec.K}"
            )
        if len(set(spec.models)) != 1:
            raise UnsupportedRuleError("the equalizing rule needs homogeneous sources")
        self.spec = spec
        self.table = FrequencyTable(spec, spec.error_exponent_ratio if r is None else r)

    def sample(self, D: FrozenSet[int], fractions: Sequence[float]) -> FrozenSet[int]:
        x, y = self.table.xy(D)
        best, best_dist = 0, -1.0
        for i in range(self.spec.M):
            target = x if i in D else y
            dist = abs(float(fractions[i]) - target)
            if dist > best_dist:
                best, best_dist = i, dist
        return frozenset((best,))


class OrderingRule:
    """Sample the K sources with the smallest |LLR|; ties to the smaller
    index.  Experimental: no optimality claim attached."""

    kind = ORDERING_RULE

    def __init__(self, spec: ProblemSpec):
        self.K = _require_integer_budget(spec.K, ORDERING_RULE)
        self.M = spec.M

    def sample(self, state: LlrState) -> FrozenSet[int]:
        order = np.argsort(np.abs(state.lam), kind="stable")
        return frozenset(int(i) for i in order[: self.K])


def make_rule(kind: str, spec: ProblemSpec, r: Optional[float] = None):
    if kind == BERNOULLI_RULE:
        return BernoulliRule(spec, r)
    if kind == CHERNOFF_RULE:
        return ChernoffRule(spec, r)
    if kind == UNIFORM_RULE:
        return UniformRule(spec, r)
    if kind == TANDEM_RULE:
        return TandemRule(spec)
    if kind == EQUALIZING_RULE:
        return EqualizingRule(spec, r)
    if kind == ORDERING_RULE:
        return OrderingRule(spec)
    raise UnsupportedRuleError(f"unknown sampling rule {kind!r}")


def budget_ratio(records: Iterable) -> float:
    """Empirical sampling rate: total observations over total elapsed steps,
    pooled across trials."""
    total_samples = 0
    total_steps = 0
    for rec in records:
        total_samples += int(np.sum(rec.samples))
        total_steps += int(rec.elapsed)
    if total_steps == 0:
        raise ValueError("budget ratio needs at least one trial with elapsed steps")
    return total_samples / total_steps
