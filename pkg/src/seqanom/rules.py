"""Stopping and decision rules with conservative threshold selection.

Three variants, chosen by the prior bounds on the anomaly count:

* ``known-count`` (l == u): stop when the gap between the l-th and (l+1)-th
  largest LLRs reaches c; declare the l sources with the largest LLRs.
* ``unbounded`` (l == 0, u == M): stop when every LLR has left (-a, b);
  declare the sources with positive LLRs.
* ``bounded`` (general l < u): stop when any of three branches fires and
  declare the positive-LLR sources, clamped to between l and u by rank.

The closed-form thresholds guarantee both familywise error rates at their
targets for ANY sampling rule; they are conservative, so the harness can
shrink them by a common ``scale`` during Monte Carlo calibration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import FrozenSet

from .llr import LlrState, gap_at
from .models import ProblemSpec

KNOWN_COUNT = "known-count"
UNBOUNDED = "unbounded"
BOUNDED = "bounded"


def variant_for(spec: ProblemSpec) -> str:
    if spec.l == spec.u:
        return KNOWN_COUNT
    if spec.l == 0 and spec.u == spec.M:
        return UNBOUNDED
    return BOUNDED


@dataclass(frozen=True)
class Thresholds:
    """Stopping thresholds in nats.  The known-count variant uses only c,
    the unbounded variant only a and b, the bounded variant all four.
    ``scale`` multiplies all of them jointly (calibration knob)."""

    a: float
    b: float
    c: float
    d: float
    variant: str
    scale: float = 1.0

    def scaled(self, scale: float) -> "Thresholds":
        if scale <= 0.0:
            raise ValueError(f"threshold scale must be positive, got {scale}")
        return replace(self, scale=scale)

    @property
    def a_eff(self) -> float:
        return self.a * self.scale

    @property
    def b_eff(self) -> float:
        return self.b * self.scale

    @property
    def c_eff(self) -> float:
        return self.c * self.scale

    @property
    def d_eff(self) -> float:
        return self.d * self.scale


def conservative_thresholds(spec: ProblemSpec) -> Thresholds:
    """Closed-form thresholds meeting the (alpha, beta) error constraint.

    known-count:  c = |log(alpha ^ beta)| + log(l (M - l))
    otherwise:    a = |log beta|  + log M
                  b = |log alpha| + log M
                  c = |log alpha| + log((M - l) M)
                  d = |log beta|  + log(u M)
    """
    la = abs(math.log(spec.alpha))
    lb = abs(math.log(spec.beta))
    variant = variant_for(spec)
    if variant == KNOWN_COUNT:
        c = max(la, lb) + math.log(spec.l * (spec.M - spec.l))
        return Thresholds(c, c, c, c, variant)
    a = lb + math.log(spec.M)
    b = la + math.log(spec.M)
    c = la + math.log((spec.M - spec.l) * spec.M)
    d = lb + math.log(spec.u * spec.M)
    return Thresholds(a, b, c, d, variant)


def _all_outside(state: LlrState, a: float, b: float) -> bool:
    # the open interval (-a, b): boundary values count as outside
    return bool(((state.lam <= -a) | (state.lam >= b)).all())


def should_stop(state: LlrState, th: Thresholds, spec: ProblemSpec) -> bool:
    """Evaluate the variant's stopping condition at the current state."""
    a, b, c, d = th.a_eff, th.b_eff, th.c_eff, th.d_eff
    if th.variant == KNOWN_COUNT:
        return gap_at(state, spec.l) >= c
    if th.variant == UNBOUNDED:
        return _all_outside(state, a, b)
    low_gap = state.rank_value(spec.l + 1) <= -a and gap_at(state, spec.l) >= c
    interval = spec.l <= state.pos_count <= spec.u and _all_outside(state, a, b)
    high_gap = state.rank_value(spec.u) >= b and gap_at(state, spec.u) >= d
    return low_gap or interval or high_gap


def decide(state: LlrState, spec: ProblemSpec) -> FrozenSet[int]:
    """Current estimate of the anomalous set, always of size in [l, u].

    known-count: the l largest LLRs.  unbounded: the positive LLRs.
    bounded: positive LLRs, clamped by rank to at least l and at most u.
    """
    variant = variant_for(spec)
    if variant == KNOWN_COUNT:
        k = spec.l
    elif variant == UNBOUNDED:
        k = state.pos_count
    else:
        k = min(max(state.pos_count, spec.l), spec.u)
    return frozenset(int(i) for i in state.sorted_index[:k])
