"""Closed-form asymptotic design quantities and their brute-force oracle.

For a candidate anomalous set A this module computes:

* KL summaries: the minimum and harmonic mean of the KL numbers on each side
  of A, the budget-weighted counts ``K_hat = sum_{i in A} I*/I_i`` and
  ``K_check = sum_{j not in A} J*/J_j``, and the ratio ``theta = I*/J*``.
* The optimal averaged sampling levels ``(x_A, y_A)`` from the max-min design
  problem, through an explicit case ladder over the prior bounds (l, u), the
  error-exponent ratio r and the budget K.
* The per-source minimum long-run sampling frequencies ``c*_i(A)``.
* ``Q_A``, the smallest budget at which full-sampling first-order performance
  is attainable, and the first-order expected-time approximation.
* The asymptotic relative efficiency of round-robin (tandem) sampling.
* ``vmax_oracle``: an assumption-free grid maximization over the reduced
  two-dimensional budget polytope, used only as a test oracle for the ladder.

Sampling levels are averages in the following sense: every anomalous source
is sampled with long-run frequency ``x * I*/I_i`` and every normal one with
``y * J*/J_j``, so x (resp. y) is the level of the slowest, least-informative
source on its side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import FrozenSet, Iterable, Optional, Tuple

import numpy as np

from .errors import UndefinedSummaryError
from .models import ProblemSpec

# case labels for the (x, y) ladder, recorded for auditability
KNOWN_ANOM_FIRST = "known_count_anomalous_first"
KNOWN_NORM_FIRST = "known_count_normal_first"
INTERIOR = "interior"
LOWER_MISS_DRIVEN = "lower_edge_miss_driven"
LOWER_BALANCED = "lower_edge_balanced"
LOWER_SATURATED = "lower_edge_saturated"
UPPER_ALARM_DRIVEN = "upper_edge_alarm_driven"
UPPER_BALANCED = "upper_edge_balanced"
UPPER_SATURATED = "upper_edge_saturated"


@dataclass(frozen=True)
class KlSummary:
    """Side-wise KL aggregates for a fixed candidate set A.

    The anomalous-side fields are None when A is empty, the normal-side
    fields when A is the full set; theta needs both sides.
    """

    I_star: Optional[float]
    I_harm: Optional[float]
    K_hat: Optional[float]
    J_star: Optional[float]
    J_harm: Optional[float]
    K_check: Optional[float]
    theta: Optional[float]

    def anomalous_side(self) -> Tuple[float, float, float]:
        """(I*, harmonic mean, K_hat); raises for the empty set."""
        if self.I_star is None:
            raise UndefinedSummaryError("anomalous-side summary undefined for the empty set")
        return self.I_star, self.I_harm, self.K_hat

    def normal_side(self) -> Tuple[float, float, float]:
        """(J*, harmonic mean, K_check); raises for the full set."""
        if self.J_star is None:
            raise UndefinedSummaryError("normal-side summary undefined for the full set")
        return self.J_star, self.J_harm, self.K_check


def kl_summaries(spec: ProblemSpec, A: Iterable[int]) -> KlSummary:
    """Minimum and harmonic-mean KL numbers on both sides of A, plus the
    budget-weighted counts; requesting a side that does not exist raises."""
    aset = frozenset(A)
    if not aset <= set(range(spec.M)):
        raise ValueError(f"set {sorted(aset)} not within [0, {spec.M})")
    if not spec.l <= len(aset) <= spec.u:
        raise ValueError(f"|A|={len(aset)} outside the prior bounds [{spec.l}, {spec.u}]")
    I_star = I_harm = K_hat = None
    J_star = J_harm = K_check = None
    if aset:
        vals = [spec.models[i].I for i in sorted(aset)]
        I_star = min(vals)
        I_harm = len(vals) / sum(1.0 / v for v in vals)
        K_hat = sum(I_star / v for v in vals)
    comp = sorted(set(range(spec.M)) - aset)
    if comp:
        vals = [spec.models[j].J for j in comp]
        J_star = min(vals)
        J_harm = len(vals) / sum(1.0 / v for v in vals)
        K_check = sum(J_star / v for v in vals)
    theta = I_star / J_star if (aset and comp) else None
    return KlSummary(I_star, I_harm, K_hat, J_star, J_harm, K_check, theta)


def _require(value: Optional[float], side: str) -> float:
    if value is None:
        raise UndefinedSummaryError(f"{side} summary undefined for this set")
    return value


def xy(
    spec: ProblemSpec, A: Iterable[int], r: float, K: Optional[float] = None
) -> Tuple[float, float, str]:
    """Optimal averaged sampling levels (x_A, y_A) and the case label.

    ``r`` is the limiting ratio |log alpha| / |log beta|; ``K`` defaults to
    the spec's budget (passing M gives the full-sampling levels).  Exact IEEE
    comparisons implement the ladder; at a branch boundary the first listed
    branch wins and both branches agree in value by continuity.
    """
    if r <= 0.0:
        raise ValueError(f"error-exponent ratio must be positive, got {r}")
    K = spec.K if K is None else float(K)
    if not (0.0 < K <= spec.M):
        raise ValueError(f"budget must lie in (0, M], got {K}")
    s = kl_summaries(spec, A)
    size = len(frozenset(A))

    if spec.l == spec.u:
        kh, kc, th = s.K_hat, s.K_check, s.theta
        if kh <= th * kc:
            x = min(K / kh, 1.0)
            y = min(max(K - kh, 0.0) / kc, 1.0)
            return x, y, KNOWN_ANOM_FIRST
        x = min(max(K - kc, 0.0) / kh, 1.0)
        y = min(K / kc, 1.0)
        return x, y, KNOWN_NORM_FIRST

    if spec.l < size < spec.u:
        kh, kc, th = s.K_hat, s.K_check, s.theta
        x = min(K / (kh + (th / r) * kc), r / th, 1.0)
        y = min(K / (kc + (r / th) * kh), th / r, 1.0)
        return x, y, INTERIOR

    if size == spec.l:
        kc = _require(s.K_check, "normal-side")
        if spec.l == 0 or r <= 1.0:
            return 0.0, min(K / kc, 1.0), LOWER_MISS_DRIVEN
        kh, th, Is, Js = s.K_hat, s.theta, s.I_star, s.J_star
        z = th / (r - 1.0)
        # max-min of min(r q J*, p I* + q J*) over the budget polytope,
        # scanned along its north-east boundary (q up, p at feasible max)
        q_cap = min(1.0, K / kc)
        p_end = min(1.0, max(K - kc * q_cap, 0.0) / kh)
        if r * q_cap * Js <= p_end * Is + q_cap * Js:
            # the alarm-rate term clamps at the q endpoint; smallest p that
            # keeps the other term no smaller sits on the equalizing ray
            return min(q_cap / z, 1.0), q_cap, LOWER_BALANCED
        if th * kc > kh:
            # evidence-rich normal side: the combined term falls along the
            # budget edge, so the maximum is at the crossing or the p-clamp
            if z < 1.0 and K > kh + z * kc:
                return 1.0, min((K - kh) / kc, 1.0), LOWER_SATURATED
            x = min(K / (kh + z * kc), 1.0 / z, 1.0)
            y = min(K / (kc + kh / z), z, 1.0)
            return x, y, LOWER_BALANCED
        # evidence-poor anomalous side: both terms rise with q, so the whole
        # budget goes opposite the anomalies
        return p_end, q_cap, LOWER_SATURATED

    # size == spec.u
    kh = _require(s.K_hat, "anomalous-side")
    if spec.u == spec.M or r >= 1.0:
        return min(K / kh, 1.0), 0.0, UPPER_ALARM_DRIVEN
    kc, th, Is, Js = s.K_check, s.theta, s.I_star, s.J_star
    w = (1.0 / th) / (1.0 / r - 1.0)
    # mirror image: max-min of min(p I*/r, p I* + q J*), p sweeping up
    p_cap = min(1.0, K / kh)
    q_end = min(1.0, max(K - kh * p_cap, 0.0) / kc)
    if (p_cap * Is) / r <= p_cap * Is + q_end * Js:
        return p_cap, min(p_cap / w, 1.0), UPPER_BALANCED
    if kh > th * kc:
        if w < 1.0 and K > kc + w * kh:
            return min((K - kc) / kh, 1.0), 1.0, UPPER_SATURATED
        y = min(K / (kc + w * kh), 1.0 / w, 1.0)
        x = min(K / (kh + kc / w), w, 1.0)
        return x, y, UPPER_BALANCED
    return p_cap, q_end, UPPER_SATURATED


@dataclass(frozen=True)
class AsymptoticProfile:
    """Every closed-form design quantity for one candidate set A."""

    A: FrozenSet[int]
    summary: KlSummary
    r: float
    x: float
    y: float
    case_label: str
    c_star: Tuple[float, ...]
    Q: float

    @property
    def budget_used(self) -> float:
        """x*K_hat + y*K_check = sum_i c*_i, never above the budget."""
        total = 0.0
        if self.summary.K_hat is not None:
            total += self.x * self.summary.K_hat
        if self.summary.K_check is not None:
            total += self.y * self.summary.K_check
        return total


def c_star(
    spec: ProblemSpec, A: Iterable[int], x: float, y: float, s: Optional[KlSummary] = None
) -> Tuple[float, ...]:
    """Minimum long-run sampling frequencies: x*I*/I_i inside A, y*J*/J_j outside."""
    aset = frozenset(A)
    s = s if s is not None else kl_summaries(spec, A)
    out = []
    for i in range(spec.M):
        if i in aset:
            out.append(x * s.I_star / spec.models[i].I)
        else:
            out.append(y * s.J_star / spec.models[i].J)
    return tuple(out)


def q_capacity(spec: ProblemSpec, A: Iterable[int], r: float) -> float:
    """Smallest budget at which the full-sampling first-order expected time
    is attainable: the budget used by the K = M design."""
    s = kl_summaries(spec, A)
    x_full, y_full, _ = xy(spec, A, r, K=spec.M)
    total = 0.0
    if s.K_hat is not None:
        total += x_full * s.K_hat
    if s.K_check is not None:
        total += y_full * s.K_check
    return total


@lru_cache(maxsize=100_000)
def _profile_cached(spec: ProblemSpec, A: FrozenSet[int], r: float) -> AsymptoticProfile:
    s = kl_summaries(spec, A)
    x, y, label = xy(spec, A, r)
    return AsymptoticProfile(
        A=A,
        summary=s,
        r=r,
        x=x,
        y=y,
        case_label=label,
        c_star=c_star(spec, A, x, y, s),
        Q=q_capacity(spec, A, r),
    )


def profile(spec: ProblemSpec, A: Iterable[int], r: Optional[float] = None) -> AsymptoticProfile:
    """Cached profile for (spec, A, r); r defaults to the spec's pre-limit
    ratio |log alpha| / |log beta|."""
    r = spec.error_exponent_ratio if r is None else float(r)
    return _profile_cached(spec, frozenset(A), r)


def _first_order_time(
    profile: AsymptoticProfile, log_alpha_mag: float, log_beta_mag: float
) -> float:
    """Branch-appropriate first-order expected time with explicit |log|'s."""
    s, x, y = profile.summary, profile.x, profile.y
    label = profile.case_label
    if label in (KNOWN_ANOM_FIRST, KNOWN_NORM_FIRST):
        return max(log_alpha_mag, log_beta_mag) / (x * s.I_star + y * s.J_star)
    if label == INTERIOR:
        return log_alpha_mag / (x * s.I_star)
    if label in (LOWER_MISS_DRIVEN, LOWER_BALANCED):
        return log_beta_mag / (y * s.J_star)
    if label == LOWER_SATURATED:
        return log_alpha_mag / (x * s.I_star + y * s.J_star)
    if label in (UPPER_ALARM_DRIVEN, UPPER_BALANCED):
        return log_alpha_mag / (x * s.I_star)
    if label == UPPER_SATURATED:
        return log_beta_mag / (x * s.I_star + y * s.J_star)
    raise AssertionError(f"unknown case label {label!r}")


def optimal_time_approx(profile: AsymptoticProfile, alpha: float, beta: float) -> float:
    """First-order approximation to the optimal expected stopping time."""
    return _first_order_time(profile, abs(math.log(alpha)), abs(math.log(beta)))


def are_tandem(spec: ProblemSpec, A: Iterable[int], r: float) -> float:
    """Asymptotic relative efficiency of round-robin sampling: the limiting
    ratio of its expected stopping time over the optimum, equal to
    (M / K) * lim J(budget M) / J(budget K).

    Evaluated on the normalized scale |log beta| = 1, |log alpha| = r, under
    which the branch expressions' ratio equals the limit.
    """
    aset = frozenset(A)
    if spec.K != int(spec.K):
        raise ValueError(f"tandem sampling needs an integer budget, got {spec.K}")
    s = kl_summaries(spec, A)
    x_k, y_k, lab_k = xy(spec, aset, r)
    x_m, y_m, lab_m = xy(spec, aset, r, K=spec.M)
    prof_k = AsymptoticProfile(aset, s, r, x_k, y_k, lab_k, (), 0.0)
    prof_m = AsymptoticProfile(aset, s, r, x_m, y_m, lab_m, (), 0.0)
    time_k = _first_order_time(prof_k, r, 1.0)
    time_m = _first_order_time(prof_m, r, 1.0)
    return (spec.M / spec.K) * time_m / time_k


# ---------------------------------------------------------------------------
# Brute-force oracle over the reduced budget polytope
# ---------------------------------------------------------------------------

# objective codes
_OBJ_SUM = 0  # p I* + q J*
_OBJ_INTERIOR = 1  # min(p I*, r q J*)
_OBJ_Q_ONLY = 2  # q J*
_OBJ_LOWER = 3  # min(r q J*, p I* + q J*)
_OBJ_P_ONLY = 4  # p I*
_OBJ_UPPER = 5  # min(p I* / r, p I* + q J*)


def _oracle_objective(spec: ProblemSpec, size: int, r: float) -> Tuple[int, bool]:
    """Objective code and lex preference (True = minimize q before p among
    maximizers); mirrors the branch-appropriate max-min of the design."""
    if spec.l == spec.u:
        return _OBJ_SUM, True
    if spec.l < size < spec.u:
        return _OBJ_INTERIOR, True
    if size == spec.l:
        if spec.l == 0 or r <= 1.0:
            return _OBJ_Q_ONLY, True
        return _OBJ_LOWER, True
    if spec.u == spec.M or r >= 1.0:
        return _OBJ_P_ONLY, False
    return _OBJ_UPPER, False


def _eval_objective(code: int, P, Q, I_star: float, J_star: float, r: float):
    if code == _OBJ_SUM:
        return P * I_star + Q * J_star
    if code == _OBJ_INTERIOR:
        return np.minimum(P * I_star, r * Q * J_star)
    if code == _OBJ_Q_ONLY:
        return Q * J_star + 0.0 * P
    if code == _OBJ_LOWER:
        return np.minimum(r * Q * J_star, P * I_star + Q * J_star)
    if code == _OBJ_P_ONLY:
        return P * I_star + 0.0 * Q
    return np.minimum(P * I_star / r, P * I_star + Q * J_star)


def vmax_oracle(
    spec: ProblemSpec, A: Iterable[int], r: float, grid_resolution: float = 1e-4
) -> Tuple[float, float, float]:
    """Grid maximization of the branch objective over the polytope
    ``{(p, q) in [0,1]^2 : p K_hat + q K_check <= K}``.

    Returns (x_hat, y_hat, V_hat).  Every branch objective is componentwise
    non-decreasing, so its maximum is attained on the north-east boundary of
    the polytope; the scan therefore walks both axis lattices at the given
    resolution with the complementary coordinate pushed to its exact feasible
    maximum (which puts the polytope corners in the candidate set exactly).
    Among maximizing candidates the lexicographically smallest pair is
    returned: q before p on the known-count/interior/anomalous-edge branches,
    p before q on the normal-edge branches, matching the canonical optimizers
    of the closed forms.  Exact-arithmetic ties finer than float resolution
    (measure zero for continuous inputs) are not resolved specially.
    """
    if grid_resolution > 1e-4:
        raise ValueError(f"grid resolution must be <= 1e-4, got {grid_resolution}")
    aset = frozenset(A)
    s = kl_summaries(spec, aset)
    K = spec.K
    code, q_major = _oracle_objective(spec, len(aset), r)
    n = int(round(1.0 / grid_resolution))
    lattice = np.linspace(0.0, 1.0, n + 1)

    # degenerate one-sided sets: the polytope is an interval
    if not aset:
        cap = min(1.0, K / s.K_check)
        qs = np.append(lattice[lattice <= cap], cap)
        best = int(np.argmax(qs * s.J_star))
        return 0.0, float(qs[best]), float(qs[best] * s.J_star)
    if len(aset) == spec.M:
        cap = min(1.0, K / s.K_hat)
        ps = np.append(lattice[lattice <= cap], cap)
        best = int(np.argmax(ps * s.I_star))
        return float(ps[best]), 0.0, float(ps[best] * s.I_star)

    cap_p = min(1.0, K / s.K_hat)
    cap_q = min(1.0, K / s.K_check)
    p_walk = np.append(lattice[lattice <= cap_p], cap_p)
    q_walk = np.append(lattice[lattice <= cap_q], cap_q)
    # NE boundary seen from each axis
    q_of_p = np.minimum(1.0, (K - p_walk * s.K_hat) / s.K_check)
    p_of_q = np.minimum(1.0, (K - q_walk * s.K_check) / s.K_hat)
    P = np.concatenate((p_walk, p_of_q))
    Q = np.concatenate((q_of_p, q_walk))
    vals = _eval_objective(code, P, Q, s.I_star, s.J_star, r)
    vmax = vals.max()
    tie = np.flatnonzero(vals == vmax)
    if q_major:
        order = np.lexsort((P[tie], Q[tie]))
    else:
        order = np.lexsort((Q[tie], P[tie]))
    k = tie[order[0]]
    return float(P[k]), float(Q[k]), float(vmax)
