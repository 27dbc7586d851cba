"""Monte Carlo harness: complete sequential runs, error and stopping-time
estimation, threshold calibration and the tandem-vs-optimal sweep.

A *policy* here is a sampling rule plus the variant's stopping and decision
rules.  One trial runs the policy under a fixed true anomalous set until it
stops or hits the horizon; the harness aggregates independent trials with
per-trial deterministic seeds, so results are identical for any worker
count.  Observations are drawn lazily, only for sampled sources.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import _kernel, llr, rules, sampling, theory
from ._rng import TrialStream, stream_init
from .errors import CalibrationError, DegenerateReportError
from .models import BERNOULLI, EXPONENTIAL, GAUSSIAN, ProblemSpec, SourceModel
from .rules import Thresholds, conservative_thresholds, decide, should_stop, variant_for
from .sampling import make_rule, mask_of, set_of

DEFAULT_HORIZON = 10**6

_MODEL_CODES = {GAUSSIAN: 0, EXPONENTIAL: 1, BERNOULLI: 2}
_VARIANT_CODES = {rules.KNOWN_COUNT: 0, rules.UNBOUNDED: 1, rules.BOUNDED: 2}
_RULE_CODES = {
    sampling.BERNOULLI_RULE: 0,
    sampling.UNIFORM_RULE: 0,
    sampling.CHERNOFF_RULE: 1,
    sampling.TANDEM_RULE: 2,
    sampling.EQUALIZING_RULE: 3,
    sampling.ORDERING_RULE: 4,
}


_SEED_MASK = 0x7FFFFFFFFFFFFFFF  # jitted entry points take int64 seeds


def derive_seed(base: int, *tags: int) -> int:
    """Deterministic sub-seed for nested runs (calibration rounds, sweeps)."""
    s = int(base) & _SEED_MASK
    for t in tags:
        s = int(stream_init(s, int(t) & _SEED_MASK)) & _SEED_MASK
    return s


def resolve_threads(threads: Optional[int]) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("SEQANOM_THREADS")
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


@dataclass(frozen=True)
class TrialRecord:
    """Outcome of one sequential run under a fixed truth."""

    elapsed: int  # steps until stopping, or the horizon if censored
    stopped: bool
    decision: FrozenSet[int]
    false_alarm: bool  # stopped with decision \ truth nonempty
    missed: bool  # stopped with truth \ decision nonempty
    samples: np.ndarray  # int64[M], observations per source
    sigma: Optional[int]  # consistency time within the trace, None if censored


@dataclass
class TrialBatch:
    """Column-oriented trial results; order matches the trial index."""

    truth: FrozenSet[int]
    horizon: int
    elapsed: np.ndarray  # int64[n]
    stopped: np.ndarray  # bool[n]
    decision_mask: np.ndarray  # uint64[n]
    sigma: np.ndarray  # int64[n], -1 when censored
    samples: np.ndarray  # int64[n, M]

    @property
    def n_trials(self) -> int:
        return self.elapsed.shape[0]

    @property
    def false_alarm(self) -> np.ndarray:
        truth_mask = np.uint64(mask_of(self.truth))
        return self.stopped & ((self.decision_mask & ~truth_mask) != 0)

    @property
    def missed(self) -> np.ndarray:
        truth_mask = np.uint64(mask_of(self.truth))
        return self.stopped & ((truth_mask & ~self.decision_mask) != 0)

    def records(self) -> Iterable[TrialRecord]:
        M = self.samples.shape[1]
        fa, md = self.false_alarm, self.missed
        for k in range(self.n_trials):
            sig = int(self.sigma[k])
            yield TrialRecord(
                elapsed=int(self.elapsed[k]),
                stopped=bool(self.stopped[k]),
                decision=set_of(int(self.decision_mask[k]), M),
                false_alarm=bool(fa[k]),
                missed=bool(md[k]),
                samples=self.samples[k],
                sigma=sig if sig >= 0 else None,
            )


@dataclass(frozen=True)
class EstimateReport:
    """Aggregates over one batch: means with Monte Carlo standard errors."""

    n_trials: int
    censored_fraction: float
    mean_stop_time: float
    se_stop_time: float
    fwer_false_alarm: float
    se_false_alarm: float
    fwer_missed: float
    se_missed: float
    budget_ratio: float


@dataclass(frozen=True)
class _KernelPlan:
    kinds: np.ndarray
    par0: np.ndarray
    par1: np.ndarray
    g_slope: np.ndarray
    g_offset: np.ndarray
    variant: int
    rule_code: int
    K_run: int
    set_masks: np.ndarray
    c_table: np.ndarray
    xy_table: np.ndarray


def _kernel_eligible(spec: ProblemSpec) -> bool:
    return spec.M <= 63 and all(
        isinstance(m, SourceModel) and m.kind in _MODEL_CODES for m in spec.models
    )


@lru_cache(maxsize=256)
def _plan_for(spec: ProblemSpec, rule_kind: str) -> _KernelPlan:
    M = spec.M
    kinds = np.array([_MODEL_CODES[m.kind] for m in spec.models], dtype=np.int64)
    par0 = np.array([m.param0 for m in spec.models])
    par1 = np.array([m.param1 for m in spec.models])
    g_slope = np.array([m.g_slope for m in spec.models])
    g_offset = np.array([m.g_offset for m in spec.models])
    rule_code = _RULE_CODES[rule_kind]
    K_run = int(spec.K) if spec.K == int(spec.K) else 0
    if rule_kind == sampling.UNIFORM_RULE:
        # flat rate ignores the decision set: no mask lookup, single row
        masks = np.zeros(0, dtype=np.uint64)
        c_table = np.full((1, M), spec.K / M)
        xy_table = np.zeros((1, 2))
    elif rule_code in (0, 1, 3):
        masks, c_table, xy_table = sampling.build_frequency_table(
            spec, pad_to_budget=(rule_code == 1)
        )
    else:
        masks = np.zeros(0, dtype=np.uint64)
        c_table = np.zeros((0, M))
        xy_table = np.zeros((0, 2))
    # fixed-size rules need an integer budget; equalizing needs K=1, homogeneous
    if rule_code in (1, 2, 3, 4):
        make_rule(rule_kind, spec)  # raises UnsupportedRuleError when violated
    return _KernelPlan(
        kinds, par0, par1, g_slope, g_offset,
        _VARIANT_CODES[variant_for(spec)], rule_code, K_run,
        masks, c_table, xy_table,
    )


def _initial_decision(spec: ProblemSpec) -> FrozenSet[int]:
    return decide(llr.initial_state(spec.M), spec)


def _next_sampled_set(spec, rule, current, state, stream, n) -> FrozenSet[int]:
    """Dispatch one sampling decision, consuming the stream exactly like the
    compiled kernel (rule draws precede observation draws)."""
    if rule.kind in (sampling.BERNOULLI_RULE, sampling.CHERNOFF_RULE, sampling.UNIFORM_RULE):
        return rule.sample(current, stream)
    if rule.kind == sampling.TANDEM_RULE:
        return rule.sample(n)
    if rule.kind == sampling.EQUALIZING_RULE:
        if n == 1:
            # every source has positive probability on the first draw
            return frozenset((stream.randint(spec.M),))
        return rule.sample(current, state.counts / (n - 1.0))
    return rule.sample(state)


def _run_trial_reference(
    spec: ProblemSpec,
    rule,
    th: Thresholds,
    truth: FrozenSet[int],
    seed: int,
    trial_index: int,
    horizon: int,
) -> TrialRecord:
    """Pure-Python trial loop; consumes the stream exactly like the kernel."""
    stream = TrialStream(seed, trial_index)
    state = llr.initial_state(spec.M)
    current = _initial_decision(spec)
    last_neq = 0
    stopped = False
    n = 0
    while n < horizon:
        n += 1
        sampled = _next_sampled_set(spec, rule, current, state, stream, n)
        increments = {}
        for i in sorted(sampled):
            x = spec.models[i].sample(i in truth, stream)
            increments[i] = spec.models[i].llr_increment(x)
        state = llr.update(state, sampled, increments)
        current = decide(state, spec)
        if current != truth:
            last_neq = n
        if should_stop(state, th, spec):
            stopped = True
            break
    elapsed = n if stopped else horizon
    sigma = (last_neq + 1) if current == truth else None
    return TrialRecord(
        elapsed=elapsed,
        stopped=stopped,
        decision=current,
        false_alarm=stopped and bool(current - truth),
        missed=stopped and bool(truth - current),
        samples=state.counts.copy(),
        sigma=sigma,
    )


def trace_trial(
    spec: ProblemSpec,
    rule: Union[str, object],
    th: Thresholds,
    truth: Iterable[int],
    seed: int,
    trial_index: int = 0,
    horizon: int = DEFAULT_HORIZON,
    out=None,
) -> TrialRecord:
    """Debugging aid: replay one trial on the reference path, dumping one CSV
    row per step (time, each running LLR, the sampled set) to ``out``."""
    truth = frozenset(truth)
    rule_obj = make_rule(rule, spec) if isinstance(rule, str) else rule
    stream = TrialStream(seed, trial_index)
    state = llr.initial_state(spec.M)
    current = _initial_decision(spec)
    if out is not None:
        header = ["time"] + [f"llr_{i + 1}" for i in range(spec.M)] + ["sampled"]
        out.write(",".join(header) + "\n")
    stopped = False
    n = 0
    while n < horizon:
        n += 1
        sampled = _next_sampled_set(spec, rule_obj, current, state, stream, n)
        increments = {}
        for i in sorted(sampled):
            x = spec.models[i].sample(i in truth, stream)
            increments[i] = spec.models[i].llr_increment(x)
        state = llr.update(state, sampled, increments)
        current = decide(state, spec)
        if out is not None:
            cells = [str(n)] + ["%.9g" % v for v in state.lam]
            cells.append("+".join(str(i + 1) for i in sorted(sampled)))
            out.write(",".join(cells) + "\n")
        if should_stop(state, th, spec):
            stopped = True
            break
    return TrialRecord(
        elapsed=n if stopped else horizon,
        stopped=stopped,
        decision=current,
        false_alarm=stopped and bool(current - truth),
        missed=stopped and bool(truth - current),
        samples=state.counts.copy(),
        sigma=None,
    )


def run_trial(
    spec: ProblemSpec,
    rule: Union[str, object],
    th: Thresholds,
    truth: Iterable[int],
    seed: int,
    trial_index: int = 0,
    horizon: int = DEFAULT_HORIZON,
    use_kernel: Optional[bool] = None,
) -> TrialRecord:
    """One complete sequential run; deterministic given (seed, trial_index).

    Reaching the horizon yields a censored record, not an error.
    """
    truth = frozenset(truth)
    if not spec.l <= len(truth) <= spec.u:
        raise ValueError(f"|truth|={len(truth)} outside the prior bounds")
    rule_kind = rule if isinstance(rule, str) else rule.kind
    if use_kernel is None:
        use_kernel = _kernel_eligible(spec)
    if not use_kernel:
        rule_obj = make_rule(rule_kind, spec) if isinstance(rule, str) else rule
        return _run_trial_reference(spec, rule_obj, th, truth, seed, trial_index, horizon)
    plan = _plan_for(spec, rule_kind)
    counts = np.zeros(spec.M, dtype=np.int64)
    elapsed, stopped, dec_mask, sigma = _kernel.run_trial_kernel(
        seed, trial_index, spec.l, spec.u, plan.variant,
        th.a_eff, th.b_eff, th.c_eff, th.d_eff,
        plan.kinds, plan.par0, plan.par1, plan.g_slope, plan.g_offset,
        np.uint64(mask_of(truth)), plan.rule_code, plan.K_run,
        plan.set_masks, plan.c_table, plan.xy_table,
        horizon, counts,
    )
    decision = set_of(int(dec_mask), spec.M)
    stopped = bool(stopped)
    return TrialRecord(
        elapsed=int(elapsed),
        stopped=stopped,
        decision=decision,
        false_alarm=stopped and bool(decision - truth),
        missed=stopped and bool(truth - decision),
        samples=counts,
        sigma=int(sigma) if sigma >= 0 else None,
    )


def simulate_batch(
    spec: ProblemSpec,
    rule: Union[str, object],
    th: Thresholds,
    truth: Iterable[int],
    n_trials: int,
    seed_base: int,
    horizon: int = DEFAULT_HORIZON,
    threads: Optional[int] = None,
) -> TrialBatch:
    """Run n_trials independent trials (trial k uses stream key (seed_base, k));
    worker threads split the trial range but never the arithmetic, so the
    batch is identical for any thread count."""
    truth = frozenset(truth)
    rule_kind = rule if isinstance(rule, str) else rule.kind
    n = int(n_trials)
    elapsed = np.zeros(n, dtype=np.int64)
    stopped = np.zeros(n, dtype=bool)
    dec_mask = np.zeros(n, dtype=np.uint64)
    sigma = np.zeros(n, dtype=np.int64)
    samples = np.zeros((n, spec.M), dtype=np.int64)

    if not _kernel_eligible(spec):
        rule_obj = make_rule(rule_kind, spec) if isinstance(rule, str) else rule
        for k in range(n):
            rec = _run_trial_reference(spec, rule_obj, th, truth, seed_base, k, horizon)
            elapsed[k] = rec.elapsed
            stopped[k] = rec.stopped
            dec_mask[k] = mask_of(rec.decision)
            sigma[k] = -1 if rec.sigma is None else rec.sigma
            samples[k] = rec.samples
        return TrialBatch(truth, horizon, elapsed, stopped, dec_mask, sigma, samples)

    plan = _plan_for(spec, rule_kind)
    truth_mask = np.uint64(mask_of(truth))

    def run_range(lo: int, hi: int) -> None:
        for k in range(lo, hi):
            e, s, dm, sg = _kernel.run_trial_kernel(
                seed_base, k, spec.l, spec.u, plan.variant,
                th.a_eff, th.b_eff, th.c_eff, th.d_eff,
                plan.kinds, plan.par0, plan.par1, plan.g_slope, plan.g_offset,
                truth_mask, plan.rule_code, plan.K_run,
                plan.set_masks, plan.c_table, plan.xy_table,
                horizon, samples[k],
            )
            elapsed[k] = e
            stopped[k] = bool(s)
            dec_mask[k] = dm
            sigma[k] = sg

    n_workers = resolve_threads(threads)
    if n_workers <= 1 or n < 2 * n_workers:
        run_range(0, n)
    else:
        bounds = np.linspace(0, n, n_workers + 1).astype(int)
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            futures = [
                pool.submit(run_range, int(bounds[w]), int(bounds[w + 1]))
                for w in range(n_workers)
            ]
            for f in futures:
                f.result()
    return TrialBatch(truth, horizon, elapsed, stopped, dec_mask, sigma, samples)


def summarize(batch: TrialBatch) -> EstimateReport:
    n = batch.n_trials
    done = batch.stopped
    n_done = int(done.sum())
    if n_done == 0:
        raise DegenerateReportError("every trial was censored at the horizon")
    times = batch.elapsed[done].astype(np.float64)
    mean_t = float(times.mean())
    se_t = float(times.std(ddof=1) / math.sqrt(n_done)) if n_done > 1 else float("inf")

    def rate(flags: np.ndarray) -> Tuple[float, float]:
        p = float(flags.sum()) / n
        return p, math.sqrt(p * (1.0 - p) / n)

    fa, se_fa = rate(batch.false_alarm)
    md, se_md = rate(batch.missed)
    ratio = float(batch.samples.sum()) / float(batch.elapsed.sum())
    return EstimateReport(
        n_trials=n,
        censored_fraction=1.0 - n_done / n,
        mean_stop_time=mean_t,
        se_stop_time=se_t,
        fwer_false_alarm=fa,
        se_false_alarm=se_fa,
        fwer_missed=md,
        se_missed=se_md,
        budget_ratio=ratio,
    )


def estimate(
    spec: ProblemSpec,
    rule: Union[str, object],
    th: Thresholds,
    truth: Iterable[int],
    n_trials: int,
    seed_base: int,
    horizon: int = DEFAULT_HORIZON,
    threads: Optional[int] = None,
) -> EstimateReport:
    """Monte Carlo estimates of expected stopping time, familywise error
    rates and the empirical budget ratio under a fixed truth."""
    if n_trials < 100:
        raise ValueError(f"need at least 100 trials for meaningful errors, got {n_trials}")
    batch = simulate_batch(spec, rule, th, truth, n_trials, seed_base, horizon, threads)
    return summarize(batch)


def representative_truths(spec: ProblemSpec) -> List[FrozenSet[int]]:
    """One truth per size in {l, ceil((l+u)/2), u}, of the form {0..size-1}."""
    sizes = sorted({spec.l, math.ceil((spec.l + spec.u) / 2), spec.u})
    return [frozenset(range(s)) for s in sizes]


@dataclass(frozen=True)
class CalibrationResult:
    scale: float
    worst_ratio: float  # max over truths and error kinds of rate / target
    evaluations: int


def calibrate(
    spec: ProblemSpec,
    rule: Union[str, object],
    truths: Optional[Sequence[FrozenSet[int]]] = None,
    n_trials: int = 20_000,
    seed: int = 0,
    horizon: int = DEFAULT_HORIZON,
    threads: Optional[int] = None,
    max_evals: int = 40,
    band: Tuple[float, float] = (0.8, 1.0),
) -> CalibrationResult:
    """Shrink the conservative thresholds by a single scalar until the worst
    estimated familywise error rate sits inside ``band`` times its target.

    Bisection on the scale: larger thresholds stop later and err less, so the
    worst normalized rate is (stochastically) decreasing in the scale.  The
    conservative thresholds themselves satisfy the constraint, hence scale 1
    is returned whenever it already reaches the band.
    """
    truths = list(truths) if truths is not None else representative_truths(spec)
    base = conservative_thresholds(spec)
    evals = 0

    def worst(scale: float) -> float:
        nonlocal evals
        evals += 1
        th = base.scaled(scale)
        w = 0.0
        for j, truth in enumerate(truths):
            rep = estimate(
                spec, rule, th, truth, n_trials,
                derive_seed(seed, evals, j), horizon, threads,
            )
            w = max(w, rep.fwer_false_alarm / spec.alpha, rep.fwer_missed / spec.beta)
        return w

    w1 = worst(1.0)
    if w1 >= band[0]:
        return CalibrationResult(1.0, w1, evals)
    hi = 1.0
    lo = 0.5
    while evals < max_evals:
        w_lo = worst(lo)
        if w_lo > band[1]:
            break
        if w_lo >= band[0]:
            return CalibrationResult(lo, w_lo, evals)
        hi = lo
        lo /= 2.0
        if lo < 1e-6:
            raise CalibrationError("error rate stays below the band even at tiny scales")
    else:
        raise CalibrationError(f"no bracket within {max_evals} evaluations")
    while evals < max_evals:
        mid = (lo + hi) / 2.0
        w = worst(mid)
        if w > band[1]:
            lo = mid
        elif w < band[0]:
            hi = mid
        else:
            return CalibrationResult(mid, w, evals)
    raise CalibrationError(f"bisection did not land in {band} within {max_evals} evaluations")


def sweep_alpha(
    spec: ProblemSpec,
    rule_pair: Tuple[str, str],
    truth: Iterable[int],
    alpha_grid: Sequence[float],
    trials_per_alpha: Union[int, Sequence[int]],
    seed: int = 0,
    horizon: int = DEFAULT_HORIZON,
    threads: Optional[int] = None,
) -> List[Dict[str, float]]:
    """Stopping-time ratio of rule_pair[0] over rule_pair[1] along a
    decreasing error-target grid, with the conservative thresholds of each
    target and the limiting-efficiency reference line."""
    alphas = list(alpha_grid)
    if any(a2 >= a1 for a1, a2 in zip(alphas, alphas[1:])):
        raise ValueError("alpha grid must be strictly decreasing")
    truth = frozenset(truth)
    if isinstance(trials_per_alpha, int):
        trials = [trials_per_alpha] * len(alphas)
    else:
        trials = list(trials_per_alpha)
        if len(trials) != len(alphas):
            raise ValueError("need one trial count per grid point")
    are_ref = theory.are_tandem(spec, truth, r=1.0)
    rows: List[Dict[str, float]] = []
    for idx, alpha in enumerate(alphas):
        spec_a = replace(spec, alpha=alpha, beta=alpha)
        th = conservative_thresholds(spec_a)
        reports = {}
        for j, kind in enumerate(rule_pair):
            reports[kind] = estimate(
                spec_a, kind, th, truth, trials[idx],
                derive_seed(seed, idx, j), horizon, threads,
            )
        num, den = reports[rule_pair[0]], reports[rule_pair[1]]
        ratio = num.mean_stop_time / den.mean_stop_time
        se_ratio = ratio * math.sqrt(
            (num.se_stop_time / num.mean_stop_time) ** 2
            + (den.se_stop_time / den.mean_stop_time) ** 2
        )
        rows.append(
            {
                "alpha": alpha,
                "mean_" + rule_pair[0]: num.mean_stop_time,
                "se_" + rule_pair[0]: num.se_stop_time,
                "mean_" + rule_pair[1]: den.mean_stop_time,
                "se_" + rule_pair[1]: den.se_stop_time,
                "ratio": ratio,
                "se_ratio": se_ratio,
                "are_reference": are_ref,
            }
        )
    return rows
