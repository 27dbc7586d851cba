"""Command-line front end.

Subcommands::

    seqanom theory    --config exp.toml [--set 1,2,3] [--out table.csv]
    seqanom simulate  --config exp.toml [--rule bernoulli --trials 10000 ...]
    seqanom calibrate --config exp.toml [--trials 20000 ...]
    seqanom sweep     --config exp.toml --alpha 1e-1,1e-2,1e-3 [...]

All randomness is controlled by --seed (or the config's seed); identical
invocations produce byte-identical CSV.  Floats print with 9 significant
digits.  Progress notes go to stderr, data to --out or stdout.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from typing import Dict, Optional, Sequence

from . import harness, sampling, theory
from .config import ExperimentConfig, parse_config
from .errors import SeqAnomError
from .rules import conservative_thresholds

_FLOAT_FMT = "%.9g"


def format_cell(value) -> str:
    if isinstance(value, float):
        return _FLOAT_FMT % value
    return str(value)


def write_csv(rows: Sequence[Dict], columns: Sequence[str], out) -> None:
    out.write(",".join(columns) + "\n")
    for row in rows:
        out.write(",".join(format_cell(row.get(col, "")) for col in columns) + "\n")


def set_label(truth, M: int) -> str:
    """1-based '+'-joined source list, e.g. {0,2} -> '1+3'."""
    return "+".join(str(i + 1) for i in sorted(truth)) or "-"


def _parse_set(text: str) -> frozenset:
    try:
        return frozenset(int(tok) - 1 for tok in text.split(",") if tok)
    except ValueError as exc:
        raise SeqAnomError(f"--set expects comma-separated integers, got {text!r}") from exc


def _load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    spec = cfg.spec
    if args.alpha is not None or args.beta is not None:
        spec = replace(
            spec,
            alpha=args.alpha if args.alpha is not None else spec.alpha,
            beta=args.beta if args.beta is not None else spec.beta,
        )
    updates = {"spec": spec}
    if getattr(args, "rule", None):
        updates["rule"] = args.rule
    if getattr(args, "set", None):
        updates["truth"] = _parse_set(args.set)
    if getattr(args, "trials", None):
        updates["trials"] = args.trials
    if args.seed is not None:
        updates["seed"] = args.seed
    if getattr(args, "horizon", None):
        updates["horizon"] = args.horizon
    if args.threads is not None:
        updates["threads"] = args.threads
    return replace(cfg, **updates)


def _open_out(args):
    if args.out:
        return open(args.out, "w", encoding="utf-8", newline="")
    return sys.stdout


def _cmd_theory(args) -> int:
    cfg = _apply_overrides(_load_config(args.config), args)
    spec = cfg.spec
    if args.set:
        truths = [_parse_set(args.set)]
    else:
        masks = sampling.enumerate_decision_sets(spec.M, spec.l, spec.u)
        truths = [sampling.set_of(m, spec.M) for m in masks]
    integer_budget = spec.K == int(spec.K)
    columns = ["set", "size", "case", "x", "y", "Q", "are_tandem"] + [
        f"c_star_{i + 1}" for i in range(spec.M)
    ]
    rows = []
    for truth in truths:
        prof = theory.profile(spec, truth)
        row = {
            "set": set_label(truth, spec.M),
            "size": len(truth),
            "case": prof.case_label,
            "x": prof.x,
            "y": prof.y,
            "Q": prof.Q,
            "are_tandem": theory.are_tandem(spec, truth, prof.r) if integer_budget else "",
        }
        for i, ci in enumerate(prof.c_star):
            row[f"c_star_{i + 1}"] = ci
        rows.append(row)
    out = _open_out(args)
    try:
        write_csv(rows, columns, out)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


_SIM_COLUMNS = [
    "rule", "set", "alpha", "beta", "threshold_scale",
    "threshold_a", "threshold_b", "threshold_c", "threshold_d", "trials",
    "mean_stop_time", "se_stop_time", "fwer_false_alarm", "se_false_alarm",
    "fwer_missed", "se_missed", "budget_ratio", "censored_fraction",
]


def _cmd_simulate(args) -> int:
    cfg = _apply_overrides(_load_config(args.config), args)
    spec = cfg.spec
    th = conservative_thresholds(spec).scaled(cfg.threshold_scale)
    print(
        f"simulate: rule={cfg.rule} set={set_label(cfg.truth, spec.M)} "
        f"trials={cfg.trials} seed={cfg.seed}",
        file=sys.stderr,
    )
    rep = harness.estimate(
        spec, cfg.rule, th, cfg.truth, cfg.trials, cfg.seed, cfg.horizon, cfg.threads
    )
    row = {
        "rule": cfg.rule,
        "set": set_label(cfg.truth, spec.M),
        "alpha": spec.alpha,
        "beta": spec.beta,
        "threshold_scale": cfg.threshold_scale,
        "threshold_a": th.a_eff,
        "threshold_b": th.b_eff,
        "threshold_c": th.c_eff,
        "threshold_d": th.d_eff,
        "trials": rep.n_trials,
        "mean_stop_time": rep.mean_stop_time,
        "se_stop_time": rep.se_stop_time,
        "fwer_false_alarm": rep.fwer_false_alarm,
        "se_false_alarm": rep.se_false_alarm,
        "fwer_missed": rep.fwer_missed,
        "se_missed": rep.se_missed,
        "budget_ratio": rep.budget_ratio,
        "censored_fraction": rep.censored_fraction,
    }
    out = _open_out(args)
    try:
        write_csv([row], _SIM_COLUMNS, out)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _cmd_calibrate(args) -> int:
    cfg = _apply_overrides(_load_config(args.config), args)
    spec = cfg.spec
    print(f"calibrate: rule={cfg.rule} trials/eval={cfg.trials}", file=sys.stderr)
    result = harness.calibrate(
        spec, cfg.rule, n_trials=cfg.trials, seed=cfg.seed,
        horizon=cfg.horizon, threads=cfg.threads,
    )
    row = {
        "rule": cfg.rule,
        "alpha": spec.alpha,
        "beta": spec.beta,
        "scale": result.scale,
        "worst_normalized_rate": result.worst_ratio,
        "evaluations": result.evaluations,
    }
    out = _open_out(args)
    try:
        write_csv([row], list(row.keys()), out)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _cmd_sweep(args) -> int:
    cfg = _apply_overrides(_load_config(args.config), args)
    spec = cfg.spec
    try:
        grid = [float(tok) for tok in args.alpha_grid.split(",") if tok]
    except ValueError as exc:
        raise SeqAnomError(f"--alpha expects comma-separated floats, got {args.alpha_grid!r}") from exc
    trials = [cfg.trials] * len(grid)
    print(f"sweep: alphas={grid} trials={trials}", file=sys.stderr)
    rows = harness.sweep_alpha(
        spec, (args.numerator, args.denominator), cfg.truth, grid, trials,
        seed=cfg.seed, horizon=cfg.horizon, threads=cfg.threads,
    )
    columns = list(rows[0].keys()) if rows else []
    out = _open_out(args)
    try:
        write_csv(rows, columns, out)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _add_common(p: argparse.ArgumentParser, with_rule: bool = True) -> None:
    p.add_argument("--config", required=True, help="experiment TOML file")
    if with_rule:
        p.add_argument("--rule", choices=sampling.RULE_KINDS, help="sampling rule override")
    p.add_argument("--set", help="true anomalous sources, 1-based comma list")
    p.add_argument("--alpha", type=float, help="false-alarm target override")
    p.add_argument("--beta", type=float, help="missed-detection target override")
    p.add_argument("--trials", type=int, help="trial-count override")
    p.add_argument("--seed", type=int, help="seed override")
    p.add_argument("--horizon", type=int, help="censoring horizon override")
    p.add_argument("--threads", type=int, help="worker threads (env SEQANOM_THREADS)")
    p.add_argument("--out", help="CSV output path (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqanom",
        description="Sequential anomaly detection under sampling constraints",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("theory", help="profile table (x, y, c*, Q, ARE) per candidate set")
    _add_common(p, with_rule=False)
    p.set_defaults(func=_cmd_theory)

    p = sub.add_parser("simulate", help="Monte Carlo estimate for one rule and truth")
    _add_common(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("calibrate", help="shrink thresholds to hit the error targets")
    _add_common(p)
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("sweep", help="tandem/bernoulli stopping-time ratio over alphas")
    _add_common(p)
    p.add_argument("--alpha-grid", required=True, dest="alpha_grid",
                   help="decreasing comma list of error targets")
    p.add_argument("--numerator", default=sampling.TANDEM_RULE, choices=sampling.RULE_KINDS)
    p.add_argument("--denominator", default=sampling.BERNOULLI_RULE, choices=sampling.RULE_KINDS)
    p.set_defaults(func=_cmd_sweep)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors itself
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (SeqAnomError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry_point() -> None:  # console-script hook
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
