"""Experiment configuration files: a TOML document with three sections.

::

    [problem]
    sources = 10          # number of monitored sources (M)
    min_anomalous = 1     # lower prior bound on the anomaly count
    max_anomalous = 6     # upper prior bound
    budget = 5.0          # sampling-rate budget K in (0, M]
    alpha = 1e-3          # familywise false-alarm target
    beta = 1e-3           # familywise missed-detection target

    [models]
    kind = "gaussian"     # gaussian | exponential | bernoulli
    mean_shift = 0.5      # scalar (homogeneous) or one value per source
    # preset = "two_tier" # first half mean_shift, second half doubled
    # exponential models: rate = 2.0 (or a list)
    # bernoulli models:   p0 = 0.3, p1 = 0.6 (scalars or lists)

    [run]
    rule = "bernoulli"    # bernoulli|chernoff|uniform|tandem|equalizing|ordering
    anomalous = [1, 2, 3] # true anomalous sources, numbered from 1
    trials = 10000
    seed = 1
    horizon = 1000000
    # threads = 4
    # threshold_scale = 1.0

Sources are numbered from 1 in config files and reports; the library API
uses 0-based indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import FrozenSet, List, Optional

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from .errors import ConfigError
from .models import (
    ProblemSpec,
    bernoulli,
    exponential_rate,
    gaussian_mean_shift,
)
from .sampling import RULE_KINDS

TWO_TIER_PRESET = "two_tier"


@dataclass(frozen=True)
class ExperimentConfig:
    spec: ProblemSpec
    rule: str
    truth: FrozenSet[int]  # 0-based
    trials: int
    seed: int
    horizon: int
    threads: Optional[int] = None
    threshold_scale: float = 1.0
    model_block: dict = field(default_factory=dict, compare=False)


def _scalar_or_list(value, M: int, key: str) -> List[float]:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return [float(value)] * M
    if isinstance(value, list):
        if len(value) != M:
            raise ConfigError(f"[models] {key}: expected {M} entries, got {len(value)}")
        return [float(v) for v in value]
    raise ConfigError(f"[models] {key}: expected a number or a list of numbers")


def _build_models(block: dict, M: int):
    kind = block.get("kind")
    if kind == "gaussian":
        if block.get("preset") == TWO_TIER_PRESET:
            if M % 2 != 0:
                raise ConfigError(f"[models] preset {TWO_TIER_PRESET!r} needs an even source count")
            mu = block.get("mean_shift")
            if not isinstance(mu, (int, float)):
                raise ConfigError("[models] the two-tier preset needs a scalar mean_shift")
            shifts = [float(mu)] * (M // 2) + [2.0 * float(mu)] * (M // 2)
        elif "preset" in block:
            raise ConfigError(f"[models] unknown preset {block['preset']!r}")
        else:
            shifts = _scalar_or_list(block.get("mean_shift"), M, "mean_shift")
        return tuple(gaussian_mean_shift(m) for m in shifts)
    if kind == "exponential":
        rates = _scalar_or_list(block.get("rate"), M, "rate")
        return tuple(exponential_rate(r) for r in rates)
    if kind == "bernoulli":
        p0 = _scalar_or_list(block.get("p0"), M, "p0")
        p1 = _scalar_or_list(block.get("p1"), M, "p1")
        return tuple(bernoulli(a, b) for a, b in zip(p0, p1))
    raise ConfigError(f"[models] kind must be gaussian, exponential or bernoulli, got {kind!r}")


def _get(section: dict, key: str, kinds: tuple, where: str):
    if key not in section:
        raise ConfigError(f"[{where}] missing required key {key!r}")
    value = section[key]
    if not isinstance(value, kinds) or isinstance(value, bool):
        raise ConfigError(f"[{where}] {key}: unexpected type {type(value).__name__}")
    return value


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a configuration document; raises ConfigError with
    the offending section/key (or the TOML parser's line info) on failure."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config syntax: {exc}") from exc

    for section in ("problem", "models", "run"):
        if section not in doc or not isinstance(doc[section], dict):
            raise ConfigError(f"missing [{section}] section")
    prob, models_block, run = doc["problem"], doc["models"], doc["run"]

    M = _get(prob, "sources", (int,), "problem")
    l = _get(prob, "min_anomalous", (int,), "problem")
    u = _get(prob, "max_anomalous", (int,), "problem")
    K = float(_get(prob, "budget", (int, float), "problem"))
    alpha = float(_get(prob, "alpha", (int, float), "problem"))
    beta = float(_get(prob, "beta", (int, float), "problem"))
    models = _build_models(models_block, M)
    try:
        spec = ProblemSpec(M, l, u, K, alpha, beta, models)
    except ValueError as exc:
        raise ConfigError(f"[problem] {exc}") from exc

    rule = _get(run, "rule", (str,), "run")
    if rule not in RULE_KINDS:
        raise ConfigError(f"[run] unknown rule {rule!r}; choose from {', '.join(RULE_KINDS)}")
    raw_truth = run.get("anomalous", [])
    if not isinstance(raw_truth, list) or not all(isinstance(i, int) for i in raw_truth):
        raise ConfigError("[run] anomalous: expected a list of 1-based source indices")
    if any(not 1 <= i <= M for i in raw_truth):
        raise ConfigError(f"[run] anomalous: indices must lie in [1, {M}]")
    truth = frozenset(i - 1 for i in raw_truth)
    if len(truth) != len(raw_truth):
        raise ConfigError("[run] anomalous: duplicate indices")
    if not l <= len(truth) <= u:
        raise ConfigError(
            f"[run] anomalous: size {len(truth)} outside the prior bounds [{l}, {u}]"
        )
    trials = int(run.get("trials", 10_000))
    if trials < 1:
        raise ConfigError("[run] trials must be positive")
    seed = int(run.get("seed", 0))
    horizon = int(run.get("horizon", 10**6))
    if horizon < 1:
        raise ConfigError("[run] horizon must be positive")
    threads = run.get("threads")
    if threads is not None:
        threads = int(threads)
        if threads < 1:
            raise ConfigError("[run] threads must be positive")
    scale = float(run.get("threshold_scale", 1.0))
    if scale <= 0:
        raise ConfigError("[run] threshold_scale must be positive")
    return ExperimentConfig(
        spec=spec,
        rule=rule,
        truth=truth,
        trials=trials,
        seed=seed,
        horizon=horizon,
        threads=threads,
        threshold_scale=scale,
        model_block=dict(models_block),
    )


def _fmt_value(v) -> str:
    if isinstance(v, str):
        return f'"{v}"'
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return "[" + ", ".join(_fmt_value(x) for x in v) + "]"
    return str(v)


def serialize_config(cfg: ExperimentConfig) -> str:
    """Render a config back to TOML; parse(serialize(parse(x))) is
    semantically identical to parse(x)."""
    spec = cfg.spec
    lines = [
        "[problem]",
        f"sources = {spec.M}",
        f"min_anomalous = {spec.l}",
        f"max_anomalous = {spec.u}",
        f"budget = {_fmt_value(float(spec.K))}",
        f"alpha = {_fmt_value(spec.alpha)}",
        f"beta = {_fmt_value(spec.beta)}",
        "",
        "[models]",
    ]
    for key, value in cfg.model_block.items():
        lines.append(f"{key} = {_fmt_value(value)}")
    lines += [
        "",
        "[run]",
        f'rule = "{cfg.rule}"',
        f"anomalous = {sorted(i + 1 for i in cfg.truth)}",
        f"trials = {cfg.trials}",
        f"seed = {cfg.seed}",
        f"horizon = {cfg.horizon}",
    ]
    if cfg.threads is not None:
        lines.append(f"threads = {cfg.threads}")
    lines.append(f"threshold_scale = {_fmt_value(cfg.threshold_scale)}")
    return "\n".join(lines) + "\n"
