"""Per-source two-hypothesis models and the overall problem description.

Each monitored source emits iid observations from a null density ``f0`` or,
if the source is anomalous, from an alternative ``f1``.  A model bundles the
samplers for both hypotheses, the log-likelihood-ratio increment
``g(x) = log(f1(x) / f0(x))`` and the two Kullback-Leibler numbers

    I = E_f1[g(X)] > 0      (evidence rate while anomalous)
    J = -E_f0[g(X)] > 0     (evidence rate while normal)

Three closed-form families cover the built-in experiments; user-defined
models can supply their own sampler, increment and KL pair through
:class:`CustomModel`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Tuple

from .errors import InvalidModelError
from ._rng import TrialStream

GAUSSIAN = "gaussian"
EXPONENTIAL = "exponential"
BERNOULLI = "bernoulli"
CUSTOM = "custom"


@dataclass(frozen=True)
class SourceModel:
    """One source's pair of simple hypotheses.

    ``g_slope``/``g_offset`` give the LLR increment in affine form
    ``g(x) = g_slope * x + g_offset``, which all built-in families admit
    (Bernoulli observations are encoded as 0.0/1.0).  ``I`` and ``J`` are in
    nats and must both be positive and finite.
    """

    kind: str
    param0: float  # gaussian: mean shift; exponential: alternative rate; bernoulli: p0
    param1: float  # bernoulli: p1; unused otherwise
    I: float
    J: float
    g_slope: float
    g_offset: float

    def llr_increment(self, x: float) -> float:
        """g(x) for an observation inside the common support."""
        if self.kind == EXPONENTIAL and x < 0.0:
            raise ValueError(f"exponential observation must be >= 0, got {x}")
        if self.kind == BERNOULLI and x not in (0.0, 1.0):
            raise ValueError(f"bernoulli observation must be 0 or 1, got {x}")
        return self.g_slope * x + self.g_offset

    def sample(self, anomalous: bool, stream: TrialStream) -> float:
        """Draw one observation from f1 (anomalous) or f0, consuming the
        stream in the fixed per-kind order (gaussian: 2 uniforms, others: 1)."""
        if self.kind == GAUSSIAN:
            z = stream.normal()
            return z + self.param0 if anomalous else z
        if self.kind == EXPONENTIAL:
            return stream.exponential(self.param0 if anomalous else 1.0)
        if self.kind == BERNOULLI:
            p = self.param1 if anomalous else self.param0
            return 1.0 if stream.uniform() < p else 0.0
        raise InvalidModelError(f"cannot sample kind {self.kind!r}")

    def kl_numbers(self) -> Tuple[float, float]:
        return self.I, self.J


@dataclass(frozen=True)
class CustomModel:
    """Extension point for user-supplied models.

    The sampler receives ``(anomalous, stream)`` and must consume the stream
    deterministically; ``increment`` is g(x); ``I``/``J`` are the KL numbers.
    Custom models run on the reference trial loop only.
    """

    sampler: Callable[[bool, TrialStream], float] = field(compare=False)
    increment: Callable[[float], float] = field(compare=False)
    I: float = 0.0
    J: float = 0.0
    kind: str = CUSTOM

    def __post_init__(self):
        _check_kl(self.I, self.J, self.kind)

    def llr_increment(self, x: float) -> float:
        return self.increment(x)

    def sample(self, anomalous: bool, stream: TrialStream) -> float:
        return self.sampler(anomalous, stream)

    def kl_numbers(self) -> Tuple[float, float]:
        return self.I, self.J


def _check_kl(I: float, J: float, label: str) -> None:
    if not (I > 0.0 and math.isfinite(I) and J > 0.0 and math.isfinite(J)):
        raise InvalidModelError(
            f"model {label!r} needs positive finite KL numbers, got I={I}, J={J}"
        )


def gaussian_mean_shift(mu: float) -> SourceModel:
    """f0 = N(0,1), f1 = N(mu,1).  g(x) = mu*x - mu^2/2, I = J = mu^2/2."""
    kl = mu * mu / 2.0
    _check_kl(kl, kl, GAUSSIAN)
    return SourceModel(GAUSSIAN, mu, 0.0, kl, kl, mu, -(mu * mu) / 2.0)


def exponential_rate(lam: float) -> SourceModel:
    """f0 = Exp(1), f1 = Exp(lam).  g(x) = log(lam) + (1-lam)*x.

    I = log(lam) + 1/lam - 1 and J = -log(lam) + lam - 1, i.e. the divergences
    of f1 from f0 and of f0 from f1; both positive for lam != 1.
    """
    if lam <= 0.0:
        raise InvalidModelError(f"exponential rate must be positive, got {lam}")
    I = math.log(lam) + 1.0 / lam - 1.0
    J = -math.log(lam) + lam - 1.0
    _check_kl(I, J, EXPONENTIAL)
    return SourceModel(EXPONENTIAL, lam, 0.0, I, J, 1.0 - lam, math.log(lam))


def bernoulli(p0: float, p1: float) -> SourceModel:
    """f0 = Bern(p0), f1 = Bern(p1) with both parameters in (0,1)."""
    if not (0.0 < p0 < 1.0 and 0.0 < p1 < 1.0):
        raise InvalidModelError(f"bernoulli parameters must lie in (0,1), got {p0}, {p1}")
    if p0 == p1:
        raise InvalidModelError("bernoulli hypotheses are identical (zero KL)")
    g1 = math.log(p1 / p0)
    g0 = math.log((1.0 - p1) / (1.0 - p0))
    I = p1 * g1 + (1.0 - p1) * g0
    J = -(p0 * g1 + (1.0 - p0) * g0)
    _check_kl(I, J, BERNOULLI)
    # affine in the 0/1 observation: g(x) = (g1 - g0) * x + g0
    return SourceModel(BERNOULLI, p0, p1, I, J, g1 - g0, g0)


@dataclass(frozen=True)
class ProblemSpec:
    """Full experiment description: source count M, prior bounds ``l <= |A| <= u``
    on the anomaly count, sampling budget K in (0, M], familywise error targets
    alpha/beta, and one model per source."""

    M: int
    l: int
    u: int
    K: float
    alpha: float
    beta: float
    models: Tuple[SourceModel, ...]

    def __post_init__(self):
        if self.M < 1:
            raise ValueError(f"M must be a positive integer, got {self.M}")
        if not (0 <= self.l <= self.u <= self.M):
            raise ValueError(f"need 0 <= l <= u <= M, got l={self.l}, u={self.u}, M={self.M}")
        if self.l == self.u and not (0 < self.l < self.M):
            raise ValueError("when l == u the common value must satisfy 0 < l < M")
        if not (0.0 < self.K <= self.M):
            raise ValueError(f"budget K must lie in (0, M], got {self.K}")
        for name, v in (("alpha", self.alpha), ("beta", self.beta)):
            if not (0.0 < v < 1.0):
                raise ValueError(f"{name} must lie in (0,1), got {v}")
        if len(self.models) != self.M:
            raise ValueError(f"expected {self.M} models, got {len(self.models)}")

    @property
    def kl_I(self) -> Tuple[float, ...]:
        return tuple(m.I for m in self.models)

    @property
    def kl_J(self) -> Tuple[float, ...]:
        return tuple(m.J for m in self.models)

    @property
    def error_exponent_ratio(self) -> float:
        """Surrogate r = |log alpha| / |log beta| used by the design tables."""
        return abs(math.log(self.alpha)) / abs(math.log(self.beta))

    def valid_set_sizes(self) -> range:
        return range(self.l, self.u + 1)


def homogeneous_gaussian_spec(
    M: int, l: int, u: int, K: float, alpha: float, beta: float, mu: float
) -> ProblemSpec:
    """All sources share the same Gaussian mean-shift model."""
    return ProblemSpec(M, l, u, K, alpha, beta, tuple(gaussian_mean_shift(mu) for _ in range(M)))


def two_tier_gaussian_spec(
    M: int, l: int, u: int, K: float, alpha: float, beta: float, mu: float
) -> ProblemSpec:
    """Named heterogeneous preset: M even, first half mean shift ``mu``, second
    half ``2*mu``.  Since the KL numbers scale as the squared shift, the weak
    half carries one quarter of the strong half's information."""
    if M % 2 != 0:
        raise ValueError(f"two-tier preset needs an even number of sources, got {M}")
    models = tuple(
        gaussian_mean_shift(mu if i < M // 2 else 2.0 * mu) for i in range(M)
    )
    return ProblemSpec(M, l, u, K, alpha, beta, models)
