"""Shared fixtures and the randomized-instance generator used by the theory
tests and the acceptance battle."""

import math

import numpy as np
import pytest

import seqanom as sa

R_CHOICES = (0.3, 0.5, 1.0, 2.0, 5.0)


def random_instances(seed: int, count: int, max_M: int = 6):
    """Yield (spec, A, r) tuples with random KL numbers, bounds, budget and
    candidate set; covers every branch of the design ladder."""
    rng = np.random.default_rng(seed)
    made = 0
    while made < count:
        M = int(rng.integers(2, max_M + 1))
        l = int(rng.integers(0, M + 1))
        u = int(rng.integers(l, M + 1))
        if l == u and not (0 < l < M):
            continue
        I = rng.uniform(0.05, 2.0, M)
        J = rng.uniform(0.05, 2.0, M)
        models = tuple(
            sa.SourceModel("gaussian", 0.5, 0.0, float(I[i]), float(J[i]), 1.0, 0.0)
            for i in range(M)
        )
        r = float(rng.choice(R_CHOICES))
        K = float(min(rng.choice([1, 2, math.ceil(M / 2), M]), M))
        size = int(rng.integers(l, u + 1))
        A = frozenset(int(i) for i in rng.choice(M, size=size, replace=False))
        spec = sa.ProblemSpec(M, l, u, K, 1e-3, 1e-3, models)
        made += 1
        yield spec, A, r


@pytest.fixture(scope="session")
def homog_spec():
    """The paper-scale homogeneous configuration."""
    return sa.homogeneous_gaussian_spec(10, 1, 6, 5.0, 1e-3, 1e-3, 0.5)


@pytest.fixture(scope="session")
def hetero_spec():
    """The two-tier heterogeneous preset at paper scale."""
    return sa.two_tier_gaussian_spec(10, 1, 6, 5.0, 1e-3, 1e-3, 0.5)
