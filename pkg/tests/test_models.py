"""Source-model tests: closed-form increments and KL numbers against
independent oracles (quadrature, Monte Carlo means)."""

import math

import numpy as np
import pytest
from scipy import integrate

import seqanom as sa
from seqanom._rng import TrialStream
from seqanom.errors import InvalidModelError


class TestLlrIncrement:
    def test_gaussian_closed_form(self):
        m = sa.gaussian_mean_shift(0.5)
        assert m.llr_increment(0.0) == pytest.approx(-0.125, abs=1e-15)
        # general point: mu*x - mu^2/2
        assert m.llr_increment(1.7) == pytest.approx(0.5 * 1.7 - 0.125, abs=1e-15)

    def test_zero_where_densities_cross(self):
        # N(mu,1) and N(0,1) agree at x = mu/2
        m = sa.gaussian_mean_shift(0.8)
        assert m.llr_increment(0.4) == pytest.approx(0.0, abs=1e-15)

    def test_exponential_closed_form(self):
        m = sa.exponential_rate(2.0)
        assert m.llr_increment(1.0) == pytest.approx(math.log(2.0) - 1.0, abs=1e-12)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            sa.exponential_rate(2.0).llr_increment(-0.1)
        with pytest.raises(ValueError):
            sa.bernoulli(0.3, 0.6).llr_increment(0.5)


class TestKlNumbers:
    def test_gaussian(self):
        m = sa.gaussian_mean_shift(0.5)
        assert m.I == pytest.approx(0.125, abs=1e-15)
        assert m.J == pytest.approx(0.125, abs=1e-15)

    def test_exponential(self):
        # divergence of Exp(lam) from Exp(1) and vice versa
        m = sa.exponential_rate(2.0)
        assert m.I == pytest.approx(math.log(2.0) + 0.5 - 1.0, abs=1e-12)
        assert m.J == pytest.approx(-math.log(2.0) + 2.0 - 1.0, abs=1e-12)

    def test_degenerate_models_rejected(self):
        with pytest.raises(InvalidModelError):
            sa.bernoulli(0.4, 0.4)
        with pytest.raises(InvalidModelError):
            sa.gaussian_mean_shift(0.0)
        with pytest.raises(InvalidModelError):
            sa.exponential_rate(1.0)
        with pytest.raises(InvalidModelError):
            sa.bernoulli(0.0, 0.5)

    @pytest.mark.parametrize(
        "model",
        [sa.gaussian_mean_shift(0.5), sa.gaussian_mean_shift(1.3), sa.exponential_rate(2.0), sa.exponential_rate(0.4)],
        ids=["gauss_.5", "gauss_1.3", "exp_2", "exp_.4"],
    )
    def test_quadrature_oracle(self, model):
        # I = int g f1, J = -int g f0 via adaptive quadrature
        if model.kind == sa.models.GAUSSIAN:
            mu = model.param0

            def f1(x):
                return math.exp(-((x - mu) ** 2) / 2) / math.sqrt(2 * math.pi)

            def f0(x):
                return math.exp(-(x ** 2) / 2) / math.sqrt(2 * math.pi)

            lo, hi = -12.0, 12.0 + mu
        else:
            lam = model.param0

            def f1(x):
                return lam * math.exp(-lam * x)

            def f0(x):
                return math.exp(-x)

            lo, hi = 0.0, 120.0
        I_quad, _ = integrate.quad(lambda x: model.llr_increment(x) * f1(x), lo, hi)
        J_quad, _ = integrate.quad(lambda x: -model.llr_increment(x) * f0(x), lo, hi)
        assert model.I == pytest.approx(I_quad, abs=1e-6)
        assert model.J == pytest.approx(J_quad, abs=1e-6)

    def test_bernoulli_exact_sum(self):
        m = sa.bernoulli(0.3, 0.6)
        I = 0.6 * m.llr_increment(1.0) + 0.4 * m.llr_increment(0.0)
        J = -(0.3 * m.llr_increment(1.0) + 0.7 * m.llr_increment(0.0))
        assert m.I == pytest.approx(I, abs=1e-15)
        assert m.J == pytest.approx(J, abs=1e-15)


def _sample_many(model, anomalous, n, seed):
    stream = TrialStream(seed)
    return np.array([model.sample(anomalous, stream) for _ in range(n)])


class TestSampling:
    N = 10**6

    def test_gaussian_means(self):
        m = sa.gaussian_mean_shift(0.5)
        assert _sample_many(m, True, self.N, 1).mean() == pytest.approx(0.5, abs=3e-3)
        assert _sample_many(m, False, self.N, 2).mean() == pytest.approx(0.0, abs=3e-3)

    def test_exponential_null_mean(self):
        m = sa.exponential_rate(2.0)
        assert _sample_many(m, False, self.N, 3).mean() == pytest.approx(1.0, abs=3e-3)
        assert _sample_many(m, True, self.N, 4).mean() == pytest.approx(0.5, abs=2e-3)

    def test_determinism(self):
        m = sa.bernoulli(0.3, 0.6)
        a = _sample_many(m, True, 50, 9)
        b = _sample_many(m, True, 50, 9)
        assert (a == b).all()

    @pytest.mark.parametrize(
        "model",
        [sa.gaussian_mean_shift(0.5), sa.exponential_rate(2.0), sa.bernoulli(0.3, 0.6)],
        ids=["gaussian", "exponential", "bernoulli"],
    )
    def test_increment_mean_matches_kl(self, model):
        # empirical mean of g under f1 is +I, under f0 is -J, within 5 se
        n = 200_000
        for anomalous, target, sign in ((True, model.I, 1.0), (False, model.J, -1.0)):
            xs = _sample_many(model, anomalous, n, 11 if anomalous else 12)
            g = np.array([model.llr_increment(x) for x in xs])
            se = g.std(ddof=1) / math.sqrt(n)
            assert abs(g.mean() - sign * target) < 5 * se


class TestProblemSpec:
    def test_valid(self):
        spec = sa.homogeneous_gaussian_spec(10, 1, 6, 5.0, 1e-3, 1e-3, 0.5)
        assert spec.M == 10 and spec.valid_set_sizes() == range(1, 7)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(M=10, l=3, u=2, K=5.0),
            dict(M=10, l=0, u=0, K=5.0),
            dict(M=10, l=10, u=10, K=5.0),
            dict(M=10, l=1, u=6, K=0.0),
            dict(M=10, l=1, u=6, K=11.0),
        ],
        ids=["l>u", "l=u=0", "l=u=M", "K=0", "K>M"],
    )
    def test_invalid(self, kwargs):
        models = tuple(sa.gaussian_mean_shift(0.5) for _ in range(10))
        with pytest.raises(ValueError):
            sa.ProblemSpec(alpha=1e-3, beta=1e-3, models=models, **kwargs)

    def test_two_tier_preset(self):
        spec = sa.two_tier_gaussian_spec(10, 1, 6, 5.0, 1e-3, 1e-3, 0.5)
        assert [m.I for m in spec.models[:5]] == [0.125] * 5
        assert [m.I for m in spec.models[5:]] == [0.5] * 5
        with pytest.raises(ValueError):
            sa.two_tier_gaussian_spec(9, 1, 6, 5.0, 1e-3, 1e-3, 0.5)

    def test_custom_model_protocol(self):
        custom = sa.CustomModel(
            sampler=lambda anomalous, stream: stream.uniform() + (1.0 if anomalous else 0.0),
            increment=lambda x: 0.3 * x - 0.1,
            I=0.2,
            J=0.1,
        )
        assert custom.kl_numbers() == (0.2, 0.1)
        with pytest.raises(InvalidModelError):
            sa.CustomModel(sampler=lambda a, s: 0.0, increment=lambda x: x, I=0.0, J=1.0)
