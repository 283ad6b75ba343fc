import math

import numpy as np
import pytest

from refprior import models as M
from refprior.errors import (
    DomainError,
    EstimateDiverged,
    IdParseError,
    NonFiniteLogLik,
    NotPositiveDefinite,
)
from refprior.models import FiniteObs, ParamSpace, StatModel

ALL_MODELS = {
    "bernoulli": (M.bernoulli(), lambda rng: rng.uniform(0.05, 0.95)),
    "binomial10": (M.binomial(10), lambda rng: rng.uniform(0.05, 0.95)),
    "gauss1": (M.gauss_location(1.0), lambda rng: rng.uniform(-3.0, 3.0)),
    "gauss2": (M.gauss_location(2.0), lambda rng: rng.uniform(-3.0, 3.0)),
    "loc-scale": (M.gauss_location_scale(),
                  lambda rng: np.array([rng.uniform(-2.0, 2.0), rng.uniform(0.5, 3.0)])),
}


class TestParamSpace:
    def test_compact_must_sit_inside_box(self):
        ParamSpace(box=((0.0, 1.0),), compact=((0.1, 0.9),))
        with pytest.raises(DomainError):
            ParamSpace(box=((0.0, 1.0),), compact=((0.0, 0.9),))
        with pytest.raises(DomainError):
            ParamSpace(box=((0.0, 1.0),), compact=((0.1, 0.9), (0.1, 0.9)))
        with pytest.raises(DomainError):
            ParamSpace(box=((1.0, 0.0),))


class TestLogLikK:
    def test_bernoulli_single(self, bern):
        assert M.log_lik_k(bern, [1], 0.5) == pytest.approx(math.log(0.5), abs=1e-12)

    def test_bernoulli_additive(self, bern):
        assert M.log_lik_k(bern, [1, 0, 1], 0.5) == pytest.approx(3 * math.log(0.5), abs=1e-12)

    def test_gauss_density_value(self, gauss1):
        assert M.log_lik_k(gauss1, [0.0], 0.0) == pytest.approx(
            -0.5 * math.log(2 * math.pi), abs=1e-12)

    def test_additivity_under_concatenation(self, bern, gauss1):
        rng = np.random.default_rng(0)
        for model, theta in ((bern, 0.37), (gauss1, 0.2)):
            ys1 = model.sampler(theta, rng, 7)
            ys2 = model.sampler(theta, rng, 5)
            joint = M.log_lik_k(model, np.concatenate([ys1, ys2]), theta)
            split = M.log_lik_k(model, ys1, theta) + M.log_lik_k(model, ys2, theta)
            assert joint == pytest.approx(split, abs=1e-12)

    def test_domain_guard(self, bern):
        with pytest.raises(DomainError):
            M.log_lik_k(bern, [1], 0.0)
        with pytest.raises(DomainError):
            M.log_lik_k(bern, [1], 1.0 - 1e-15)
        with pytest.raises(DomainError):
            M.log_lik_k(bern, [], 0.5)

    def test_nonfinite_loglik(self):
        broken = StatModel(
            model_id="broken",
            param_space=ParamSpace(box=((0.0, 1.0),)),
            obs_space=FiniteObs(atoms=(0.0,)),
            log_lik=lambda y, t: float("nan"),
            sampler=lambda t, rng, size=None: 0.0,
        )
        with pytest.raises(NonFiniteLogLik):
            M.log_lik_k(broken, [0.0], 0.5)


class TestFisher:
    def test_bernoulli_values(self, bern):
        assert M.fisher_information(bern, 0.5)[0, 0] == pytest.approx(4.0, abs=1e-12)
        assert M.fisher_information(bern, 0.1)[0, 0] == pytest.approx(1.0 / 0.09, rel=1e-12)

    def test_gauss_constant(self, gauss1):
        for theta in (-2.0, 0.0, 1.5):
            assert M.fisher_information(gauss1, theta)[0, 0] == pytest.approx(1.0, abs=1e-14)

    def test_numeric_enumeration_bernoulli(self, bern):
        assert M.fisher_numeric(bern, 0.5)[0, 0] == pytest.approx(4.0, abs=1e-9)

    def test_numeric_enumeration_binomial(self):
        model = M.binomial(10)
        assert M.fisher_numeric(model, 0.5)[0, 0] == pytest.approx(40.0, abs=1e-6)

    def test_numeric_quadrature_gauss(self):
        model = M.gauss_location(2.0)
        assert M.fisher_numeric(model, 1.3)[0, 0] == pytest.approx(0.25, abs=1e-6)

    def test_numeric_fallback_is_used_without_analytic(self, gauss1):
        stripped = StatModel(
            model_id="gauss-stripped",
            param_space=gauss1.param_space,
            obs_space=gauss1.obs_space,
            log_lik=gauss1.log_lik,
            sampler=gauss1.sampler,
            score=gauss1.score,
            obs_bounds=gauss1.obs_bounds,
        )
        assert M.fisher_information(stripped, 0.7)[0, 0] == pytest.approx(1.0, abs=1e-6)

    def test_not_positive_definite(self):
        degenerate = StatModel(
            model_id="degenerate",
            param_space=ParamSpace(box=((0.0, 1.0),)),
            obs_space=FiniteObs(atoms=(0.0,)),
            log_lik=lambda y, t: 0.0,
            sampler=lambda t, rng, size=None: 0.0,
            fisher_analytic=lambda t: np.array([[-1.0]]),
        )
        with pytest.raises(NotPositiveDefinite):
            M.fisher_information(degenerate, 0.5)

    @pytest.mark.parametrize("name", sorted(ALL_MODELS))
    def test_analytic_matches_numeric_on_random_points(self, name):
        model, draw = ALL_MODELS[name]
        rng = np.random.default_rng(2024)
        for _ in range(20):
            theta = draw(rng)
            exact = M.fisher_information(model, theta)
            numeric = M.fisher_numeric(model, theta)
            scale = 1.0 + float(np.linalg.norm(numeric))
            assert float(np.linalg.norm(exact - numeric)) <= 1e-6 * scale


class TestScore:
    def test_score_vanishes_at_sample_mean(self, gauss1):
        stat = M.score_stat(gauss1, [0.42], 0.42)
        assert stat.s_k[0] == pytest.approx(0.0, abs=1e-14)

    def test_bernoulli_one_obs(self, bern):
        assert M.score_stat(bern, [1], 0.5).s_k[0] == pytest.approx(2.0, abs=1e-12)

    def test_bernoulli_cancellation(self, bern):
        assert M.score_stat(bern, [1, 0], 0.5).s_k[0] == pytest.approx(0.0, abs=1e-12)

    def test_scaling_by_sqrt_k(self, bern):
        one = M.score_stat(bern, [1], 0.3).s_k[0]
        four = M.score_stat(bern, [1, 1, 1, 1], 0.3).s_k[0]
        assert four == pytest.approx(4 * one / math.sqrt(4), rel=1e-12)

    def test_finite_difference_fallback(self, gauss1):
        bare = StatModel(
            model_id="bare",
            param_space=gauss1.param_space,
            obs_space=gauss1.obs_space,
            log_lik=gauss1.log_lik,
            sampler=gauss1.sampler,
        )
        got = M.score_stat(bare, [1.3], 0.4).s_k[0]
        assert got == pytest.approx(1.3 - 0.4, rel=1e-8)

    @pytest.mark.parametrize("name", ["bernoulli", "binomial10"])
    def test_score_identity_finite_models(self, name):
        # sum_y score(y) * lik(y) = 0 exactly for finite observation spaces
        model, _ = ALL_MODELS[name]
        for theta in (0.2, 0.5, 0.77):
            total = sum(
                math.exp(float(model.log_lik(y, theta))) * float(model.score(y, theta)[0])
                for y in model.obs_space.atoms)
            assert total == pytest.approx(0.0, abs=1e-10)

    @pytest.mark.parametrize("name", ["bernoulli", "binomial10"])
    def test_information_identity_finite_models(self, name):
        # E[score^2] equals -E[Hessian] by exact enumeration
        model, _ = ALL_MODELS[name]
        for theta in (0.23, 0.5, 0.81):
            outer = sum(
                math.exp(float(model.log_lik(y, theta))) * float(model.score(y, theta)[0]) ** 2
                for y in model.obs_space.atoms)
            neg_hess = M.fisher_numeric(model, theta)[0, 0]
            assert outer == pytest.approx(neg_hess, abs=1e-8)


class TestSubgaussian:
    def test_bernoulli_passes_at_small_sigma(self, bern):
        # two-atom enumeration: both outcomes give ||score||^2 = 4 at theta=1/2
        diag = M.subgaussian_diagnostic(bern, 0.5, 0.1, 2000, seed=0)
        assert diag.estimate == pytest.approx(math.exp(0.4), rel=1e-12)
        assert diag.passes

    def test_bernoulli_fails_at_larger_sigma(self, bern):
        diag = M.subgaussian_diagnostic(bern, 0.5, 0.2, 2000, seed=0)
        assert diag.estimate == pytest.approx(math.exp(0.8), rel=1e-12)
        assert not diag.passes

    def test_gauss_moment(self, gauss1):
        # E[exp(s z^2)] = (1 - 2s)^(-1/2); heavy-tailed at s = 1/4, so the
        # tolerance is loose and the seed fixed
        diag = M.subgaussian_diagnostic(gauss1, 0.0, 0.25, 400_000, seed=7)
        assert diag.estimate == pytest.approx(math.sqrt(2.0), abs=0.05)
        assert diag.passes

    def test_diverges_for_huge_sigma(self, gauss1):
        with pytest.raises(EstimateDiverged):
            M.subgaussian_diagnostic(gauss1, 0.0, 60.0, 5000, seed=3)

    def test_sample_floor(self, bern):
        with pytest.raises(DomainError):
            M.subgaussian_diagnostic(bern, 0.5, 0.1, 999, seed=0)


class TestModelIds:
    def test_roundtrip(self):
        assert M.model_from_id("bernoulli").model_id == "bernoulli"
        assert M.model_from_id("binomial:n=10").model_id == "binomial:n=10"
        assert M.model_from_id("gauss-loc:sigma=1.0").model_id == "gauss-loc:sigma=1"

    def test_unknown_and_malformed(self):
        with pytest.raises(IdParseError):
            M.model_from_id("cauchy")
        with pytest.raises(IdParseError):
            M.model_from_id("binomial")
        with pytest.raises(IdParseError):
            M.model_from_id("binomial:n=2.5")
        with pytest.raises(IdParseError):
            M.model_from_id("gauss-loc:sigma=1.0,extra=2")

    def test_sampler_matches_model(self):
        rng = np.random.default_rng(5)
        model = M.model_from_id("binomial:n=10")
        draws = model.sampler(0.3, rng, 20_000)
        assert draws.mean() == pytest.approx(3.0, abs=0.05)
