import math

import numpy as np
import pytest

from conftest import make_phi_bernoulli
from refprior import models as M
from refprior import priors as P
from refprior.errors import DomainError, IdParseError, InfeasibleMoment, NormalizationError, ZeroMass
from refprior.priors import FamilyTag, Prior
from refprior.quadrature import log_integrate


class TestRestrictNormalize:
    def test_uniform_restriction(self, unit_uniform):
        restricted = P.restrict_normalize(unit_uniform, (0.1, 0.9))
        assert np.exp(restricted.log_density(0.5)) == pytest.approx(1.25, rel=1e-12)
        assert restricted.log_density(0.05) == -np.inf

    def test_arcsine_restriction_matches_cdf(self, arcsine):
        # normalizer from the arcsine distribution function
        mass = (2 / math.pi) * (math.asin(math.sqrt(0.9)) - math.asin(math.sqrt(0.1)))
        restricted = P.restrict_normalize(arcsine, (0.1, 0.9))
        expected = (1.0 / (math.pi * 0.5)) / mass
        assert np.exp(restricted.log_density(0.5)) == pytest.approx(expected, rel=1e-10)

    def test_idempotent(self, unit_uniform):
        once = P.restrict_normalize(unit_uniform, (0.1, 0.9))
        twice = P.restrict_normalize(once, (0.1, 0.9))
        grid = np.linspace(0.11, 0.89, 17)
        np.testing.assert_allclose(twice.log_density(grid), once.log_density(grid),
                                   atol=1e-12)

    def test_mass_is_one(self, arcsine):
        restricted = P.restrict_normalize(arcsine, (0.2, 0.7))
        total = log_integrate(lambda g: P.density_on_grid(restricted, g),
                              0.2, 0.7, grid_aware=True)
        assert total == pytest.approx(0.0, abs=1e-8)

    def test_region_outside_support(self, unit_uniform):
        with pytest.raises(DomainError):
            P.restrict_normalize(unit_uniform, (0.5, 1.5))

    def test_zero_mass(self):
        hole = Prior(
            prior_id="hole",
            support=((0.0, 1.0),),
            log_density=lambda t: np.where(np.asarray(t) < 0.5, 0.0, -np.inf),
            normalized=False,
            family=FamilyTag("custom"),
        )
        with pytest.raises(ZeroMass):
            P.restrict_normalize(hole, (0.6, 0.9))

    def test_2d_box_restriction(self):
        prior = P.uniform_box_prior(((0.0, 2.0), (0.0, 2.0)))
        restricted = P.restrict_normalize(prior, ((0.0, 1.0), (0.0, 1.0)))
        assert np.exp(restricted.log_density(np.array([0.5, 0.5]))) == pytest.approx(
            1.0, rel=1e-8)


class TestJeffreys:
    def test_bernoulli_is_arcsine(self, bern, arcsine):
        jeff = P.jeffreys_prior(bern)
        grid = np.linspace(0.001, 0.999, 1001)
        diff = np.abs(np.exp(jeff.log_density(grid)) - np.exp(arcsine.log_density(grid)))
        assert float(diff.max()) <= 1e-8

    def test_gauss_location_is_uniform(self, gauss1):
        jeff = P.jeffreys_prior(gauss1, (0.0, 1.0))
        for theta in (0.1, 0.5, 0.9):
            assert np.exp(jeff.log_density(theta)) == pytest.approx(1.0, rel=1e-10)

    def test_restricted_normalizer(self, bern):
        # 2 / integral of (t(1-t))^(-1/2) over [0.1, 0.9]
        jeff = P.jeffreys_prior(bern, (0.1, 0.9))
        normalizer = (math.asin(math.sqrt(0.9)) - math.asin(math.sqrt(0.1))) * 2.0
        assert np.exp(jeff.log_density(0.5)) == pytest.approx(2.0 / normalizer, rel=1e-10)

    def test_reparametrization_invariance(self, bern):
        # push the theta-space Jeffreys prior through theta = sin^2(phi) and
        # compare with the Jeffreys prior computed natively in phi
        phi_model = make_phi_bernoulli()
        jeff_phi = P.jeffreys_prior(phi_model)
        jeff_theta = P.jeffreys_prior(bern)
        phis = np.linspace(0.05, math.pi / 2 - 0.05, 401)
        thetas = np.sin(phis) ** 2
        pushforward = np.exp(jeff_theta.log_density(thetas)) * np.abs(np.sin(2 * phis))
        native = np.exp(jeff_phi.log_density(phis))
        assert float(np.max(np.abs(pushforward - native))) <= 1e-6

    def test_unbounded_box_needs_compact(self, gauss1):
        with pytest.raises((DomainError, ValueError)):
            P.jeffreys_prior(gauss1)

    def test_d2_location_scale(self):
        model = M.gauss_location_scale()
        jeff = P.jeffreys_prior(model, ((0.0, 1.0), (1.0, 2.0)))
        # sqrt(det I) = sqrt(2)/s^2, normalizer sqrt(2) * (1 - 1/2) -> density 2/s^2
        got = np.exp(jeff.log_density(np.array([0.5, 1.5])))
        assert got == pytest.approx(2.0 / 1.5**2, rel=1e-8)

    def test_sampler_moments(self, bern):
        jeff = P.jeffreys_prior(bern)
        rng = np.random.default_rng(11)
        draws = jeff.sampler(rng, 100_000)
        assert draws.mean() == pytest.approx(0.5, abs=0.01)
        assert draws.var() == pytest.approx(0.125, abs=0.01)


class TestBetaFamilies:
    def test_uniform_is_beta11(self, unit_uniform):
        beta11 = P.beta_prior(1.0, 1.0)
        grid = np.linspace(0.01, 0.99, 21)
        np.testing.assert_allclose(beta11.log_density(grid),
                                   unit_uniform.log_density(grid), atol=1e-14)

    def test_arcsine_density_midpoint(self, arcsine):
        assert np.exp(arcsine.log_density(0.5)) == pytest.approx(2.0 / math.pi, rel=1e-13)

    def test_mean(self):
        prior = P.beta_prior(2.0, 1.0)
        a, b = prior.beta_params
        assert a / (a + b) == pytest.approx(2.0 / 3.0, abs=1e-15)

    def test_domain(self):
        with pytest.raises(DomainError):
            P.beta_prior(0.0, 1.0)
        with pytest.raises(DomainError):
            P.beta_prior(1.0, -2.0)

    def test_mean_constrained(self):
        prior = P.mean_constrained_beta(1.5, 1.0)
        assert prior.beta_params == (1.0, 0.5)
        prior = P.mean_constrained_beta(2.0, 0.7)
        a, b = prior.beta_params
        assert a / (a + b) == pytest.approx(0.5, abs=1e-15)
        prior = P.mean_constrained_beta(1.5, 0.4)
        assert prior.beta_params == pytest.approx((0.4, 0.2))
        with pytest.raises(DomainError):
            P.mean_constrained_beta(1.0, 0.5)

    def test_variance_constrained(self):
        prior = P.variance_constrained_beta(3.0 / 16.0, 0.5)
        assert prior.beta_params == pytest.approx((1.0 / 6.0, 1.0 / 6.0), rel=1e-12)
        prior = P.variance_constrained_beta(3.0 / 16.0, 0.26)
        assert prior.beta_params == pytest.approx((0.006794666667, 0.019338666667), rel=1e-8)
        with pytest.raises(InfeasibleMoment):
            P.variance_constrained_beta(0.25, 0.5)

    def test_variance_exact(self):
        for V, m in ((0.1, 0.4), (0.02, 0.7), (3.0 / 16.0, 0.5)):
            a, b = P.variance_constrained_beta(V, m).beta_params
            var = a * b / ((a + b) ** 2 * (a + b + 1.0))
            assert var == pytest.approx(V, rel=1e-12)

    @pytest.mark.parametrize("a,b", [(0.5, 0.5), (2.0, 5.0), (0.3, 1.7)])
    def test_sampler_moments(self, a, b):
        prior = P.beta_prior(a, b)
        rng = np.random.default_rng(17)
        n = 100_000
        draws = prior.sampler(rng, n)
        mean = a / (a + b)
        var = a * b / ((a + b) ** 2 * (a + b + 1.0))
        se_mean = math.sqrt(var / n)
        assert draws.mean() == pytest.approx(mean, abs=4 * se_mean)
        # fourth-moment stderr for the variance estimate
        mu4 = float(np.mean((draws - draws.mean()) ** 4))
        se_var = math.sqrt(max(mu4 - var**2, 0.0) / n)
        assert draws.var() == pytest.approx(var, abs=4 * se_var)


class TestEntropy:
    def test_uniform(self, unit_uniform):
        assert P.prior_entropy(unit_uniform) == pytest.approx(0.0, abs=1e-14)

    def test_arcsine_closed_form(self, arcsine):
        assert P.prior_entropy(arcsine) == pytest.approx(-0.2415644752704904, abs=1e-12)

    def test_beta22(self):
        assert P.prior_entropy(P.beta_prior(2.0, 2.0)) == pytest.approx(-0.1251, abs=1e-4)

    def test_closed_form_vs_mc(self):
        rng = np.random.default_rng(99)
        for seed in range(10):
            a, b = rng.uniform(0.2, 5.0, 2)
            prior = P.beta_prior(a, b)
            closed = P.prior_entropy(prior)
            mc, se = P.entropy_mc(prior, n_samples=200_000, seed=seed)
            assert closed == pytest.approx(mc, abs=3.5 * se)

    def test_mc_requires_sampler(self):
        bare = Prior(
            prior_id="bare",
            support=((0.0, 1.0),),
            log_density=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
            normalized=True,
            family=FamilyTag("custom"),
        )
        with pytest.raises(DomainError):
            P.entropy_mc(bare)

    def test_mc_requires_normalized(self, bern):
        improper = Prior(
            prior_id="improper",
            support=((0.0, 1.0),),
            log_density=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
            normalized=False,
            family=FamilyTag("custom"),
            sampler=lambda rng, size=None: rng.random(size),
        )
        with pytest.raises(NormalizationError):
            P.entropy_mc(improper)


class TestPriorIds:
    def test_uniform(self, bern):
        prior = P.prior_from_id("uniform", bern)
        assert prior.interval == (0.0, 1.0)
        prior = P.prior_from_id("uniform", None, (-5.0, 5.0))
        assert prior.interval == (-5.0, 5.0)

    def test_beta_ids(self):
        prior = P.prior_from_id("beta:a=0.5,b=0.5")
        assert prior.beta_params == (0.5, 0.5)
        prior = P.prior_from_id("mean-beta:c=1.5,lambda=0.4")
        assert prior.beta_params == pytest.approx((0.4, 0.2))
        prior = P.prior_from_id("var-beta:V=0.1875,m=0.5")
        assert prior.beta_params == pytest.approx((1 / 6, 1 / 6), rel=1e-12)

    def test_jeffreys_needs_model(self, bern):
        assert P.prior_from_id("jeffreys", bern).family.kind == "jeffreys"
        with pytest.raises(DomainError):
            P.prior_from_id("jeffreys")

    def test_compact_applies_to_family_ids(self, bern):
        prior = P.prior_from_id("beta:a=2,b=2", bern, (0.1, 0.9))
        assert prior.interval == (0.1, 0.9)
        assert prior.normalized

    def test_unknown(self):
        with pytest.raises(IdParseError):
            P.prior_from_id("cauchy:x=1")
