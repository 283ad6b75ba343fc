import math

import numpy as np
import pytest

from math import erf, lgamma

from refprior import estimators as E
from refprior import models as M
from refprior import priors as P
from refprior.divergences import alpha_divergence, kl_generator, power_divergence
from refprior.errors import DomainError, NormalizationError
from refprior.estimators import MIEstimate, RatioSample
from refprior.priors import FamilyTag, Prior
from refprior.specfun import beta_entropy, log_binom


def brute_force_bernoulli_mi(k: int, fn, prior_marginal):
    """Independent oracle: dense-trapezoid outer integral, closed-form count
    marginals, direct f evaluation. ``prior_marginal(s)`` returns p(s)."""
    theta = np.linspace(1e-9, 1.0 - 1e-9, 200_001)
    total = np.zeros_like(theta)
    for s in range(k + 1):
        lik = theta**s * (1.0 - theta) ** (k - s)
        total += math.comb(k, s) * lik * fn(prior_marginal(s) / lik)
    return float(np.trapezoid(total, theta))


def uniform_marginal(k):
    return lambda s: math.exp(lgamma(s + 1.0) + lgamma(k - s + 1.0) - lgamma(k + 2.0))


class TestExactBernoulliMI:
    def test_uniform_k1_kl(self, unit_uniform, kl):
        est = E.exact_bernoulli_mi(unit_uniform, 1, kl)
        assert est.value == pytest.approx(math.log(2.0) - 0.5, abs=1e-10)
        assert est.method == "exact_count"
        assert est.stderr == 0.0

    def test_uniform_k1_alpha(self, unit_uniform, alpha_half):
        # closed form of the integral of 4 - 2 sqrt(2) (sqrt(t) + sqrt(1-t))
        est = E.exact_bernoulli_mi(unit_uniform, 1, alpha_half)
        assert est.value == pytest.approx(4.0 - 8.0 * math.sqrt(2.0) / 3.0, abs=1e-10)

    @pytest.mark.parametrize("k", [2, 8])
    def test_against_brute_force(self, unit_uniform, alpha_half, k):
        fn = lambda x: -4.0 * np.sqrt(x) + 2.0 * x + 2.0
        oracle = brute_force_bernoulli_mi(k, fn, uniform_marginal(k))
        est = E.exact_bernoulli_mi(unit_uniform, k, alpha_half)
        assert est.value == pytest.approx(oracle, abs=5e-8)

    def test_brute_force_power(self, unit_uniform, power_half):
        oracle = brute_force_bernoulli_mi(8, lambda x: 1.0 / np.sqrt(x), uniform_marginal(8))
        est = E.exact_bernoulli_mi(unit_uniform, 8, power_half)
        assert est.value == pytest.approx(oracle, abs=5e-8)

    def test_near_point_mass_vanishes(self, alpha_half):
        spike = P.beta_prior(1e4, 1e4)
        assert E.exact_bernoulli_mi(spike, 4, alpha_half).value <= 1e-3

    @pytest.mark.parametrize("a", [0.3, 0.5, 0.7])
    def test_nonnegativity_of_normalized_generators(self, unit_uniform, arcsine, a):
        gen = alpha_divergence(a)
        for prior in (unit_uniform, arcsine):
            for k in (1, 4, 16):
                assert E.exact_bernoulli_mi(prior, k, gen).value >= -1e-9

    def test_requires_normalized_prior(self, alpha_half):
        improper = Prior(
            prior_id="improper",
            support=((0.0, 1.0),),
            log_density=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
            normalized=False,
            family=FamilyTag("custom"),
        )
        with pytest.raises(NormalizationError):
            E.exact_bernoulli_mi(improper, 2, alpha_half)

    def test_rejects_bad_k(self, unit_uniform, kl):
        with pytest.raises(DomainError):
            E.exact_bernoulli_mi(unit_uniform, 0, kl)


class TestMarginalLogDensity:
    def test_bernoulli_uniform_single(self, bern, unit_uniform):
        assert E.marginal_log_density(bern, unit_uniform, [1]) == pytest.approx(
            math.log(0.5), abs=1e-10)

    def test_bernoulli_uniform_pair(self, bern, unit_uniform):
        assert E.marginal_log_density(bern, unit_uniform, [1, 1]) == pytest.approx(
            math.log(1.0 / 3.0), abs=1e-10)

    def test_gauss_flat_prior(self, gauss1):
        prior = P.uniform_prior(-10.0, 10.0)
        got = E.marginal_log_density(gauss1, prior, [0.0])
        assert got == pytest.approx(-math.log(20.0), abs=1e-9)

    @pytest.mark.parametrize("k", [1, 5, 12])
    def test_normalization_over_all_sequences(self, bern, arcsine, unit_uniform, k):
        # sum over all 2^k sequences of the marginal equals one; count
        # sufficiency turns that into a (k+1)-term sum with C(k,s) weights
        for prior in (unit_uniform, arcsine):
            total = 0.0
            for s in range(k + 1):
                ys = [1] * s + [0] * (k - s)
                log_m = E.marginal_log_density(bern, prior, ys)
                total += math.exp(log_binom(k, s) + log_m)
            assert total == pytest.approx(1.0, abs=1e-8)

    def test_matches_count_table(self, bern, arcsine):
        table = E.count_log_marginals(arcsine, 6)
        for s in (0, 3, 6):
            ys = [1] * s + [0] * (6 - s)
            assert E.marginal_log_density(bern, arcsine, ys) == pytest.approx(
                float(table[s]), abs=1e-9)


class TestMCDivergence:
    def test_symmetric_coin_is_exactly_zero(self, bern, unit_uniform, kl):
        # at theta = 1/2, k = 1 both outcomes give marginal = likelihood
        value, stderr = E.mc_divergence(bern, unit_uniform, 0.5, 1, kl, 400, 100, seed=11)
        assert value == pytest.approx(0.0, abs=1e-12)
        assert stderr == pytest.approx(0.0, abs=1e-12)

    def test_biased_coin_enumeration_oracle(self, bern, unit_uniform, kl):
        # two-outcome enumeration: 0.9 log(1.8) + 0.1 log(0.2)
        oracle = 0.9 * math.log(1.8) + 0.1 * math.log(0.2)
        value, stderr = E.mc_divergence(bern, unit_uniform, 0.9, 1, kl, 4000, 100, seed=11)
        assert value == pytest.approx(oracle, abs=3.0 * stderr)

    @pytest.mark.parametrize("a", [0.3, 0.7])
    def test_nonnegative_within_noise(self, bern, unit_uniform, a):
        gen = alpha_divergence(a)
        for theta in (0.2, 0.5, 0.8):
            value, stderr = E.mc_divergence(bern, unit_uniform, theta, 4, gen,
                                            400, 100, seed=5)
            assert value >= -3.0 * stderr - 1e-12

    def test_budget_floor(self, bern, unit_uniform, kl):
        with pytest.raises(DomainError):
            E.mc_divergence(bern, unit_uniform, 0.5, 1, kl, 99, 100, seed=0)
        with pytest.raises(DomainError):
            E.mc_divergence(bern, unit_uniform, 0.5, 1, kl, 100, 99, seed=0)

    def test_gauss_generic_path(self, gauss1, kl):
        # KL(N(theta,1) || marginal) for a flat-ish prior: positive, moderate
        prior = P.uniform_prior(-10.0, 10.0)
        value, stderr = E.mc_divergence(gauss1, prior, 0.0, 1, kl, 100, 100, seed=9)
        assert value > 0.0
        assert stderr < 0.2

    def test_d2_path_runs(self, kl):
        model = M.gauss_location_scale()
        prior = P.uniform_box_prior(((0.0, 1.0), (1.0, 2.0)))
        value, stderr = E.mc_divergence(model, prior, np.array([0.5, 1.5]), 1, kl,
                                        100, 200, seed=3)
        assert math.isfinite(value)
        assert value >= -3.0 * stderr


class TestMCMutualInformation:
    def test_uniform_k1_kl(self, bern, unit_uniform, kl):
        est = E.mc_mutual_information(bern, unit_uniform, 1, kl, 400, 400, 100, seed=5)
        assert est.method == "nested_mc"
        assert est.value == pytest.approx(math.log(2.0) - 0.5, abs=3.0 * est.stderr)

    @pytest.mark.parametrize("seed", [11, 42])
    @pytest.mark.parametrize("k", [1, 8, 32])
    def test_oracle_equivalence_grid(self, bern, unit_uniform, k, seed):
        gens = [kl_generator(), alpha_divergence(0.3), alpha_divergence(0.5),
                alpha_divergence(0.7), power_divergence(1.0, -0.5)]
        for gen in gens:
            exact = E.exact_bernoulli_mi(unit_uniform, k, gen)
            est = E.mc_mutual_information(bern, unit_uniform, k, gen, 200, 200, 100,
                                          seed=seed)
            assert est.value == pytest.approx(exact.value, abs=3.0 * est.stderr)

    def test_gauss_against_nested_quadrature_oracle(self, gauss1, unit_uniform, kl):
        # independent oracle: dense trapezoid over (theta, y) with the
        # marginal expressed through the error function
        thetas = np.linspace(0.0, 1.0, 2001)
        ys = np.linspace(-9.0, 10.0, 8001)
        std_cdf = np.vectorize(lambda x: 0.5 * (1.0 + erf(x / math.sqrt(2.0))))
        p_y = std_cdf(ys) - std_cdf(ys - 1.0)
        rows = np.empty(thetas.size)
        for i, th in enumerate(thetas):
            lik = np.exp(-0.5 * (ys - th) ** 2) / math.sqrt(2.0 * math.pi)
            integrand = lik * (np.log(np.maximum(lik, 1e-300))
                               - np.log(np.maximum(p_y, 1e-300)))
            rows[i] = np.trapezoid(integrand, ys)
        oracle = float(np.trapezoid(rows, thetas))
        est = E.mc_mutual_information(gauss1, unit_uniform, 1, kl, 100, 100, 100, seed=21)
        assert est.value == pytest.approx(oracle, abs=3.0 * est.stderr)

    def test_bit_identical_determinism(self, bern, unit_uniform, alpha_half):
        a = E.mc_mutual_information(bern, unit_uniform, 8, alpha_half, 200, 200, 100,
                                    seed=42, threads=1)
        b = E.mc_mutual_information(bern, unit_uniform, 8, alpha_half, 200, 200, 100,
                                    seed=42, threads=4)
        assert (a.value, a.stderr) == (b.value, b.stderr)

    def test_needs_sampler(self, bern, alpha_half):
        no_sampler = Prior(
            prior_id="dense-only",
            support=((0.0, 1.0),),
            log_density=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
            normalized=True,
            family=FamilyTag("custom"),
        )
        with pytest.raises(DomainError):
            E.mc_mutual_information(bern, no_sampler, 1, alpha_half, 100, 100, 100, seed=0)


class TestFubiniIdentity:
    @pytest.mark.parametrize("k", [4, 8])
    def test_two_sides_agree(self, unit_uniform, kl, k):
        # y-side: for the uniform prior the count marginal is uniform and
        # KL(posterior || prior) is minus the entropy of Beta(s+1, k-s+1);
        # everything on this side comes from gamma-function identities only
        y_side = sum(-beta_entropy(s + 1.0, k - s + 1.0) for s in range(k + 1)) / (k + 1)
        theta_side = E.exact_bernoulli_mi(unit_uniform, k, kl).value
        assert theta_side == pytest.approx(y_side, abs=1e-6)


class TestPosteriorRatioStat:
    def test_gauss_surrogate_is_tight(self, gauss1):
        prior = P.uniform_prior(-5.0, 5.0)
        samples = E.posterior_ratio_stat(gauss1, prior, 0.0, 100, 100, seed=11)
        devs = [abs(math.exp(s.log_ratio - s.laplace_log) - 1.0) for s in samples]
        assert np.mean([d < 0.2 for d in devs]) >= 0.8
        assert all(s.s_quad >= 0.0 for s in samples)

    def test_bernoulli_large_k(self, bern, unit_uniform):
        samples = E.posterior_ratio_stat(bern, unit_uniform, 0.5, 10_000, 100, seed=2)
        med = np.median([abs(s.log_ratio - s.laplace_log) for s in samples])
        assert med < 0.05

    def test_theta_must_be_interior(self, bern, arcsine):
        restricted = P.restrict_normalize(arcsine, (0.2, 0.8))
        with pytest.raises(DomainError):
            E.posterior_ratio_stat(bern, restricted, 0.9, 10, 10, seed=0)

    def test_deterministic(self, bern, unit_uniform):
        a = E.posterior_ratio_stat(bern, unit_uniform, 0.4, 50, 64, seed=9, threads=1)
        b = E.posterior_ratio_stat(bern, unit_uniform, 0.4, 50, 64, seed=9, threads=4)
        assert [s.log_ratio for s in a] == [s.log_ratio for s in b]


class TestResultTypes:
    def test_mi_estimate_stderr_invariant(self):
        MIEstimate(value=1.0, stderr=0.0, k=1, method="exact_count")
        MIEstimate(value=1.0, stderr=0.1, k=1, method="nested_mc")
        with pytest.raises(DomainError):
            MIEstimate(value=1.0, stderr=0.1, k=1, method="exact_count")
        with pytest.raises(DomainError):
            MIEstimate(value=1.0, stderr=0.0, k=1, method="nested_mc")

    def test_ratio_sample_must_be_finite(self):
        with pytest.raises(Exception):
            RatioSample(k=1, theta=0.5, log_ratio=math.nan, laplace_log=0.0, s_quad=0.0)
