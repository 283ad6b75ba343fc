import math

import numpy as np
import pytest

from refprior import (
    alpha_divergence,
    bernoulli,
    beta_prior,
    gauss_location,
    kl_generator,
    power_divergence,
    uniform_prior,
)
from refprior.models import ContinuousObs, ParamSpace, StatModel
from refprior.quadrature import ThetaGrid


@pytest.fixture(scope="session")
def bern():
    return bernoulli()


@pytest.fixture(scope="session")
def gauss1():
    return gauss_location(1.0)


@pytest.fixture(scope="session")
def unit_uniform():
    return uniform_prior()


@pytest.fixture(scope="session")
def arcsine():
    return beta_prior(0.5, 0.5)


@pytest.fixture(scope="session")
def alpha_half():
    return alpha_divergence(0.5)


@pytest.fixture(scope="session")
def power_half():
    return power_divergence(1.0, -0.5)


@pytest.fixture(scope="session")
def kl():
    return kl_generator()


def _log_sin_from_dist(log_dist: np.ndarray) -> np.ndarray:
    # sin(d) evaluated from a stably-stored log distance; exact for tiny d
    return np.log(np.sin(np.exp(log_dist)))


def make_phi_bernoulli() -> StatModel:
    """Bernoulli reparameterized by theta = sin^2(phi), phi in (0, pi/2).

    Fisher information is the constant 4 (the arcsine transform flattens it),
    which is what makes this the canonical invariance check.
    """

    def log_lik(y, phi):
        phi = np.asarray(phi, dtype=float)
        return 2.0 * (y * np.log(np.sin(phi)) + (1.0 - y) * np.log(np.cos(phi)))

    def score(y, phi):
        return np.array([2.0 * y / np.tan(phi) - 2.0 * (1.0 - y) * np.tan(phi)])

    def sampler(phi, rng, size=None):
        theta = math.sin(phi) ** 2
        if size is None:
            return float(rng.random() < theta)
        return (rng.random(size) < theta).astype(float)

    def log_det_fisher_grid(grid: ThetaGrid):
        return np.full(grid.size, math.log(4.0))

    return StatModel(
        model_id="bernoulli-phi",
        param_space=ParamSpace(box=((0.0, math.pi / 2.0),)),
        obs_space=ContinuousObs(dim=1),  # irrelevant for these tests
        log_lik=log_lik,
        sampler=sampler,
        score=score,
        fisher_analytic=lambda phi: np.array([[4.0]]),
        log_det_fisher=lambda phi: np.full(np.asarray(phi, dtype=float).shape, math.log(4.0)),
        log_det_fisher_grid=log_det_fisher_grid,
    )


def pushforward_beta_to_phi(a: float, b: float):
    """The phi-density of T = sin^2(Phi) with T ~ Beta(a, b), as a Prior."""
    from refprior.priors import FamilyTag, Prior
    from refprior.specfun import log_beta

    log_b = log_beta(a, b)

    def log_density(phi):
        phi = np.asarray(phi, dtype=float)
        s, c = np.sin(phi), np.cos(phi)
        return ((a - 1.0) * 2.0 * np.log(s) + (b - 1.0) * 2.0 * np.log(c)
                - log_b + np.log(2.0 * s * c))

    def log_density_grid(grid: ThetaGrid):
        log_sin = _log_sin_from_dist(grid.log_dlo)
        log_cos = _log_sin_from_dist(grid.log_dhi)
        return ((a - 1.0) * 2.0 * log_sin + (b - 1.0) * 2.0 * log_cos
                - log_b + math.log(2.0) + log_sin + log_cos)

    def sampler(rng, size=None):
        draws = rng.beta(a, b, size)
        return np.arcsin(np.sqrt(draws))

    return Prior(
        prior_id=f"beta-pushforward:a={a:g},b={b:g}",
        support=((0.0, math.pi / 2.0),),
        log_density=log_density,
        normalized=True,
        family=FamilyTag("custom", (("origin", "beta-sin2"),)),
        sampler=sampler,
        log_density_grid=log_density_grid,
    )
