import numpy as np
import pytest

from gsrisk import (HeavyTail, MixtureClaim, PenaltyFunction, build_model,
                    exponential_ph)
from gsrisk.fluid_map import det_polynomial
from gsrisk.scale import base_scale_matrix
from gsrisk.spectral import build_spectral

PARETO = HeavyTail("pareto", (2.0, 1.0))


def make_model_a(eps=0.05, q=0.1):
    """Reference desk-scale model: unit premium, exp(1) claims at rate 1,
    exp(2) gains at rate 0.5, Pareto tail (1+x)^-2."""
    claims = MixtureClaim(exponential_ph(1.0), PARETO, eps)
    return build_model(1.0, 1.0, claims, lambda_plus=0.5,
                       gains=exponential_ph(2.0), q=q)


def make_cl_model(lam=0.8, eps=0.0, q=0.0):
    """Classical Cramer-Lundberg model: no gains, exp(1) claims."""
    claims = MixtureClaim(exponential_ph(1.0), PARETO, eps)
    return build_model(1.0, lam, claims, q=q)


@pytest.fixture(scope="session")
def model_a():
    return make_model_a()


@pytest.fixture(scope="session")
def model_a_pipeline(model_a):
    detp = det_polynomial(model_a)
    sp = build_spectral(model_a, detp)
    W = base_scale_matrix(model_a, detp)
    return model_a, detp, sp, W


@pytest.fixture(scope="session")
def cl_model():
    return make_cl_model()


@pytest.fixture
def unit_penalty():
    return PenaltyFunction.constant(1.0)


def random_valid_model(rng: np.random.Generator, q=None):
    """A random model satisfying the safety loading condition."""
    rate_c = rng.uniform(0.5, 2.0)
    rate_g = rng.uniform(1.0, 3.0)
    lam_m = rng.uniform(0.5, 1.5)
    lam_p = rng.choice([0.0, rng.uniform(0.2, 1.0)])
    eps = rng.uniform(0.0, 0.15)
    a = rng.uniform(1.5, 3.0)
    ht = HeavyTail("pareto", (a, rng.uniform(0.5, 2.0)))
    claims = MixtureClaim(exponential_ph(rate_c), ht, eps)
    mean = claims.mean(eps)
    c = 1.25 * lam_m * mean + 0.1
    if lam_p > 0:
        gains = exponential_ph(rate_g)
    else:
        gains = None
    qq = rng.uniform(0.05, 0.3) if q is None else q
    return build_model(c, lam_m, claims, lambda_plus=lam_p, gains=gains, q=qq)
