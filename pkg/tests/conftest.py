from __future__ import annotations

import numpy as np
import pytest

from tiltprice.market import BasisRiskModel, Coefficient, simulate
from tiltprice.pricing import ClaimSpec


def gbm_model(rho: float = 0.9) -> BasisRiskModel:
    """The running example: lambda = 0.4 constant, Y a geometric Brownian motion."""
    return BasisRiskModel(
        mu=Coefficient("constant", 0.08),
        sigma=Coefficient("constant", 0.2),
        b=Coefficient("proportional", 0.03),
        a=Coefficient("proportional", 0.3),
        rho=rho,
        y0=1.0,
        T=1.0,
        state_lo=0.0,
        state_hi=np.inf,
    )


def flat_lambda_model() -> BasisRiskModel:
    """mu = 0 so lambda = 0: Z(rho) = 1 and I2 = 0 on every path."""
    return BasisRiskModel(
        mu=Coefficient("constant", 0.0),
        sigma=Coefficient("constant", 0.2),
        b=Coefficient("proportional", 0.03),
        a=Coefficient("proportional", 0.3),
        rho=0.0,
        y0=1.0,
        T=1.0,
        state_lo=0.0,
        state_hi=np.inf,
    )


@pytest.fixture(scope="session")
def gbm():
    return gbm_model()


@pytest.fixture(scope="session")
def gbm_batch(gbm):
    return simulate(gbm, n_paths=40_000, n_steps=100, seed=20240601)


@pytest.fixture(scope="session")
def flat_batch():
    return simulate(flat_lambda_model(), n_paths=20_000, n_steps=50, seed=99)


@pytest.fixture(scope="session")
def acceptance_batch(gbm):
    return simulate(gbm, n_paths=200_000, n_steps=200, seed=20240811)


@pytest.fixture(scope="session")
def claim_min2():
    return ClaimSpec.capped_linear(2.0, (0.0, np.inf))
