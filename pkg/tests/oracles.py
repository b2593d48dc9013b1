"""Independent oracles the tests freeze their expected values from.

Nothing here may call into the code path it checks: two-point quantities are
closed forms written out directly, the price oracle bisects quotes of the
value function instead of using the price formula, and the Girsanov oracle
simulates the drift-shifted dynamics outright.
"""

from __future__ import annotations

import math

import numpy as np

from tiltprice import exp_value_function
from tiltprice.market import BasisRiskModel, simulate


def two_point_tilt_mean(beta: float) -> float:
    """g(beta) for payoffs {0, 1} with equal weights: e^-beta/(1+e^-beta)."""
    return math.exp(-beta) / (1.0 + math.exp(-beta))


def two_point_beta(p: float) -> float:
    """Inverse of the two-point tilt mean: log((1-p)/p)."""
    return math.log((1.0 - p) / p)


def two_point_pi(beta: float) -> float:
    """-(1/beta) log((1 + e^-beta)/2) for payoffs {0, 1} with equal mass."""
    if beta == 0.0:
        return 0.5
    return -math.log(0.5 * (1.0 + math.exp(-beta))) / beta


def two_point_pm(beta: float) -> float:
    """Tilted mean e^-beta/(1+e^-beta) for payoffs {0, 1} with equal mass."""
    return math.exp(-beta) / (1.0 + math.exp(-beta))


def two_point_beta_pi_derivative(beta: float, step: float = 1e-6) -> float:
    """Central difference of beta*p_i(beta) from the closed form."""
    f = lambda b: -math.log(0.5 * (1.0 + math.exp(-b)))
    return (f(beta + step) - f(beta - step)) / (2.0 * step)


def price_by_bisection(batch, alpha, q, claim, rho, tol=1e-12) -> float:
    """Solve u(x) = u(x - q*p, q) for p by bisection on the value function.

    Uses only exp_value_function quotes, never the closed-form price, so it
    validates the price algebra independently.
    """
    x = 0.0
    target = exp_value_function(batch, alpha, x, 0.0, claim, rho).value

    def excess(p: float) -> float:
        return exp_value_function(batch, alpha, x - q * p, q, claim, rho).value - target

    lo, hi = claim.inf_h - 1.0, claim.sup_h + 1.0
    f_lo, f_hi = excess(lo), excess(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    assert f_lo * f_hi < 0.0, "price oracle bracket does not straddle the root"
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi or hi - lo <= tol:
            break
        if excess(mid) * f_lo > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def girsanov_shifted_mean(model: BasisRiskModel, n_paths, n_steps, seed):
    """Mean of Y_T simulated directly under the drift b - lambda*a.

    For constant lambda this is the law of Y under the measure with density
    Z(1), so it cross-checks Q-weighted averages from an independent angle.
    """
    lam0 = float(model.lam(np.asarray([model.y0]))[0])
    kind = model.a.kind
    shifted_b_c = {
        "constant": model.b.c - lam0 * model.a.c,
        "proportional": model.b.c - lam0 * model.a.c,
    }[kind]
    from tiltprice.market import Coefficient

    shifted = BasisRiskModel(
        mu=model.mu, sigma=model.sigma,
        b=Coefficient(model.b.kind, shifted_b_c),
        a=model.a, rho=model.rho, y0=model.y0, T=model.T,
        state_lo=model.state_lo, state_hi=model.state_hi,
    )
    assert model.b.kind == model.a.kind, "oracle assumes matching drift/vol forms"
    batch = simulate(shifted, n_paths, n_steps, seed)
    return batch.y_t


def bootstrap_se(values, weights, n_boot=300, seed=7):
    """Bootstrap standard error of the weighted mean."""
    rng = np.random.default_rng(seed)
    v = np.asarray(values, float)
    w = np.asarray(weights, float)
    n = v.size
    stats = np.empty(n_boot)
    for k in range(n_boot):
        idx = rng.integers(0, n, size=n)
        stats[k] = np.sum(w[idx] * v[idx]) / np.sum(w[idx])
    return float(np.std(stats, ddof=1))
