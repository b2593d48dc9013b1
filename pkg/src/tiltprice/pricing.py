"""Exponential-utility value functions, indifference prices and their limits.

All expectations run through :mod:`tiltprice.montecarlo` in log space: the
value function raises an expectation to the power 1/(1-rho^2), which reaches
500 for rho = 0.999, so nothing here exponentiates before the final step.
Every sweep is meant to reuse one :class:`~tiltprice.market.PathBatch`
(common random numbers); differences of estimates on the same batch then
carry joint standard errors through the influence machinery.

The closed forms implemented here:

* value function  u = -(exp(-alpha*x)/alpha) *
      E[Z(rho) exp(-(1-rho^2)(alpha*q*h(Y_T) + I2/2))]^(1/(1-rho^2))
* price  p = -(log E[Z e^{-(1-rho^2)(alpha*q*h + I2/2)}]
              - log E[Z e^{-(1-rho^2) I2/2}]) / (alpha*q*(1-rho^2)),
  independent of initial wealth
* optimal quantity  q_n(p) = beta_n / (alpha*(1-rho_n^2)) with beta_n the
  exponential-tilt root, and q_n(p)*(1-rho_n^2) -> beta_*/alpha
* large-position limit price: the certainty equivalent
  -(1/(gamma*alpha)) log E_Q[exp(-gamma*alpha*h)]
* the indifference/marginal curves p_i, p_m with
  d/dbeta (beta*p_i(beta)) = p_m(beta) and their gap at beta_*
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import expit

from . import tilt
from .errors import DegenerateParameterError, ValidationError
from .market import PathBatch, log_stochastic_exponential
from .montecarlo import Estimate, difference, log_mean_exp, weighted_mean

__all__ = [
    "ClaimSpec",
    "PriceResult",
    "ArbitrageBounds",
    "QuantityLimitRow",
    "QuantityLimitStudy",
    "DifferentialCheck",
    "exp_value_function",
    "exp_indifference_price",
    "optimal_quantity",
    "quantity_limit_product",
    "limit_price",
    "pi_pm_curves",
    "differential_check",
    "entropy_gap",
    "arbitrage_bounds",
    "fixed_market_price_decay",
]


@dataclass(frozen=True, eq=False)
class ClaimSpec:
    """A bounded continuous payoff h of the terminal non-traded state.

    Use the factory classmethods; ``inf_h``/``sup_h`` are the infimum and
    supremum of h over the state interval and must be finite.
    """

    form: str
    inf_h: float
    sup_h: float
    cap: Optional[float] = None
    threshold: Optional[float] = None
    width: Optional[float] = None
    table: Optional[tuple[np.ndarray, np.ndarray]] = field(default=None, repr=False)

    def __post_init__(self):
        if not (np.isfinite(self.inf_h) and np.isfinite(self.sup_h)):
            raise ValidationError("claim must be bounded on the state interval")
        if self.inf_h > self.sup_h:
            raise ValidationError("claim bounds are inverted")

    @classmethod
    def capped_linear(cls, cap: float, state_interval=(0.0, np.inf)) -> "ClaimSpec":
        """h(y) = min(y, cap)."""
        lo, hi = state_interval
        if not np.isfinite(cap):
            raise ValidationError("cap must be finite")
        if not np.isfinite(min(lo, cap)):
            raise ValidationError("min(y, cap) is unbounded below on this interval")
        return cls(form="capped_linear", cap=cap,
                   inf_h=float(min(lo, cap)), sup_h=float(min(hi, cap)))

    @classmethod
    def smoothed_digital(cls, threshold: float, width: float,
                         state_interval=(0.0, np.inf)) -> "ClaimSpec":
        """Logistic smoothing of the digital 1{y >= threshold}, slope scale ``width``."""
        if not width > 0.0:
            raise ValidationError("smoothing width must be positive")
        lo, hi = state_interval
        inf_h = 0.0 if lo == -np.inf else float(expit((lo - threshold) / width))
        sup_h = 1.0 if hi == np.inf else float(expit((hi - threshold) / width))
        return cls(form="digital", threshold=threshold, width=width,
                   inf_h=inf_h, sup_h=sup_h)

    @classmethod
    def tabulated(cls, y_points, h_values) -> "ClaimSpec":
        """Piecewise-linear continuous claim; constant beyond the table ends."""
        y = np.asarray(y_points, dtype=float)
        h = np.asarray(h_values, dtype=float)
        if y.ndim != 1 or y.shape != h.shape or y.size < 2:
            raise ValidationError("claim table needs two equal-length arrays, >= 2 points")
        if not np.all(np.diff(y) > 0.0):
            raise ValidationError("claim table grid must be strictly increasing")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(h))):
            raise ValidationError("claim table entries must be finite")
        return cls(form="tabulated", table=(y, h),
                   inf_h=float(np.min(h)), sup_h=float(np.max(h)))

    @classmethod
    def constant(cls, value: float) -> "ClaimSpec":
        """h(y) = value everywhere (a degenerate tabulated claim)."""
        return cls.tabulated([0.0, 1.0], [value, value])

    def payoff(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self.form == "capped_linear":
            return np.minimum(y, self.cap)
        if self.form == "digital":
            return expit((y - self.threshold) / self.width)
        return np.interp(y, self.table[0], self.table[1])


@dataclass(frozen=True)
class PriceResult:
    """Per-unit indifference price with its standard error and inputs echo.

    ``x`` is None because exponential-utility prices carry no initial-wealth
    dependence at all.
    """

    price: float
    std_error: float
    n: int
    alpha: float
    q: float
    rho: float
    x: Optional[float] = None
    influence: Optional[np.ndarray] = field(default=None, repr=False, compare=False)


@dataclass(frozen=True)
class ArbitrageBounds:
    """Open interval (inf h, sup h) of arbitrage-free prices."""

    lo: float
    hi: float
    degenerate: bool


@dataclass(frozen=True)
class QuantityLimitRow:
    rho: float
    quantity: float
    product: Estimate   # q_n(p) * (1 - rho_n^2) = beta_n / alpha
    gap: Estimate       # product - target, joint SE from common random numbers


@dataclass(frozen=True)
class QuantityLimitStudy:
    rows: tuple[QuantityLimitRow, ...]
    target: Estimate    # beta_* / alpha at rho = 1


@dataclass(frozen=True)
class DifferentialCheck:
    residual: Estimate  # d/dbeta(beta*p_i) - p_m, central difference
    step: float


def _check_alpha(alpha: float) -> None:
    if not alpha > 0.0:
        raise ValidationError("alpha must be positive")


def _check_rho_open(rho: float) -> None:
    if not -1.0 <= rho <= 1.0:
        raise ValidationError("rho must lie in [-1, 1]")
    if abs(rho) == 1.0:
        raise ValidationError(
            "rho = +-1 makes 1/(1-rho^2) divide by zero; the complete limit "
            "is priced by limit_price on the Q weights"
        )


def exp_value_function(batch: PathBatch, alpha: float, x: float, q: float,
                       claim: ClaimSpec, rho: float) -> Estimate:
    """Exponential-utility value of wealth x plus q units of the claim."""
    _check_alpha(alpha)
    _check_rho_open(rho)
    aq = alpha * q
    omr = 1.0 - rho * rho
    h = claim.payoff(batch.y_t)
    exponents = log_stochastic_exponential(batch, rho) - omr * (aq * h + 0.5 * batch.i2)
    lme = log_mean_exp(exponents)
    with np.errstate(over="ignore"):
        u0 = -float(np.exp(lme.value / omr)) / alpha
        value = float(np.exp(-alpha * x)) * u0
    if np.isfinite(value):
        se = abs(value) * lme.std_error / omr
        influence = (value / omr) * lme.influence
    else:
        se, influence = float("inf"), None
    return Estimate(value, se, lme.n, influence)


def exp_indifference_price(batch: PathBatch, alpha: float, q: float,
                           claim: ClaimSpec, rho: float) -> PriceResult:
    """Per-unit indifference price of q units; no initial-wealth argument.

    The two log-expectations share the batch, so their Monte Carlo noise
    largely cancels in the difference and the standard error reflects that.
    """
    _check_alpha(alpha)
    _check_rho_open(rho)
    if q == 0.0:
        raise ValidationError("position size q must be nonzero")
    aq = alpha * q
    omr = 1.0 - rho * rho
    h = claim.payoff(batch.y_t)
    logz = log_stochastic_exponential(batch, rho)
    l_claim = log_mean_exp(logz - omr * (aq * h + 0.5 * batch.i2))
    l_zero = log_mean_exp(logz - omr * (0.5 * batch.i2))
    est = difference(l_claim, l_zero).scaled(-1.0 / (aq * omr))
    return PriceResult(price=est.value, std_error=est.std_error, n=est.n,
                       alpha=alpha, q=q, rho=rho, influence=est.influence)


def optimal_quantity(batch: PathBatch, alpha: float, p: float, rho_n: float,
                     claim: ClaimSpec, tol: float = tilt.DEFAULT_TOL) -> Estimate:
    """Optimal position q_n(p) = beta_n / (alpha*(1-rho_n^2)).

    Positive when p sits below the zero-tilt mean, negative above it.
    """
    _check_alpha(alpha)
    beta = tilt.beta_n(batch, claim, rho_n, p, tol)
    return beta.scaled(1.0 / (alpha * (1.0 - rho_n * rho_n)))


def quantity_limit_product(batch: PathBatch, alpha: float, p: float,
                           claim: ClaimSpec, rho_sequence,
                           tol: float = tilt.DEFAULT_TOL) -> QuantityLimitStudy:
    """Table of q_n(p)*(1-rho_n^2) along rho_n increasing to 1, with the
    target beta_*/alpha computed on the same batch."""
    _check_alpha(alpha)
    rhos = [float(r) for r in rho_sequence]
    if not rhos:
        raise ValidationError("rho_sequence must be non-empty")
    if any(not -1.0 < r < 1.0 for r in rhos):
        raise ValidationError("every rho_n must satisfy |rho_n| < 1")
    if any(b <= a for a, b in zip(rhos, rhos[1:])):
        raise ValidationError("rho_sequence must increase toward 1")
    target = tilt.beta_star(batch, claim, 1.0, p, tol).scaled(1.0 / alpha)
    rows = []
    for rho in rhos:
        beta = tilt.beta_n(batch, claim, rho, p, tol)
        product = beta.scaled(1.0 / alpha)
        quantity = beta.value / (alpha * (1.0 - rho * rho))
        rows.append(QuantityLimitRow(rho=rho, quantity=quantity, product=product,
                                     gap=difference(product, target)))
    return QuantityLimitStudy(rows=tuple(rows), target=target)


def limit_price(q_weights, claim_samples, gamma_alpha: float) -> Estimate:
    """Certainty equivalent -(1/(gamma*alpha)) log E_Q[exp(-gamma*alpha*h)].

    ``q_weights`` are dQ/dP weights (from q_measure_weights); the estimator is
    self-normalized, so the value always lies inside the sampled claim range.
    """
    if gamma_alpha == 0.0:
        raise DegenerateParameterError(
            "gamma*alpha = 0 degenerates the certainty equivalent; "
            "use the Q-weighted mean of the claim instead"
        )
    h = np.asarray(claim_samples, dtype=float)
    lme = log_mean_exp(-gamma_alpha * h, weights=q_weights)
    return lme.scaled(-1.0 / gamma_alpha)


def pi_pm_curves(q_weights, claim_samples, beta: float) -> tuple[Estimate, Estimate]:
    """The indifference curve p_i(beta) and marginal price p_m(beta) under Q.

    p_i(beta) = -(1/beta) log E_Q[e^{-beta h}], extended across beta = 0 by its
    limit, the Q-mean; p_m(beta) is the tilted Q-mean of h.  p_i >= p_m for
    beta >= 0 and the order flips with the sign of beta.
    """
    h = np.asarray(claim_samples, dtype=float)
    w = np.asarray(q_weights, dtype=float)
    if beta == 0.0:
        p_i = weighted_mean(h, w)
    else:
        p_i = log_mean_exp(-beta * h, weights=w).scaled(-1.0 / beta)
    sample = tilt.TiltSample(x=h, y=np.zeros_like(h), z=w)
    p_m = tilt.tilt_mean(sample, beta)
    return p_i, p_m


def differential_check(q_weights, claim_samples, beta: float,
                       step: float) -> DifferentialCheck:
    """Central-difference residual of d/dbeta(beta*p_i(beta)) - p_m(beta).

    beta*p_i(beta) = -log E_Q[e^{-beta h}] is smooth through beta = 0, so the
    check is valid there under the continuity convention.
    """
    if not step > 0.0:
        raise ValidationError("step must be positive")
    h = np.asarray(claim_samples, dtype=float)
    w = np.asarray(q_weights, dtype=float)

    def beta_pi(b: float) -> Estimate:
        return log_mean_exp(-b * h, weights=w).scaled(-1.0)

    deriv = difference(beta_pi(beta + step), beta_pi(beta - step)).scaled(0.5 / step)
    _, p_m = pi_pm_curves(q_weights, claim_samples, beta)
    return DifferentialCheck(residual=difference(deriv, p_m), step=step)


def entropy_gap(q_weights, claim_samples, beta_star: float) -> Estimate:
    """p_i(beta_*) - p_m(beta_*): positive for beta_* > 0, negative below 0.

    This is the limiting scaled relative entropy between the dual-optimal
    measures with and without the claim; only this side of that identity is
    computable from the complete-limit weights.
    """
    p_i, p_m = pi_pm_curves(q_weights, claim_samples, beta_star)
    return difference(p_i, p_m)


def arbitrage_bounds(claim: ClaimSpec) -> ArbitrageBounds:
    """Open interval of arbitrage-free prices; degenerate for constant claims."""
    return ArbitrageBounds(lo=claim.inf_h, hi=claim.sup_h,
                           degenerate=claim.inf_h == claim.sup_h)


def fixed_market_price_decay(batch: PathBatch, alpha: float, claim: ClaimSpec,
                             rho_fixed: float, q_sequence) -> tuple[PriceResult, ...]:
    """Prices along an increasing position schedule in a fixed market.

    As the position grows with nothing else changing, risk aversion takes
    over and the price sinks toward the sampled minimum of h(Y_T).
    """
    qs = [float(q) for q in q_sequence]
    if not qs:
        raise ValidationError("q_sequence must be non-empty")
    if any(b <= a for a, b in zip(qs, qs[1:])):
        raise ValidationError("q_sequence must be increasing")
    return tuple(exp_indifference_price(batch, alpha, q, claim, rho_fixed)
                 for q in qs)
