"""Exponential tilting: the map g(beta) and its inverse.

For a weighted sample (x_i, y_i, z_i) the tilt mean

    g(beta) = sum z_i x_i exp(-beta x_i + y_i) / sum z_i exp(-beta x_i + y_i)

is strictly decreasing in beta (unless x is constant) and sweeps the open
interval (min x, max x), so g(beta) = p has a unique root for p strictly
inside the sample range.  The solver expands a bracket geometrically from
[-1, 1] and bisects; everything is evaluated in log space.

Built on a path batch with x = h(Y_T), y = -(1-rho^2)/2 * I2 and z = Z(rho),
the root is the tilt parameter behind the optimal position size, both in the
pre-limit markets (|rho| < 1) and in the complete limit (rho = +-1, where the
exponent offset vanishes and the weights become the pricing-measure density).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateClaimError, NoSolutionError, ValidationError
from .market import PathBatch, log_stochastic_exponential
from .montecarlo import Estimate, _se_from_influence

__all__ = ["TiltSample", "tilt_mean", "solve_tilt", "beta_estimate", "beta_n", "beta_star"]

BETA_CAP = 1e6          # bracket expansion stops here: empirical g saturates
DEFAULT_TOL = 1e-10     # bisection tolerance on beta

_CONST_REL_TOL = 1e-9   # |p - c| tolerance for the constant-sample convention


@dataclass(frozen=True, eq=False)
class TiltSample:
    """Payoffs x, exponent offsets y and positive weights z.

    All three arrays must be finite; x and y bounded is the caller's model
    assumption and finiteness is what a finite sample can check.
    """

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    bounds: tuple[float, float] = field(init=False)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        z = np.asarray(self.z, dtype=float)
        if x.ndim != 1 or x.size == 0:
            raise ValidationError("tilt sample must be non-empty and 1-d")
        if y.shape != x.shape or z.shape != x.shape:
            raise ValidationError("x, y, z must have equal length")
        for arr, name in ((x, "x"), (y, "y"), (z, "z")):
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{name} must be finite")
        if not np.all(z > 0.0):
            raise ValidationError("weights z must be strictly positive")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "bounds", (float(np.min(x)), float(np.max(x))))

    def log_base(self) -> np.ndarray:
        return self.y + np.log(self.z)


def _tilted_weights(sample: TiltSample, beta: float, log_base: np.ndarray) -> np.ndarray:
    e = log_base - beta * sample.x
    return np.exp(e - np.max(e))


def _g(sample: TiltSample, beta: float, log_base: np.ndarray) -> float:
    t = _tilted_weights(sample, beta, log_base)
    return float(np.sum(t * sample.x) / np.sum(t))


def tilt_mean(sample: TiltSample, beta: float) -> Estimate:
    """Estimate of g(beta); always inside [min x, max x]."""
    log_base = sample.log_base()
    t = _tilted_weights(sample, beta, log_base)
    g = float(np.sum(t * sample.x) / np.sum(t))
    influence = t * (sample.x - g) / np.mean(t)
    return Estimate(g, _se_from_influence(influence), sample.x.size, influence)


def solve_tilt(sample: TiltSample, p: float, tol: float = DEFAULT_TOL) -> float:
    """The unique beta with g(beta) = p, for p strictly inside the sample range.

    Geometric bracket expansion from [-1, 1] (g is strictly decreasing),
    then bisection until the bracket width and the residual |g - p| are both
    within ``tol``.  For a constant sample the convention beta = 0 applies
    when p equals the constant; any other p is degenerate.
    """
    if not tol > 0.0:
        raise ValidationError("tol must be positive")
    lo_x, hi_x = sample.bounds
    if lo_x == hi_x:
        if abs(p - lo_x) <= _CONST_REL_TOL * max(1.0, abs(lo_x)):
            return 0.0
        raise DegenerateClaimError(
            f"sample is constant at {lo_x}; no tilt reaches p={p}"
        )
    if p <= lo_x:
        raise NoSolutionError(f"p={p} is at or below the sample minimum {lo_x}")
    if p >= hi_x:
        raise NoSolutionError(f"p={p} is at or above the sample maximum {hi_x}")

    log_base = sample.log_base()
    lo, hi = -1.0, 1.0
    while _g(sample, lo, log_base) < p:
        lo *= 2.0
        if lo < -BETA_CAP:
            raise NoSolutionError(
                f"no solution with |beta| <= {BETA_CAP:g}: p={p} too close to "
                f"the sample maximum {hi_x}"
            )
    while _g(sample, hi, log_base) > p:
        hi *= 2.0
        if hi > BETA_CAP:
            raise NoSolutionError(
                f"no solution with |beta| <= {BETA_CAP:g}: p={p} too close to "
                f"the sample minimum {lo_x}"
            )

    beta = 0.5 * (lo + hi)
    for _ in range(400):
        beta = 0.5 * (lo + hi)
        if beta == lo or beta == hi:
            break
        g = _g(sample, beta, log_base)
        if g > p:
            lo = beta
        else:
            hi = beta
        if hi - lo <= tol and abs(g - p) <= tol:
            break
    if abs(_g(sample, beta, log_base) - p) > tol:
        raise NoSolutionError(
            f"bisection stalled at beta={beta} with residual "
            f"{_g(sample, beta, log_base) - p:g} > tol={tol:g}"
        )
    return beta


def beta_estimate(sample: TiltSample, p: float, tol: float = DEFAULT_TOL) -> Estimate:
    """solve_tilt plus a delta-method standard error for the root.

    The root's influence per path is w_i (x_i - p) / (mean(w) Var_w(x)) with
    w the tilted weights at the solution; differencing the influences of two
    roots solved on the same batch gives the common-random-numbers joint error.
    """
    beta = solve_tilt(sample, p, tol)
    log_base = sample.log_base()
    t = _tilted_weights(sample, beta, log_base)
    g = float(np.sum(t * sample.x) / np.sum(t))
    var = float(np.sum(t * (sample.x - g) ** 2) / np.sum(t))
    if var == 0.0:
        return Estimate(beta, 0.0, sample.x.size, np.zeros_like(sample.x))
    influence = t * (sample.x - p) / (np.mean(t) * var)
    return Estimate(beta, _se_from_influence(influence), sample.x.size, influence)


def _batch_sample(batch: PathBatch, claim, rho: float) -> TiltSample:
    x = claim.payoff(batch.y_t)
    one_minus_rho2 = 1.0 - rho * rho
    y = -0.5 * one_minus_rho2 * batch.i2
    z = np.exp(log_stochastic_exponential(batch, rho))
    return TiltSample(x=x, y=y, z=z)


def beta_n(batch: PathBatch, claim, rho_n: float, p: float,
           tol: float = DEFAULT_TOL) -> Estimate:
    """Tilt parameter of the pre-limit market with correlation rho_n in (-1, 1)."""
    if not -1.0 < rho_n < 1.0:
        raise ValidationError("beta_n requires |rho_n| < 1; use beta_star at the limit")
    return beta_estimate(_batch_sample(batch, claim, rho_n), p, tol)


def beta_star(batch: PathBatch, claim, rho: float, p: float,
              tol: float = DEFAULT_TOL) -> Estimate:
    """Tilt parameter of the limiting market; rho = +-1 is allowed.

    At rho = +-1 the exponent offset vanishes and the weights are the
    complete-limit pricing density, recovering the pure tilt of h(Y_T) under Q.
    """
    if not -1.0 <= rho <= 1.0:
        raise ValidationError("rho must lie in [-1, 1]")
    return beta_estimate(_batch_sample(batch, claim, rho), p, tol)
