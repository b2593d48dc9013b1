"""Numerically stable weighted-expectation estimators.

Every expectation of the form E[Z * exp(stuff)] in the pricing layer goes
through :func:`log_mean_exp`, so overflow/underflow is handled in exactly one
place.  Estimates carry a per-sample influence vector; differences of two
estimators computed on the same paths (common random numbers) then get a
proper joint standard error instead of the conservative sqrt(se1^2 + se2^2).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

__all__ = ["Estimate", "weighted_mean", "log_mean_exp", "difference"]


@dataclass(frozen=True)
class Estimate:
    """A Monte Carlo estimate with a delta-method standard error.

    ``influence`` is the linearization of the estimator: estimator value is
    approximately (true value) + mean(influence) with mean-zero influence, so
    std(influence)/sqrt(n) is the standard error.  It is kept so that
    differences of estimates sharing the same sample can be given a joint
    standard error; it does not take part in equality or repr.
    """

    value: float
    std_error: float
    n: int
    influence: np.ndarray | None = field(default=None, repr=False, compare=False)

    def scaled(self, factor: float) -> "Estimate":
        """The estimate of ``factor * quantity``."""
        infl = None if self.influence is None else factor * self.influence
        return Estimate(factor * self.value, abs(factor) * self.std_error, self.n, infl)


def _se_from_influence(influence: np.ndarray) -> float:
    n = influence.size
    if n < 2:
        return 0.0
    return float(np.std(influence, ddof=1) / np.sqrt(n))


def weighted_mean(values, weights) -> Estimate:
    """Weighted mean sum(w*v)/sum(w) with a ratio-estimator standard error.

    Weights must be strictly positive; lengths must match and be >= 2.
    The computation is centred on the first value so that a constant input
    returns that constant exactly with zero standard error.
    """
    v = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    if v.ndim != 1 or w.ndim != 1 or v.size != w.size:
        raise ValidationError("values and weights must be 1-d arrays of equal length")
    if v.size < 2:
        raise ValidationError("need at least 2 samples")
    if not np.all(w > 0.0):
        raise ValidationError("weights must be strictly positive")
    if not (np.all(np.isfinite(v)) and np.all(np.isfinite(w))):
        raise ValidationError("values and weights must be finite")

    v0 = v[0]
    wsum = np.sum(w)
    r = v0 + float(np.sum(w * (v - v0)) / wsum)
    wmean = wsum / v.size
    influence = w * (v - r) / wmean
    return Estimate(r, _se_from_influence(influence), v.size, influence)


def log_mean_exp(exponents, weights=None) -> Estimate:
    """log of the weighted mean of exp(exponents), computed with a max shift.

    With unit weights this is log((1/n) * sum exp(e_i)); no intermediate can
    overflow because the largest exponent is subtracted before exponentiating.
    The standard error is the delta-method error of the log.
    """
    e = np.asarray(exponents, dtype=float)
    if e.ndim != 1 or e.size == 0:
        raise ValidationError("exponents must be a non-empty 1-d array")
    if not np.all(np.isfinite(e)):
        raise ValidationError("exponents must be finite")
    if weights is None:
        w = None
        log_wmean = 0.0
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != e.shape:
            raise ValidationError("weights must match exponents in length")
        if not np.all(w > 0.0) or not np.all(np.isfinite(w)):
            raise ValidationError("weights must be strictly positive and finite")
        log_wmean = float(np.log(np.mean(w)))

    m = float(np.max(e))
    t = np.exp(e - m) if w is None else w * np.exp(e - m)
    tmean = float(np.mean(t))
    value = m + float(np.log(tmean)) - log_wmean

    # influence of log-ratio: t_i/mean(t) - w_i/mean(w)
    if w is None:
        influence = t / tmean - 1.0
    else:
        influence = t / tmean - w / np.mean(w)
    return Estimate(value, _se_from_influence(influence), e.size, influence)


def difference(a: Estimate, b: Estimate) -> Estimate:
    """Estimate of a - b.

    When both operands carry influence vectors of the same length the
    standard error accounts for their covariance (common random numbers);
    otherwise the independent-sample combination sqrt(se_a^2 + se_b^2) is used.
    """
    value = a.value - b.value
    if a.influence is not None and b.influence is not None and a.n == b.n:
        influence = a.influence - b.influence
        return Estimate(value, _se_from_influence(influence), a.n, influence)
    se = float(np.hypot(a.std_error, b.std_error))
    return Estimate(value, se, min(a.n, b.n))
