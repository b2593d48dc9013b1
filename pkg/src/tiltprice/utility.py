"""Utility functions with bounded risk aversion and exponential decay.

Three families are supported:

* ``exponential``: U(x) = -exp(-alpha*x)/alpha, the canonical member with
  constant absolute risk aversion alpha.
* ``perturbed-exponential``: U(x) = -exp(-alpha*(x + K*sin(x)))/(alpha*(1+K)).
  Its risk aversion oscillates forever, yet the decay rate at -infinity is
  still alpha.  K is capped at 0.2 so the risk-aversion bounds stay provably
  positive.
* ``tabulated``: a (wealth, value) table interpolated with a monotone cubic
  (PCHIP); derivatives come from the interpolant, never raw differences.

:func:`check_membership` verifies the class conditions numerically on a grid:
U'(0) = 1, risk aversion within [1/K_U, K_U] for some K_U > 1, and the decay
rate -log(-U(x))/x settling at alpha for large negative x.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import InvalidUtilityError, TableRangeError, ValidationError

__all__ = [
    "UtilitySpec",
    "MembershipReport",
    "eval_utility",
    "log_neg_utility",
    "marginal_utility",
    "risk_aversion",
    "conjugate_exp",
    "check_membership",
]

FAMILIES = ("exponential", "perturbed-exponential", "tabulated")

# Largest admissible perturbation amplitude.  For K <= 0.2 the closed-form
# risk aversion alpha*(1+K*cos x) + K*sin(x)/(1+K*cos x) stays positive.
MAX_PERTURBATION = 0.2


@dataclass(frozen=True, eq=False)
class UtilitySpec:
    """Immutable description of a utility function.

    ``alpha`` is required for the two analytic families.  ``table`` is a pair
    of 1-d arrays (wealth grid, utility values) for the tabulated family; the
    grid must be strictly increasing.  A tabulated spec is allowed to violate
    monotonicity or concavity so that :func:`check_membership` can report the
    failure, but operations that require a valid utility will reject it.
    """

    family: str
    alpha: Optional[float] = None
    K: float = 0.0
    table: Optional[tuple[np.ndarray, np.ndarray]] = field(default=None, repr=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown utility family {self.family!r}")
        if self.family in ("exponential", "perturbed-exponential"):
            if self.alpha is None or not self.alpha > 0.0:
                raise ValidationError("alpha must be a positive real")
        if self.family == "perturbed-exponential":
            if not 0.0 < self.K <= MAX_PERTURBATION:
                raise ValidationError(
                    f"perturbation K must lie in (0, {MAX_PERTURBATION}]; got {self.K}"
                )
        if self.family == "tabulated":
            if self.table is None:
                raise ValidationError("tabulated family requires a table")
            x, v = (np.asarray(a, dtype=float) for a in self.table)
            if x.ndim != 1 or v.ndim != 1 or x.size != v.size or x.size < 4:
                raise ValidationError("table must be two 1-d arrays of equal length >= 4")
            if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
                raise ValidationError("table entries must be finite")
            if not np.all(np.diff(x) > 0.0):
                raise ValidationError("table wealth grid must be strictly increasing")
            object.__setattr__(self, "table", (x, v))

    # -- tabulated helpers -------------------------------------------------

    def _interpolant(self) -> PchipInterpolator:
        cached = getattr(self, "_pchip", None)
        if cached is None:
            cached = PchipInterpolator(self.table[0], self.table[1], extrapolate=False)
            object.__setattr__(self, "_pchip", cached)
        return cached

    def _check_table_range(self, x: np.ndarray) -> None:
        lo, hi = self.table[0][0], self.table[0][-1]
        if np.any(x < lo) or np.any(x > hi):
            raise TableRangeError(
                f"wealth query outside table grid [{lo}, {hi}]"
            )

    def table_is_increasing(self) -> bool:
        return bool(np.all(np.diff(self.table[1]) > 0.0))

    def table_is_concave(self) -> bool:
        # non-increasing chord slopes, with a tiny relative tolerance
        x, v = self.table
        slopes = np.diff(v) / np.diff(x)
        scale = np.maximum(np.abs(slopes[:-1]), np.abs(slopes[1:]))
        return bool(np.all(np.diff(slopes) <= 1e-12 * np.maximum(scale, 1.0)))


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, (arr.ndim == 0)


def eval_utility(spec: UtilitySpec, x):
    """Evaluate U(x).  Accepts scalars or arrays; always returns U < 0."""
    arr, scalar = _as_array(x)
    if spec.family == "exponential":
        out = -np.exp(-spec.alpha * arr) / spec.alpha
    elif spec.family == "perturbed-exponential":
        out = -np.exp(-spec.alpha * (arr + spec.K * np.sin(arr))) / (
            spec.alpha * (1.0 + spec.K)
        )
    else:
        spec._check_table_range(np.atleast_1d(arr))
        out = spec._interpolant()(arr)
    return float(out) if scalar else out


def log_neg_utility(spec: UtilitySpec, x):
    """log(-U(x)), exact in log space for the analytic families.

    Deep negative wealths overflow -U(x) long before they exhaust the class
    conditions, so the decay-rate checks work on this instead of U itself.
    Tabulated utilities take the log of their interpolated values; any value
    >= 0 comes back as nan.
    """
    arr, scalar = _as_array(x)
    if spec.family == "exponential":
        out = -spec.alpha * arr - np.log(spec.alpha)
    elif spec.family == "perturbed-exponential":
        out = -spec.alpha * (arr + spec.K * np.sin(arr)) - np.log(
            spec.alpha * (1.0 + spec.K)
        )
    else:
        spec._check_table_range(np.atleast_1d(arr))
        with np.errstate(invalid="ignore"):
            out = np.log(-spec._interpolant()(arr))
    return float(out) if scalar else out


def marginal_utility(spec: UtilitySpec, x):
    """U'(x), closed form for the analytic families, interpolant otherwise."""
    arr, scalar = _as_array(x)
    if spec.family == "exponential":
        out = np.exp(-spec.alpha * arr)
    elif spec.family == "perturbed-exponential":
        out = (
            (1.0 + spec.K * np.cos(arr))
            / (1.0 + spec.K)
            * np.exp(-spec.alpha * (arr + spec.K * np.sin(arr)))
        )
    else:
        spec._check_table_range(np.atleast_1d(arr))
        out = spec._interpolant().derivative()(arr)
    return float(out) if scalar else out


def risk_aversion(spec: UtilitySpec, x):
    """Absolute risk aversion -U''(x)/U'(x).

    Exponential utility returns alpha identically.  For the perturbed family
    the closed form is alpha*(1+K*cos x) + K*sin(x)/(1+K*cos x).  Tabulated
    utilities use the interpolant's derivatives and must be increasing and
    concave as data.
    """
    arr, scalar = _as_array(x)
    if spec.family == "exponential":
        out = np.full_like(arr, spec.alpha, dtype=float)
        return float(out) if scalar else out
    if spec.family == "perturbed-exponential":
        gp = 1.0 + spec.K * np.cos(arr)
        out = spec.alpha * gp + spec.K * np.sin(arr) / gp
        return float(out) if scalar else out
    if not spec.table_is_increasing():
        raise InvalidUtilityError("tabulated utility is not increasing")
    if not spec.table_is_concave():
        raise InvalidUtilityError("tabulated utility is not concave")
    spec._check_table_range(np.atleast_1d(arr))
    interp = spec._interpolant()
    d1 = interp.derivative(1)(arr)
    d2 = interp.derivative(2)(arr)
    out = -d2 / d1
    return float(out) if scalar else out


def conjugate_exp(alpha: float, y):
    """Convex conjugate of exponential utility: V(y) = y*(log y - 1)/alpha.

    Extended continuously by V(0) = 0.  Negative y is a domain error.
    """
    if not alpha > 0.0:
        raise ValidationError("alpha must be positive")
    arr, scalar = _as_array(y)
    if np.any(arr < 0.0):
        raise ValidationError("conjugate argument y must be >= 0")
    arr1 = np.atleast_1d(arr)
    out = np.zeros_like(arr1)
    pos = arr1 > 0.0
    out[pos] = arr1[pos] * (np.log(arr1[pos]) - 1.0) / alpha
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class MembershipReport:
    """Outcome of the numerical class-membership checks on a grid."""

    u_prime0: float
    u_prime0_ok: bool
    ra_min: float
    ra_max: float
    k_u: float
    ra_bounds_ok: bool
    decay_point: float     # -log(-U(x))/x at the deepest grid point
    decay_slope: float     # slope of -log(-U) between the two deepest points
    decay_depth: float
    increasing: bool
    concave: bool
    negative: bool

    @property
    def passed(self) -> bool:
        return (
            self.u_prime0_ok
            and self.ra_bounds_ok
            and self.increasing
            and self.concave
            and self.negative
        )


def check_membership(spec: UtilitySpec, grid) -> MembershipReport:
    """Verify the class conditions on a wealth grid and report diagnostics.

    The grid must reach down to -50/alpha for the analytic families so the
    decay-rate estimate is meaningful; the two deepest points provide both a
    point estimate of the rate and the slope of -log(-U) between them (the
    limit is only approached, so the finite-depth bias stays visible).
    Failures are reported, not raised.
    """
    g = np.sort(np.asarray(grid, dtype=float))
    if g.ndim != 1 or g.size < 4:
        raise ValidationError("grid must contain at least 4 points")
    if spec.family != "tabulated" and g[0] > -50.0 / spec.alpha:
        raise ValidationError(
            f"grid must span down to {-50.0 / spec.alpha} for alpha={spec.alpha}"
        )

    # all grid-wide checks run on log(-U): -U overflows near the bottom of
    # any grid deep enough for the decay estimate
    logu = log_neg_utility(spec, g)

    # condition i): U'(0) = 1, by differencing around 0 for tabulated specs
    if spec.family == "tabulated":
        lo, hi = spec.table[0][0], spec.table[0][-1]
        step = min(1e-5, 0.01 * (hi - lo))
        up0 = (eval_utility(spec, step) - eval_utility(spec, -step)) / (2.0 * step)
        u_prime0_ok = abs(up0 - 1.0) <= 1e-6
    else:
        up0 = marginal_utility(spec, 0.0)
        u_prime0_ok = abs(up0 - 1.0) <= 1e-8

    # condition ii): risk aversion bounded away from 0 and infinity
    try:
        ra = risk_aversion(spec, g)
        ra_min = float(np.min(ra))
        ra_max = float(np.max(ra))
    except InvalidUtilityError:
        ra_min, ra_max = float("nan"), float("nan")
    if np.isfinite(ra_min) and ra_min > 0.0:
        k_u = max(ra_max, 1.0 / ra_min)
        ra_bounds_ok = np.isfinite(k_u)
    else:
        k_u = float("inf")
        ra_bounds_ok = False

    # condition iii): decay rate of -U at large negative wealth
    x1, x2 = g[0], g[1]
    f1, f2 = -logu[0], -logu[1]
    decay_point = float(f1 / x1)
    decay_slope = float((f2 - f1) / (x2 - x1))

    negative = bool(np.all(np.isfinite(logu)))  # log(-U) defined <=> U < 0
    increasing = negative and bool(np.all(np.diff(logu) < 0.0))
    # concavity via second differences where -U is representable
    rep = g[logu < 700.0]
    if rep.size >= 3:
        u_rep = eval_utility(spec, rep)
        slopes = np.diff(u_rep) / np.diff(rep)
        scale = np.maximum(np.abs(slopes[:-1]), np.abs(slopes[1:]))
        concave = bool(np.all(np.diff(slopes) <= 1e-10 * np.maximum(scale, 1.0)))
    else:
        concave = False

    return MembershipReport(
        u_prime0=float(up0),
        u_prime0_ok=bool(u_prime0_ok),
        ra_min=ra_min,
        ra_max=ra_max,
        k_u=float(k_u),
        ra_bounds_ok=bool(ra_bounds_ok),
        decay_point=decay_point,
        decay_slope=decay_slope,
        decay_depth=float(x1),
        increasing=increasing,
        concave=concave,
        negative=negative,
    )
