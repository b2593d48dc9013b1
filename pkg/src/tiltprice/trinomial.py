"""Exact one-period trinomial market: an analytic test bed for any utility.

Three terminal states with asset moves (1+u, 1, 1-u) and claim payoffs
(h_u, h_m, h_d); the physical masses depend on the position size q:
(1-e^-q)/2, e^-q, (1-e^-q)/2.  The asset is already a martingale, so the
optimal strategy is to hold nothing and the value functions collapse to

    no claim:   U(x)
    with claim: (1-e^-q) U(x + q*h_bar) + e^-q U(x + q*h_m),

with h_bar = (h_u + h_d)/2.  For exponential utility the per-unit price has a
closed form and converges to min{h_bar, 1/alpha + h_m} as q grows; any other
utility with decay rate alpha reaches the same limit, which is what makes this
market the cheap cross-check for the general theory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BracketError, InvalidUtilityError, ValidationError
from .utility import UtilitySpec, eval_utility

__all__ = [
    "TrinomialModel",
    "tri_value",
    "tri_price_exp",
    "tri_limit",
    "tri_price_general",
    "nonconvergence_demo",
    "banded_rate_utility",
]


@dataclass(frozen=True)
class TrinomialModel:
    """Up-move size u in (0, 1), state payoffs and a position schedule."""

    u: float
    h_u: float
    h_m: float
    h_d: float
    q_schedule: tuple[float, ...] = ()

    def __post_init__(self):
        if not 0.0 < self.u < 1.0:
            raise ValidationError("up-move size u must lie in (0, 1)")
        if not self.h_m < self.h_bar:
            raise ValidationError("need h_m < (h_u + h_d)/2 for a non-replicable claim")
        qs = tuple(float(q) for q in self.q_schedule)
        if any(q <= 0.0 for q in qs):
            raise ValidationError("positions in q_schedule must be positive")
        if any(b <= a for a, b in zip(qs, qs[1:])):
            raise ValidationError("q_schedule must be increasing")
        object.__setattr__(self, "q_schedule", qs)

    @property
    def h_bar(self) -> float:
        return 0.5 * (self.h_u + self.h_d)

    def masses(self, q: float) -> tuple[float, float, float]:
        """Physical masses (up, mid, down) at position q; they sum to 1."""
        mid = math.exp(-q)
        wing = 0.5 * (1.0 - mid)
        return wing, mid, wing


def _require_valid_utility(spec: UtilitySpec) -> None:
    if spec.family == "tabulated":
        if not spec.table_is_increasing():
            raise InvalidUtilityError("tabulated utility is not increasing")
        if not spec.table_is_concave():
            raise InvalidUtilityError("tabulated utility is not concave")


def tri_value(spec: UtilitySpec, x: float, q_n: float,
              model: TrinomialModel) -> tuple[float, float]:
    """(no-claim, with-claim) optimal values at wealth x and position q_n."""
    _require_valid_utility(spec)
    if q_n < 0.0:
        raise ValidationError("position q_n must be >= 0")
    no_claim = eval_utility(spec, x)
    wing, mid, _ = model.masses(q_n)
    with_claim = (2.0 * wing) * eval_utility(spec, x + q_n * model.h_bar) \
        + mid * eval_utility(spec, x + q_n * model.h_m)
    return no_claim, with_claim


def tri_price_exp(alpha: float, q_n: float, model: TrinomialModel) -> float:
    """Closed-form per-unit price for exponential utility.

    beta = -(1/(alpha*q)) log((1-e^-q) e^{-alpha q h_bar} + e^-q e^{-alpha q h_m}),
    evaluated with log-sum-exp so large positions cannot overflow.
    """
    if not alpha > 0.0:
        raise ValidationError("alpha must be positive")
    if not q_n > 0.0:
        raise ValidationError("position q_n must be positive")
    aq = alpha * q_n
    log_terms = np.logaddexp(
        math.log1p(-math.exp(-q_n)) - aq * model.h_bar,
        -q_n - aq * model.h_m,
    )
    return float(-log_terms / aq)


def tri_limit(alpha: float, model: TrinomialModel) -> float:
    """Large-position price limit min{h_bar, 1/alpha + h_m}."""
    if not alpha > 0.0:
        raise ValidationError("alpha must be positive")
    return min(model.h_bar, 1.0 / alpha + model.h_m)


def tri_price_general(spec: UtilitySpec, x: float, q_n: float,
                      model: TrinomialModel, tol: float = 1e-10) -> float:
    """Per-unit price for an arbitrary increasing concave utility.

    Bisects the indifference equation

        U(x) = (1-e^-q) U(x + q(h_bar - beta)) + e^-q U(x - q(beta - h_m))

    over beta in [h_m - 1, h_bar + 1]; the right side is strictly decreasing
    in beta and the root is known to lie in [h_m, h_bar], so the padded
    bracket only guards tolerance edge cases.
    """
    _require_valid_utility(spec)
    if not q_n > 0.0:
        raise ValidationError("position q_n must be positive")
    if not tol > 0.0:
        raise ValidationError("tol must be positive")
    wing_sum = -math.expm1(-q_n)   # 1 - e^-q
    mid = math.exp(-q_n)
    target = eval_utility(spec, x)

    def excess(beta: float) -> float:
        up = eval_utility(spec, x + q_n * (model.h_bar - beta))
        down = eval_utility(spec, x - q_n * (beta - model.h_m))
        return wing_sum * up + mid * down - target

    lo, hi = model.h_m - 1.0, model.h_bar + 1.0
    f_lo, f_hi = excess(lo), excess(hi)
    if not (f_lo > 0.0 > f_hi):
        raise BracketError(
            f"no sign change on [{lo}, {hi}]: excess({lo})={f_lo:g}, "
            f"excess({hi})={f_hi:g} (q={q_n}, model={model})"
        )
    while hi - lo > tol:
        beta = 0.5 * (lo + hi)
        if beta == lo or beta == hi:
            break
        if excess(beta) > 0.0:
            lo = beta
        else:
            hi = beta
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Non-convergence demonstration
# ---------------------------------------------------------------------------

def banded_rate_utility(alpha: float, log_band: float = 2.0,
                        x_lo: float = -130.0, x_hi: float = 130.0,
                        dx: float = 0.002) -> UtilitySpec:
    """Tabulated utility whose decay rate alternates between alpha and 2*alpha.

    The local rate is alpha*(1.5 - 0.5*cos(2*pi*log(1+t^2)/log_band)), so the
    rate bands grow exponentially in wealth and -(1/x)log(-U(x)) keeps
    oscillating instead of settling; U stays increasing and concave with risk
    aversion bounded on both sides, so only the decay-rate condition fails.
    """
    grid = np.arange(x_lo, x_hi + dx, dx)
    rate = _band_rate(grid, alpha, log_band)
    # phi(x) = log(alpha) + int_0^x rate, via the trapezoid rule from x_lo
    phi = np.concatenate([[0.0], np.cumsum(0.5 * (rate[1:] + rate[:-1]) * np.diff(grid))])
    i0 = int(np.argmin(np.abs(grid)))
    phi += math.log(alpha) - phi[i0]
    values = -np.exp(-phi)
    return UtilitySpec(family="tabulated", table=(grid, values))


def _band_rate(t, alpha: float, log_band: float):
    s = np.log1p(np.asarray(t, dtype=float) ** 2) / log_band
    return alpha * (1.5 - 0.5 * np.cos(2.0 * np.pi * s))


def nonconvergence_demo(alpha: float = 2.0, model: TrinomialModel | None = None,
                        band_positions=(1.0, 1.5, 2.0, 2.5, 3.0),
                        log_band: float = 2.0) -> list[tuple[float, float]]:
    """Prices of the banded-rate utility along positions tuned to its bands.

    Each q is chosen so the wealth range the price depends on ends inside an
    alternating rate band, which keeps the reported prices oscillating; no
    limit is asserted anywhere.  Returns (q, price) rows.
    """
    if model is None:
        model = TrinomialModel(u=0.5, h_u=2.0, h_m=0.0, h_d=0.0)
    if not alpha * (model.h_bar - model.h_m) > 1.0:
        raise ValidationError(
            "demo needs alpha > 1/(h_bar - h_m) so the oscillation is visible"
        )
    spec = banded_rate_utility(alpha, log_band=log_band)
    grid = spec.table[0]
    rate = _band_rate(grid, alpha, log_band)
    phi = np.concatenate([[0.0], np.cumsum(0.5 * (rate[1:] + rate[:-1]) * np.diff(grid))])
    i0 = int(np.argmin(np.abs(grid)))
    phi -= phi[i0]

    rows = []
    for s in band_positions:
        t = math.sqrt(math.exp(log_band * s) - 1.0)
        # q with U^{-1}(-e^q) at the band edge: q = -phi(-t) - log(alpha)... the
        # additive constant is irrelevant to the oscillation, so use -phi(-t).
        q = float(-np.interp(-t, grid, phi))
        beta = tri_price_general(spec, 0.0, q, model, tol=1e-9)
        rows.append((q, beta))
    return rows
