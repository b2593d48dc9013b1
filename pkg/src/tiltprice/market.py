"""Two-factor basis-risk diffusion: simulation and stochastic exponentials.

The non-traded factor Y follows dY = b(Y)dt + a(Y)dW on an open state
interval E.  Every pricing expectation needs only three per-path functionals:
the terminal state Y_T, I2 = int lambda(Y_t)^2 dt and IW = int lambda(Y_t) dW_t,
where lambda = mu/sigma is the market price of risk of the traded asset.
The traded asset itself is never simulated.

Paths use Euler-Maruyama with left-endpoint quadrature for I2 and the matching
increment sum for IW.  Randomness is counter-based (Philox keyed by the seed,
advanced to a fixed per-chunk offset), so a batch is a pure function of
(model, n_paths, n_steps, seed) no matter how many workers simulate it.
"""

from __future__ import annotations

import hashlib
import io
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.random import Generator, Philox
from scipy.special import ndtri

from .errors import ClampBudgetError, ValidationError

__all__ = [
    "Coefficient",
    "BasisRiskModel",
    "PathBatch",
    "simulate",
    "stochastic_exponential",
    "log_stochastic_exponential",
    "q_measure_weights",
]

# paths per simulation chunk; a multiple of 4 keeps every chunk's draw count
# aligned with Philox's 4-word blocks for any n_steps
_CHUNK = 16384

_U_MIN = 2.0 ** -53  # smallest uniform fed to the normal inverse CDF

_LAMBDA_BOUND = 1e8  # |mu/sigma| above this on the probe grid fails validation

_CLAMP_BUDGET = 1e-3  # fraction of steps allowed to leave the state interval


@dataclass(frozen=True)
class Coefficient:
    """A model coefficient, either constant c or proportional c*y."""

    kind: str
    c: float

    def __post_init__(self):
        if self.kind not in ("constant", "proportional"):
            raise ValidationError(f"unknown coefficient kind {self.kind!r}")
        if not np.isfinite(self.c):
            raise ValidationError("coefficient constant must be finite")

    def __call__(self, y):
        if self.kind == "constant":
            return np.full_like(np.asarray(y, dtype=float), self.c)
        return self.c * np.asarray(y, dtype=float)

    @classmethod
    def parse(cls, text: str) -> "Coefficient":
        """Parse ``"0.08"`` as constant or ``"0.3*y"`` as proportional."""
        s = text.strip().replace(" ", "")
        m = re.fullmatch(r"([-+0-9.eE]+)\*y", s)
        if m:
            return cls("proportional", float(m.group(1)))
        try:
            return cls("constant", float(s))
        except ValueError:
            raise ValidationError(f"cannot parse coefficient {text!r}") from None

    def describe(self) -> str:
        return f"{self.c!r}*y" if self.kind == "proportional" else repr(self.c)


@dataclass(frozen=True)
class BasisRiskModel:
    """Coefficients, correlation, initial state and horizon of the diffusion.

    ``state_lo``/``state_hi`` bound the open interval E on which Y lives;
    either may be infinite.  sigma must be positive and lambda = mu/sigma
    bounded on E, both checked on a probe grid that crowds the finite
    endpoints geometrically.
    """

    mu: Coefficient
    sigma: Coefficient
    b: Coefficient
    a: Coefficient
    rho: float
    y0: float
    T: float
    state_lo: float = -np.inf
    state_hi: float = np.inf

    def __post_init__(self):
        if not -1.0 <= self.rho <= 1.0:
            raise ValidationError("rho must lie in [-1, 1]")
        if not self.T > 0.0:
            raise ValidationError("horizon T must be positive")
        if not self.state_lo < self.state_hi:
            raise ValidationError("state interval is empty")
        if not self.state_lo < self.y0 < self.state_hi:
            raise ValidationError("y0 must lie inside the state interval")
        grid = self.probe_grid()
        sig = self.sigma(grid)
        if not np.all(sig > 0.0):
            raise ValidationError("sigma(y) must be positive on the state interval")
        lam = self.mu(grid) / sig
        if not np.all(np.isfinite(lam)) or np.max(np.abs(lam)) > _LAMBDA_BOUND:
            raise ValidationError(
                "market price of risk mu/sigma is unbounded on the state interval"
            )

    def probe_grid(self, points: int = 512) -> np.ndarray:
        """Dense validation grid inside E, crowding any finite endpoint."""
        s = max(1.0, abs(self.y0))
        lo = self.state_lo if np.isfinite(self.state_lo) else self.y0 - 10.0 * s
        hi = self.state_hi if np.isfinite(self.state_hi) else self.y0 + 10.0 * s
        width = hi - lo
        inner = np.linspace(lo + 1e-6 * width, hi - 1e-6 * width, points)
        extras = [np.asarray([self.y0])]
        if np.isfinite(self.state_lo):
            extras.append(self.state_lo + width * 10.0 ** -np.arange(2, 13, dtype=float))
        if np.isfinite(self.state_hi):
            extras.append(self.state_hi - width * 10.0 ** -np.arange(2, 13, dtype=float))
        grid = np.unique(np.concatenate([inner, *extras]))
        return grid[(grid > self.state_lo) & (grid < self.state_hi)]

    def lam(self, y):
        return self.mu(y) / self.sigma(y)

    def model_hash(self) -> str:
        text = "|".join(
            [
                self.mu.describe(),
                self.sigma.describe(),
                self.b.describe(),
                self.a.describe(),
                repr(self.rho),
                repr(self.y0),
                repr(self.T),
                repr(self.state_lo),
                repr(self.state_hi),
            ]
        )
        return hashlib.sha256(text.encode()).hexdigest()[:12]


@dataclass(frozen=True, eq=False)
class PathBatch:
    """Per-path functionals (Y_T, I2, IW) plus simulation metadata.

    Arrays are read-only; a batch is immutable after construction and all
    downstream reductions are pure, so batches may be shared freely across
    threads and across rho sweeps (common random numbers).
    """

    y_t: np.ndarray
    i2: np.ndarray
    iw: np.ndarray
    n_paths: int
    n_steps: int
    seed: int
    scheme: str
    model_hash: str
    clamp_count: int = 0

    def __post_init__(self):
        for arr in (self.y_t, self.i2, self.iw):
            arr.setflags(write=False)

    # -- persistence -------------------------------------------------------

    def save_csv(self, path) -> None:
        """Write the batch with a metadata comment line and a header row."""
        buf = io.StringIO()
        buf.write(
            f"# seed={self.seed} n_paths={self.n_paths} n_steps={self.n_steps}"
            f" model_hash={self.model_hash} scheme={self.scheme}"
            f" clamp_count={self.clamp_count}\n"
        )
        buf.write("y_T,I2,IW\n")
        np.savetxt(buf, np.column_stack([self.y_t, self.i2, self.iw]),
                   fmt="%.17g", delimiter=",")
        with open(path, "w") as fh:
            fh.write(buf.getvalue())

    @classmethod
    def load_csv(cls, path) -> "PathBatch":
        with open(path) as fh:
            meta_line = fh.readline()
            header = fh.readline().strip()
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        if not meta_line.startswith("#") or header != "y_T,I2,IW":
            raise ValidationError(f"{path}: not a PathBatch csv")
        meta = dict(kv.split("=") for kv in meta_line[1:].split())
        return cls(
            y_t=np.ascontiguousarray(data[:, 0]),
            i2=np.ascontiguousarray(data[:, 1]),
            iw=np.ascontiguousarray(data[:, 2]),
            n_paths=int(meta["n_paths"]),
            n_steps=int(meta["n_steps"]),
            seed=int(meta["seed"]),
            scheme=meta.get("scheme", "euler"),
            model_hash=meta.get("model_hash", ""),
            clamp_count=int(meta.get("clamp_count", 0)),
        )


def _normals_for_chunk(seed: int, first_path: int, n_paths: int, n_steps: int) -> np.ndarray:
    """Standard normals for paths [first_path, first_path + n_paths).

    One uniform double is one Philox word, so path i always starts at word
    i*n_steps of the keyed stream; the inverse normal CDF keeps the
    consumption fixed per draw (rejection samplers would not).
    """
    offset_words = first_path * n_steps
    if offset_words % 4 != 0:
        raise ValidationError("chunk offset must be block-aligned")
    bitgen = Philox(key=seed).advance(offset_words // 4)
    u = Generator(bitgen).random((n_paths, n_steps))
    return ndtri(np.maximum(u, _U_MIN))


def _simulate_chunk(model: BasisRiskModel, seed: int, first_path: int,
                    n_paths: int, n_steps: int):
    z = _normals_for_chunk(seed, first_path, n_paths, n_steps)
    dt = model.T / n_steps
    sqrt_dt = np.sqrt(dt)
    lo = np.nextafter(model.state_lo, model.state_hi)
    hi = np.nextafter(model.state_hi, model.state_lo)

    y = np.full(n_paths, model.y0)
    i2 = np.zeros(n_paths)
    iw = np.zeros(n_paths)
    clamps = 0
    for k in range(n_steps):
        lam = model.lam(y)
        dw = sqrt_dt * z[:, k]
        i2 += lam * lam * dt
        iw += lam * dw
        y = y + model.b(y) * dt + model.a(y) * dw
        out = np.count_nonzero((y < lo) | (y > hi))
        if out:
            clamps += int(out)
            np.clip(y, lo, hi, out=y)
    return y, i2, iw, clamps


def simulate(model: BasisRiskModel, n_paths: int, n_steps: int, seed: int,
             workers: int = 1) -> PathBatch:
    """Euler-Maruyama batch of (Y_T, I2, IW) under the physical measure.

    Identical (model, n_paths, n_steps, seed) give a bitwise identical batch
    for any ``workers``.  Paths that step outside the state interval are
    clamped just inside it; the batch is rejected if clamped points exceed
    0.1% of all simulated steps.
    """
    if n_paths < 1 or n_steps < 1:
        raise ValidationError("n_paths and n_steps must be >= 1")
    if not 0 <= int(seed) < 2 ** 64:
        raise ValidationError("seed must be a 64-bit unsigned integer")
    seed = int(seed)

    starts = list(range(0, n_paths, _CHUNK))
    y_t = np.empty(n_paths)
    i2 = np.empty(n_paths)
    iw = np.empty(n_paths)

    def run(first: int):
        count = min(_CHUNK, n_paths - first)
        return first, _simulate_chunk(model, seed, first, count, n_steps)

    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, starts))
    else:
        results = [run(first) for first in starts]

    clamp_count = 0
    for first, (y, a, b, clamps) in results:
        count = y.size
        y_t[first:first + count] = y
        i2[first:first + count] = a
        iw[first:first + count] = b
        clamp_count += clamps

    if clamp_count > _CLAMP_BUDGET * n_paths * n_steps:
        raise ClampBudgetError(
            f"{clamp_count} of {n_paths * n_steps} simulated points left the "
            f"state interval (budget {_CLAMP_BUDGET:.1%})"
        )
    return PathBatch(
        y_t=y_t, i2=i2, iw=iw,
        n_paths=n_paths, n_steps=n_steps, seed=seed,
        scheme="euler", model_hash=model.model_hash(),
        clamp_count=clamp_count,
    )


def log_stochastic_exponential(batch: PathBatch, rho: float) -> np.ndarray:
    """log Z(rho) = -rho*IW - rho^2/2 * I2, per path."""
    if not -1.0 <= rho <= 1.0:
        raise ValidationError("rho must lie in [-1, 1]")
    return -rho * batch.iw - 0.5 * rho * rho * batch.i2


def stochastic_exponential(batch: PathBatch, rho: float) -> np.ndarray:
    """Per-path weights Z(rho) = exp(-rho*IW - rho^2/2 * I2); positive."""
    return np.exp(log_stochastic_exponential(batch, rho))


def q_measure_weights(batch: PathBatch) -> np.ndarray:
    """dQ/dP weights Z(1) of the complete-limit pricing measure."""
    return stochastic_exponential(batch, 1.0)
