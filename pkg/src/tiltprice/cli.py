"""Configuration-driven command line front end.

Every run reads one INI-style config file (named sections, ``key = value``
pairs) and writes one CSV table.  The CSV carries a reproducibility comment
line (seed, n_paths, n_steps, config hash) and a timestamp comment; rerunning
with the same config reproduces every byte except the timestamp line.

Exit codes: 0 success, 2 config error, 3 domain/validation error,
4 numerical error (no solution, degenerate input).  The worker count for
path simulation comes from the WORKER_COUNT environment variable.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import market, pricing, tilt, trinomial, utility
from .errors import NumericalError, ValidationError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VALIDATION = 3
EXIT_NUMERICAL = 4

DEFAULT_RHO_SWEEP = (0.0, 0.9, 0.99, 0.999)

# rho beyond this needs n_paths >= EXTREME_RHO_PATHS or --allow-extreme-rho:
# the variance of the weights blows up as the market completes
EXTREME_RHO = 0.999
EXTREME_RHO_PATHS = 10 ** 6


class ConfigError(Exception):
    """Malformed or incomplete run configuration (exit 2)."""


# ---------------------------------------------------------------------------
# config access
# ---------------------------------------------------------------------------

def load_config(path: str) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    return parser


def _section(cfg: configparser.ConfigParser, name: str) -> configparser.SectionProxy:
    if not cfg.has_section(name):
        raise ConfigError(f"missing config section [{name}]")
    return cfg[name]


def _get(section, key: str, convert, default=None):
    if key not in section:
        if default is not None:
            return default
        raise ConfigError(f"missing key {key!r} in section [{section.name}]")
    raw = section[key]
    try:
        return convert(raw)
    except (ValueError, ValidationError) as exc:
        raise ConfigError(f"bad value for {section.name}.{key}: {raw!r} ({exc})") from exc


def _float(raw: str) -> float:
    return float(raw)


def _int(raw: str) -> int:
    return int(raw)


def _float_list(raw: str) -> tuple[float, ...]:
    parts = raw.replace(",", " ").split()
    if not parts:
        raise ValueError("empty list")
    return tuple(float(p) for p in parts)


def _bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def build_model(cfg) -> market.BasisRiskModel:
    sec = _section(cfg, "model")
    return market.BasisRiskModel(
        mu=_get(sec, "mu", market.Coefficient.parse),
        sigma=_get(sec, "sigma", market.Coefficient.parse),
        b=_get(sec, "b", market.Coefficient.parse),
        a=_get(sec, "a", market.Coefficient.parse),
        rho=_get(sec, "rho", _float, default=0.0),
        y0=_get(sec, "y0", _float),
        T=_get(sec, "t", _float),
        state_lo=_get(sec, "state_lo", _float, default=-np.inf),
        state_hi=_get(sec, "state_hi", _float, default=np.inf),
    )


def build_claim(cfg, model: market.BasisRiskModel) -> pricing.ClaimSpec:
    sec = _section(cfg, "claim")
    form = _get(sec, "form", str)
    interval = (model.state_lo, model.state_hi)
    if form == "capped_linear":
        return pricing.ClaimSpec.capped_linear(_get(sec, "cap", _float), interval)
    if form == "digital":
        return pricing.ClaimSpec.smoothed_digital(
            _get(sec, "threshold", _float), _get(sec, "width", _float), interval)
    if form == "constant":
        return pricing.ClaimSpec.constant(_get(sec, "value", _float))
    if form == "tabulated":
        table_path = _get(sec, "table_path", str)
        try:
            data = np.loadtxt(table_path, delimiter=",", ndmin=2)
        except OSError as exc:
            raise ConfigError(f"cannot read claim table {table_path}: {exc}") from exc
        return pricing.ClaimSpec.tabulated(data[:, 0], data[:, 1])
    raise ConfigError(f"unknown claim form {form!r}")


def build_utility(cfg) -> utility.UtilitySpec:
    sec = _section(cfg, "utility")
    family = _get(sec, "family", str)
    if family == "tabulated":
        table_path = _get(sec, "table_path", str)
        try:
            data = np.loadtxt(table_path, delimiter=",", ndmin=2)
        except OSError as exc:
            raise ConfigError(f"cannot read utility table {table_path}: {exc}") from exc
        return utility.UtilitySpec(family=family, table=(data[:, 0], data[:, 1]))
    return utility.UtilitySpec(
        family=family,
        alpha=_get(sec, "alpha", _float),
        K=_get(sec, "k", _float, default=0.0) if family == "perturbed-exponential" else 0.0,
    )


def get_batch(cfg, model: market.BasisRiskModel) -> market.PathBatch:
    sec = _section(cfg, "simulation")
    n_paths = _get(sec, "n_paths", _int)
    n_steps = _get(sec, "n_steps", _int)
    seed = _get(sec, "seed", _int)
    workers = int(os.environ.get("WORKER_COUNT", "1"))
    cache = sec.get("cache_path")
    if cache and Path(cache).exists():
        batch = market.PathBatch.load_csv(cache)
        if (batch.seed, batch.n_paths, batch.n_steps, batch.model_hash) == \
                (seed, n_paths, n_steps, model.model_hash()):
            return batch
    batch = market.simulate(model, n_paths, n_steps, seed, workers=workers)
    if cache:
        batch.save_csv(cache)
    return batch


def _check_rho_gate(cfg, rhos, n_paths: int, allow_extreme: bool) -> None:
    if allow_extreme:
        return
    extreme = [r for r in rhos if abs(r) > EXTREME_RHO]
    if extreme and n_paths < EXTREME_RHO_PATHS:
        raise ValidationError(
            f"rho={max(extreme)} beyond {EXTREME_RHO} needs n_paths >= "
            f"{EXTREME_RHO_PATHS} (got {n_paths}); pass --allow-extreme-rho to override"
        )


# ---------------------------------------------------------------------------
# csv output
# ---------------------------------------------------------------------------

def write_csv(path: str, columns, rows, meta: dict) -> None:
    """Atomically write rows with a metadata comment and a timestamp comment.

    The timestamp line is excluded from the reproducibility contract; all
    other lines are a pure function of the config.
    """
    meta_line = "# " + " ".join(f"{k}={v}" for k, v in meta.items())
    lines = [meta_line, f"# generated_at={time.strftime('%Y-%m-%dT%H:%M:%S')}"]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_format_cell(c) for c in row))
    text = "\n".join(lines) + "\n"

    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _format_cell(value) -> str:
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def _config_hash(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()[:12]


def _output_path(cfg) -> str:
    sec = _section(cfg, "output")
    return _get(sec, "path", str)


def _sim_meta(cfg, model) -> dict:
    sec = _section(cfg, "simulation")
    return {
        "seed": _get(sec, "seed", _int),
        "n_paths": _get(sec, "n_paths", _int),
        "n_steps": _get(sec, "n_steps", _int),
        "model_hash": model.model_hash(),
    }


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def run_price(cfg, config_path: str, allow_extreme: bool) -> None:
    model = build_model(cfg)
    claim = build_claim(cfg, model)
    exp = _section(cfg, "experiment")
    alpha = _get(exp, "alpha", _float)
    q = _get(exp, "q", _float)
    rhos = _get(exp, "rho_list", _float_list, default=(model.rho,))
    _check_rho_gate(cfg, rhos, _get(_section(cfg, "simulation"), "n_paths", _int),
                    allow_extreme)
    batch = get_batch(cfg, model)
    rows = []
    for rho in rhos:
        res = pricing.exp_indifference_price(batch, alpha, q, claim, rho)
        rows.append((rho, alpha, q, res.price, res.std_error))
    meta = _sim_meta(cfg, model) | {"config_hash": _config_hash(config_path)}
    write_csv(_output_path(cfg), ("rho", "alpha", "q", "price", "std_error"),
              rows, meta)


def run_optimal_quantity(cfg, config_path: str, allow_extreme: bool) -> None:
    model = build_model(cfg)
    claim = build_claim(cfg, model)
    exp = _section(cfg, "experiment")
    alpha = _get(exp, "alpha", _float)
    p = _get(exp, "p", _float)
    rhos = _get(exp, "rho_list", _float_list, default=DEFAULT_RHO_SWEEP)
    _check_rho_gate(cfg, rhos, _get(_section(cfg, "simulation"), "n_paths", _int),
                    allow_extreme)
    batch = get_batch(cfg, model)
    rows = []
    for rho in rhos:
        est = pricing.optimal_quantity(batch, alpha, p, rho, claim)
        product = est.value * (1.0 - rho * rho)
        rows.append((rho, alpha, p, est.value, product, est.std_error))
    meta = _sim_meta(cfg, model) | {"config_hash": _config_hash(config_path)}
    write_csv(_output_path(cfg),
              ("rho", "alpha", "p", "quantity", "product", "std_error"),
              rows, meta)


def run_limit_study(cfg, config_path: str, allow_extreme: bool) -> None:
    model = build_model(cfg)
    claim = build_claim(cfg, model)
    exp = _section(cfg, "experiment")
    alpha = _get(exp, "alpha", _float)
    gamma = _get(exp, "gamma", _float)
    rhos = _get(exp, "rho_list", _float_list, default=DEFAULT_RHO_SWEEP)
    _check_rho_gate(cfg, rhos, _get(_section(cfg, "simulation"), "n_paths", _int),
                    allow_extreme)
    batch = get_batch(cfg, model)
    weights = market.q_measure_weights(batch)
    h = claim.payoff(batch.y_t)
    limit = pricing.limit_price(weights, h, gamma * alpha)
    rows = []
    for rho in rhos:
        q_n = gamma / (1.0 - rho * rho)
        res = pricing.exp_indifference_price(batch, alpha, q_n, claim, rho)
        price_est = pricing.Estimate(res.price, res.std_error, res.n, res.influence)
        gap = pricing.difference(price_est, limit)
        rows.append((rho, q_n, res.price, res.std_error, limit.value,
                     limit.std_error, gap.value, gap.std_error))
    meta = _sim_meta(cfg, model) | {"config_hash": _config_hash(config_path)}
    write_csv(_output_path(cfg),
              ("rho", "q", "price", "se_price", "limit", "se_limit",
               "gap", "se_gap"),
              rows, meta)


def run_fixed_market_study(cfg, config_path: str, allow_extreme: bool) -> None:
    model = build_model(cfg)
    claim = build_claim(cfg, model)
    exp = _section(cfg, "experiment")
    alpha = _get(exp, "alpha", _float)
    rho = _get(exp, "rho", _float)
    qs = _get(exp, "q_schedule", _float_list)
    _check_rho_gate(cfg, (rho,), _get(_section(cfg, "simulation"), "n_paths", _int),
                    allow_extreme)
    batch = get_batch(cfg, model)
    sampled_min = float(np.min(claim.payoff(batch.y_t)))
    rows = []
    for res in pricing.fixed_market_price_decay(batch, alpha, claim, rho, qs):
        rows.append((res.q, rho, alpha, res.price, res.std_error, sampled_min))
    meta = _sim_meta(cfg, model) | {"config_hash": _config_hash(config_path)}
    write_csv(_output_path(cfg),
              ("q", "rho", "alpha", "price", "std_error", "sampled_min_h"),
              rows, meta)


def run_trinomial(cfg, config_path: str, demo: str | None) -> None:
    exp = _section(cfg, "experiment")
    alpha = _get(exp, "alpha", _float)
    model = trinomial.TrinomialModel(
        u=_get(exp, "u", _float, default=0.5),
        h_u=_get(exp, "h_u", _float),
        h_m=_get(exp, "h_m", _float),
        h_d=_get(exp, "h_d", _float),
        q_schedule=_get(exp, "q_schedule", _float_list, default=(5, 10, 20, 40, 80)),
    )
    meta = {"config_hash": _config_hash(config_path)}
    if demo == "nonconvergence":
        rows = trinomial.nonconvergence_demo(alpha=alpha, model=model)
        write_csv(_output_path(cfg), ("q", "price_general"), rows, meta)
        return
    if demo is not None:
        raise ConfigError(f"unknown demo {demo!r}")
    spec = build_utility(cfg) if cfg.has_section("utility") else \
        utility.UtilitySpec(family="exponential", alpha=alpha)
    limit = trinomial.tri_limit(alpha, model)
    rows = []
    for q in model.q_schedule:
        rows.append((q,
                     trinomial.tri_price_exp(alpha, q, model),
                     trinomial.tri_price_general(spec, 0.0, q, model),
                     limit))
    write_csv(_output_path(cfg),
              ("q", "price_exponential", "price_general", "limit"),
              rows, meta)


def run_tilt_solve(cfg, config_path: str, allow_extreme: bool) -> None:
    model = build_model(cfg)
    claim = build_claim(cfg, model)
    exp = _section(cfg, "experiment")
    p = _get(exp, "p", _float)
    rho = _get(exp, "rho", _float)
    _check_rho_gate(cfg, (rho,), _get(_section(cfg, "simulation"), "n_paths", _int),
                    allow_extreme)
    batch = get_batch(cfg, model)
    est = tilt.beta_star(batch, claim, rho, p)
    meta = _sim_meta(cfg, model) | {"config_hash": _config_hash(config_path)}
    write_csv(_output_path(cfg), ("rho", "p", "beta", "std_error"),
              [(rho, p, est.value, est.std_error)], meta)


def run_check_utility(cfg, config_path: str) -> None:
    spec = build_utility(cfg)
    if spec.family == "tabulated":
        lo, hi = float(spec.table[0][0]), float(spec.table[0][-1])
    else:
        lo, hi = -max(60.0, 55.0 / spec.alpha), 20.0
    grid_lo, grid_hi, points = lo, hi, 2001
    if cfg.has_section("experiment"):
        exp = cfg["experiment"]
        grid_lo = _get(exp, "grid_lo", _float, default=lo)
        grid_hi = _get(exp, "grid_hi", _float, default=hi)
        points = _get(exp, "grid_points", _int, default=2001)
    report = utility.check_membership(spec, np.linspace(grid_lo, grid_hi, points))
    rows = [
        ("u_prime_at_0", report.u_prime0, int(report.u_prime0_ok)),
        ("risk_aversion_min", report.ra_min, int(report.ra_bounds_ok)),
        ("risk_aversion_max", report.ra_max, int(report.ra_bounds_ok)),
        ("k_u", report.k_u, int(report.ra_bounds_ok)),
        ("decay_point_estimate", report.decay_point, 1),
        ("decay_slope_estimate", report.decay_slope, 1),
        ("increasing", float(report.increasing), int(report.increasing)),
        ("concave", float(report.concave), int(report.concave)),
        ("negative", float(report.negative), int(report.negative)),
        ("passed", float(report.passed), int(report.passed)),
    ]
    meta = {"config_hash": _config_hash(config_path)}
    write_csv(_output_path(cfg), ("check", "value", "passed"), rows, meta)


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

_SUBCOMMANDS = (
    "price", "optimal-quantity", "limit-study", "fixed-market-study",
    "trinomial", "tilt-solve", "check-utility",
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tiltprice",
        description="Indifference prices and large-position limits from one config file",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in _SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", help="path to the INI run configuration")
        if name == "trinomial":
            p.add_argument("--demo", choices=("nonconvergence",), default=None)
        else:
            p.add_argument("--allow-extreme-rho", action="store_true",
                           help="permit |rho| > 0.999 below the path-count gate")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.subcommand == "price":
            run_price(cfg, args.config, args.allow_extreme_rho)
        elif args.subcommand == "optimal-quantity":
            run_optimal_quantity(cfg, args.config, args.allow_extreme_rho)
        elif args.subcommand == "limit-study":
            run_limit_study(cfg, args.config, args.allow_extreme_rho)
        elif args.subcommand == "fixed-market-study":
            run_fixed_market_study(cfg, args.config, args.allow_extreme_rho)
        elif args.subcommand == "trinomial":
            run_trinomial(cfg, args.config, args.demo)
        elif args.subcommand == "tilt-solve":
            run_tilt_solve(cfg, args.config, args.allow_extreme_rho)
        elif args.subcommand == "check-utility":
            run_check_utility(cfg, args.config)
    except ConfigError as exc:
        print(f"tiltprice: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValidationError as exc:
        print(f"tiltprice: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"tiltprice: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
