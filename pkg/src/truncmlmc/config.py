"""Flat key=value experiment configuration with dotted section prefixes.

One assignment per line, ``#`` starts a comment, keys are validated against
the documented set, and a config plus a seed determines every output byte.
"""

from __future__ import annotations

from pathlib import Path

from .integrands import (Integrand, geometric_coefficients, make_additive,
                         make_product)
from .markov import (LINDLEY_A, LINDLEY_B, ChainModel, make_lindley,
                     modulated_uniform_increments, uniform_increments)


class ConfigError(ValueError):
    """Invalid configuration: unknown key, bad value, or missing requirement."""


KNOWN_KEYS = frozenset({
    "seed",
    "threads",
    "out",
    "methods",
    "reps",
    "eps",
    "d_grid",
    "mc_n",
    "fix_v",
    "fix_v_values",
    "pairs",
    "integrand.family",
    "integrand.d",
    "integrand.coeffs",
    "integrand.decay_r",
    "chain.preset",
    "chain.d",
    "chain.a",
    "chain.b",
    "chain.time_varying",
    "chain.gamma",
    "decay.i",
    "decay.n",
})

METHODS = ("mc", "mlmc", "mlmc-fixed")


def parse_config_text(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines into a string map, validating key names."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        if key in out:
            raise ConfigError(f"duplicate config key {key!r}")
        if not value:
            raise ConfigError(f"config key {key!r} has an empty value")
        out[key] = value
    return out


def load_config(path: str | Path) -> dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config_text(text)


def _coerce(cfg: dict[str, str], key: str, convert, default):
    if key not in cfg:
        if default is ...:
            raise ConfigError(f"missing required config key {key!r}")
        return default
    try:
        return convert(cfg[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config key {key!r}: {exc}") from exc


def as_int(cfg, key, default=...):
    return _coerce(cfg, key, int, default)


def as_float(cfg, key, default=...):
    return _coerce(cfg, key, float, default)


def as_bool(cfg, key, default=...):
    def convert(value: str) -> bool:
        lowered = value.lower()
        if lowered in ("true", "yes", "1"):
            return True
        if lowered in ("false", "no", "0"):
            return False
        raise ValueError(f"expected a boolean, got {value!r}")

    return _coerce(cfg, key, convert, default)


def as_int_list(cfg, key, default=...):
    return _coerce(cfg, key, lambda v: tuple(int(p) for p in v.split(",") if p.strip()),
                   default)


def as_float_list(cfg, key, default=...):
    return _coerce(cfg, key, lambda v: tuple(float(p) for p in v.split(",") if p.strip()),
                   default)


def as_str_list(cfg, key, default=...):
    return _coerce(cfg, key, lambda v: tuple(p.strip() for p in v.split(",") if p.strip()),
                   default)


def as_choice(cfg, key, options, default=...):
    def convert(value: str) -> str:
        if value not in options:
            raise ValueError(f"expected one of {sorted(options)}, got {value!r}")
        return value

    return _coerce(cfg, key, convert, default)


def integrand_from_config(cfg: dict[str, str], d: int | None = None) -> Integrand:
    """Build the configured test-family integrand, optionally overriding d."""
    family = as_choice(cfg, "integrand.family", {"additive", "product"}, "additive")
    if d is None:
        d = as_int(cfg, "integrand.d")
    if d < 1:
        raise ConfigError("config key 'integrand.d': dimension must be positive")
    coeffs = as_float_list(cfg, "integrand.coeffs", None)
    if coeffs is not None:
        if len(coeffs) != d:
            raise ConfigError(
                f"config key 'integrand.coeffs': expected {d} entries, got {len(coeffs)}")
    else:
        coeffs = geometric_coefficients(d, as_float(cfg, "integrand.decay_r", 0.5))
    maker = make_additive if family == "additive" else make_product
    try:
        return maker(coeffs)
    except ValueError as exc:
        raise ConfigError(f"config key 'integrand.coeffs': {exc}") from exc


def chain_from_config(cfg: dict[str, str], d: int | None = None) -> tuple[ChainModel, float]:
    """Build the configured chain model and its decay exponent for scheduling."""
    as_choice(cfg, "chain.preset", {"lindley"}, "lindley")
    if d is None:
        d = as_int(cfg, "chain.d")
    if d < 2:
        raise ConfigError("config key 'chain.d': horizon must be at least 2")
    a = as_float(cfg, "chain.a", LINDLEY_A)
    b = as_float(cfg, "chain.b", LINDLEY_B)
    if not b > a:
        raise ConfigError("config keys 'chain.a'/'chain.b': need b > a")
    gamma = as_float(cfg, "chain.gamma", -2.0)
    if gamma >= -1.0:
        raise ConfigError("config key 'chain.gamma': decay exponent must be below -1")
    if as_bool(cfg, "chain.time_varying", False):
        zeta = modulated_uniform_increments(d, a, b)
    else:
        zeta = uniform_increments(a, b)
    return make_lindley(d, zeta), gamma
