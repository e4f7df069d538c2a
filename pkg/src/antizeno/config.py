"""Strict INI-style run configuration for the command-line tools.

All values at this boundary are SI (rad/s, seconds); commands normalize by
the model's reference frequency internally and convert back for output. The
parser is strict: any unknown section or key aborts before computation, and
missing required keys are reported by name.

Sections and keys::

    [model]    variant = hydrogen2p1s | lorentzian | flat_band | tabulated
               hydrogen2p1s: eta, omega_c
               lorentzian:   strength, center, width
               flat_band:    g0_density, omega_min, omega_max
               tabulated:    path  (two-column CSV: omega, G)
    [bath]     omega_lo, omega_hi, k, scheme?
    [protocol] omega2, omega3, rabi, n_cycles, propagator?, dt?,
               tau  |  tau_min, tau_max, tau_points, tau_spacing?
    [rates]    tau_min, tau_max, tau_points, tau_spacing?, mode?, tolerance?
    [output]   directory, prefix
    [validity] threshold?
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
import hashlib
import math
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .spectral import (
    FlatBand,
    FrequencyGrid,
    Hydrogen2p1s,
    Lorentzian,
    SpectralModel,
    Tabulated,
)

__all__ = ["RunConfig", "ProtocolSpec", "RatesSpec", "OutputSpec", "load_config"]

_SCHEMA = {
    "model": {"variant", "eta", "omega_c", "strength", "center", "width",
              "g0_density", "omega_min", "omega_max", "path"},
    "bath": {"omega_lo", "omega_hi", "k", "scheme"},
    "protocol": {"omega2", "omega3", "rabi", "n_cycles", "propagator", "dt",
                 "tau", "tau_min", "tau_max", "tau_points", "tau_spacing"},
    "rates": {"tau_min", "tau_max", "tau_points", "tau_spacing", "mode", "tolerance"},
    "output": {"directory", "prefix"},
    "validity": {"threshold"},
}

_MODEL_KEYS = {
    "hydrogen2p1s": {"eta", "omega_c"},
    "lorentzian": {"strength", "center", "width"},
    "flat_band": {"g0_density", "omega_min", "omega_max"},
    "tabulated": {"path"},
}


@dataclass(frozen=True)
class ProtocolSpec:
    """Protocol section: either a single tau or a sweep of taus [s]."""

    taus: tuple
    is_sweep: bool
    omega2: float
    omega3: float
    rabi: float
    n_cycles: int
    propagator: str
    dt: float | None


@dataclass(frozen=True)
class RatesSpec:
    taus: tuple
    mode: str
    tolerance: float


@dataclass(frozen=True)
class OutputSpec:
    directory: str
    prefix: str


@dataclass(frozen=True)
class RunConfig:
    """Parsed and validated configuration (SI units at this boundary)."""

    model: SpectralModel
    bath: FrequencyGrid | None
    protocol: ProtocolSpec | None
    rates: RatesSpec | None
    output: OutputSpec | None
    validity_threshold: float
    sha256: str

    def require(self, name: str):
        value = getattr(self, name)
        if value is None:
            raise ConfigurationError(f"config is missing the [{name}] section")
        return value


class _Section:
    """One config section with by-name error reporting and use tracking."""

    def __init__(self, name: str, values: dict):
        self.name = name
        self.values = values

    def has(self, key: str) -> bool:
        return key in self.values

    def raw(self, key: str) -> str:
        if key not in self.values:
            raise ConfigurationError(f"[{self.name}] is missing required key '{key}'")
        return self.values[key]

    def string(self, key: str, default: str | None = None, choices=None) -> str:
        if default is not None and key not in self.values:
            value = default
        else:
            value = self.raw(key)
        if choices is not None and value not in choices:
            raise ConfigurationError(
                f"[{self.name}] key '{key}' must be one of {sorted(choices)}, got {value!r}"
            )
        return value

    def number(self, key: str, default: float | None = None) -> float:
        if default is not None and key not in self.values:
            return default
        raw = self.raw(key)
        try:
            value = float(raw)
        except ValueError:
            raise ConfigurationError(f"[{self.name}] key '{key}' is not a number: {raw!r}") from None
        if not math.isfinite(value):
            raise ConfigurationError(f"[{self.name}] key '{key}' must be finite")
        return value

    def integer(self, key: str, default: int | None = None) -> int:
        if default is not None and key not in self.values:
            return default
        raw = self.raw(key)
        try:
            return int(raw)
        except ValueError:
            raise ConfigurationError(f"[{self.name}] key '{key}' is not an integer: {raw!r}") from None


def _tau_grid(sec: _Section) -> tuple:
    lo = sec.number("tau_min")
    hi = sec.number("tau_max")
    n = sec.integer("tau_points")
    spacing = sec.string("tau_spacing", default="log", choices={"log", "linear"})
    if not 0 < lo < hi:
        raise ConfigurationError(f"[{sec.name}] needs 0 < tau_min < tau_max")
    if n < 1:
        raise ConfigurationError(f"[{sec.name}] tau_points must be positive")
    if n == 1:
        return (lo,)
    if spacing == "log":
        return tuple(np.geomspace(lo, hi, n))
    return tuple(np.linspace(lo, hi, n))


def _parse_model(sec: _Section, base_dir: Path) -> SpectralModel:
    variant = sec.string("variant", choices=set(_MODEL_KEYS))
    allowed = _MODEL_KEYS[variant] | {"variant"}
    extra = set(sec.values) - allowed
    if extra:
        raise ConfigurationError(
            f"[model] keys {sorted(extra)} do not belong to variant '{variant}'"
        )
    if variant == "hydrogen2p1s":
        return Hydrogen2p1s(eta=sec.number("eta"), omega_c=sec.number("omega_c"))
    if variant == "lorentzian":
        return Lorentzian(
            strength=sec.number("strength"),
            center=sec.number("center"),
            width=sec.number("width"),
        )
    if variant == "flat_band":
        return FlatBand(
            g0_density=sec.number("g0_density"),
            omega_min=sec.number("omega_min"),
            omega_max=sec.number("omega_max"),
        )
    path = Path(sec.raw("path"))
    if not path.is_absolute():
        path = base_dir / path
    if not path.exists():
        raise ConfigurationError(f"[model] tabulated path does not exist: {path}")
    return Tabulated.from_csv(path)


def _parse_protocol(sec: _Section) -> ProtocolSpec:
    sweep_keys = {"tau_min", "tau_max", "tau_points", "tau_spacing"}
    has_single = sec.has("tau")
    has_sweep = any(sec.has(k) for k in sweep_keys)
    if has_single and has_sweep:
        raise ConfigurationError("[protocol] give either 'tau' or a tau sweep, not both")
    if has_single:
        taus, is_sweep = (sec.number("tau"),), False
    elif has_sweep:
        taus, is_sweep = _tau_grid(sec), True
    else:
        raise ConfigurationError("[protocol] is missing required key 'tau'")
    propagator = sec.string("propagator", default="short_time",
                            choices={"short_time", "ode_oracle"})
    dt = sec.number("dt") if sec.has("dt") else None
    if propagator == "ode_oracle" and dt is None:
        raise ConfigurationError("[protocol] propagator 'ode_oracle' needs key 'dt'")
    n_cycles = sec.integer("n_cycles")
    if n_cycles < 1:
        raise ConfigurationError("[protocol] n_cycles must be at least 1")
    return ProtocolSpec(
        taus=taus,
        is_sweep=is_sweep,
        omega2=sec.number("omega2"),
        omega3=sec.number("omega3"),
        rabi=sec.number("rabi"),
        n_cycles=n_cycles,
        propagator=propagator,
        dt=dt,
    )


def load_config(path) -> RunConfig:
    """Parse, validate, and type a config file; unknown keys are fatal."""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    raw = path.read_bytes()
    parser = configparser.ConfigParser(
        comment_prefixes=("#",), inline_comment_prefixes=("#",), interpolation=None
    )
    try:
        parser.read_string(raw.decode("utf-8"))
    except (configparser.Error, UnicodeDecodeError) as exc:
        raise ConfigurationError(f"cannot parse {path}: {exc}") from None

    sections = {}
    for name in parser.sections():
        if name not in _SCHEMA:
            raise ConfigurationError(f"unknown config section [{name}]")
        keys = dict(parser.items(name))
        unknown = set(keys) - _SCHEMA[name]
        if unknown:
            raise ConfigurationError(
                f"unknown key(s) {sorted(unknown)} in section [{name}]"
            )
        sections[name] = _Section(name, keys)
    if "model" not in sections:
        raise ConfigurationError("config is missing the [model] section")

    model = _parse_model(sections["model"], path.parent)

    bath = None
    if "bath" in sections:
        sec = sections["bath"]
        bath = FrequencyGrid(
            omega_lo=sec.number("omega_lo"),
            omega_hi=sec.number("omega_hi"),
            k=sec.integer("k"),
            scheme=sec.string("scheme", default="midpoint-uniform",
                              choices={"midpoint-uniform", "uniform"}),
        )

    protocol = _parse_protocol(sections["protocol"]) if "protocol" in sections else None

    rates = None
    if "rates" in sections:
        sec = sections["rates"]
        rates = RatesSpec(
            taus=_tau_grid(sec),
            mode=sec.string("mode", default="adaptive", choices={"adaptive", "grid"}),
            tolerance=sec.number("tolerance", default=1e-6),
        )

    output = None
    if "output" in sections:
        sec = sections["output"]
        output = OutputSpec(directory=sec.raw("directory"), prefix=sec.raw("prefix"))

    threshold = 0.01
    if "validity" in sections:
        threshold = sections["validity"].number("threshold", default=0.01)
        if threshold <= 0:
            raise ConfigurationError("[validity] threshold must be positive")

    return RunConfig(
        model=model,
        bath=bath,
        protocol=protocol,
        rates=rates,
        output=output,
        validity_threshold=threshold,
        sha256=hashlib.sha256(raw).hexdigest(),
    )
