"""Spectral-density models, the measurement broadening kernel, and bath discretization.

Conventions: hbar = 1, every frequency is an angular frequency. A spectral
model describes the interacting spectral distribution G(omega) of the
reservoir, i.e. the squared-coupling density: a bath mode at omega_k carries
g_k^2 = G(omega_k) * dOmega_k. G therefore has units of rad/s, and its
integral over omega has units of rad^2/s^2.

All models are immutable and safe to share between threads. Every quantity
here is covariant under a global rescaling of frequencies (and the inverse
rescaling of times), which is what makes it safe to compute either in SI
units or in units of a reference frequency; ``rescaled`` produces the
normalized twin of a model.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .errors import (
    ConfigurationError,
    InputError,
    SupportCoverageWarning,
    UnsupportedModelError,
)

import warnings

__all__ = [
    "SpectralModel",
    "Hydrogen2p1s",
    "Lorentzian",
    "FlatBand",
    "Tabulated",
    "FrequencyGrid",
    "BathDiscretization",
    "evaluate_g",
    "broadening_f",
    "discretize",
    "total_weight",
]


def _sinc(x):
    """Unnormalized sinc(x) = sin(x)/x with sinc(0) = 1."""
    return np.sinc(np.asarray(x) / np.pi)


def _check_finite(name, value):
    if not np.all(np.isfinite(value)):
        raise InputError(f"{name} must be finite")


class SpectralModel:
    """Base class for interacting spectral distributions G(omega) >= 0."""

    #: short tag used by config files and reports
    variant: str = "abstract"

    def density(self, omega):
        """G(omega); accepts scalars or arrays, vanishes outside the support."""
        omega = np.asarray(omega, dtype=float)
        _check_finite("omega", omega)
        out = self._raw_density(omega)
        return out if out.ndim else float(out)

    def _raw_density(self, omega: np.ndarray) -> np.ndarray:
        """density() without input validation; quadrature hot path."""
        raise NotImplementedError

    def total_weight(self) -> float:
        """Integral of G over its full support [rad^2/s^2]."""
        raise NotImplementedError

    def partial_weight(self, lo: float, hi: float) -> float:
        """Integral of G over [lo, hi] (closed form for every variant)."""
        raise NotImplementedError

    def support_interval(self) -> tuple[float, float]:
        """Structural support (lo, hi); infinite endpoints allowed."""
        raise NotImplementedError

    def mass_hull(self, fraction: float = 1e-9) -> tuple[float, float]:
        """Finite interval containing at least (1 - fraction) of the weight."""
        raise NotImplementedError

    def breakpoints(self) -> np.ndarray:
        """Frequencies where G changes character; quadrature cells respect them."""
        raise NotImplementedError

    def peak_density(self) -> float:
        """An upper bound on G over its support (used for tail bounds)."""
        raise NotImplementedError

    def frequency_scale(self) -> float:
        """Characteristic angular frequency used for internal normalization."""
        raise NotImplementedError

    def rescaled(self, scale: float) -> "SpectralModel":
        """Model in units of ``scale``: G'(w) = G(w * scale) / scale."""
        raise NotImplementedError


@dataclass(frozen=True)
class Hydrogen2p1s(SpectralModel):
    """G(omega) = eta * omega / (1 + (omega/omega_c)^2)^4 for omega > 0.

    The form of the coupling density for an electric-dipole transition with
    an exponential-like cutoff; ``eta`` is dimensionless, ``omega_c`` is the
    cutoff angular frequency. The physical 2p-1s parameters are
    eta = 6.435e-9, omega_c = 8.491e18 rad/s.
    """

    eta: float
    omega_c: float
    variant = "hydrogen2p1s"

    def __post_init__(self):
        _check_finite("eta", self.eta)
        _check_finite("omega_c", self.omega_c)
        if self.eta < 0:
            raise InputError("eta must be nonnegative")
        if self.omega_c <= 0:
            raise InputError("omega_c must be positive")

    def _raw_density(self, omega: np.ndarray) -> np.ndarray:
        x = omega / self.omega_c
        y = 1.0 + x * x
        y2 = y * y
        return np.where(omega > 0.0, self.eta * omega / (y2 * y2), 0.0)

    def total_weight(self) -> float:
        # int_0^inf x (1+x^2)^-4 dx = 1/6
        return self.eta * self.omega_c**2 / 6.0

    def partial_weight(self, lo: float, hi: float) -> float:
        def cdf(w):
            if w <= 0.0:
                return 0.0
            x2 = (w / self.omega_c) ** 2
            return self.eta * self.omega_c**2 / 6.0 * (1.0 - (1.0 + x2) ** -3)

        if hi < lo:
            raise InputError("partial_weight needs lo <= hi")
        return cdf(hi) - cdf(lo)

    def support_interval(self) -> tuple[float, float]:
        return (0.0, math.inf)

    def mass_hull(self, fraction: float = 1e-9) -> tuple[float, float]:
        # tail mass beyond x*omega_c is (1 + x^2)^-3
        x = math.sqrt(max(fraction, 1e-300) ** (-1.0 / 3.0) - 1.0)
        return (0.0, x * self.omega_c)

    def breakpoints(self) -> np.ndarray:
        ladder = self.omega_c * 2.0 ** np.arange(-6, 7)
        return np.concatenate(([0.0], ladder))

    def peak_density(self) -> float:
        # maximum of x (1+x^2)^-4 at x = 1/sqrt(7)
        return self.eta * self.omega_c / math.sqrt(7.0) * (7.0 / 8.0) ** 4

    def frequency_scale(self) -> float:
        return self.omega_c

    def rescaled(self, scale: float) -> "Hydrogen2p1s":
        # eta is dimensionless: G(w*s)/s leaves it untouched
        return Hydrogen2p1s(eta=self.eta, omega_c=self.omega_c / scale)


@dataclass(frozen=True)
class Lorentzian(SpectralModel):
    """G(omega) = strength * width^2 / ((omega - center)^2 + width^2).

    ``strength`` is the peak height [rad/s], ``width`` the half width at half
    maximum. The support is the whole real line and the total weight is
    pi * strength * width.
    """

    strength: float
    center: float
    width: float
    variant = "lorentzian"

    def __post_init__(self):
        for name in ("strength", "center", "width"):
            _check_finite(name, getattr(self, name))
        if self.strength < 0:
            raise InputError("strength must be nonnegative")
        if self.width <= 0:
            raise InputError("width must be positive")

    def _raw_density(self, omega: np.ndarray) -> np.ndarray:
        d = omega - self.center
        return self.strength * self.width**2 / (d * d + self.width**2)

    def total_weight(self) -> float:
        return math.pi * self.strength * self.width

    def partial_weight(self, lo: float, hi: float) -> float:
        if hi < lo:
            raise InputError("partial_weight needs lo <= hi")
        a = math.atan((lo - self.center) / self.width)
        b = math.atan((hi - self.center) / self.width)
        return self.strength * self.width * (b - a)

    def support_interval(self) -> tuple[float, float]:
        return (-math.inf, math.inf)

    def mass_hull(self, fraction: float = 1e-9) -> tuple[float, float]:
        # mass outside center +- x*width is 1 - (2/pi) atan(x)
        x = math.tan(math.pi / 2.0 * (1.0 - max(fraction, 1e-12)))
        return (self.center - x * self.width, self.center + x * self.width)

    def breakpoints(self) -> np.ndarray:
        ladder = self.width * 2.0 ** np.arange(-3, 9)
        return np.concatenate((self.center - ladder[::-1], [self.center], self.center + ladder))

    def peak_density(self) -> float:
        return self.strength

    def frequency_scale(self) -> float:
        return max(abs(self.center) + self.width, self.width)

    def rescaled(self, scale: float) -> "Lorentzian":
        return Lorentzian(
            strength=self.strength / scale,
            center=self.center / scale,
            width=self.width / scale,
        )


@dataclass(frozen=True)
class FlatBand(SpectralModel):
    """Constant density ``g0_density`` on [omega_min, omega_max], zero outside.

    ``omega_max`` may be ``inf`` (a genuinely flat reservoir); such a model
    has no finite total weight and ``total_weight`` raises.
    """

    g0_density: float
    omega_min: float
    omega_max: float
    variant = "flat_band"

    def __post_init__(self):
        _check_finite("g0_density", self.g0_density)
        _check_finite("omega_min", self.omega_min)
        if self.g0_density < 0:
            raise InputError("g0_density must be nonnegative")
        if not self.omega_max > self.omega_min:
            raise InputError("omega_max must exceed omega_min")

    def _raw_density(self, omega: np.ndarray) -> np.ndarray:
        inside = (omega >= self.omega_min) & (omega <= self.omega_max)
        return np.where(inside, self.g0_density, 0.0)

    def total_weight(self) -> float:
        if math.isinf(self.omega_max):
            raise UnsupportedModelError("flat band with infinite support has no finite weight")
        return self.g0_density * (self.omega_max - self.omega_min)

    def partial_weight(self, lo: float, hi: float) -> float:
        if hi < lo:
            raise InputError("partial_weight needs lo <= hi")
        overlap = min(hi, self.omega_max) - max(lo, self.omega_min)
        return self.g0_density * max(overlap, 0.0)

    def support_interval(self) -> tuple[float, float]:
        return (self.omega_min, self.omega_max)

    def mass_hull(self, fraction: float = 1e-9) -> tuple[float, float]:
        return (self.omega_min, self.omega_max)

    def breakpoints(self) -> np.ndarray:
        pts = [self.omega_min]
        if math.isfinite(self.omega_max):
            pts.append(self.omega_max)
        return np.asarray(pts)

    def peak_density(self) -> float:
        return self.g0_density

    def frequency_scale(self) -> float:
        if math.isfinite(self.omega_max):
            return max(abs(self.omega_min), abs(self.omega_max))
        return max(abs(self.omega_min), 1.0)

    def rescaled(self, scale: float) -> "FlatBand":
        return FlatBand(
            g0_density=self.g0_density / scale,
            omega_min=self.omega_min / scale,
            omega_max=self.omega_max / scale,
        )


@dataclass(frozen=True)
class Tabulated(SpectralModel):
    """Piecewise-linear G from sorted (omega, G) samples; zero outside the table."""

    omegas: np.ndarray
    values: np.ndarray
    variant = "tabulated"

    def __post_init__(self):
        omegas = np.asarray(self.omegas, dtype=float)
        values = np.asarray(self.values, dtype=float)
        _check_finite("omegas", omegas)
        _check_finite("values", values)
        if omegas.ndim != 1 or omegas.size < 2:
            raise InputError("tabulated model needs at least two samples")
        if values.shape != omegas.shape:
            raise InputError("omegas and values must have equal length")
        if not np.all(np.diff(omegas) > 0):
            raise InputError("tabulated frequencies must be strictly increasing")
        if np.any(values < 0):
            raise InputError("tabulated G values must be nonnegative")
        omegas.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "omegas", omegas)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_csv(cls, path) -> "Tabulated":
        """Load a two-column CSV (omega [rad/s], G [rad/s]); '#' comments allowed."""
        data = np.loadtxt(path, comments="#", delimiter=",", ndmin=2)
        if data.shape[1] != 2:
            raise InputError(f"{path}: expected two columns (omega, G)")
        return cls(omegas=data[:, 0], values=data[:, 1])

    def _raw_density(self, omega: np.ndarray) -> np.ndarray:
        return np.interp(omega, self.omegas, self.values, left=0.0, right=0.0)

    def total_weight(self) -> float:
        return float(np.trapezoid(self.values, self.omegas))

    def partial_weight(self, lo: float, hi: float) -> float:
        if hi < lo:
            raise InputError("partial_weight needs lo <= hi")
        lo = max(lo, self.omegas[0])
        hi = min(hi, self.omegas[-1])
        if hi <= lo:
            return 0.0
        inner = self.omegas[(self.omegas > lo) & (self.omegas < hi)]
        grid = np.concatenate(([lo], inner, [hi]))
        return float(np.trapezoid(self.density(grid), grid))

    def support_interval(self) -> tuple[float, float]:
        return (float(self.omegas[0]), float(self.omegas[-1]))

    def mass_hull(self, fraction: float = 1e-9) -> tuple[float, float]:
        return self.support_interval()

    def breakpoints(self) -> np.ndarray:
        return self.omegas

    def peak_density(self) -> float:
        return float(np.max(self.values))

    def frequency_scale(self) -> float:
        return float(max(abs(self.omegas[0]), abs(self.omegas[-1])))

    def rescaled(self, scale: float) -> "Tabulated":
        return Tabulated(omegas=self.omegas / scale, values=self.values / scale)


def evaluate_g(model: SpectralModel, omega):
    """Interacting spectral distribution G(omega) for ``model`` [rad/s]."""
    return model.density(omega)


def total_weight(model: SpectralModel) -> float:
    """Integrated spectrum of ``model`` [rad^2/s^2]."""
    return model.total_weight()


def broadening_f(omega, tau: float, omega2: float):
    """Measurement-induced level-broadening function F(omega, tau).

    F(omega, tau) = (tau / 2 pi) * sinc^2((omega2 - omega) tau / 2), the
    sinc-squared spectral window of width ~1/tau produced by interrogating
    the emitter at interval tau. Normalized: its integral over omega is 1.
    """
    if not np.isfinite(tau) or tau <= 0:
        raise InputError("tau must be positive and finite")
    omega = np.asarray(omega, dtype=float)
    _check_finite("omega", omega)
    _check_finite("omega2", omega2)
    out = tau / (2.0 * math.pi) * _sinc((omega2 - omega) * tau / 2.0) ** 2
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class FrequencyGrid:
    """Discretization request: K nodes covering [omega_lo, omega_hi].

    scheme 'midpoint-uniform' places nodes at the midpoints of K equal cells
    (weights = cell widths); 'uniform' places nodes at K equally spaced
    points including both endpoints (trapezoid weights).
    """

    omega_lo: float
    omega_hi: float
    k: int
    scheme: str = "midpoint-uniform"

    def __post_init__(self):
        _check_finite("omega_lo", self.omega_lo)
        _check_finite("omega_hi", self.omega_hi)
        if not self.omega_hi > self.omega_lo:
            raise ConfigurationError("omega_hi must exceed omega_lo")
        if self.k < 2:
            raise ConfigurationError("grid needs K >= 2 modes")
        if self.scheme not in ("midpoint-uniform", "uniform"):
            raise ConfigurationError(f"unknown grid scheme {self.scheme!r}")


@dataclass(frozen=True)
class BathDiscretization:
    """K reservoir modes: frequencies, couplings g_k, and quadrature widths.

    Built by ``discretize`` so that g_k^2 = G(omega_k) * weight_k; the sum
    of g_k^2 then approximates the model's weight over the covered interval.
    ``captured_weight`` records that analytic interval weight (NaN when the
    model has no finite weight).
    """

    omegas: np.ndarray
    couplings: np.ndarray
    weights: np.ndarray
    captured_weight: float = math.nan

    def __post_init__(self):
        omegas = np.asarray(self.omegas, dtype=float)
        couplings = np.asarray(self.couplings, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if not (omegas.shape == couplings.shape == weights.shape) or omegas.ndim != 1:
            raise InputError("omegas, couplings, weights must be equal-length 1-d arrays")
        _check_finite("omegas", omegas)
        _check_finite("couplings", couplings)
        if not np.all(np.diff(omegas) > 0):
            raise InputError("mode frequencies must be strictly increasing")
        if np.any(couplings < 0):
            raise InputError("couplings must be nonnegative")
        for arr in (omegas, couplings, weights):
            arr.setflags(write=False)
        object.__setattr__(self, "omegas", omegas)
        object.__setattr__(self, "couplings", couplings)
        object.__setattr__(self, "weights", weights)

    @property
    def size(self) -> int:
        return self.omegas.size

    def coupling_weight(self) -> float:
        """Sum of g_k^2, the discrete stand-in for the integrated spectrum."""
        return float(np.sum(self.couplings**2))

    def scaled(self, factor: float) -> "BathDiscretization":
        """Same modes with every coupling multiplied by ``factor``.

        Used for global coupling-strength sweeps; equivalent to scaling G by
        factor^2.
        """
        if factor < 0:
            raise InputError("coupling scale factor must be nonnegative")
        return BathDiscretization(
            omegas=self.omegas.copy(),
            couplings=self.couplings * factor,
            weights=self.weights.copy(),
            captured_weight=self.captured_weight * factor**2,
        )


def discretize(model: SpectralModel, grid: FrequencyGrid) -> BathDiscretization:
    """Sample ``model`` onto discrete reservoir modes with g_k = sqrt(G dO).

    Deterministic for fixed inputs. Warns if the grid captures less than
    99.9% of the model's total weight; raises ConfigurationError when the
    grid misses the support entirely.
    """
    lo, hi = model.support_interval()
    if grid.omega_hi <= lo or grid.omega_lo >= hi:
        raise ConfigurationError(
            f"grid [{grid.omega_lo:g}, {grid.omega_hi:g}] does not overlap "
            f"the model support [{lo:g}, {hi:g}]"
        )

    if grid.scheme == "midpoint-uniform":
        edges = np.linspace(grid.omega_lo, grid.omega_hi, grid.k + 1)
        omegas = 0.5 * (edges[:-1] + edges[1:])
        weights = np.diff(edges)
    else:  # uniform, trapezoid weights
        omegas = np.linspace(grid.omega_lo, grid.omega_hi, grid.k)
        dw = (grid.omega_hi - grid.omega_lo) / (grid.k - 1)
        weights = np.full(grid.k, dw)
        weights[0] = weights[-1] = dw / 2.0

    couplings = np.sqrt(model.density(omegas) * weights)
    captured = model.partial_weight(grid.omega_lo, grid.omega_hi)
    try:
        full = model.total_weight()
    except UnsupportedModelError:
        full = math.nan
    if math.isfinite(full) and full > 0 and captured < 0.999 * full:
        warnings.warn(
            f"grid captures {captured / full:.4%} of the spectral weight "
            "(< 99.9%); widen [omega_lo, omega_hi]",
            SupportCoverageWarning,
            stacklevel=2,
        )
    return BathDiscretization(
        omegas=omegas, couplings=couplings, weights=weights, captured_weight=captured
    )
