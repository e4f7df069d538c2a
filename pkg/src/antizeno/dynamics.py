"""Elementary evolutions of one photon sector.

A sector state holds the complex amplitude alpha on |2> (x) vacuum and the
amplitudes beta_k on |1, k>. Free decay couples them through the reservoir;
the pulse map transfers alpha to the auxiliary level; the emission map books
the returned amplitude into the next photon sector.

Two free propagators are provided: the analytic short-time (second order in
the couplings) map, and a fixed-step RK4 integration of the exact amplitude
equations carried out in the slowly-varying frame, which serves as the
independent oracle for the analytic map.
"""

from __future__ import annotations

from dataclasses import dataclass
import math
import warnings

import numpy as np

from .errors import (
    AccuracyError,
    ConfigurationError,
    InputError,
    ShortTimeValidityWarning,
)
from .spectral import BathDiscretization

__all__ = [
    "SectorState",
    "PulseParams",
    "PulseResult",
    "h_kernel",
    "perturbative_weight",
    "free_evolve_short",
    "free_evolve_ode",
    "rabi_evolve",
    "pulse_map",
    "emission_map",
]

# |x*t| below which series expansions replace the closed forms
_SERIES_RADIUS = 1e-4

# One state may carry at most the full excitation; the slack absorbs the
# O(g^4) norm inflation of the short-time propagator.
_NORM_SLACK = 1e-6


@dataclass(frozen=True)
class SectorState:
    """Amplitudes of one photon sector: alpha on |2, vac>, beta_k on |1, k>."""

    alpha: complex
    betas: np.ndarray

    def __post_init__(self):
        betas = np.asarray(self.betas, dtype=complex)
        if betas.ndim != 1:
            raise InputError("betas must be a 1-d complex array")
        norm = abs(self.alpha) ** 2 + float(np.sum(np.abs(betas) ** 2))
        if not math.isfinite(norm):
            raise InputError("state amplitudes must be finite")
        if norm > 1.0 + _NORM_SLACK:
            raise InputError(f"sector carries more than the full excitation: {norm!r}")
        betas.setflags(write=False)
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "alpha", complex(self.alpha))

    @classmethod
    def excited(cls, n_modes: int) -> "SectorState":
        """The bare excited state |2, vac> over ``n_modes`` reservoir modes."""
        return cls(alpha=1.0 + 0.0j, betas=np.zeros(n_modes, dtype=complex))

    @property
    def size(self) -> int:
        return self.betas.size

    def norm_sq(self) -> float:
        return abs(self.alpha) ** 2 + float(np.sum(np.abs(self.betas) ** 2))


@dataclass(frozen=True)
class PulseParams:
    """Resonant drive between |2> and the auxiliary level |3>.

    The drive frequency equals the splitting omega3 - omega2 (resonance);
    a pi pulse lasts t_p = pi / rabi exactly.
    """

    rabi: float
    omega2: float
    omega3: float

    def __post_init__(self):
        for name in ("rabi", "omega2", "omega3"):
            if not math.isfinite(getattr(self, name)):
                raise InputError(f"{name} must be finite")
        if self.rabi <= 0:
            raise InputError("rabi frequency must be positive")

    @property
    def detuning(self) -> float:
        return self.omega3 - self.omega2

    @property
    def t_p(self) -> float:
        return math.pi / self.rabi


@dataclass(frozen=True)
class PulseResult:
    """Outcome of a pi pulse: amplitude promoted to |3, vac> plus the ground part."""

    promoted: complex
    ground: SectorState


def h_kernel(omega, t: float):
    """First-order evolution kernel h_t(omega) = (exp(i omega t) - 1) / omega.

    Series-evaluated for |omega * t| < 1e-4 to avoid cancellation; the limit
    at omega -> 0 is i*t.
    """
    if not math.isfinite(t) or t < 0:
        raise InputError("t must be nonnegative and finite")
    omega = np.asarray(omega, dtype=float)
    if not np.all(np.isfinite(omega)):
        raise InputError("omega must be finite")
    z = omega * t
    small = np.abs(z) < _SERIES_RADIUS
    safe = np.where(small, 1.0, omega)
    closed = (np.exp(1j * z) - 1.0) / safe
    iz = 1j * z
    # i t * sum_{n>=0} (i z)^n / (n+1)!
    series = 1j * t * (1.0 + iz / 2.0 + iz**2 / 6.0 + iz**3 / 24.0 + iz**4 / 120.0)
    out = np.where(small, series, closed)
    return out if out.ndim else complex(out)


def _detuned_weight(x, t: float):
    """(h_t(x) - i t) / x, the second-order weight of the short-time map.

    Near x = 0 the closed form cancels catastrophically; a 4th-order series
    takes over below |x t| < 1e-4 (limit -t^2/2).
    """
    x = np.asarray(x, dtype=float)
    z = x * t
    small = np.abs(z) < _SERIES_RADIUS
    safe = np.where(small, 1.0, x)
    closed = (h_kernel(x, t) - 1j * t) / safe
    # t^2 * sum_{m>=0} i^(m+2) z^m / (m+2)!
    series = t * t * (-0.5 - 1j * z / 6.0 + z**2 / 24.0 + 1j * z**3 / 120.0 - z**4 / 720.0)
    out = np.where(small, series, closed)
    return out if out.ndim else complex(out)


def _check_lengths(state: SectorState, bath: BathDiscretization):
    if state.size != bath.size:
        raise InputError(
            f"state has {state.size} reservoir amplitudes but the bath has {bath.size} modes"
        )


def perturbative_weight(bath: BathDiscretization, omega2: float, tau: float) -> float:
    """Sum_k g_k^2 |h_tau(omega2 - omega_k)|^2, the short-time expansion weight.

    This is also the decayed probability 1 - |alpha|^2 to leading order; the
    short-time propagator is trustworthy while it stays well below 1.
    """
    h = h_kernel(omega2 - bath.omegas, tau)
    return float(np.sum(bath.couplings**2 * np.abs(h) ** 2))


def free_evolve_short(
    state: SectorState, bath: BathDiscretization, omega2: float, tau: float
) -> SectorState:
    """Analytic short-time free evolution over an interval tau.

    Second order in the couplings for alpha, first order for the beta_k:

        alpha(tau) = alpha(0) [1 + sum_k g_k^2 (h(x_k) - i tau)/x_k] e^{-i w2 tau}
                     - sum_k g_k beta_k(0) h(x_k) e^{-i w2 tau}
        beta_k(tau) = beta_k(0) e^{-i w_k tau} - alpha(0) g_k h(x_k) e^{-i w2 tau}

    with x_k = omega2 - omega_k. Warns when the perturbative weight exceeds
    0.1, where the expansion is no longer meaningful.
    """
    if not math.isfinite(tau) or tau <= 0:
        raise InputError("tau must be positive and finite")
    _check_lengths(state, bath)
    g = bath.couplings
    x = omega2 - bath.omegas
    h = h_kernel(x, tau)

    weight = float(np.sum(g**2 * np.abs(h) ** 2))
    if weight > 0.1:
        warnings.warn(
            f"perturbative weight {weight:.3g} > 0.1; short-time propagator unreliable",
            ShortTimeValidityWarning,
            stacklevel=2,
        )

    phase2 = np.exp(-1j * omega2 * tau)
    alpha = (
        state.alpha * (1.0 + np.sum(g**2 * _detuned_weight(x, tau))) * phase2
        - np.sum(g * state.betas * h) * phase2
    )
    betas = state.betas * np.exp(-1j * bath.omegas * tau) - state.alpha * g * h * phase2
    return SectorState(alpha=alpha, betas=betas)


def free_evolve_ode(
    state: SectorState,
    bath: BathDiscretization,
    omega2: float,
    tau: float,
    dt: float,
) -> SectorState:
    """Exact amplitude equations integrated by fixed-step RK4 (the oracle).

    Works in the slowly-varying frame a = alpha e^{i w2 t},
    b_k = beta_k e^{i w_k t}, where the free phases are applied exactly and
    only the interaction is stepped:

        da/dt  = -i sum_k g_k b_k e^{+i x_k t}
        db_k/dt = -i g_k a e^{-i x_k t},    x_k = omega2 - omega_k.

    ``dt`` is an upper bound on the step; the integrator subdivides further
    if needed to keep the norm drift per call at or below 1e-9.
    """
    if not math.isfinite(tau) or tau <= 0:
        raise InputError("tau must be positive and finite")
    if not math.isfinite(dt) or dt <= 0 or dt > tau:
        raise ConfigurationError("dt must satisfy 0 < dt <= tau")
    fastest = max(float(np.max(np.abs(bath.omegas))), abs(omega2))
    if dt * fastest > 0.1:
        raise ConfigurationError(
            f"dt*max frequency = {dt * fastest:.3g} > 0.1; reduce dt to resolve the dynamics"
        )
    _check_lengths(state, bath)

    g = bath.couplings
    x = omega2 - bath.omegas
    norm0 = state.norm_sq()

    def integrate(n_steps: int):
        h = tau / n_steps
        a = complex(state.alpha)
        b = np.array(state.betas, dtype=complex)

        def rhs(t, a_val, b_val):
            phase = np.exp(1j * x * t)
            da = -1j * np.sum(g * b_val * phase)
            db = -1j * g * a_val / phase
            return da, db

        t = 0.0
        for _ in range(n_steps):
            k1a, k1b = rhs(t, a, b)
            k2a, k2b = rhs(t + h / 2, a + h / 2 * k1a, b + h / 2 * k1b)
            k3a, k3b = rhs(t + h / 2, a + h / 2 * k2a, b + h / 2 * k2b)
            k4a, k4b = rhs(t + h, a + h * k3a, b + h * k3b)
            a = a + h / 6 * (k1a + 2 * k2a + 2 * k3a + k4a)
            b = b + h / 6 * (k1b + 2 * k2b + 2 * k3b + k4b)
            t += h
        return a, b

    n_steps = max(1, math.ceil(tau / dt))
    for _ in range(6):
        a, b = integrate(n_steps)
        drift = abs((abs(a) ** 2 + float(np.sum(np.abs(b) ** 2))) - norm0)
        if drift <= 1e-9:
            break
        n_steps *= 2
    else:
        raise AccuracyError(f"norm drift {drift:.3g} > 1e-9 even after substepping")

    alpha = a * np.exp(-1j * omega2 * tau)
    betas = b * np.exp(-1j * bath.omegas * tau)
    return SectorState(alpha=alpha, betas=betas)


def rabi_evolve(a: complex, c: complex, t: float, pulse: PulseParams) -> tuple[complex, complex]:
    """Resonant Rabi rotation between |2, vac> (a) and |3, vac> (c) for time t.

    a(t) = [a cos(Omega t/2) - i c sin(Omega t/2)] e^{-i w2 t}
    c(t) = [c cos(Omega t/2) - i a sin(Omega t/2)] e^{-i w3 t}

    Ground amplitudes only pick up free phases during the pulse and are
    handled by the caller.
    """
    if not math.isfinite(t) or t < 0:
        raise InputError("t must be nonnegative and finite")
    half = 0.5 * pulse.rabi * t
    cos_h, sin_h = math.cos(half), math.sin(half)
    a_t = (a * cos_h - 1j * c * sin_h) * np.exp(-1j * pulse.omega2 * t)
    c_t = (c * cos_h - 1j * a * sin_h) * np.exp(-1j * pulse.omega3 * t)
    return complex(a_t), complex(c_t)


def pulse_map(state: SectorState, pulse: PulseParams, bath: BathDiscretization) -> PulseResult:
    """Apply a pi pulse: alpha is promoted to |3, vac>, betas pick up phases.

    promoted = -i alpha e^{-i w3 t_p}; the ground part keeps the beta_k
    rephased by e^{-i w_k t_p} with alpha emptied. Assumes the auxiliary
    level starts unpopulated, which the cycle engine guarantees.
    """
    _check_lengths(state, bath)
    t_p = pulse.t_p
    promoted = -1j * state.alpha * np.exp(-1j * pulse.omega3 * t_p)
    ground = SectorState(
        alpha=0.0 + 0.0j,
        betas=state.betas * np.exp(-1j * bath.omegas * t_p),
    )
    return PulseResult(promoted=complex(promoted), ground=ground)


def emission_map(promoted: complex) -> complex:
    """Instantaneous decay |3, vac> -> |2, one more photon>.

    The amplitude is unchanged; the caller increments the photon-sector
    index. The decay duration is treated as exactly zero (strong-drive,
    fast-decay limit).
    """
    return complex(promoted)
