"""Dynamical simulator for pulsed quasi-measurement decay (Zeno / anti-Zeno).

A two-level emitter coupled to a structured reservoir is interrogated by
repeated cycles of free decay, a resonant pi pulse to an auxiliary level,
and a fast photon-emitting decay back. The package evolves the exact
photon-sector amplitudes of that protocol, computes the effective decay
rate R(tau) as the overlap of the interrogation-broadened line with the
reservoir spectrum, and exposes both survival probabilities (photon-locked
and photon-traced) together with the weak-coupling validity diagnostics.
"""

from .spectral import (
    BathDiscretization,
    FlatBand,
    FrequencyGrid,
    Hydrogen2p1s,
    Lorentzian,
    SpectralModel,
    Tabulated,
    broadening_f,
    discretize,
    evaluate_g,
    total_weight,
)
from .dynamics import (
    PulseParams,
    PulseResult,
    SectorState,
    emission_map,
    free_evolve_ode,
    free_evolve_short,
    h_kernel,
    perturbative_weight,
    pulse_map,
    rabi_evolve,
)
from .cycles import (
    CycleHistory,
    ProtocolParams,
    ValidityReport,
    run_protocol,
    survival_locked,
    survival_traced,
    validity_check,
)
from .rates import (
    RateCurve,
    RateFit,
    bath_rate,
    decay_rate_quadrature,
    fit_rate,
    golden_rule_rate,
    rate_curve,
)
from .config import RunConfig, load_config
from . import errors

__version__ = "0.1.0"

__all__ = [
    "BathDiscretization",
    "FlatBand",
    "FrequencyGrid",
    "Hydrogen2p1s",
    "Lorentzian",
    "SpectralModel",
    "Tabulated",
    "broadening_f",
    "discretize",
    "evaluate_g",
    "total_weight",
    "PulseParams",
    "PulseResult",
    "SectorState",
    "emission_map",
    "free_evolve_ode",
    "free_evolve_short",
    "h_kernel",
    "perturbative_weight",
    "pulse_map",
    "rabi_evolve",
    "CycleHistory",
    "ProtocolParams",
    "ValidityReport",
    "run_protocol",
    "survival_locked",
    "survival_traced",
    "validity_check",
    "RateCurve",
    "RateFit",
    "bath_rate",
    "decay_rate_quadrature",
    "fit_rate",
    "golden_rule_rate",
    "rate_curve",
    "RunConfig",
    "load_config",
    "errors",
    "__version__",
]
