"""Effective decay rate R(tau) by overlap quadrature, its limits, and rate fits.

R(tau) = 2 pi * integral F(omega, tau) G(omega) d omega, with F the
sinc^2-shaped broadening window of the interrogation. The integrand
oscillates on the scale 1/tau while G varies on its own scale, so the
adaptive mode works in the scaled variable u = (omega - omega2) tau / 2:
cells are bounded by the sinc zeros (lobe by lobe around the main lobe) and
by the model's structural breakpoints, and side lobes are added in doubling
blocks until an analytic bound certifies that the remaining tail cannot
move the total by more than the tolerance.

Limits: R -> 2 pi G(omega2) (the golden-rule rate) as tau -> infinity, and
R/tau -> integral of G as tau -> 0.
"""

from __future__ import annotations

from dataclasses import dataclass
import math
import warnings

import numpy as np

from .cycles import CycleHistory
from .errors import (
    AccuracyError,
    FitDomainError,
    InputError,
    SupportCoverageWarning,
    UnsupportedModelError,
)
from .spectral import BathDiscretization, FrequencyGrid, SpectralModel, discretize

__all__ = [
    "RateCurve",
    "RateFit",
    "decay_rate_quadrature",
    "golden_rule_rate",
    "rate_curve",
    "bath_rate",
    "fit_rate",
    "RATE_CSV_COLUMNS",
]

RATE_CSV_COLUMNS = "tau_s,R_per_s,R_over_golden_rule"

# Gauss-Legendre node pairs: cell rule and its embedded error estimate,
# evaluated in one fused call (first 15 nodes high rule, last 7 low rule)
_GL_HI = np.polynomial.legendre.leggauss(15)
_GL_LO = np.polynomial.legendre.leggauss(7)
_GL_NODES = np.concatenate([_GL_HI[0], _GL_LO[0]])
_GL_W_HI = np.concatenate([_GL_HI[1], np.zeros(7)])
_GL_W_LO = np.concatenate([np.zeros(15), _GL_LO[1]])

# half-width (in lobes) of the region integrated before block doubling starts
_CORE_LOBES = 64


def _sinc(x):
    return np.sinc(np.asarray(x) / np.pi)


@dataclass(frozen=True)
class RateCurve:
    """Sampled map tau -> R(tau) with its golden-rule reference.

    ``failed`` lists indices where the quadrature could not certify the
    requested accuracy; those entries hold the best estimate obtained.
    """

    taus: np.ndarray
    rates: np.ndarray
    golden_rule: float
    omega2: float
    failed: tuple = ()

    def __post_init__(self):
        taus = np.asarray(self.taus, dtype=float)
        rates = np.asarray(self.rates, dtype=float)
        if taus.shape != rates.shape or taus.ndim != 1:
            raise InputError("taus and rates must be equal-length 1-d arrays")
        if not np.all(np.diff(taus) > 0):
            raise InputError("taus must be strictly increasing")
        if np.any(rates < 0):
            raise InputError("rates must be nonnegative")
        taus.setflags(write=False)
        rates.setflags(write=False)
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "rates", rates)

    def to_csv(self, fileobj, header_comment: str | None = None):
        """Write tau, R, R/R_GR rows (LF endings, 12 significant digits)."""
        if header_comment:
            fileobj.write(f"# {header_comment}\n")
        fileobj.write(RATE_CSV_COLUMNS + "\n")
        gr = self.golden_rule
        for tau, rate in zip(self.taus, self.rates):
            ratio = rate / gr if gr > 0 else math.nan
            fileobj.write(f"{tau:.11e},{rate:.11e},{ratio:.11e}\n")


@dataclass(frozen=True)
class RateFit:
    """Least-squares decay rate from a survival series and its fit residual."""

    rate: float
    residual: float


class _CellSum:
    """Accumulates cell integrals with embedded error estimates."""

    def __init__(self, func, budget: int):
        self.func = func
        self.budget = budget
        self.count = 0
        self.starts: list[np.ndarray] = []
        self.ends: list[np.ndarray] = []
        self.vals: list[np.ndarray] = []
        self.errs: list[np.ndarray] = []

    def _rule(self, starts, ends):
        """Fused GL15 value and GL7 error probe per cell."""
        centers = 0.5 * (starts + ends)
        halves = 0.5 * (ends - starts)
        fx = self.func(centers[:, None] + halves[:, None] * _GL_NODES[None, :])
        return halves * (fx @ _GL_W_HI), halves * (fx @ _GL_W_LO)

    def add(self, edges: np.ndarray) -> float:
        """Integrate the cells bounded by ``edges``; returns their summed value."""
        starts, ends = edges[:-1], edges[1:]
        self.count += starts.size
        if self.count > self.budget:
            raise _BudgetExceeded
        hi, lo = self._rule(starts, ends)
        self.starts.append(starts)
        self.ends.append(ends)
        self.vals.append(hi)
        self.errs.append(np.abs(hi - lo))
        return float(np.sum(hi))

    @property
    def total(self) -> float:
        return float(sum(np.sum(v) for v in self.vals))

    @property
    def err(self) -> float:
        return float(sum(np.sum(e) for e in self.errs))

    def refine(self, tol_abs: float, max_rounds: int = 4):
        """Bisect offender cells until the summed error estimate fits tol_abs."""
        starts = np.concatenate(self.starts)
        ends = np.concatenate(self.ends)
        vals = np.concatenate(self.vals)
        errs = np.concatenate(self.errs)
        for _ in range(max_rounds):
            if float(np.sum(errs)) <= tol_abs:
                break
            offender = errs > tol_abs / (2 * errs.size)
            if not np.any(offender):
                break
            self.count += 2 * int(np.sum(offender))
            if self.count > self.budget:
                raise _BudgetExceeded
            mids = 0.5 * (starts[offender] + ends[offender])
            new_starts = np.concatenate([starts[offender], mids])
            new_ends = np.concatenate([mids, ends[offender]])
            hi, lo = self._rule(new_starts, new_ends)
            starts = np.concatenate([starts[~offender], new_starts])
            ends = np.concatenate([ends[~offender], new_ends])
            vals = np.concatenate([vals[~offender], hi])
            errs = np.concatenate([errs[~offender], np.abs(hi - lo)])
        self.starts, self.ends = [starts], [ends]
        self.vals, self.errs = [vals], [errs]


class _BudgetExceeded(Exception):
    pass


def _segment_edges(a: float, b: float, breakpoints: np.ndarray) -> np.ndarray:
    """Cell edges for [a, b]: the ends, interior lobe zeros, and breakpoints."""
    k0, k1 = math.ceil(a / math.pi), math.floor(b / math.pi)
    lobes = np.arange(k0, k1 + 1) * math.pi
    inner = breakpoints[(breakpoints > a) & (breakpoints < b)]
    return np.unique(np.concatenate([[a, b], lobes[(lobes > a) & (lobes < b)], inner]))


def decay_rate_quadrature(
    model: SpectralModel,
    omega2: float,
    tau: float,
    mode: str = "adaptive",
    tolerance: float = 1e-6,
    grid_k: int = 200_001,
    cell_budget: int = 2_000_000,
) -> float:
    """Effective decay rate R(tau) = 2 pi * integral F(omega, tau) G d omega [1/s].

    mode 'adaptive' integrates lobe by lobe with certified relative accuracy
    <= tolerance and raises AccuracyError (carrying the best estimate) when
    ``cell_budget`` runs out first. mode 'grid' sums a midpoint bath of
    ``grid_k`` modes over the model's mass hull; its accuracy is limited by
    the grid resolution against the 1/tau oscillation and it exists as an
    independent cross-check of the adaptive path.
    """
    if not math.isfinite(tau) or tau <= 0:
        raise InputError("tau must be positive and finite")
    if not math.isfinite(omega2):
        raise InputError("omega2 must be finite")
    if mode not in ("adaptive", "grid"):
        raise InputError(f"unknown quadrature mode {mode!r}")
    if tolerance <= 0:
        raise InputError("tolerance must be positive")

    # normalize by the model's own frequency scale; R maps back linearly
    scale = model.frequency_scale()
    m = model.rescaled(scale)
    w2 = omega2 / scale
    t = tau * scale

    if mode == "grid":
        lo, hi = m.mass_hull(min(tolerance, 1e-8) * 1e-2)
        if math.isinf(lo) or math.isinf(hi):
            raise UnsupportedModelError("grid mode needs a finite spectral hull")
        bath = discretize(m, FrequencyGrid(lo, hi, grid_k))
        return bath_rate(bath, w2, t) * scale

    # u = (omega - w2) t / 2 maps R to 2 * int sinc^2(u) G(w2 + 2u/t) du
    def integrand(u):
        return _sinc(u) ** 2 * m._raw_density(w2 + 2.0 * u / t)

    def to_omega(u: float) -> float:
        return w2 + 2.0 * u / t

    hull_lo, hull_hi = m.mass_hull(min(tolerance, 1e-8) * 1e-2)
    sup_lo, sup_hi = m.support_interval()
    lo_w = max(hull_lo, sup_lo)
    hi_w = min(hull_hi, sup_hi)
    if not lo_w < hi_w:
        return 0.0
    u_lo = -math.inf if math.isinf(lo_w) else (lo_w - w2) * t / 2.0
    u_hi = math.inf if math.isinf(hi_w) else (hi_w - w2) * t / 2.0

    bps = (np.asarray(m.breakpoints(), dtype=float) - w2) * t / 2.0
    peak = m.peak_density()

    # central window around the main lobe, shifted to the domain if needed
    half = _CORE_LOBES * math.pi
    win_lo = max(u_lo, -half)
    win_hi = min(u_hi, half)
    if not win_lo < win_hi:
        if u_lo > half:
            win_lo, win_hi = u_lo, min(u_hi, u_lo + 2 * half)
        else:
            win_lo, win_hi = max(u_lo, u_hi - 2 * half), u_hi

    def tail_bound(u_abs: float, rem_mass: float) -> float:
        """Rigorous bound on the integral over |u| >= u_abs in the remainder."""
        if u_abs <= 0:
            return math.inf
        by_sup = peak / u_abs  # sup G * int u^-2
        if math.isfinite(rem_mass):
            return min((t / 2.0) * rem_mass / u_abs**2, by_sup)
        return by_sup

    cells = _CellSum(integrand, cell_budget)
    best = None
    try:
        cells.add(_segment_edges(win_lo, win_hi, bps))

        for direction in (+1, -1):
            if direction > 0:
                pos, limit = win_hi, u_hi
            else:
                pos, limit = win_lo, u_lo
            block = 2 * half
            while (limit - pos) * direction > 0:
                # can the whole remaining tail be dropped already?
                if direction > 0:
                    rem = m.partial_weight(min(to_omega(pos), hi_w), hi_w)
                else:
                    rem = m.partial_weight(lo_w, max(to_omega(pos), lo_w))
                bound = tail_bound(abs(pos), rem)
                if bound <= 0.25 * tolerance * abs(cells.total):
                    break
                nxt = pos + direction * block
                if direction > 0:
                    a, b = pos, min(nxt, limit)
                else:
                    a, b = max(nxt, limit), pos
                cells.add(_segment_edges(a, b, bps))
                pos = nxt
                block *= 2.0
    except _BudgetExceeded:
        best = 2.0 * cells.total * scale
        raise AccuracyError(
            f"cell budget {cell_budget} exhausted before convergence at tau = {tau:g}",
            best_estimate=best,
        )

    total = cells.total
    if total == 0.0:
        return 0.0
    tol_abs = 0.5 * tolerance * abs(total)
    if cells.err > tol_abs:
        try:
            cells.refine(tol_abs)
        except _BudgetExceeded:
            raise AccuracyError(
                f"cell budget {cell_budget} exhausted while refining at tau = {tau:g}",
                best_estimate=2.0 * cells.total * scale,
            ) from None
        total = cells.total
        if cells.err > tolerance * abs(total):
            raise AccuracyError(
                f"error estimate {cells.err:.3g} above tolerance at tau = {tau:g}",
                best_estimate=2.0 * total * scale,
            )
    return 2.0 * total * scale


def bath_rate(bath: BathDiscretization, omega2: float, tau: float) -> float:
    """Discrete-mode rate sum_k g_k^2 tau sinc^2((omega2 - omega_k) tau / 2)."""
    if not math.isfinite(tau) or tau <= 0:
        raise InputError("tau must be positive and finite")
    half = (omega2 - bath.omegas) * tau / 2.0
    return float(np.sum(bath.couplings**2 * tau * _sinc(half) ** 2))


def golden_rule_rate(model: SpectralModel, omega2: float) -> float:
    """Unobserved spontaneous-decay rate 2 pi G(omega2), the tau -> inf limit."""
    if not math.isfinite(omega2):
        raise InputError("omega2 must be finite")
    lo, hi = model.support_interval()
    if not lo <= omega2 <= hi:
        warnings.warn(
            f"omega2 = {omega2:g} lies outside the spectral support [{lo:g}, {hi:g}]",
            SupportCoverageWarning,
            stacklevel=2,
        )
        return 0.0
    return 2.0 * math.pi * float(model.density(omega2))


def rate_curve(
    model: SpectralModel,
    omega2: float,
    taus,
    mode: str = "adaptive",
    tolerance: float = 1e-6,
) -> RateCurve:
    """Map ``taus`` (strictly increasing) through decay_rate_quadrature.

    Accuracy failures do not abort the sweep: the failing point keeps its
    best estimate and is recorded in ``failed``.
    """
    taus = np.asarray(taus, dtype=float)
    if taus.ndim != 1 or taus.size < 1:
        raise InputError("taus must be a nonempty 1-d array")
    if not np.all(np.diff(taus) > 0):
        raise InputError("taus must be strictly increasing")
    rates = np.empty_like(taus)
    failed = []
    for i, tau in enumerate(taus):
        try:
            rates[i] = decay_rate_quadrature(model, omega2, tau, mode=mode, tolerance=tolerance)
        except AccuracyError as exc:
            rates[i] = exc.best_estimate if exc.best_estimate is not None else math.nan
            failed.append(i)
    return RateCurve(
        taus=taus,
        rates=rates,
        golden_rule=golden_rule_rate(model, omega2),
        omega2=omega2,
        failed=tuple(failed),
    )


def fit_rate(history: CycleHistory, tau: float, which: str = "locked") -> RateFit:
    """Least-squares decay rate from -ln P(m tau) over m = 1..n.

    ``which`` selects the locked or traced survival series. Nonpositive
    probabilities raise; cycles with P below 1e-300 are excluded. The
    residual is max |ln P - fit| / max |ln P|.
    """
    if which == "locked":
        p = history.p2_locked
    elif which == "traced":
        p = history.p2_traced
    else:
        raise InputError(f"which must be 'locked' or 'traced', got {which!r}")
    if not math.isfinite(tau) or tau <= 0:
        raise InputError("tau must be positive and finite")
    if np.any(p <= 0):
        raise FitDomainError("survival series contains nonpositive probabilities")
    keep = p >= 1e-300
    p = p[keep]
    cycle_index = np.arange(1, history.n_cycles + 1)[keep]
    if p.size < 2:
        raise FitDomainError("need at least two usable cycles to fit a rate")
    times = cycle_index * tau
    y = -np.log(p)
    slope, intercept = np.polyfit(times, y, 1)
    fitted = slope * times + intercept
    denom = float(np.max(np.abs(y)))
    residual = float(np.max(np.abs(y - fitted))) / denom if denom > 0 else 0.0
    return RateFit(rate=float(slope), residual=residual)
