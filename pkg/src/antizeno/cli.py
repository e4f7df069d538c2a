"""Command-line interface: rate-curve, simulate, and validate subcommands.

Exit codes: 0 success, 2 configuration error, 3 numeric-accuracy failure,
4 validity-condition violation. Output CSV is UTF-8 with LF endings and a
'#' header comment carrying the sha256 of the config file, so identical
configs produce byte-identical artifacts. The computation is deterministic
and seedless.
"""

from __future__ import annotations

import argparse
from concurrent.futures import ThreadPoolExecutor
import math
from pathlib import Path
import sys

import numpy as np

from .config import RunConfig, load_config
from .cycles import ProtocolParams, run_protocol, validity_check
from .dynamics import PulseParams
from .errors import AccuracyError, ConfigurationError, InputError
from .rates import RateCurve, decay_rate_quadrature, fit_rate, golden_rule_rate
from .spectral import discretize

__all__ = ["main"]

_F = "{:.11e}".format  # 12 significant digits everywhere


def _fmt(value: float) -> str:
    return _F(value)


def _map_indexed(func, items, threads: int):
    """Apply func over items preserving order; threads <= 1 stays serial."""
    if threads <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def _out_path(config: RunConfig, out_override: str | None, suffix: str) -> Path:
    output = config.require("output")
    directory = Path(out_override) if out_override else Path(output.directory)
    directory.mkdir(parents=True, exist_ok=True)
    return directory / f"{output.prefix}_{suffix}"


def _write_text(path: Path, writer):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer(fh)


def cmd_rate_curve(config: RunConfig, out_override: str | None, threads: int) -> int:
    """Sweep R(tau) over the configured grid and emit CSV plus a summary line."""
    spec = config.require("rates")
    protocol = config.require("protocol")
    model = config.model
    omega2 = protocol.omega2

    def one(tau: float):
        try:
            return decay_rate_quadrature(model, omega2, tau,
                                         mode=spec.mode, tolerance=spec.tolerance), None
        except AccuracyError as exc:
            best = exc.best_estimate if exc.best_estimate is not None else math.nan
            return best, str(exc)

    results = _map_indexed(one, spec.taus, threads)
    rates = np.array([r for r, _ in results])
    failed = tuple(i for i, (_, err) in enumerate(results) if err is not None)
    curve = RateCurve(
        taus=np.asarray(spec.taus),
        rates=rates,
        golden_rule=golden_rule_rate(model, omega2),
        omega2=omega2,
        failed=failed,
    )

    path = _out_path(config, out_override, "rate_curve.csv")
    _write_text(path, lambda fh: curve.to_csv(fh, header_comment=f"config_sha256={config.sha256}"))

    gr = curve.golden_rule
    imax = int(np.argmax(curve.rates))
    ratio = curve.rates[imax] / gr if gr > 0 else math.nan
    print(
        f"summary: R_GR_per_s={_fmt(gr)} argmax_tau_s={_fmt(curve.taus[imax])} "
        f"max_R_over_R_GR={_fmt(ratio)}"
    )
    print(f"wrote {path}")
    if failed:
        for i in failed:
            print(f"accuracy not reached at tau={_fmt(curve.taus[i])}: {results[i][1]}",
                  file=sys.stderr)
        return 3
    return 0


def _simulate_point(config: RunConfig, tau_si: float, path: Path) -> dict:
    """Run one protocol point in normalized units; report SI values."""
    protocol = config.require("protocol")
    grid = config.require("bath")
    scale = config.model.frequency_scale()

    model_n = config.model.rescaled(scale)
    from .spectral import FrequencyGrid  # local to keep module surface tidy

    grid_n = FrequencyGrid(
        omega_lo=grid.omega_lo / scale,
        omega_hi=grid.omega_hi / scale,
        k=grid.k,
        scheme=grid.scheme,
    )
    bath_n = discretize(model_n, grid_n)
    pulse_n = PulseParams(
        rabi=protocol.rabi / scale,
        omega2=protocol.omega2 / scale,
        omega3=protocol.omega3 / scale,
    )
    params_n = ProtocolParams(
        tau=tau_si * scale,
        pulse=pulse_n,
        n_cycles=protocol.n_cycles,
        propagator=protocol.propagator,
        dt=None if protocol.dt is None else protocol.dt * scale,
    )
    history = run_protocol(params_n, bath_n)

    fit_locked = fit_rate(history, tau_si * scale, which="locked")
    fit_traced = fit_rate(history, tau_si * scale, which="traced")
    r_quad = decay_rate_quadrature(config.model, protocol.omega2, tau_si)

    def to_si_rate(rate_normalized: float) -> float:
        return rate_normalized * scale

    def writer(fh):
        fh.write(f"# config_sha256={config.sha256}\n")
        fh.write("cycle,t_seconds,P2_locked,P2_traced,gap,norm,validity_ratio\n")
        for m in range(1, history.n_cycles + 1):
            locked = history.p2_locked[m - 1]
            traced = history.p2_traced[m - 1]
            fh.write(
                f"{m:d},{_fmt(m * tau_si)},{_fmt(locked)},{_fmt(traced)},"
                f"{_fmt(traced - locked)},{_fmt(history.norms[m - 1])},"
                f"{_fmt(history.validity.ratio)}\n"
            )

    _write_text(path, writer)
    return {
        "tau": tau_si,
        "rate_locked": to_si_rate(fit_locked.rate),
        "rate_traced": to_si_rate(fit_traced.rate),
        "residual_locked": fit_locked.residual,
        "r_quad": r_quad,
        "validity_ratio": history.validity.ratio,
        "path": path,
    }


def cmd_simulate(config: RunConfig, out_override: str | None, threads: int) -> int:
    """Run the cycle protocol (single tau or sweep), write history CSV(s)."""
    protocol = config.require("protocol")
    threshold = config.validity_threshold

    if protocol.is_sweep:
        paths = [
            _out_path(config, out_override, f"history_{i:03d}.csv")
            for i in range(len(protocol.taus))
        ]
    else:
        paths = [_out_path(config, out_override, "history.csv")]

    results = _map_indexed(
        lambda it: _simulate_point(config, it[0], it[1]),
        list(zip(protocol.taus, paths)),
        threads,
    )

    violated = False
    for res in results:
        gap_locked = abs(res["rate_locked"] - res["r_quad"]) / res["r_quad"] \
            if res["r_quad"] > 0 else math.nan
        gap_traced = abs(res["rate_traced"] - res["r_quad"]) / res["r_quad"] \
            if res["r_quad"] > 0 else math.nan
        verdict = "valid" if res["validity_ratio"] < threshold else "violated"
        violated = violated or verdict != "valid"
        print(
            f"tau_s={_fmt(res['tau'])} R_quadrature_per_s={_fmt(res['r_quad'])} "
            f"fit_locked_per_s={_fmt(res['rate_locked'])} rel_gap_locked={_fmt(gap_locked)} "
            f"fit_traced_per_s={_fmt(res['rate_traced'])} rel_gap_traced={_fmt(gap_traced)} "
            f"validity_ratio={_fmt(res['validity_ratio'])} verdict={verdict}"
        )
        print(f"wrote {res['path']}")
    return 4 if violated else 0


def cmd_validate(config: RunConfig, out_override: str | None, threads: int) -> int:
    """Evaluate the weak-coupling validity condition and print the verdict."""
    protocol = config.require("protocol")
    grid = config.require("bath")
    scale = config.model.frequency_scale()
    from .spectral import FrequencyGrid

    bath_n = discretize(
        config.model.rescaled(scale),
        FrequencyGrid(grid.omega_lo / scale, grid.omega_hi / scale, grid.k, grid.scheme),
    )
    tau = protocol.taus[0]
    report = validity_check(
        bath_n, protocol.omega2 / scale, tau * scale, threshold=config.validity_threshold
    )
    verdict = "valid" if report.valid else "violated"
    print(f"lhs={_fmt(report.lhs)}")
    print(f"rhs={_fmt(report.rhs)}")
    ratio = report.ratio if math.isfinite(report.ratio) else math.inf
    print(f"ratio={_fmt(ratio) if math.isfinite(ratio) else 'inf'}")
    print(f"verdict={verdict} threshold={_fmt(report.threshold)}")
    return 0 if report.valid else 4


_COMMANDS = {
    "rate-curve": cmd_rate_curve,
    "simulate": cmd_simulate,
    "validate": cmd_validate,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="antizeno",
        description="Pulsed quasi-measurement decay simulator (deterministic, seedless).",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func in _COMMANDS.items():
        p = sub.add_parser(name, help=func.__doc__)
        p.add_argument("--config", required=True, help="path to the INI run configuration")
        p.add_argument("--out", default=None, help="override the output directory")
        p.add_argument("--threads", type=int, default=1, help="worker pool size for sweeps")
        p.add_argument("--seed", type=int, default=None,
                       help="accepted for interface compatibility; ignored")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.seed is not None:
        print("warning: --seed ignored; the computation is deterministic and seedless",
              file=sys.stderr)
    try:
        config = load_config(args.config)
        return _COMMANDS[args.command](config, args.out, max(1, args.threads))
    except (ConfigurationError, InputError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except AccuracyError as exc:
        print(f"accuracy error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
