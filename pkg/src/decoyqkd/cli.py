"""Command-line front end.

Subcommands:

    optimal-mu      signal intensity choices for a parameter set
    bounds          single-photon bounds at one operating point
    scan            rate-versus-distance curves (add --n-pulses for the
                    finite-statistics optimized scan)
    fluct-optimize  pulse-allocation optimization at one distance
    reproduce       canned figure/table datasets (fig1..fig6, table2)

Exit codes: 0 on success, 2 on input validation errors, 1 on anything
else.  CSV goes to --out when given, otherwise to standard output.
"""

from __future__ import annotations

import argparse
import csv
import sys
from contextlib import contextmanager
from typing import Iterable, Optional, Sequence

from . import bounds as bounds_mod
from . import fluct as fluct_mod
from . import rate as rate_mod
from .model import (
    ExperimentParams,
    ValidationError,
    get_preset,
    load_params,
    simulate_observations,
    transmittance,
)

# fixed operating points for the canned curves
CURVE_MU = 0.48
CURVE_NU = 0.05
CURVE_WANG_MU_GYS = 0.30
CURVE_WANG_MU_KTH = 0.43
PULSES_DEFAULT = 6.0e9
PULSES_LARGE = 8.4e10


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return 2
    try:
        args.func(args)
        return 0
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="decoyqkd",
        description="Decoy-state QKD rate bounds, deviations, and pulse allocation.",
    )
    sub = parser.add_subparsers(dest="command")
    parser.set_defaults(command=None)

    p = sub.add_parser("optimal-mu", help="signal intensity choices for a parameter set")
    _add_params_opts(p)
    p.add_argument("--method", choices=("strong", "wang"), default="strong")
    p.add_argument("--length", type=float, default=None,
                   help="fiber length in km for the exact-rate cross-check")
    p.set_defaults(func=cmd_optimal_mu)

    p = sub.add_parser("bounds", help="single-photon bounds at one operating point")
    _add_params_opts(p)
    p.add_argument("--length", type=float, required=True, help="fiber length, km")
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--nu1", type=float, required=True)
    p.add_argument("--nu2", type=float, default=0.0)
    p.add_argument("--efficient-bb84", action="store_true",
                   help="use q = 1 instead of the standard 1/2")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("scan", help="rate-versus-distance curves")
    _add_params_opts(p)
    p.add_argument("--estimator", default="vacuum-weak",
                   choices=("asymptotic", "vacuum-weak", "one-decoy-trial",
                            "one-decoy-simple", "two-decoy", "wang"))
    p.add_argument("--mu", type=float, default=None,
                   help="signal intensity (default: the optimal-mu root)")
    p.add_argument("--nu1", type=float, default=CURVE_NU)
    p.add_argument("--nu2", type=float, default=0.0)
    p.add_argument("--l-min", type=float, default=0.0)
    p.add_argument("--l-max", type=float, default=160.0)
    p.add_argument("--steps", type=int, default=33)
    p.add_argument("--n-pulses", type=float, default=None,
                   help="run the finite-statistics optimized scan with this pulse budget")
    p.add_argument("--u-alpha", type=float, default=10.0)
    p.add_argument("--efficient-bb84", action="store_true")
    p.add_argument("--out", default=None, help="CSV destination (default: stdout)")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("fluct-optimize", help="pulse-allocation optimization at one distance")
    _add_params_opts(p)
    p.add_argument("--length", type=float, required=True)
    p.add_argument("--n-pulses", type=float, default=PULSES_DEFAULT)
    p.add_argument("--u-alpha", type=float, default=10.0)
    p.add_argument("--mu", type=float, default=None,
                   help="signal intensity (default: the optimal-mu root)")
    p.add_argument("--estimator", default="vacuum-weak", choices=fluct_mod._ESTIMATORS)
    p.set_defaults(func=cmd_fluct_optimize)

    p = sub.add_parser("reproduce", help="canned figure/table datasets")
    p.add_argument("target", choices=("fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "table2"))
    p.add_argument("--out", default=None, help="CSV destination (default: stdout)")
    p.set_defaults(func=cmd_reproduce)

    return parser


def _add_params_opts(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--preset", default="GYS", help="parameter preset name (GYS, KTH)")
    g.add_argument("--config", default=None, help="key=value parameter file")
    p.add_argument("--f-ec", type=float, default=None, help="override f_ec")


def _params_from(args) -> ExperimentParams:
    if getattr(args, "config", None):
        params = load_params(args.config)
    else:
        params = get_preset(args.preset)
    if getattr(args, "f_ec", None) is not None:
        import dataclasses

        params = dataclasses.replace(params, f_ec=args.f_ec)
    return params


@contextmanager
def _csv_out(path: Optional[str]):
    if path is None or path == "-":
        yield csv.writer(sys.stdout, lineterminator="\n")
    else:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            yield csv.writer(fh, lineterminator="\n")
        print(f"wrote {path}")


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def _emit(writer, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(x) for x in row])


def cmd_optimal_mu(args) -> None:
    params = _params_from(args)
    if args.method == "wang":
        mu_w = rate_mod.optimal_mu_wang(params, length_km=args.length)
        where = f"at {args.length:g} km" if args.length is not None else "maximizing distance"
        print(f"mu_wang ({where}) = {mu_w:.6f}")
        return
    mu_ideal = rate_mod.optimal_mu(params, f_ec=1.0)
    mu_real = rate_mod.optimal_mu(params)
    print(f"mu_optimal(f_ec=1.00) = {mu_ideal:.6f}")
    print(f"mu_optimal(f_ec={params.f_ec:.2f}) = {mu_real:.6f}")
    if args.length is not None:
        eta = transmittance(params, args.length).eta
        mu_exact = rate_mod.optimal_mu_exact(params, eta)
        print(f"mu_exact_rate({args.length:g} km) = {mu_exact:.6f}")


def cmd_bounds(args) -> None:
    params = _params_from(args)
    eta = transmittance(params, args.length).eta
    q = 1.0 if args.efficient_bb84 else 0.5

    rows = []
    asym = bounds_mod.asymptotic_bounds(params, eta, args.mu)
    obs_vw = simulate_observations(params, eta, (args.mu, args.nu1, 0.0))
    estimates = [asym, bounds_mod.vacuum_weak_bounds(obs_vw, args.mu, args.nu1)]
    if args.nu2 > 0.0:
        ints = bounds_mod.ProtocolIntensities(mu=args.mu, nu1=args.nu1, nu2=args.nu2)
        obs2 = simulate_observations(params, eta, ints)
        estimates.append(bounds_mod.two_decoy_bounds(obs2, ints))
    obs1 = simulate_observations(params, eta, (args.mu, args.nu1))
    estimates.append(bounds_mod.one_decoy_trial(obs1, args.mu, args.nu1))
    estimates.append(bounds_mod.one_decoy_simple(obs1, args.mu, args.nu1))

    # all inputs validated above; nothing hits stdout on a bad operating point
    print(f"eta = {eta:.6e}")
    for est in estimates:
        r = rate_mod.key_rate_strong(rate_mod.KeyRateInputs(
            q=q, q_mu=obs_vw.q_mu, e_mu=obs_vw.e_mu,
            q1_lower=est.q1_lower, e1_upper=est.e1_upper, f_ec=params.f_ec,
        ))
        rows.append((est.estimator, est.y0_lower, est.y1_lower, est.q1_lower, est.e1_upper, r))
        dev = bounds_mod.deviation_report(est, asym)
        print(
            f"{est.estimator:16s} Y0_L={est.y0_lower:.6e} Y1_L={est.y1_lower:.6e} "
            f"Q1_L={est.q1_lower:.6e} e1_U={est.e1_upper:.6f} R={r:.6e} "
            f"beta_y1={100 * dev.beta_y1:.2f}% beta_e1={100 * dev.beta_e1:.2f}%"
        )
    delta = bounds_mod.wang_delta(obs_vw, args.mu, args.nu1)
    print(f"tagged-fraction bound (nu1 pulses, mu as decoy): {delta:.6f}")


def _noiseless_rate_fn(params, estimator, mu, nu1, nu2, q):
    if estimator == "asymptotic":
        return lambda l: rate_mod.asymptotic_rate(params, transmittance(params, l).eta, mu, q=q)
    if estimator == "vacuum-weak":
        return lambda l: rate_mod.vacuum_weak_rate(params, transmittance(params, l).eta, mu, nu1, q=q)
    if estimator == "one-decoy-trial":
        return lambda l: rate_mod.one_decoy_rate(params, transmittance(params, l).eta, mu, nu1, "trial", q=q)
    if estimator == "one-decoy-simple":
        return lambda l: rate_mod.one_decoy_rate(params, transmittance(params, l).eta, mu, nu1, "simple", q=q)
    if estimator == "two-decoy":
        ints = bounds_mod.ProtocolIntensities(mu=mu, nu1=nu1, nu2=nu2)
        return lambda l: rate_mod.two_decoy_rate(params, transmittance(params, l).eta, ints, q=q)
    if estimator == "wang":
        return lambda l: rate_mod.wang_asymptotic_rate(params, transmittance(params, l).eta, mu, q=q)
    raise ValidationError(f"unknown estimator {estimator!r}")


def _grid(lo: float, hi: float, steps: int):
    if steps < 2:
        raise ValidationError("steps must be >= 2")
    if hi <= lo:
        raise ValidationError("l-max must exceed l-min")
    return [lo + (hi - lo) * i / (steps - 1) for i in range(steps)]


def cmd_scan(args) -> None:
    params = _params_from(args)
    mu = args.mu if args.mu is not None else rate_mod.optimal_mu(params)
    grid = _grid(args.l_min, args.l_max, args.steps)
    if args.n_pulses is not None:
        estimator = args.estimator
        if estimator not in fluct_mod._ESTIMATORS:
            if estimator == "one-decoy-trial":
                estimator = "one-decoy"
            else:
                raise ValidationError(
                    "finite-statistics scans support the vacuum-weak and one-decoy estimators"
                )
        points = fluct_mod.scan_distance_fluct(
            params, mu, args.n_pulses, grid, u_alpha=args.u_alpha, estimator=estimator
        )
        with _csv_out(args.out) as w:
            _emit(w, ("l_km", "R_L", "nu_opt", "NS", "N1", "N2", "B_bits"),
                  [(p.length_km, p.rate_lower, p.nu, p.n_signal, p.n_decoy1,
                    p.n_decoy2, p.key_bits) for p in points])
        dmax = fluct_mod.max_distance_fluct(
            params, mu, args.n_pulses, u_alpha=args.u_alpha, estimator=estimator,
            l_hi=max(args.l_max, 250.0),
        )
        print(f"max_distance_km = {dmax if dmax is not None else float('nan'):.2f}")
        return
    q = 1.0 if args.efficient_bb84 else 0.5
    fn = _noiseless_rate_fn(params, args.estimator, mu, args.nu1, args.nu2, q)
    with _csv_out(args.out) as w:
        _emit(w, ("l_km", "rate_per_pulse"), [(l, fn(l)) for l in grid])
    dmax = rate_mod.max_secure_distance(fn)
    if dmax is None:
        print("max_distance_km = none (rate never positive)")
    else:
        print(f"max_distance_km = {dmax:.2f}")


def cmd_fluct_optimize(args) -> None:
    params = _params_from(args)
    mu = args.mu if args.mu is not None else rate_mod.optimal_mu(params)
    eta = transmittance(params, args.length).eta
    res = fluct_mod.optimize_allocation(
        params, eta, mu, args.n_pulses, u_alpha=args.u_alpha, estimator=args.estimator
    )
    alloc, fb = res.alloc, res.result
    print(f"l_km = {args.length:.2f}")
    print(f"mu = {mu:.6f}")
    print(f"eta = {eta:.6e}")
    print(f"nu_opt = {res.nu:.6f}")
    print(f"N = {alloc.n_total:.6g}")
    print(f"N_S = {alloc.n_signal:.6g}  ({alloc.n_signal / alloc.n_total:.4f} of N)")
    print(f"N_1 = {alloc.n_decoy1:.6g}  ({alloc.n_decoy1 / alloc.n_total:.4f} of N)")
    print(f"N_2 = {alloc.n_decoy2:.6g}  ({alloc.n_decoy2 / alloc.n_total:.4f} of N)")
    print(f"R_L = {fb.rate_lower:.6e}")
    print(f"B_bits = {fb.key_bits_lower:.6e}")
    print(f"beta_y0 = {100 * fb.beta_y0:.2f}%")
    print(f"beta_y1 = {100 * fb.beta_y1:.2f}%")
    print(f"beta_e1 = {100 * fb.beta_e1:.2f}%")
    print(f"beta_r = {100 * fb.beta_r:.2f}%")
    if fb.low_count_observables:
        print(f"low-count observables: {', '.join(fb.low_count_observables)}")


# --- canned datasets ---------------------------------------------------


def cmd_reproduce(args) -> None:
    target = args.target
    fn = {
        "fig1": _reproduce_fig1,
        "fig2": _reproduce_fig2,
        "fig3": _reproduce_fig3,
        "fig4": _reproduce_fig4,
        "fig5": _reproduce_fig5,
        "fig6": _reproduce_fig6,
        "table2": _reproduce_table2,
    }[target]
    fn(args.out)


def _reproduce_fig1(out: Optional[str]) -> None:
    from .model import GYS

    mu = CURVE_MU
    rows = []
    for idx in range(1, 26):
        ratio = idx / 100.0
        nu = ratio * mu
        row = [ratio]
        for length in (40.0, 140.0):
            eta = transmittance(GYS, length).eta
            obs = simulate_observations(GYS, eta, (mu, nu, 0.0))
            est = bounds_mod.vacuum_weak_bounds(obs, mu, nu)
            asym = bounds_mod.asymptotic_bounds(GYS, eta, mu)
            dev = bounds_mod.deviation_report(est, asym)
            row.extend([100.0 * dev.beta_y1, 100.0 * dev.beta_e1])
        rows.append(row)
    with _csv_out(out) as w:
        _emit(w, ("nu_over_mu", "beta_y1_40km_pct", "beta_e1_40km_pct",
                  "beta_y1_140km_pct", "beta_e1_140km_pct"), rows)
    last = rows[-1]
    print(f"deviations at nu/mu=0.25, 40 km: beta_y1={last[1]:.2f}% beta_e1={last[2]:.2f}%")
    print(f"deviations at nu/mu=0.25, 140 km: beta_y1={last[3]:.2f}% beta_e1={last[4]:.2f}%")


def _reproduce_fig2(out: Optional[str]) -> None:
    from .model import GYS

    fns = {
        "rate_asymptotic": _noiseless_rate_fn(GYS, "asymptotic", CURVE_MU, CURVE_NU, 0.0, 0.5),
        "rate_vacuum_weak": _noiseless_rate_fn(GYS, "vacuum-weak", CURVE_MU, CURVE_NU, 0.0, 0.5),
        "rate_wang": _noiseless_rate_fn(GYS, "wang", CURVE_WANG_MU_GYS, CURVE_NU, 0.0, 0.5),
    }
    grid = _grid(0.0, 150.0, 76)
    rows = [[l] + [fn(l) for fn in fns.values()] for l in grid]
    with _csv_out(out) as w:
        _emit(w, ("l_km", *fns.keys()), rows)
    for name, fn in fns.items():
        print(f"max_distance_km[{name}] = {rate_mod.max_secure_distance(fn):.2f}")
    mu_w = rate_mod.optimal_mu_wang(GYS)
    print(f"mu_wang_optimal = {mu_w:.4f}")


def _reproduce_fig3(out: Optional[str]) -> None:
    from .model import GYS

    mu = rate_mod.optimal_mu(GYS)
    grid = _grid(5.0, 121.0, 30)
    vw = fluct_mod.scan_distance_fluct(GYS, mu, PULSES_DEFAULT, grid, estimator="vacuum-weak")
    od = fluct_mod.scan_distance_fluct(GYS, mu, PULSES_DEFAULT, grid, estimator="one-decoy")
    rows = [
        (p.length_km, p.nu, p.n_decoy2 / PULSES_DEFAULT, o.nu)
        for p, o in zip(vw, od)
    ]
    with _csv_out(out) as w:
        _emit(w, ("l_km", "nu_opt_vw", "n2_frac_vw", "nu_opt_one_decoy"), rows)
    activation = next((p.length_km for p in vw if p.n_decoy2 > 0.0), None)
    print(f"vacuum_decoy_activation_km = {activation}")
    short = rows[0]
    print(f"nu_opt at {short[0]:.1f} km: vw={short[1]:.4f} one-decoy={short[3]:.4f}")


def _fluct_figure(params, n_pulses, grid, wang_mu: Optional[float], out: Optional[str]) -> None:
    mu = rate_mod.optimal_mu(params)
    asym_fn = _noiseless_rate_fn(params, "asymptotic", mu, CURVE_NU, 0.0, 0.5)
    vw = fluct_mod.scan_distance_fluct(params, mu, n_pulses, grid, estimator="vacuum-weak")
    od = fluct_mod.scan_distance_fluct(params, mu, n_pulses, grid, estimator="one-decoy")
    header = ["l_km", "rate_asymptotic", "rate_vw_fluct", "rate_one_decoy_fluct"]
    rows = [
        [p.length_km, asym_fn(p.length_km), p.rate_lower, o.rate_lower]
        for p, o in zip(vw, od)
    ]
    if wang_mu is not None:
        wang_fn = _noiseless_rate_fn(params, "wang", wang_mu, CURVE_NU, 0.0, 0.5)
        header.append("rate_wang")
        for row in rows:
            row.append(wang_fn(row[0]))
    with _csv_out(out) as w:
        _emit(w, header, rows)
    print(f"mu = {mu:.4f}")
    print(f"max_distance_km[asymptotic] = {rate_mod.max_secure_distance(asym_fn):.2f}")
    dm_vw = fluct_mod.max_distance_fluct(params, mu, n_pulses, estimator="vacuum-weak")
    dm_od = fluct_mod.max_distance_fluct(params, mu, n_pulses, estimator="one-decoy")
    print(f"max_distance_km[vacuum-weak fluct] = {dm_vw:.2f}")
    print(f"max_distance_km[one-decoy fluct] = {dm_od:.2f}")
    if wang_mu is not None:
        print(f"max_distance_km[wang mu={wang_mu:g}] = {rate_mod.max_secure_distance(wang_fn):.2f}")


def _reproduce_fig4(out: Optional[str]) -> None:
    from .model import GYS

    _fluct_figure(GYS, PULSES_DEFAULT, _grid(5.0, 121.0, 30), None, out)


def _reproduce_fig5(out: Optional[str]) -> None:
    from .model import GYS

    _fluct_figure(GYS, PULSES_LARGE, _grid(5.0, 129.0, 30), CURVE_WANG_MU_GYS, out)


def _reproduce_fig6(out: Optional[str]) -> None:
    from .model import KTH

    _fluct_figure(KTH, PULSES_LARGE, _grid(2.0, 66.0, 30), CURVE_WANG_MU_KTH, out)


def _reproduce_table2(out: Optional[str]) -> None:
    from .model import GYS

    length = 103.62
    n_total = PULSES_DEFAULT
    mu = rate_mod.optimal_mu(GYS)
    eta = transmittance(GYS, length).eta
    res = fluct_mod.optimize_allocation(GYS, eta, mu, n_total, u_alpha=10.0)
    alloc, fb = res.alloc, res.result
    header = ("l_km", "mu", "u_alpha", "N", "N_S", "N_1", "N_2", "eta", "nu",
              "B_bits", "beta_y0_pct", "beta_y1_pct", "beta_e1_pct", "beta_r_pct")
    row = (length, mu, alloc.u_alpha, alloc.n_total, alloc.n_signal,
           alloc.n_decoy1, alloc.n_decoy2, eta, res.nu, fb.key_bits_lower,
           100 * fb.beta_y0, 100 * fb.beta_y1, 100 * fb.beta_e1, 100 * fb.beta_r)
    with _csv_out(out) as w:
        _emit(w, header, [row])
    print(f"nu_opt = {res.nu:.4f}")
    print(f"N_S/N = {alloc.n_signal / alloc.n_total:.4f}")
    print(f"B_bits = {fb.key_bits_lower:.4e}")
    print(f"beta_y1 = {100 * fb.beta_y1:.2f}%")


if __name__ == "__main__":
    sys.exit(main())
