"""Command-line entry points.

Every subcommand writes CSV (or JSON for ``fit``/``bounds``) with the fully
resolved configuration embedded as ``# key=value`` lines. Failures exit
non-zero and print ``{"error": <category>, "message": ...}`` on stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import asdict, replace

import numpy as np

from . import __version__
from .analysis import DomainError, ScanFailure, critical_gamma_scan, exponent_bounds, powerlaw_fit
from .config import ConfigError, parse_grid, read_config, resolve, to_evolution_config, write_table
from .evolution import (
    DensitySeries,
    NumericalFailure,
    evolve,
    load_checkpoint,
    save_checkpoint,
)
from .exact import LatticeSpec, ResourceError, concurrence_map, run_exact, sweep_schedule
from .gates import GateParams
from .meanfield import mf_contour, mf_phase_boundary, mf_stationary_density, mf_trajectory

log = logging.getLogger("qcatn")

EXIT_CODES = {
    "invalid-argument": 2,
    "domain": 3,
    "numerical-failure": 4,
    "resource": 5,
    "scan-failure": 6,
    "io": 7,
}


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value configuration file")
    p.add_argument("--n-columns", type=int)
    p.add_argument("--t-max", type=int)
    p.add_argument("--chi-max", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--omega", type=float)
    p.add_argument("--sweep-alternation", choices=["true", "false"])
    p.add_argument("--cutoff", type=float)
    p.add_argument("--compression", choices=["zip", "deferred"])
    p.add_argument("--alignment", choices=["sweep", "left"])
    p.add_argument("--fit-window-lo", type=float)
    p.add_argument("--fit-window-hi", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("-o", "--output-path")


def _resolved(args) -> dict:
    file_values = read_config(args.config) if getattr(args, "config", None) else {}
    over = {
        k: getattr(args, k, None)
        for k in (
            "n_columns", "t_max", "chi_max", "gamma", "omega", "cutoff", "compression",
            "alignment", "fit_window_lo", "fit_window_hi", "workers", "output_path",
        )
    }
    if getattr(args, "sweep_alternation", None) is not None:
        over["sweep_alternation"] = args.sweep_alternation == "true"
    return resolve(file_values, over)


def cmd_evolve(args) -> None:
    cfg = _resolved(args)
    ecfg = to_evolution_config(cfg)
    initial, t0 = None, 0
    if args.resume:
        initial, saved, t0 = load_checkpoint(args.resume)
        if ecfg.t_max <= t0:
            raise ValueError(f"t_max={ecfg.t_max} does not extend the checkpoint at t={t0}")
        # t_max stays the absolute final time; evolve counts steps from t0
        ecfg = replace(saved, t_max=ecfg.t_max - t0, chi_max=ecfg.chi_max, cutoff=ecfg.cutoff)
    last = {}

    def keep(t, state):
        last["t"], last["state"] = t, state
        log.info("t=%d max_bond=%d", t, state.max_bond)

    series = evolve(ecfg, initial=initial, t0=t0, callback=keep)
    if args.checkpoint:
        save_checkpoint(args.checkpoint, last["state"], ecfg, last["t"])
    series.to_csv(cfg["output_path"], per_site=not args.no_sites, metadata={"command": "evolve"})


def cmd_exact(args) -> None:
    cfg = _resolved(args)
    spec = LatticeSpec(
        cfg["n_columns"],
        cfg["t_max"] + 1,
        sweep=sweep_schedule(cfg["t_max"], cfg["sweep_alternation"]),
        alignment=cfg["alignment"],
        site_cap=args.site_cap,
    )
    res = run_exact(spec, GateParams(cfg["gamma"], cfg["omega"]))
    steps = res.densities.shape[0]
    series = DensitySeries(
        t=np.arange(steps),
        n_avg=res.n_avg,
        site_densities=res.densities,
        discarded_weight=np.zeros(steps),
        max_bond=np.zeros(steps, dtype=int),
        config={k: cfg[k] for k in ("n_columns", "t_max", "gamma", "omega", "sweep_alternation", "alignment")},
    )
    series.to_csv(cfg["output_path"], metadata={"command": "exact", "method": "statevector"})


def cmd_concurrence_map(args) -> None:
    gammas, omegas = parse_grid(args.gammas), parse_grid(args.omegas)
    rows = concurrence_map(gammas, omegas)
    write_table(args.output_path, ["omega", "gamma", "value"], rows,
                {"command": "concurrence-map", "gammas": args.gammas, "omegas": args.omegas})


def cmd_meanfield(args) -> None:
    meta = {"command": f"meanfield {args.mode}", "scheme": args.scheme}
    if args.mode == "trajectory":
        p = GateParams(args.gamma, args.omega)
        s = mf_trajectory(p, args.t_max, scheme=args.scheme)
        meta.update(gamma=args.gamma, omega=args.omega, t_max=args.t_max)
        write_table(args.output_path, ["t", "n"], zip(s.t.tolist(), s.n.tolist()), meta)
    elif args.mode == "boundary":
        omegas = parse_grid(args.omegas)
        pts = mf_phase_boundary(omegas, (args.gamma_lo, args.gamma_hi), tol=args.tol,
                                threshold=args.threshold, t_max=args.t_stat)
        rows = [(w, g, mf_stationary_density(GateParams(g, w), t_max=args.t_stat).density) for w, g in pts]
        meta.update(omegas=args.omegas, bracket=f"{args.gamma_lo},{args.gamma_hi}",
                    tol=args.tol, threshold=args.threshold, value="stationary density at boundary")
        write_table(args.output_path, ["omega", "gamma", "value"], rows, meta)
    else:
        rows = mf_contour(parse_grid(args.gammas), parse_grid(args.omegas), t_max=args.t_stat)
        meta.update(gammas=args.gammas, omegas=args.omegas, value="stationary density")
        write_table(args.output_path, ["omega", "gamma", "value"], rows, meta)


def _window(cfg, args, default):
    lo = args.window[0] if getattr(args, "window", None) else cfg.get("fit_window_lo", default[0])
    hi = args.window[1] if getattr(args, "window", None) else cfg.get("fit_window_hi", default[1])
    return float(lo), float(hi)


def cmd_phase_scan(args) -> None:
    cfg = _resolved(args)
    ecfg = to_evolution_config(cfg)
    window = _window(cfg, args, (20, 50))
    gammas = parse_grid(args.gammas)
    result = critical_gamma_scan(ecfg.omega, gammas, ecfg, window=window, workers=cfg["workers"])
    best = result.best
    meta = dict(asdict(ecfg))
    meta.update(command="phase-scan", window=f"{window[0]},{window[1]}",
                gamma_star=result.gamma_star, alpha_star=best.alpha)
    rows = []
    for g in gammas:
        r = result.reports.get(g)
        if r is None:
            rows.append((ecfg.omega, g, math.nan, math.nan, math.nan, math.nan, "absorbing"))
        else:
            rows.append((ecfg.omega, g, r.alpha, r.amplitude, r.residual, r.curvature, r.classification))
    write_table(cfg["output_path"],
                ["omega", "gamma", "alpha", "amplitude", "residual", "curvature", "classification"],
                rows, meta)
    if args.series_dir:
        from pathlib import Path

        out = Path(args.series_dir)
        out.mkdir(parents=True, exist_ok=True)
        for g, s in result.series.items():
            s.to_csv(out / f"series_omega{ecfg.omega:g}_gamma{g:.4f}.csv", per_site=False)


def cmd_fit(args) -> None:
    series = DensitySeries.from_csv(args.input)
    rep = powerlaw_fit(series, tuple(args.window), args.dead_band)
    json.dump(asdict(rep), sys.stdout, indent=2)
    sys.stdout.write("\n")


def cmd_bounds(args) -> None:
    sub = DensitySeries.from_csv(args.sub)
    sup = DensitySeries.from_csv(args.sup)
    b = exponent_bounds(sub, sup, tuple(args.window), args.dead_band)
    json.dump(asdict(b), sys.stdout, indent=2)
    sys.stdout.write("\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qcatn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evolve", help="boundary-MPS evolution of the row density")
    _add_run_options(p)
    p.add_argument("--checkpoint", help="write the final row state here (.npz)")
    p.add_argument("--resume", help="continue from a checkpoint")
    p.add_argument("--no-sites", action="store_true", help="omit per-site columns")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("exact", help="statevector reference run (small N)")
    _add_run_options(p)
    p.add_argument("--site-cap", type=int, default=24)
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("concurrence-map", help="target-pair concurrence over (gamma, omega)")
    p.add_argument("--gammas", default="0:2:0.05")
    p.add_argument("--omegas", default="0:1.5707963267948966:0.0785398163397448")
    p.add_argument("-o", "--output-path", default="-")
    p.set_defaults(func=cmd_concurrence_map)

    p = sub.add_parser("meanfield", help="mean-field trajectories, boundary and contour")
    p.add_argument("mode", choices=["trajectory", "boundary", "contour"])
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--omega", type=float, default=0.0)
    p.add_argument("--t-max", type=int, default=500)
    p.add_argument("--scheme", choices=["five_site", "plaquette"], default="five_site")
    p.add_argument("--omegas", default="0:1.5:0.25")
    p.add_argument("--gammas", default="0:2:0.05")
    p.add_argument("--gamma-lo", type=float, default=0.5)
    p.add_argument("--gamma-hi", type=float, default=1.2)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--threshold", type=float, default=1e-4)
    p.add_argument("--t-stat", type=int, default=200_000, help="iteration cap for stationary densities")
    p.add_argument("-o", "--output-path", default="-")
    p.set_defaults(func=cmd_meanfield)

    p = sub.add_parser("phase-scan", help="best power-law gamma at fixed omega")
    _add_run_options(p)
    p.add_argument("--gammas", default="0.95:1.05:0.01")
    p.add_argument("--window", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--series-dir", help="also write each density series here")
    p.set_defaults(func=cmd_phase_scan)

    p = sub.add_parser("fit", help="power-law fit of a density-series CSV")
    p.add_argument("input")
    p.add_argument("--window", type=float, nargs=2, default=(30, 100), metavar=("LO", "HI"))
    p.add_argument("--dead-band", type=float, default=5e-3)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("bounds", help="exponent bounds from sub/supercritical series")
    p.add_argument("--sub", required=True)
    p.add_argument("--sup", required=True)
    p.add_argument("--window", type=float, nargs=2, default=(20, 40), metavar=("LO", "HI"))
    p.add_argument("--dead-band", type=float, default=5e-3)
    p.set_defaults(func=cmd_bounds)
    return parser


def _category(err: BaseException) -> str:
    if isinstance(err, DomainError):
        return "domain"
    if isinstance(err, NumericalFailure):
        return "numerical-failure"
    if isinstance(err, (ResourceError, MemoryError)):
        return "resource"
    if isinstance(err, ScanFailure):
        return "scan-failure"
    if isinstance(err, OSError):
        return "io"
    return "invalid-argument"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        args.func(args)
    except (ConfigError, ValueError, DomainError, NumericalFailure, ResourceError,
            ScanFailure, OSError, MemoryError) as err:
        cat = _category(err)
        print(json.dumps({"error": cat, "message": str(err)}), file=sys.stderr)
        return EXIT_CODES[cat]
    return 0


if __name__ == "__main__":
    sys.exit(main())
