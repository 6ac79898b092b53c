"""Command line entry point ``hagprop``.

Subcommands::

    run             full pipeline for one scenario (tables, time series, states, manifest)
    validate        quick property suite with pass/fail per check
    sweep-orders    error versus N at one eps
    sweep-epsilon   error versus N over the eps list, with fits
    localization    order-zero mass outside |X - a(t)| > b over an eps list
    emit-plot-data  two-column data files from a previous sweep

Exit codes are listed in :data:`EXIT_CODES`.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .ansatz import Ansatz, make_cutoff
from .classical_flow import InvariantError, RegionExit
from .config import ConfigError, load_config, scenario_path
from .electronic import NearDegeneracyError, RegionError
from .reference import GridSpec, GridState, ResolutionError
from .truncation import (OrderSweep, SweepResult, localization_sweep, optimal_N, prepare, sweep_epsilon,
                         sweep_orders, write_json, write_rows_csv)
from .validation import format_report, run_checks
from .wavepacket import ParameterError

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_MISSING = 3
EXIT_CONFIG = 4
EXIT_GAP = 5
EXIT_REGION = 6
EXIT_RESOLUTION = 7
EXIT_INVARIANT = 8

EXIT_CODES = {
    EXIT_OK: "success",
    EXIT_FAILED: "a check or criterion failed",
    EXIT_USAGE: "command line usage error",
    EXIT_MISSING: "configuration file not found",
    EXIT_CONFIG: "invalid configuration",
    EXIT_GAP: "spectral gap collapsed",
    EXIT_REGION: "trajectory left the validity region",
    EXIT_RESOLUTION: "reference grid cannot resolve the packet",
    EXIT_INVARIANT: "compatibility invariant drifted during the flow",
}


def _fmt(v) -> str:
    return f"{v:.17g}" if isinstance(v, float) else str(v)


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("HAGPROP_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"HAGPROP_THREADS must be an integer, got {env!r}") from None
    return 1


def _load(args):
    path = args.config or getattr(args, "config_pos", None)
    if path is None:
        if args.scenario is None:
            raise ConfigError("give --config PATH or --scenario NAME")
        path = scenario_path(args.scenario)
    sc, extra = load_config(path)
    return Path(path), sc, extra


def _outdir(args, extra, sc) -> Path:
    out = Path(args.out or extra.get("output.dir") or f"hagprop-out/{sc.name}")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _manifest(out: Path, cfg: Path, sc, extra, threads: int, files: list, prep=None, sweeps=(), extra_info=None):
    """Record every tolerance and grid parameter consumed by the run."""
    ex = prep.expansion if prep is not None else None
    man = {
        "hagprop_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config": str(cfg),
        "config_sha256": _sha256(cfg),
        "threads": threads,
        "scenario": sc.as_dict(),
        "extra": extra,
        "tolerances": {
            "reference_halving_tol": sc.halving_tol,
            "reference_max_halvings": sc.max_halvings,
            "reference_dt_initial": sc.dt_reference if sc.dt_reference is not None else sc.T / 2 ** 14,
            "norm_drift_limit": 1e-10,
            "flow_abort_defect": 1e-6,
            "gap_threshold": prep.model.gap_threshold if prep is not None else None,
            "fit_floor_factor": 10.0,
            "interior_minimum_rise": 0.05,
        },
        "expansion_grid": None if ex is None else {
            "w_half_width": ex.grid.b1, "w_step": ex.grid.h, "w_ghost": ex.grid.ghost, "w_nodes": ex.grid.n,
            "nt": len(ex.t), "t_step": ex.ht, "t_order": ex.settings.t_order, "w_order": ex.settings.w_order,
            "quad_order": ex.settings.quad_order, "n_max": ex.settings.n_max, "J": ex.J,
            "flow_dt": sc.flow_dt,
        },
        "reference_grids": [{"eps": s.eps, **s.grid, "dt": s.dt, "floor_max": max(s.floors)} for s in sweeps],
        "files": {f.name: _sha256(f) for f in files},
    }
    if extra_info:
        man.update(extra_info)
    write_json(out / "manifest.json", man)


def _sweep_all(prep, eps_list, threads: int, residual: bool = True) -> SweepResult:
    def log(s):
        print(f"eps={s.eps:.6g}  N*={s.argmin}  min error={min(s.errors):.6e}  ({s.seconds:.1f}s)", flush=True)

    return sweep_epsilon(prep, eps_list, residual=residual, progress=log, threads=threads)


def _print_table(sweeps, stream=sys.stdout):
    print("eps,N,error,bound,floor", file=stream)
    for s in sweeps:
        for r in s.rows(""):
            print(",".join(_fmt(r[k]) for k in ("eps", "N", "error", "bound", "floor")), file=stream)


def _write_sweeps(out: Path, res: SweepResult, N_series: int | None) -> list:
    files = []
    p = out / "sweep.csv"
    write_rows_csv(p, res.rows())
    files.append(p)
    p = out / "summary.json"
    write_json(p, res.summary())
    files.append(p)
    for s in res.sweeps:
        N = s.argmin if N_series is None else min(N_series, s.orders[-1])
        if s.series is not None:
            p = out / f"series_eps{s.eps:g}_N{N}.csv"
            write_rows_csv(p, s.series_rows(N))
            files.append(p)
    return files


def cmd_run(args) -> int:
    cfg, sc, extra = _load(args)
    threads = _threads(args)
    out = _outdir(args, extra, sc)
    prep = prepare(sc)
    print(f"prepared {sc.name}: n_max={sc.n_max}, {prep.seconds:.1f}s")
    files = []
    p = out / "trajectory.csv"
    prep.trajectory.write_csv(p)
    files.append(p)
    N = extra.get("sweep.N")
    if N is None and extra.get("sweep.g") is not None:
        N = None  # chosen per eps below
    res = _sweep_all(prep, sc.eps_list, threads)
    sweeps = res.sweeps
    files += _write_sweeps(out, res, N)
    # final states of the selected order for the smallest eps
    s = sweeps[-1]
    Nsel = N if N is not None else (optimal_N(s.eps, extra["sweep.g"]) if extra.get("sweep.g") else s.argmin)
    Nsel = min(Nsel, sc.n_max)
    files += _dump_states(out, prep, s, Nsel)
    _manifest(out, cfg, sc, extra, threads, files, prep, sweeps,
              {"selected_order": Nsel, "fits": res.fit, "fixed_order_slopes": res.slopes})
    _print_table(sweeps)
    return EXIT_OK


def _dump_states(out: Path, prep, s: OrderSweep, N: int) -> list:
    """Ansatz at ``T`` for order ``N`` on the reference grid (binary grid-state format)."""
    sc = prep.scenario
    grid = GridSpec.interval(s.grid["lower"], s.grid["upper"], s.grid["nodes"], prep.expansion.n_el)
    an = Ansatz(prep.expansion, s.eps, make_cutoff(sc.b0, sc.b1))
    X = grid.points()[:, 0]
    st = GridState(grid, an.evaluate(sc.T, X, N), sc.T, s.eps)
    p = out / f"ansatz_eps{s.eps:g}_N{N}.grid"
    st.dump(p)
    return [p]


def cmd_sweep_orders(args) -> int:
    cfg, sc, extra = _load(args)
    out = _outdir(args, extra, sc)
    eps = args.eps if args.eps is not None else min(sc.eps_list)
    prep = prepare(sc)
    s = sweep_orders(prep, eps, args.n_max, residual=not args.no_residual)
    p = out / f"orders_eps{eps:g}.csv"
    write_rows_csv(p, s.rows(sc.name))
    _manifest(out, cfg, sc, extra, 1, [p], prep, [s], {"eps": eps, "argmin_N": s.argmin})
    _print_table([s])
    print(f"argmin N = {s.argmin}")
    return EXIT_OK


def cmd_sweep_epsilon(args) -> int:
    cfg, sc, extra = _load(args)
    threads = _threads(args)
    out = _outdir(args, extra, sc)
    prep = prepare(sc)
    eps_list = args.eps or sc.eps_list
    res = _sweep_all(prep, eps_list, threads, residual=not args.no_residual)
    sweeps = res.sweeps
    files = _write_sweeps(out, res, extra.get("sweep.N"))
    _manifest(out, cfg, sc, extra, threads, files, prep, sweeps, {"fits": res.fit, "fixed_order_slopes": res.slopes})
    print(json.dumps(res.summary(), indent=2, default=float))
    return EXIT_OK


def cmd_localization(args) -> int:
    cfg, sc, extra = _load(args)
    out = _outdir(args, extra, sc)
    b = args.b if args.b is not None else extra.get("localization.b")
    if b is None:
        raise ConfigError("no localization radius: pass --b or set [localization] b")
    eps_list = args.eps or extra.get("localization.eps") or [0.3, 0.2, 0.15]
    sc.n_max = 0
    prep = prepare(sc)
    rep = localization_sweep(prep, b, eps_list)
    p1 = out / "localization.csv"
    write_rows_csv(p1, rep["rows"])
    p2 = out / "localization.json"
    write_json(p2, rep)
    _manifest(out, cfg, sc, extra, 1, [p1, p2], prep, (), {"localization_b": b})
    for r in rep["rows"]:
        print(f"eps={_fmt(r['eps'])} mass={_fmt(r['mass'])} oracle={_fmt(r['oracle'])}")
    print(f"slope of log mass against 1/eps^2: {_fmt(rep['slope'])}")
    return EXIT_OK


def cmd_emit_plot_data(args) -> int:
    src = Path(args.input) if args.input else Path(args.out or ".") / "sweep.csv"
    if not src.is_file():
        print(f"error: no sweep table at {src}", file=sys.stderr)
        return EXIT_MISSING
    out = Path(args.out) if args.out else src.parent
    out.mkdir(parents=True, exist_ok=True)
    by_eps: dict = {}
    with open(src) as fh:
        for row in csv.DictReader(fh):
            by_eps.setdefault(float(row["eps"]), []).append((int(row["N"]), float(row["error"])))
    written = []
    mins = []
    for eps in sorted(by_eps, reverse=True):
        pts = sorted(by_eps[eps])
        p = out / f"error_vs_N_eps{eps:g}.dat"
        p.write_text("".join(f"{N} {_fmt(e)}\n" for N, e in pts))
        written.append(p)
        mins.append((1 / eps ** 2, min(e for _, e in pts)))
    p = out / "min_error_vs_inv_eps2.dat"
    p.write_text("".join(f"{_fmt(x)} {_fmt(y)}\n" for x, y in mins))
    written.append(p)
    for f in written:
        print(f)
    return EXIT_OK


def cmd_validate(args) -> int:
    checks = run_checks(args.inject)
    print(format_report(checks))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        rows = [{"module": c.module, "check": c.name, "passed": c.passed, "measured": c.measured,
                 "tolerance": c.tolerance, "note": c.note} for c in checks]
        write_rows_csv(out / "validate.csv", rows)
    return EXIT_OK if all(c.passed for c in checks) else EXIT_FAILED


def _parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="hagprop", description=__doc__.split("\n")[0],
                                  epilog="exit codes: " + "; ".join(f"{k} {v}" for k, v in EXIT_CODES.items()))
    top.add_argument("--version", action="version", version=f"hagprop {__version__}")
    sub = top.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("config_pos", nargs="?", metavar="CONFIG", help="scenario file (same as --config)")
            p.add_argument("--config", help="scenario file (INI or JSON)")
            p.add_argument("--scenario", help="name of a built-in scenario")
        p.add_argument("--out", help="output directory")
        p.add_argument("--threads", type=int, help="parallel eps runs (default: HAGPROP_THREADS or 1)")

    p = sub.add_parser("run", help="full pipeline for one scenario")
    common(p)
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("validate", help="run the property suite")
    common(p, config=False)
    p.add_argument("--inject", choices=["cond1"], help="break a fixture on purpose")
    p.set_defaults(func=cmd_validate)
    p = sub.add_parser("sweep-orders", help="error versus N at one eps")
    common(p)
    p.add_argument("--eps", type=float)
    p.add_argument("--n-max", type=int)
    p.add_argument("--no-residual", action="store_true", help="skip the residual bound")
    p.set_defaults(func=cmd_sweep_orders)
    p = sub.add_parser("sweep-epsilon", help="order sweeps over the eps list with fits")
    common(p)
    p.add_argument("--eps", type=float, nargs="+")
    p.add_argument("--no-residual", action="store_true")
    p.set_defaults(func=cmd_sweep_epsilon)
    p = sub.add_parser("localization", help="order-zero mass outside a radius")
    common(p)
    p.add_argument("--b", type=float)
    p.add_argument("--eps", type=float, nargs="+")
    p.set_defaults(func=cmd_localization)
    p = sub.add_parser("emit-plot-data", help="two-column data files from sweep.csv")
    p.add_argument("--input", help="sweep table (default: OUT/sweep.csv)")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_emit_plot_data)
    return top


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_MISSING
    except (ConfigError, ParameterError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except NearDegeneracyError as err:
        print(f"error: gap collapse: {err}", file=sys.stderr)
        return EXIT_GAP
    except (RegionExit, RegionError) as err:
        print(f"error: region exit: {err}", file=sys.stderr)
        return EXIT_REGION
    except ResolutionError as err:
        print(f"error: resolution: {err}", file=sys.stderr)
        return EXIT_RESOLUTION
    except InvariantError as err:
        print(f"error: invariant drift: {err}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
