"""Command-line entry point.

    spinarrival simulate --config run.yaml --seed 7 --out results/
    spinarrival curves   --config run.yaml
    spinarrival sweep    --config sweep.yaml --threads 4
    spinarrival validate --config run.yaml

Exit codes: 0 success, 2 invalid configuration or arguments, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .config import ConfigError, load_config
from .dynamics import STATUS_CENSORED
from .ensemble import (
    EnsembleFailure,
    histogram,
    no_arrival_windows,
    run_ensemble,
    summarize,
)
from .reference import CurveKind, curve
from .state import SpinOrientation, WaveguideParams

__all__ = ["main", "simulate", "curves", "sweep", "derive_seed"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

log = logging.getLogger("spinarrival")


def _fmt(x):
    return format(float(x), ".15g")


def _atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _csv(header, rows):
    lines = [",".join(header)]
    lines.extend(",".join(r) for r in rows)
    return "\n".join(lines) + "\n"


def _dump_summary(doc, fmt):
    if fmt == "json":
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)


def derive_seed(master, index):
    """Independent 63-bit seed for sweep point ``index``."""
    state = np.random.SeedSequence([int(master), int(index)]).generate_state(1, np.uint64)[0]
    return int(state >> np.uint64(1))


# -- simulate ---------------------------------------------------------------


def _histogram_for(cfg, tau, n_total):
    h = cfg.histogram
    arrivals = tau[np.isfinite(tau)]
    upper = h.upper
    if upper is None:
        upper = float(np.quantile(arrivals, 0.999)) if len(arrivals) else 1.0
    if h.bin_width is not None:
        nb = max(1, math.ceil(upper / h.bin_width))
        edges = h.bin_width * np.arange(nb + 1)
        return histogram(tau, bins=edges, n_total=n_total)
    return histogram(tau, bins=h.bins, upper=upper, n_total=n_total)


def _window_hist(cfg, tau, n_total):
    """Fine histogram below L/(2 pi) used for no-arrival window detection."""
    top = cfg.waveguide.L / (2.0 * math.pi)
    nb = max(1, math.ceil(top / (0.25 * cfg.windows.min_width)))
    below = tau[np.isfinite(tau) & (tau <= top)]
    return histogram(below, bins=np.linspace(0.0, top, nb + 1), n_total=n_total)


def simulate(cfg, out_dir, workers=None):
    """Run one ensemble and write arrivals.csv, histogram.csv and the summary."""
    out_dir = Path(out_dir)
    result = run_ensemble(cfg.n, cfg.spin, cfg.waveguide, cfg.solver, seed=cfg.seed, workers=workers)
    units = cfg.units

    header = ["index", "x0", "y0", "z0", "tau", "censored"]
    if units is not None:
        header.append("tau_seconds")
    rows = []
    for i in range(result.n):
        x0, y0, z0 = result.initial[i]
        t = result.tau[i]
        row = [str(i), _fmt(x0), _fmt(y0), _fmt(z0), _fmt(t) if np.isfinite(t) else ""]
        row.append("1" if result.status[i] == STATUS_CENSORED else "0")
        if units is not None:
            row.append(_fmt(units.to_physical_time(t)) if np.isfinite(t) else "")
        rows.append(row)
    _atomic_write(out_dir / "arrivals.csv", _csv(header, rows))

    hist = _histogram_for(cfg, result.tau, result.n)
    header = ["bin_left", "bin_right", "count", "density"]
    if units is not None:
        header += ["bin_left_seconds", "bin_right_seconds"]
    rows = []
    edges = hist.bin_edges
    for k in range(len(hist.counts)):
        row = [_fmt(edges[k]), _fmt(edges[k + 1]), str(int(hist.counts[k])), _fmt(hist.density[k])]
        if units is not None:
            row += [_fmt(units.to_physical_time(edges[k])), _fmt(units.to_physical_time(edges[k + 1]))]
        rows.append(row)
    # overflow: everything past the last edge, reported with an open right edge
    row = [_fmt(edges[-1]), "inf", str(hist.overflow), "0"]
    if units is not None:
        row += [_fmt(units.to_physical_time(edges[-1])), "inf"]
    rows.append(row)
    _atomic_write(out_dir / "histogram.csv", _csv(header, rows))

    windows = no_arrival_windows(_window_hist(cfg, result.tau, result.n), cfg.windows.min_width)
    doc = {"tool": "spinarrival", "version": __version__, "seed": cfg.seed, "n": result.n}
    if result.arrived.any():
        stats = summarize(result)
        doc.update(
            mean=stats.mean,
            std=stats.std,
            tau_max=stats.tau_max,
            arrival_fraction=stats.arrival_fraction,
        )
    else:
        doc.update(mean=None, std=None, tau_max=None, arrival_fraction=0.0)
    doc.update(
        censored_count=result.censored_count,
        failed_count=result.failed_count,
        no_arrival_windows=[[l, r] for l, r in windows],
        lobes=len(windows) + 1 if result.arrived.any() else 0,
        config=cfg.to_dict(),
    )
    if units is not None:
        doc["physical"] = {
            "time_unit_seconds": units.time_unit,
            "frequency_unit_rad_per_s": units.frequency_unit,
            "length_unit_meters": units.d_meters,
            "mean_seconds": None if doc["mean"] is None else units.to_physical_time(doc["mean"]),
            "std_seconds": None if doc["std"] is None else units.to_physical_time(doc["std"]),
            "tau_max_seconds": None if doc["tau_max"] is None else units.to_physical_time(doc["tau_max"]),
        }
    fmt = cfg.outputs.summary_format
    _atomic_write(out_dir / f"summary.{fmt}", _dump_summary(doc, fmt))
    return result, doc


# -- curves -----------------------------------------------------------------


def curve_grid(cfg):
    L = cfg.waveguide.L
    g = cfg.curves
    lo = g.tau_min if g.tau_min is not None else L / 1000.0
    hi = g.tau_max if g.tau_max is not None else 5.0 * L
    grid = np.geomspace(lo, hi, g.points) if g.spacing == "log" else np.linspace(lo, hi, g.points)
    special = L / math.pi
    if lo < special < hi:
        grid = np.union1d(grid, [special])
    return grid


def curves(cfg, out_dir):
    """Write curves.csv with every comparison density on the configured grid."""
    grid = curve_grid(cfg)
    L = cfg.waveguide.L
    kinds = [CurveKind.FLUX, CurveKind.FLUX_TAIL, CurveKind.FLUX_LOBES, CurveKind.SEMICLASSICAL]
    cols = [curve(k, grid, L).density for k in kinds]
    rows = [[_fmt(grid[i])] + [_fmt(c[i]) for c in cols] for i in range(len(grid))]
    path = _atomic_write(Path(out_dir) / "curves.csv", _csv(["tau"] + [k.value for k in kinds], rows))
    return grid, dict(zip((k.value for k in kinds), cols)), path


# -- sweep ------------------------------------------------------------------


def _sweep_point(cfg, value):
    p = cfg.sweep.parameter
    if p == "alpha":
        return SpinOrientation(value, cfg.spin.beta), cfg.waveguide
    if p == "L":
        return cfg.spin, WaveguideParams(value, cfg.waveguide.omega)
    return cfg.spin, WaveguideParams(cfg.waveguide.L, value)


def sweep(cfg, out_dir, workers=None):
    """One ensemble per sweep value; a failing point is flagged and the sweep continues.

    Returns the rows as dicts and the number of failed points.
    """
    if cfg.sweep is None:
        raise ConfigError("the sweep command needs a 'sweep' section")
    header = ["param_value", "mean", "std", "tau_max", "arrival_fraction", "n", "status"]
    rows, records, failures = [], [], 0
    for idx, value in enumerate(cfg.sweep.values):
        rec = {"param_value": value, "n": cfg.n, "seed": derive_seed(cfg.seed, idx)}
        try:
            spin, params = _sweep_point(cfg, value)
            cfg.solver.horizon(params.L)
            result = run_ensemble(cfg.n, spin, params, cfg.solver, seed=rec["seed"], workers=workers)
            stats = summarize(result)
            rec.update(dataclasses.asdict(stats), status="ok")
        except (EnsembleFailure, ValueError, ArithmeticError, RuntimeError) as exc:
            failures += 1
            log.error("sweep point %s=%s failed: %s", cfg.sweep.parameter, value, exc)
            rec.update(mean=None, std=None, tau_max=None, arrival_fraction=None, status=type(exc).__name__)
        records.append(rec)
        rows.append(
            [_fmt(value)]
            + ["" if rec[k] is None else _fmt(rec[k]) for k in ("mean", "std", "tau_max", "arrival_fraction")]
            + [str(cfg.n), rec["status"]]
        )
    _atomic_write(Path(out_dir) / "sweep.csv", _csv(header, rows))
    doc = {
        "tool": "spinarrival",
        "version": __version__,
        "seed": cfg.seed,
        "parameter": cfg.sweep.parameter,
        "points": [{k: r[k] for k in ("param_value", "seed", "status")} for r in records],
        "failed_points": failures,
        "config": cfg.to_dict(),
    }
    fmt = cfg.outputs.summary_format
    _atomic_write(Path(out_dir) / f"sweep_summary.{fmt}", _dump_summary(doc, fmt))
    return records, failures


# -- entry point ------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="spinarrival", description="Bohmian arrival times of a spin-1/2 particle.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("simulate", "run one ensemble"),
        ("curves", "tabulate the closed-form densities"),
        ("sweep", "run one ensemble per value of alpha, L or omega"),
        ("validate", "check a config file and exit"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="YAML experiment file")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--threads", type=int, help="worker processes (default: all available)")
        p.add_argument("--out", help="output directory (overrides outputs.dir)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg = cfg.with_seed(args.seed)
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        if args.command in ("simulate", "sweep") and cfg.seed is None:
            raise ConfigError("no seed given: set ensemble.seed or pass --seed")
        if args.command == "sweep" and cfg.sweep is None:
            raise ConfigError("the sweep command needs a 'sweep' section")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "validate":
        print(f"{args.config}: ok")
        return EXIT_OK

    out_dir = Path(args.out or cfg.outputs.dir or ".")
    try:
        if args.command == "simulate":
            simulate(cfg, out_dir, workers=args.threads)
        elif args.command == "curves":
            curves(cfg, out_dir)
        else:
            _, failures = sweep(cfg, out_dir, workers=args.threads)
            if failures:
                print(f"{failures} sweep point(s) failed; see sweep.csv", file=sys.stderr)
                return EXIT_RUNTIME
    except EnsembleFailure as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
