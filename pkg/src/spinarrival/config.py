"""Experiment configuration files.

A config is a YAML mapping. Physics parameters (``alpha``, ``L``, ``omega``,
``n``) have no defaults; solver and output settings do, and every default is
echoed back in the outputs. Unknown keys are errors.

Example::

    spin: {alpha: 1.5707963267948966, beta: 0.0}
    waveguide: {L: 100, omega: 1000}
    ensemble: {n: 10000, seed: 7}
    solver: {rel_tol: 1.0e-8}
    histogram: {bins: 400}
    outputs: {dir: results, summary_format: yaml}
    units: {d_meters: 5.0e-5}
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import yaml

from .dynamics import SolverConfig
from .state import SpinOrientation, UnitSystem, WaveguideParams

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "HistogramConfig",
    "WindowConfig",
    "CurveGrid",
    "SweepConfig",
    "OutputConfig",
    "load_config",
    "parse_config",
]

SWEEP_PARAMETERS = ("alpha", "L", "omega")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class HistogramConfig:
    bins: int | None = 400
    bin_width: float | None = None
    upper: float | None = None


@dataclass(frozen=True)
class WindowConfig:
    min_width: float = 0.3


@dataclass(frozen=True)
class CurveGrid:
    tau_min: float | None = None
    tau_max: float | None = None
    points: int = 20001
    spacing: str = "log"


@dataclass(frozen=True)
class OutputConfig:
    dir: str | None = None
    summary_format: str = "yaml"


@dataclass(frozen=True)
class SweepConfig:
    parameter: str
    values: tuple


@dataclass(frozen=True)
class ExperimentConfig:
    spin: SpinOrientation
    waveguide: WaveguideParams
    n: int
    seed: int | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    histogram: HistogramConfig = field(default_factory=HistogramConfig)
    windows: WindowConfig = field(default_factory=WindowConfig)
    curves: CurveGrid = field(default_factory=CurveGrid)
    sweep: SweepConfig | None = None
    outputs: OutputConfig = field(default_factory=OutputConfig)
    units: UnitSystem | None = None

    def with_seed(self, seed):
        return dataclasses.replace(self, seed=int(seed))

    def to_dict(self):
        """Plain-data form; ``parse_config(cfg.to_dict()) == cfg``."""
        out = {
            "spin": {"alpha": self.spin.alpha, "beta": self.spin.beta},
            "waveguide": {"L": self.waveguide.L, "omega": self.waveguide.omega},
            "ensemble": {"n": self.n, "seed": self.seed},
            "solver": dataclasses.asdict(self.solver),
            "histogram": dataclasses.asdict(self.histogram),
            "windows": dataclasses.asdict(self.windows),
            "curves": dataclasses.asdict(self.curves),
            "outputs": dataclasses.asdict(self.outputs),
        }
        if self.sweep is not None:
            out["sweep"] = {"parameter": self.sweep.parameter, "values": list(self.sweep.values)}
        if self.units is not None:
            out["units"] = dataclasses.asdict(self.units)
        return out


def _section(raw, name, required=False):
    if name not in raw or raw[name] is None:
        if required:
            raise ConfigError(f"missing required section '{name}'")
        return {}
    sec = raw[name]
    if not isinstance(sec, dict):
        raise ConfigError(f"section '{name}' must be a mapping")
    return dict(sec)


def _take(sec, section, allowed, required=()):
    unknown = set(sec) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in '{section}': {', '.join(sorted(map(str, unknown)))}")
    missing = [k for k in required if sec.get(k) is None]
    if missing:
        raise ConfigError(f"'{section}' must set {', '.join(missing)} explicitly")
    return sec


def _num(value, what, kind=float):
    if isinstance(value, bool):
        raise ConfigError(f"{what} must be a number")
    try:
        out = kind(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what} must be a number, got {value!r}") from exc
    if kind is int and out != value:
        raise ConfigError(f"{what} must be an integer, got {value!r}")
    if kind is float and not math.isfinite(out):
        raise ConfigError(f"{what} must be finite")
    return out


def _opt(value, what, kind=float):
    return None if value is None else _num(value, what, kind)


def parse_config(raw):
    """Validate a config mapping and build an :class:`ExperimentConfig`."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    top = {"spin", "waveguide", "ensemble", "solver", "histogram", "windows", "curves", "sweep", "outputs", "units"}
    unknown = set(raw) - top
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(map(str, unknown)))}")

    try:
        sec = _take(_section(raw, "spin", True), "spin", ("alpha", "beta"), ("alpha",))
        spin = SpinOrientation(_num(sec["alpha"], "spin.alpha"), _num(sec.get("beta", 0.0), "spin.beta"))

        sec = _take(_section(raw, "waveguide", True), "waveguide", ("L", "omega"), ("L", "omega"))
        waveguide = WaveguideParams(_num(sec["L"], "waveguide.L"), _num(sec["omega"], "waveguide.omega"))

        sec = _take(_section(raw, "ensemble", True), "ensemble", ("n", "seed"), ("n",))
        n = _num(sec["n"], "ensemble.n", int)
        if n < 1:
            raise ConfigError("ensemble.n must be at least 1")
        seed = _opt(sec.get("seed"), "ensemble.seed", int)
        if seed is not None and seed < 0:
            raise ConfigError("ensemble.seed must be non-negative")

        sec = _take(
            _section(raw, "solver"),
            "solver",
            ("rel_tol", "abs_tol", "t_max", "crossing_tol", "max_steps", "track_crossings", "ramp_time",
             "ramp_floor"),
        )
        defaults = SolverConfig()
        solver = SolverConfig(
            rel_tol=_num(sec.get("rel_tol", defaults.rel_tol), "solver.rel_tol"),
            abs_tol=_num(sec.get("abs_tol", defaults.abs_tol), "solver.abs_tol"),
            t_max=_opt(sec.get("t_max"), "solver.t_max"),
            crossing_tol=_num(sec.get("crossing_tol", defaults.crossing_tol), "solver.crossing_tol"),
            max_steps=_num(sec.get("max_steps", defaults.max_steps), "solver.max_steps", int),
            track_crossings=bool(sec.get("track_crossings", False)),
            ramp_time=_num(sec.get("ramp_time", defaults.ramp_time), "solver.ramp_time"),
            ramp_floor=_num(sec.get("ramp_floor", defaults.ramp_floor), "solver.ramp_floor"),
        )
        solver.horizon(waveguide.L)

        sec = _take(_section(raw, "histogram"), "histogram", ("bins", "bin_width", "upper"))
        bins = _opt(sec.get("bins", 400 if sec.get("bin_width") is None else None), "histogram.bins", int)
        bin_width = _opt(sec.get("bin_width"), "histogram.bin_width")
        if (bins is None) == (bin_width is None):
            raise ConfigError("histogram needs exactly one of bins or bin_width")
        if bins is not None and bins < 1 or bin_width is not None and bin_width <= 0:
            raise ConfigError("histogram bins/bin_width must be positive")
        upper = _opt(sec.get("upper"), "histogram.upper")
        if upper is not None and upper <= 0:
            raise ConfigError("histogram.upper must be positive")
        histogram = HistogramConfig(bins=bins, bin_width=bin_width, upper=upper)

        sec = _take(_section(raw, "windows"), "windows", ("min_width",))
        windows = WindowConfig(_num(sec.get("min_width", WindowConfig.min_width), "windows.min_width"))
        if windows.min_width <= 0:
            raise ConfigError("windows.min_width must be positive")

        sec = _take(_section(raw, "curves"), "curves", ("tau_min", "tau_max", "points", "spacing"))
        curves = CurveGrid(
            tau_min=_opt(sec.get("tau_min"), "curves.tau_min"),
            tau_max=_opt(sec.get("tau_max"), "curves.tau_max"),
            points=_num(sec.get("points", CurveGrid.points), "curves.points", int),
            spacing=str(sec.get("spacing", CurveGrid.spacing)),
        )
        if curves.spacing not in ("log", "linear"):
            raise ConfigError("curves.spacing must be 'log' or 'linear'")
        if curves.points < 2:
            raise ConfigError("curves.points must be at least 2")
        lo = curves.tau_min if curves.tau_min is not None else waveguide.L / 1000.0
        hi = curves.tau_max if curves.tau_max is not None else 5.0 * waveguide.L
        if not 0 < lo < hi:
            raise ConfigError("curves need 0 < tau_min < tau_max")

        sweep = None
        if raw.get("sweep") is not None:
            sec = _take(_section(raw, "sweep"), "sweep", ("parameter", "values"), ("parameter", "values"))
            if sec["parameter"] not in SWEEP_PARAMETERS:
                raise ConfigError(f"sweep.parameter must be one of {', '.join(SWEEP_PARAMETERS)}")
            values = sec["values"]
            if not isinstance(values, (list, tuple)) or not values:
                raise ConfigError("sweep.values must be a non-empty list")
            sweep = SweepConfig(sec["parameter"], tuple(_num(v, "sweep value") for v in values))
            for v in sweep.values:
                if sweep.parameter == "alpha":
                    SpinOrientation(v, spin.beta)
                elif sweep.parameter == "L":
                    solver.horizon(WaveguideParams(v, waveguide.omega).L)
                else:
                    WaveguideParams(waveguide.L, v)

        sec = _take(_section(raw, "outputs"), "outputs", ("dir", "summary_format"))
        outputs = OutputConfig(
            dir=None if sec.get("dir") is None else str(sec["dir"]),
            summary_format=str(sec.get("summary_format", OutputConfig.summary_format)),
        )
        if outputs.summary_format not in ("yaml", "json"):
            raise ConfigError("outputs.summary_format must be 'yaml' or 'json'")

        units = None
        if raw.get("units") is not None:
            sec = _take(_section(raw, "units"), "units", ("d_meters", "mass_kg", "hbar_Js"), ("d_meters",))
            kwargs = {k: _num(v, f"units.{k}") for k, v in sec.items() if v is not None}
            units = UnitSystem(**kwargs)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    return ExperimentConfig(
        spin=spin,
        waveguide=waveguide,
        n=n,
        seed=seed,
        solver=solver,
        histogram=histogram,
        windows=windows,
        curves=curves,
        sweep=sweep,
        outputs=outputs,
        units=units,
    )


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML in {path}: {exc}") from exc
    return parse_config(raw)
