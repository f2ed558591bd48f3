"""Born-rule ensembles of trajectories and arrival-time statistics."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .dynamics import (
    STATUS_ARRIVED,
    STATUS_CENSORED,
    ArrivalRecord,
    SolverConfig,
    integrate_batch,
)
from .state import Position3, SpinOrientation, WaveguideParams

__all__ = [
    "EnsembleResult",
    "EnsembleFailure",
    "Histogram",
    "SummaryStats",
    "sample_initial",
    "run_ensemble",
    "histogram",
    "summarize",
    "no_arrival_windows",
    "count_lobes",
    "expected_lobe_population",
    "resolvable_lobes",
    "ks_one_sample",
    "ks_two_sample",
    "ks_critical_one_sample",
    "ks_critical_two_sample",
    "MAX_FAILURE_FRACTION",
]

MAX_FAILURE_FRACTION = 1e-3
CHUNK_SIZE = 256


# -- sampling ---------------------------------------------------------------


def _x_minus_sin(x):
    """x - sin(x) without cancellation for small x (series below 0.5)."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 0.5
    xs = np.where(small, x, 0.0)
    x2 = xs * xs
    term = xs * x2 / 6.0
    series = term.copy()
    for k in range(2, 11):
        term = -term * x2 / ((2 * k) * (2 * k + 1))
        series = series + term
    return np.where(small, series, x - np.sin(x))


def _axial_cdf(z):
    """F(z) = z - sin(2 pi z)/(2 pi), evaluated from the nearer endpoint."""
    z = np.asarray(z, dtype=float)
    near_top = z > 0.5
    w = np.where(near_top, 1.0 - z, z)
    f = _x_minus_sin(2.0 * np.pi * w) / (2.0 * np.pi)
    return np.where(near_top, 1.0 - f, f)


def _axial_inverse_cdf(u, tol=1e-12, max_iter=100):
    """Solve F(z) = u on [0, 1] for the density 2 sin^2(pi z).

    Newton steps that leave the current bracket fall back to bisection.
    """
    u = np.asarray(u, dtype=float)
    lo = np.zeros_like(u)
    hi = np.ones_like(u)
    # F has triple roots at both ends; start from F ~ (2 pi^2 / 3) z^3 there
    c = 3.0 / (2.0 * np.pi**2)
    z = np.where(u < 0.01, np.cbrt(c * u), np.where(u > 0.99, 1.0 - np.cbrt(c * (1.0 - u)), u))
    # each entry stops on its own, so results do not depend on the batch;
    # below u = 1e-30 the cubic start is already exact to rounding
    active = u >= 1e-30
    for _ in range(max_iter):
        f = _axial_cdf(z) - u
        lo = np.where(f < 0.0, z, lo)
        hi = np.where(f > 0.0, z, hi)
        dens = 2.0 * np.sin(np.pi * z) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(f == 0.0, 0.0, f / dens)
        z_new = z - step
        bad = ~np.isfinite(z_new) | (z_new < lo) | (z_new > hi)
        z_new = np.where(bad, 0.5 * (lo + hi), z_new)
        z_new = np.where(active, z_new, z)
        active &= np.abs(z_new - z) >= tol
        z = z_new
        if not np.any(active):
            break
    return z


def _substream(seed, index):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def sample_initial(n, params, seed, start=0):
    """Draw ``n`` initial positions from |Psi_0|^2, shape (n, 3).

    Trajectory ``i`` uses its own generator keyed by ``(seed, start + i)``,
    so any prefix or slice of a larger ensemble is reproduced exactly.
    """
    if n < 1:
        raise ValueError("need at least one trajectory")
    sigma = 1.0 / math.sqrt(2.0 * params.omega)
    draws = np.empty((n, 3))
    for i in range(n):
        g = _substream(seed, start + i)
        draws[i, :2] = g.standard_normal(2)
        draws[i, 2] = g.random()
    # u = 0 would put the particle on the wall, where the density vanishes
    draws[:, 2] = np.clip(draws[:, 2], 1e-300, None)
    out = np.empty((n, 3))
    out[:, :2] = sigma * draws[:, :2]
    out[:, 2] = _axial_inverse_cdf(draws[:, 2])
    return out


# -- running ----------------------------------------------------------------


@dataclass
class EnsembleResult:
    initial: np.ndarray
    tau: np.ndarray
    status: np.ndarray
    crossings: np.ndarray
    steps: np.ndarray
    spin: SpinOrientation
    params: WaveguideParams
    cfg: SolverConfig
    seed: int

    @property
    def n(self):
        return len(self.tau)

    @property
    def arrived(self):
        return self.status == STATUS_ARRIVED

    @property
    def arrivals(self):
        return self.tau[self.arrived]

    @property
    def censored_count(self):
        return int(np.count_nonzero(self.status == STATUS_CENSORED))

    @property
    def failed_count(self):
        return int(np.count_nonzero((self.status != STATUS_ARRIVED) & (self.status != STATUS_CENSORED)))

    @property
    def records(self):
        out = []
        for p, tau, st, cr, nk in zip(self.initial, self.tau, self.status, self.crossings, self.steps):
            out.append(
                ArrivalRecord(
                    initial=Position3(*map(float, p)),
                    tau=float(tau) if st == STATUS_ARRIVED else None,
                    crossing_count_hint=int(cr),
                    steps=int(nk),
                )
            )
        return out


class EnsembleFailure(RuntimeError):
    def __init__(self, message, result):
        super().__init__(message)
        self.result = result


def _run_chunk(args):
    p0, spin, params, cfg = args
    return integrate_batch(p0, spin, params, cfg)


def run_ensemble(n, spin, params, cfg=SolverConfig(), seed=0, workers=1, chunk_size=CHUNK_SIZE):
    """Sample ``n`` initial points and integrate each to its first arrival.

    ``workers`` > 1 spreads fixed-size chunks over processes; every
    trajectory is integrated independently, so the output does not depend on
    the worker count. Raises :class:`EnsembleFailure` when more than 0.1% of
    the trajectories fail (step budget or node retries).
    """
    if n < 1:
        raise ValueError("ensemble size must be at least 1")
    cfg.horizon(params.L)
    p0 = sample_initial(n, params, seed)
    chunks = [(p0[i : i + chunk_size], spin, params, cfg) for i in range(0, n, chunk_size)]
    workers = (os.cpu_count() or 1) if workers is None else int(workers)
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, chunks))
    else:
        parts = [_run_chunk(c) for c in chunks]
    status, tau, crossings, steps = (np.concatenate(a) for a in zip(*parts))
    result = EnsembleResult(p0, tau, status, crossings, steps, spin, params, cfg, int(seed))
    if result.failed_count > MAX_FAILURE_FRACTION * n:
        raise EnsembleFailure(
            f"{result.failed_count} of {n} trajectories failed (limit {MAX_FAILURE_FRACTION:.1%})", result
        )
    return result


# -- statistics -------------------------------------------------------------


@dataclass(frozen=True)
class Histogram:
    """Arrival counts on ``bin_edges`` plus an overflow count past the last edge.

    ``normalization`` is the total number of arrivals (overflow included).
    ``density`` is scaled by ``n_total`` (censored trajectories included), so it
    estimates the arrival-time density itself.
    """

    bin_edges: np.ndarray
    counts: np.ndarray
    overflow: int
    normalization: int
    n_total: int

    def __post_init__(self):
        if len(self.counts) != len(self.bin_edges) - 1:
            raise ValueError("need one more edge than counts")
        if np.any(np.diff(self.bin_edges) <= 0):
            raise ValueError("bin edges must be strictly increasing")

    @property
    def widths(self):
        return np.diff(self.bin_edges)

    @property
    def density(self):
        return self.counts / (self.n_total * self.widths)


def histogram(result_or_tau, bins=400, upper=None, lower=0.0, n_total=None):
    """Bin arrival times.

    ``bins`` is a count (uniform bins on ``[lower, upper]``) or an explicit
    edge array. The default ``upper`` is the 0.999 quantile of the arrivals;
    later arrivals go to the overflow count.
    """
    if isinstance(result_or_tau, EnsembleResult):
        tau = result_or_tau.arrivals
        n_total = result_or_tau.n if n_total is None else n_total
    else:
        tau = np.asarray(result_or_tau, dtype=float)
        tau = tau[np.isfinite(tau)]
        n_total = len(tau) if n_total is None else n_total
    if np.ndim(bins) == 0:
        if upper is None:
            if len(tau) == 0:
                raise ValueError("cannot choose a default range without arrivals")
            upper = float(np.quantile(tau, 0.999))
        edges = np.linspace(lower, upper, int(bins) + 1)
    else:
        edges = np.asarray(bins, dtype=float)
    counts, _ = np.histogram(tau[(tau >= edges[0]) & (tau <= edges[-1])], bins=edges)
    overflow = int(np.count_nonzero(tau > edges[-1]))
    underflow = int(np.count_nonzero(tau < edges[0]))
    if underflow:
        raise ValueError(f"{underflow} arrivals fall below the first bin edge")
    return Histogram(edges, counts.astype(np.int64), overflow, len(tau), int(n_total))


@dataclass(frozen=True)
class SummaryStats:
    mean: float
    std: float
    tau_max: float
    arrival_fraction: float
    n_arrivals: int
    censored_count: int


def summarize(result_or_tau, n_total=None):
    """Moments of the arrival times; censored trajectories only lower ``arrival_fraction``."""
    if isinstance(result_or_tau, EnsembleResult):
        tau = result_or_tau.arrivals
        n_total = result_or_tau.n
        censored = result_or_tau.censored_count
    else:
        raw = np.atleast_1d(np.asarray(result_or_tau, dtype=float))
        tau = raw[np.isfinite(raw)]
        n_total = len(raw) if n_total is None else n_total
        censored = n_total - len(tau)
    if len(tau) == 0:
        raise ValueError("no arrivals to summarize")
    return SummaryStats(
        mean=float(np.mean(tau)),
        std=float(np.std(tau)),
        tau_max=float(np.max(tau)),
        arrival_fraction=len(tau) / n_total,
        n_arrivals=len(tau),
        censored_count=int(censored),
    )


def _zero_runs(counts):
    """(start, stop) index pairs of maximal zero runs with nonzero bins on both sides."""
    nz = np.flatnonzero(counts)
    if len(nz) < 2:
        return []
    gaps = np.flatnonzero(np.diff(nz) > 1)
    return [(nz[g] + 1, nz[g + 1]) for g in gaps]


def no_arrival_windows(hist, min_width):
    """Interior runs of empty bins at least ``min_width`` wide, as (left, right) times.

    Empty stretches before the first or after the last occupied bin do not
    count.
    """
    edges = hist.bin_edges
    out = []
    for a, b in _zero_runs(hist.counts):
        left, right = edges[a], edges[b]
        if right - left >= min_width * (1.0 - 1e-12):
            out.append((float(left), float(right)))
    return out


def count_lobes(hist, min_width):
    """Number of occupied stretches separated by no-arrival windows."""
    if not np.any(hist.counts):
        return 0
    return len(no_arrival_windows(hist, min_width)) + 1


def expected_lobe_population(n, lobe_index):
    """Approximate number of the ``n`` arrivals that fall in lobe ``lobe_index`` (main lobe = 1)."""
    if lobe_index < 1:
        raise ValueError("lobe index starts at 1")
    return 2.0 / math.pi**2 * n / lobe_index**4


def resolvable_lobes(delta_t, L, units=None):
    """Largest n with delta_t < L / (pi n^2), or 0 if even the main lobe is too narrow.

    Without ``units`` both arguments are dimensionless. With a
    :class:`UnitSystem`, ``delta_t`` is in seconds and ``L`` in meters.
    """
    if not delta_t > 0.0:
        raise ValueError("delta_t must be positive")
    if units is not None:
        delta_t = units.from_physical_time(delta_t)
        L = units.from_physical_length(L)
    n = int(math.floor(math.sqrt(L / (math.pi * delta_t))))
    while n >= 1 and not delta_t < L / (math.pi * n * n):
        n -= 1
    while delta_t < L / (math.pi * (n + 1) ** 2):
        n += 1
    return n


# -- Kolmogorov-Smirnov -----------------------------------------------------


def ks_one_sample(arrivals, cdf, n_total=None, upper=None):
    """sup |F_emp - F| where F_emp counts arrivals over ``n_total`` trajectories.

    Censored trajectories enter only through ``n_total``: they never reach the
    empirical CDF, which therefore tops out at the arrival fraction. Pass the
    censoring horizon as ``upper`` to include the gap on the final plateau.
    """
    x = np.sort(np.asarray(arrivals, dtype=float))
    n = len(x) if n_total is None else n_total
    f = np.asarray(cdf(x), dtype=float)
    above = np.arange(1, len(x) + 1) / n - f
    below = f - np.arange(0, len(x)) / n
    d = max(above.max(initial=0.0), below.max(initial=0.0))
    if upper is not None:
        d = max(d, float(cdf(np.array([float(upper)]))[0]) - len(x) / n)
    return float(d)


def ks_two_sample(a, b):
    return float(stats.ks_2samp(a, b).statistic)


def _k_alpha(alpha):
    return math.sqrt(-0.5 * math.log(alpha / 2.0))


def ks_critical_one_sample(n, alpha=0.01):
    """Asymptotic critical value K_alpha / sqrt(n) (1.628/sqrt(n) at 1%)."""
    return _k_alpha(alpha) / math.sqrt(n)


def ks_critical_two_sample(n, m, alpha=0.01):
    return _k_alpha(alpha) * math.sqrt((n + m) / (n * m))
