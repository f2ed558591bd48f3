"""Closed-form arrival-time densities used as comparison curves.

``flux_density`` is the integrated axial probability current through the
detector plane, which equals the Bohmian first-arrival density whenever
trajectories cross the plane at most once (spin-up and spin-down states).
``semiclassical_density`` is the time-of-flight formula built from the
momentum distribution, adapted to the waveguide.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .propagator import w_and_prime

__all__ = [
    "CurveKind",
    "DistributionCurve",
    "flux_density",
    "flux_tail",
    "flux_lobe_approx",
    "semiclassical_density",
    "flux_cdf",
    "curve",
]

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


class CurveKind(str, Enum):
    FLUX = "flux"
    FLUX_TAIL = "flux_tail"
    FLUX_LOBES = "flux_lobes"
    SEMICLASSICAL = "semiclassical"


@dataclass(frozen=True)
class DistributionCurve:
    tau_grid: np.ndarray
    density: np.ndarray
    label: CurveKind


def _as_positive(tau):
    tau = np.asarray(tau, dtype=float)
    if np.any(~(tau > 0.0)):
        raise ValueError("tau must be strictly positive")
    return tau


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


def flux_density(tau, L):
    """2 Im[conj(W) W'] at z = L. Returned as computed, never clamped."""
    tau = _as_positive(tau)
    w, wp = w_and_prime(np.full(tau.shape, float(L)), tau)
    return _scalar_or_array(2.0 * np.imag(np.conj(w) * wp))


def flux_tail(tau, L):
    """Large-tau asymptote 4 (L/pi)^3 / tau^4 of the flux density."""
    tau = _as_positive(tau)
    return _scalar_or_array(4.0 * (L / math.pi) ** 3 / tau**4)


def _lobes(tau, L):
    u = L / tau
    return (4.0 * math.pi / L) * np.sinc(u / math.pi) ** 2


def flux_lobe_approx(tau, L):
    """(4 pi / L) sinc^2(L / tau) with sinc(x) = sin(x)/x; only for tau < L/10."""
    tau = _as_positive(tau)
    if np.any(tau >= L / 10.0):
        raise ValueError("the lobe approximation holds only for tau < L/10")
    return _scalar_or_array(_lobes(tau, L))


_SERIES_EPS = 1e-4


def semiclassical_density(tau, L):
    """(8 pi L / tau^2) cos^2(L / 2 tau) / ((L/tau)^2 - pi^2)^2.

    Rewritten with eps = L/tau - pi as
    (8 pi / L) u^2 [sin(eps/2)/eps]^2 / (u + pi)^2, which is regular at
    u = pi; the bracket is replaced by its Taylor series for |eps| < 1e-4.
    """
    tau = _as_positive(tau)
    u = L / tau
    eps = u - math.pi
    small = np.abs(eps) < _SERIES_EPS
    safe = np.where(small, 1.0, eps)
    ratio = np.where(small, 0.5 - eps**2 / 48.0, np.sin(0.5 * safe) / safe)
    return _scalar_or_array((8.0 * math.pi / L) * u**2 * ratio**2 / (u + math.pi) ** 2)


def _flux_panels(L, t_end):
    """Panel edges fine enough to resolve the lobe train (spacing ~ pi tau^2 / L)."""
    edges = [L / 1000.0]
    t = edges[0]
    while t < t_end:
        t = t + min(0.05 * math.pi * t * t / L, 0.02 * t)
        edges.append(t)
    edges[-1] = t_end
    return np.asarray(edges)


def _gl_integral(a, b, L):
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    pts = mid[:, None] + half[:, None] * _GL_X[None, :]
    vals = flux_density(pts.ravel(), L).reshape(pts.shape)
    return half * (vals @ _GL_W)


def flux_cdf(tau, L):
    """Cumulative integral of ``flux_density`` from 0 to ``tau``.

    Composite 8-point Gauss-Legendre on panels that shrink with the lobe
    spacing; the mass below ``L/1000`` (of order 1e-9) is added from the
    lobe asymptote.
    """
    tau = _as_positive(tau)
    t_end = float(np.max(tau))
    t0 = L / 1000.0
    head = 2.0 * math.pi / (3.0 * 1000.0**3)
    if t_end <= t0:
        return _scalar_or_array(np.zeros_like(tau))
    edges = _flux_panels(L, t_end)
    cum = np.concatenate([[head], head + np.cumsum(_gl_integral(edges[:-1], edges[1:], L))])
    flat = tau.ravel()
    out = np.zeros_like(flat)
    inside = flat > t0
    q = flat[inside]
    j = np.clip(np.searchsorted(edges, q, side="right") - 1, 0, len(edges) - 2)
    out[inside] = cum[j] + _gl_integral(edges[j], q, L)
    return _scalar_or_array(out.reshape(tau.shape))


def curve(kind, tau_grid, L):
    """Evaluate one comparison density on ``tau_grid``.

    The lobe approximation is NaN where it does not apply (tau >= L/10).
    """
    kind = CurveKind(kind)
    grid = _as_positive(tau_grid)
    if grid.ndim != 1 or np.any(np.diff(grid) <= 0.0):
        raise ValueError("tau_grid must be one-dimensional and strictly increasing")
    if kind is CurveKind.FLUX:
        dens = flux_density(grid, L)
    elif kind is CurveKind.FLUX_TAIL:
        dens = flux_tail(grid, L)
    elif kind is CurveKind.FLUX_LOBES:
        dens = np.where(grid < L / 10.0, _lobes(grid, L), np.nan)
    else:
        dens = semiclassical_density(grid, L)
    return DistributionCurve(tau_grid=grid, density=np.asarray(dens, dtype=float), label=kind)
