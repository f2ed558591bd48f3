"""Closed-form axial wave function after the barrier is removed.

The axial factor of the released ground state is

    W(z, t) = theta(z) [D(z-1, t) + D(1-z, t) - D(1+z, t) - D(-1-z, t)]

with the Moshinsky-type kernel

    D(x, t) = exp(-i pi^2 t/2) / (8i) * { exp(i pi x)  erfc[c (x/sqrt(t) - pi sqrt(t))]
                                         - exp(-i pi x) erfc[c (x/sqrt(t) + pi sqrt(t))] },

    c = exp(3 i pi / 4) / sqrt(2).

Along that line ``erfc(c u) = 2 theta(u) + sgn * exp(i u^2/2) w((1+i)|u|/2)``,
so every exponential that could overflow is a pure phase and the only
magnitude-carrying factor is the Faddeeva function on the ray arg = pi/4.
Pairing ``x`` with ``-x`` makes the terms share arguments, leaving four
Faddeeva evaluations for W and W' together, and the plane-wave pieces of the
two pairs cancel with integer coefficients.

Units: hbar = m = d = 1.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .special import erfc_scalar, faddeeva_w, wofz_scalar

__all__ = [
    "NodeProximityError",
    "NODE_FLOOR",
    "d_kernel",
    "w_evolution",
    "w_prime",
    "w_and_prime",
    "log_derivative",
]

NODE_FLOOR = 1e-13
_PI = math.pi
_C_RAY = complex(0.5, 0.5)
_C_ERFC = complex(-0.5, 0.5)  # exp(3i pi/4)/sqrt(2)


class NodeProximityError(ArithmeticError):
    """|W| fell below the node floor; W'/W is not trustworthy there."""

    def __init__(self, z, t, abs_w):
        super().__init__(f"|W(z={z!r}, t={t!r})| = {abs_w:.3e} is below the node floor")
        self.z = z
        self.t = t
        self.abs_w = abs_w


# w((1+i) r / 2) for r >= 0 is needed at every velocity evaluation. On
# [0, _RAY_MAX) it is tabulated as piecewise Chebyshev series fitted to the
# general Faddeeva routine (relative error ~5e-15); beyond, the asymptotic
# series is used.
_RAY_WIDTH = 0.25
_RAY_MAX = 16.0
_RAY_DEG = 10
_RAY_ASYM_TERMS = 10


def _ray_table():
    n_int = int(round(_RAY_MAX / _RAY_WIDTH))
    nodes = np.cos(np.pi * (np.arange(_RAY_DEG + 1) + 0.5) / (_RAY_DEG + 1))
    coef = np.empty((n_int, _RAY_DEG + 1), dtype=np.complex128)
    for k in range(n_int):
        r = (k + 0.5) * _RAY_WIDTH + 0.5 * _RAY_WIDTH * nodes
        f = faddeeva_w(_C_RAY * r)
        coef[k] = np.polynomial.chebyshev.chebfit(nodes, f.real, _RAY_DEG) + 1j * np.polynomial.chebyshev.chebfit(
            nodes, f.imag, _RAY_DEG
        )
    return coef


_RAY_COEF = _ray_table()


@njit(cache=True)
def w_ray(r):
    """w((1+i) r / 2) for real r >= 0."""
    if r < _RAY_MAX:
        k = int(r / _RAY_WIDTH)
        x = (r - (k + 0.5) * _RAY_WIDTH) / (0.5 * _RAY_WIDTH)
        b1 = complex(0.0, 0.0)
        b2 = complex(0.0, 0.0)
        for j in range(_RAY_DEG, 0, -1):
            b0 = _RAY_COEF[k, j] + 2.0 * x * b1 - b2
            b2 = b1
            b1 = b0
        return _RAY_COEF[k, 0] + x * b1 - b2
    zeta = _C_RAY * r
    inv = 1.0 / (2.0 * zeta * zeta)
    term = complex(1.0, 0.0)
    acc = complex(0.0, 0.0)
    for k in range(_RAY_ASYM_TERMS + 1):
        acc += term
        term *= (2 * k + 1) * inv
    return complex(0.0, 1.0) / (math.sqrt(math.pi) * zeta) * acc


@njit(cache=True)
def _sgn(u):
    if u > 0.0:
        return 1.0
    if u < 0.0:
        return -1.0
    return 0.0


@njit(cache=True)
def _cis(phi):
    return complex(math.cos(phi), math.sin(phi))


@njit(cache=True)
def w_pair_scalar(z, t):
    """(W, dW/dz) at a single point; W is zero for z <= 0."""
    if z <= 0.0:
        return complex(0.0, 0.0), complex(0.0, 0.0)
    s = math.sqrt(t)
    ps = _PI * s
    xa = z - 1.0
    xb = z + 1.0
    ua_m = xa / s - ps
    ua_p = xa / s + ps
    ub_m = xb / s - ps
    ub_p = xb / s + ps

    big_p = _cis(_PI * z - 0.5 * _PI * _PI * t)
    big_m = _cis(-_PI * z - 0.5 * _PI * _PI * t)
    ga = _cis(0.5 * xa * xa / t)
    gb = _cis(0.5 * xb * xb / t)

    q1a = _sgn(ua_m) * (-big_p - ga * w_ray(abs(ua_m)))
    q2a = _sgn(ua_p) * (-big_m - ga * w_ray(abs(ua_p)))
    q1b = _sgn(ub_m) * (-big_p - gb * w_ray(abs(ub_m)))
    q2b = _sgn(ub_p) * (-big_m - gb * w_ray(abs(ub_p)))

    w = ((q1a - q2a) - (q1b - q2b)) / complex(0.0, 4.0)
    wp = 0.25 * _PI * ((q1a + q2a) - (q1b + q2b))
    return w, wp


@njit(cache=True)
def d_kernel_scalar(x, t):
    s = math.sqrt(t)
    e_minus = erfc_scalar(_C_ERFC * (x / s - _PI * s))
    e_plus = erfc_scalar(_C_ERFC * (x / s + _PI * s))
    pref = _cis(-0.5 * _PI * _PI * t) / complex(0.0, 8.0)
    return pref * (_cis(_PI * x) * e_minus - _cis(-_PI * x) * e_plus)


@njit(cache=True)
def _w_pair_arrays(z, t):
    n = z.shape[0]
    w = np.empty(n, dtype=np.complex128)
    wp = np.empty(n, dtype=np.complex128)
    for i in range(n):
        w[i], wp[i] = w_pair_scalar(z[i], t[i])
    return w, wp


@njit(cache=True)
def _d_kernel_arrays(x, t):
    out = np.empty(x.shape[0], dtype=np.complex128)
    for i in range(x.shape[0]):
        out[i] = d_kernel_scalar(x[i], t[i])
    return out


def _prepare(a, t):
    a, t = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(t, dtype=float))
    if np.any(~(t > 0.0)):
        raise ValueError("time must be strictly positive")
    return a.shape, np.ascontiguousarray(a.ravel()), np.ascontiguousarray(t.ravel())


def _finish(shape, out):
    out = out.reshape(shape)
    return complex(out) if out.ndim == 0 else out


def d_kernel(x, t):
    """Moshinsky-type kernel D(x, t); broadcasts over array input."""
    shape, x, t = _prepare(x, t)
    return _finish(shape, _d_kernel_arrays(x, t))


def w_and_prime(z, t):
    """Return ``(W, W')`` evaluated together (they share all special-function calls)."""
    shape, z, t = _prepare(z, t)
    w, wp = _w_pair_arrays(z, t)
    return _finish(shape, w), _finish(shape, wp)


def w_evolution(z, t):
    """Time evolution integral W(z, t); exactly zero for z <= 0."""
    return w_and_prime(z, t)[0]


def w_prime(z, t):
    """Analytic z-derivative of W."""
    return w_and_prime(z, t)[1]


def log_derivative(z, t):
    """W'/W at a single point.

    Raises NodeProximityError when ``|W| < NODE_FLOOR * max(1, |W'|)``.
    """
    if not t > 0.0:
        raise ValueError("time must be strictly positive")
    w, wp = w_pair_scalar(float(z), float(t))
    if abs(w) < NODE_FLOOR * max(1.0, abs(wp)):
        raise NodeProximityError(z, t, abs(w))
    return wp / w
