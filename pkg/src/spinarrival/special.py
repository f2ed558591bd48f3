"""Complex error functions.

The Faddeeva function ``w(z) = exp(-z**2) * erfc(-i z)`` is evaluated with
the region-switched scheme of Poppe & Wijers (ACM TOMS 680): a power series
close to the origin, Gautschi's truncated Taylor/continued-fraction sum in
the intermediate zone and the Laplace continued fraction far out. The lower
half-plane is reached through ``w(-z) = 2 exp(-z**2) - w(z)``.

Everything here is compiled with numba so that the propagator and the
trajectory integrator can call it from nopython code.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, vectorize

_TWO_OVER_SQRT_PI = 1.12837916709551257388


@njit(cache=True)
def _w_first_quadrant(xabs, yabs):
    """w(x + iy) for x, y >= 0, returned as (re, im)."""
    x = xabs / 6.3
    y = yabs / 4.4
    qrho = x * x + y * y

    if qrho < 0.085264:
        # power series of exp(-z^2) * erfc(-iz) about the origin
        qrho = (1.0 - 0.85 * y) * math.sqrt(qrho)
        n = int(round(6.0 + 72.0 * qrho))
        j = 2 * n + 1
        xsum = 1.0 / j
        ysum = 0.0
        x2 = xabs * xabs
        y2 = yabs * yabs
        xquad = x2 - y2
        yquad = 2.0 * xabs * yabs
        for i in range(n, 0, -1):
            j -= 2
            xaux = (xsum * xquad - ysum * yquad) / i
            ysum = (xsum * yquad + ysum * xquad) / i
            xsum = xaux + 1.0 / j
        u1 = -_TWO_OVER_SQRT_PI * (xsum * yabs + ysum * xabs) + 1.0
        v1 = _TWO_OVER_SQRT_PI * (xsum * xabs - ysum * yabs)
        daux = math.exp(-xquad)
        u2 = daux * math.cos(yquad)
        v2 = -daux * math.sin(yquad)
        return u1 * u2 - v1 * v2, u1 * v2 + v1 * u2

    if qrho > 1.0:
        h = 0.0
        kapn = 0
        qrho = math.sqrt(qrho)
        nu = int(3.0 + 1442.0 / (26.0 + 77.0 * qrho))
    else:
        qrho = (1.0 - y) * math.sqrt(1.0 - qrho)
        h = 1.88 * qrho
        kapn = int(round(7.0 + 34.0 * qrho))
        nu = int(round(16.0 + 26.0 * qrho))

    h2 = 2.0 * h
    qlambda = h2 ** kapn if h > 0.0 else 0.0
    rx = 0.0
    ry = 0.0
    sx = 0.0
    sy = 0.0
    for n in range(nu, -1, -1):
        np1 = n + 1
        tx = yabs + h + np1 * rx
        ty = xabs - np1 * ry
        c = 0.5 / (tx * tx + ty * ty)
        rx = c * tx
        ry = c * ty
        if h > 0.0 and n <= kapn:
            tx = qlambda + sx
            sx = rx * tx - ry * sy
            sy = ry * tx + rx * sy
            qlambda = qlambda / h2

    if h == 0.0:
        u = _TWO_OVER_SQRT_PI * rx
        v = _TWO_OVER_SQRT_PI * ry
    else:
        u = _TWO_OVER_SQRT_PI * sx
        v = _TWO_OVER_SQRT_PI * sy
    if yabs == 0.0:
        u = math.exp(-xabs * xabs)
    return u, v


@njit(cache=True)
def _cexp_neg_square(x, y):
    # exp(-(x+iy)^2), phase reduced on its own so large arguments stay accurate
    mag = math.exp(y * y - x * x)
    ph = -2.0 * x * y
    return complex(mag * math.cos(ph), mag * math.sin(ph))


@njit(cache=True)
def wofz_scalar(z):
    """Faddeeva function w(z) for a single complex argument."""
    x = z.real
    y = z.imag
    if y >= 0.0:
        u, v = _w_first_quadrant(abs(x), y)
        if x < 0.0:
            v = -v
        return complex(u, v)
    # w(z) = 2 exp(-z^2) - w(-z), with -z in the upper half-plane
    u, v = _w_first_quadrant(abs(x), -y)
    if x > 0.0:
        v = -v
    return 2.0 * _cexp_neg_square(x, y) - complex(u, v)


@njit(cache=True)
def erfc_scalar(z):
    """Complementary error function of a complex argument."""
    x = z.real
    y = z.imag
    if x < 0.0:
        return 2.0 - erfc_scalar(-z)
    # iz lies in the closed upper half-plane; combine exponent and log|w|
    # so that neither factor over/underflows on its own
    w = wofz_scalar(complex(-y, x))
    if w == 0.0:
        return complex(0.0, 0.0)
    log_mag = y * y - x * x + math.log(abs(w))
    ph = -2.0 * x * y + math.atan2(w.imag, w.real)
    if log_mag < -745.0:
        return complex(0.0, 0.0)
    mag = math.exp(log_mag)
    return complex(mag * math.cos(ph), mag * math.sin(ph))


@vectorize(["complex128(complex128)"], cache=True)
def _wofz_ufunc(z):
    return wofz_scalar(z)


@vectorize(["complex128(complex128)"], cache=True)
def _erfc_ufunc(z):
    return erfc_scalar(z)


def faddeeva_w(z):
    """Scaled complementary error function ``w(z) = exp(-z^2) erfc(-iz)``.

    Accepts scalars or arrays; returns a Python complex for scalar input.
    """
    out = _wofz_ufunc(np.asarray(z, dtype=np.complex128))
    return complex(out) if np.ndim(out) == 0 else out


def erfc_complex(z):
    """``erfc(z)`` for complex ``z``, underflowing to 0 rather than raising."""
    out = _erfc_ufunc(np.asarray(z, dtype=np.complex128))
    return complex(out) if np.ndim(out) == 0 else out
