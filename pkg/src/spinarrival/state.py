"""Initial state, spin orientation and the unit system.

All computation is dimensionless (hbar = m = d = 1): lengths in units of the
trap length d, times in units of m d^2 / hbar and frequencies in hbar / (m d^2).
Physical units only appear through :class:`UnitSystem`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import constants

__all__ = [
    "SpinOrientation",
    "WaveguideParams",
    "UnitSystem",
    "Position3",
    "born_density",
    "spin_vector",
    "spinor",
]


@dataclass(frozen=True)
class SpinOrientation:
    """Bloch angles of the initial spinor.

    ``alpha`` in [0, pi] is the polar angle (0 is spin-up, pi spin-down) and
    ``beta`` in [0, 2 pi) the azimuth.
    """

    alpha: float
    beta: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.alpha <= math.pi):
            raise ValueError(f"alpha must lie in [0, pi], got {self.alpha}")
        if not (0.0 <= self.beta < 2.0 * math.pi):
            raise ValueError(f"beta must lie in [0, 2pi), got {self.beta}")

    @property
    def trig(self):
        """(sin alpha, cos alpha, sin beta, cos beta)."""
        return (
            math.sin(self.alpha),
            math.cos(self.alpha),
            math.sin(self.beta),
            math.cos(self.beta),
        )


@dataclass(frozen=True)
class WaveguideParams:
    """Detector distance ``L`` (> 1, units of d) and transverse frequency ``omega`` (> 0)."""

    L: float
    omega: float

    def __post_init__(self):
        if not self.L > 1.0:
            raise ValueError(f"detector distance L must exceed 1, got {self.L}")
        if not self.omega > 0.0:
            raise ValueError(f"omega must be positive, got {self.omega}")


@dataclass(frozen=True)
class UnitSystem:
    """Trap length, particle mass and hbar in SI units."""

    d_meters: float
    mass_kg: float = constants.m_e
    hbar_Js: float = constants.hbar

    def __post_init__(self):
        for name in ("d_meters", "mass_kg", "hbar_Js"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")

    @property
    def time_unit(self):
        """Seconds per dimensionless time unit, m d^2 / hbar."""
        return self.mass_kg * self.d_meters**2 / self.hbar_Js

    @property
    def frequency_unit(self):
        """rad/s per dimensionless frequency unit, hbar / (m d^2)."""
        return 1.0 / self.time_unit

    def to_physical_time(self, tau):
        return tau * self.time_unit

    def from_physical_time(self, seconds):
        return seconds / self.time_unit

    def to_physical_frequency(self, omega):
        return omega * self.frequency_unit

    def from_physical_frequency(self, rad_per_s):
        return rad_per_s / self.frequency_unit

    def to_physical_length(self, length):
        return length * self.d_meters

    def from_physical_length(self, meters):
        return meters / self.d_meters


@dataclass(frozen=True)
class Position3:
    x: float
    y: float
    z: float

    def as_array(self):
        return np.array([self.x, self.y, self.z])


def born_density(p, params):
    """|Psi_0|^2 at ``p``; the spinor drops out because it is normalized."""
    if not 0.0 < p.z < 1.0:
        return 0.0
    rho2 = p.x * p.x + p.y * p.y
    return (2.0 * params.omega / math.pi) * math.sin(math.pi * p.z) ** 2 * math.exp(-params.omega * rho2)


def spin_vector(s):
    sa, ca, sb, cb = s.trig
    return 0.5 * np.array([sa * cb, sa * sb, ca])


def spinor(s):
    """Two-component normalized spinor (cos(a/2), sin(a/2) e^{i b})."""
    return np.array(
        [math.cos(0.5 * s.alpha), math.sin(0.5 * s.alpha) * np.exp(1j * s.beta)],
        dtype=np.complex128,
    )
