"""Bohmian velocity field in the waveguide and first-arrival integration.

In Cartesian coordinates the guidance law for the released ground state is

    vx = -sin(a) sin(b) A - omega cos(a) y
    vy =  sin(a) cos(b) A + omega cos(a) x
    vz =  B + omega sin(a) (y cos(b) - x sin(b))

with ``A + iB = W'/W`` evaluated at (z, t). The transverse part contains a
rigid rotation at rate ``Omega = omega cos(a)``. For large omega that rotation
would dominate the step-size control while being irrelevant to the arrival
time, so trajectories are integrated in the frame co-rotating with it:
``(x, y) = Rot(Omega t) q``. The trajectory is the same; the solver only
tracks the slow part. For a = 0 or pi the co-rotating coordinates are
constant and only z moves.

The integrator is the Dormand-Prince 5(4) pair with a PI step controller and
the standard quartic dense output, compiled with numba.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .propagator import NODE_FLOOR, NodeProximityError, w_pair_scalar
from .state import Position3

__all__ = [
    "SolverConfig",
    "ArrivalRecord",
    "TrajectoryError",
    "StepBudgetExceeded",
    "NodeRetriesExceeded",
    "velocity",
    "integrate_trajectory",
    "integrate_batch",
    "STATUS_ARRIVED",
    "STATUS_CENSORED",
    "STATUS_STEP_BUDGET",
    "STATUS_NODE",
]

STATUS_ARRIVED = 0
STATUS_CENSORED = 1
STATUS_STEP_BUDGET = 2
STATUS_NODE = 3

T_START = 1e-8
MAX_NODE_RETRIES = 40


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and limits for one trajectory.

    ``t_max`` of None means the default horizon ``50 * L``.

    For ``t < ramp_time`` both tolerances are multiplied by
    ``max(t / ramp_time, ramp_floor / rel_tol)``. The released state has a kink
    at the trap edge whose diffraction makes the early velocity field
    oscillate with phase ``(z -+ 1)^2 / 2t``; at the default tolerances those
    oscillations are stepped over and arrival times carry errors of order
    1e-5 relative. ``ramp_time = 1`` resolves them (errors ~1e-7) at roughly
    20 times the cost, which per-trajectory comparisons need and ensemble
    statistics do not.
    """

    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    t_max: float | None = None
    crossing_tol: float = 1e-9
    max_steps: int = 1_000_000
    track_crossings: bool = False
    ramp_time: float = 0.0
    ramp_floor: float = 1e-12

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "crossing_tol"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if self.t_max is not None and not self.t_max > 0.0:
            raise ValueError("t_max must be positive")
        if not self.ramp_time >= 0.0:
            raise ValueError("ramp_time must be non-negative")
        if not self.ramp_floor > 0.0:
            raise ValueError("ramp_floor must be positive")
        if int(self.max_steps) < 1:
            raise ValueError("max_steps must be positive")

    def horizon(self, L):
        t_max = 50.0 * L if self.t_max is None else self.t_max
        if not t_max > L / (2.0 * math.pi):
            raise ValueError(f"t_max={t_max} does not cover the lobe region tau < L/(2 pi)")
        return t_max


@dataclass(frozen=True)
class ArrivalRecord:
    """Outcome of one trajectory.

    ``tau`` is None when the trajectory was censored at the horizon.
    """

    initial: Position3
    tau: float | None
    crossing_count_hint: int = 0
    steps: int = 0
    final: tuple = field(default=(), compare=False)

    @property
    def censored(self):
        return self.tau is None


class TrajectoryError(RuntimeError):
    pass


class StepBudgetExceeded(TrajectoryError):
    pass


class NodeRetriesExceeded(TrajectoryError):
    pass


# -- velocity field ---------------------------------------------------------


@njit(cache=True)
def _lab_velocity(x, y, z, t, sa, ca, sb, cb, omega):
    w, wp = w_pair_scalar(z, t)
    if not abs(w) >= NODE_FLOOR * max(1.0, abs(wp)):
        return False, 0.0, 0.0, 0.0
    r = wp / w
    a = r.real
    vx = -sa * sb * a - omega * ca * y
    vy = sa * cb * a + omega * ca * x
    vz = r.imag + omega * sa * (y * cb - x * sb)
    return True, vx, vy, vz


def velocity(p, t, spin, params):
    """Bohmian velocity at lab-frame position ``p`` and time ``t > 0``."""
    if not t > 0.0:
        raise ValueError("time must be strictly positive")
    if not p.z > 0.0:
        raise ValueError("velocity is defined inside the waveguide only (z > 0)")
    sa, ca, sb, cb = spin.trig
    ok, vx, vy, vz = _lab_velocity(p.x, p.y, p.z, t, sa, ca, sb, cb, params.omega)
    if not ok:
        w, _ = w_pair_scalar(p.z, t)
        raise NodeProximityError(p.z, t, abs(w))
    return np.array([vx, vy, vz])


# -- integrator -------------------------------------------------------------

# Dormand-Prince 5(4)
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_A71, _A73, _A74, _A75, _A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40
# dense output (Hairer & Wanner, DOPRI5 contd5)
_D1 = -12715105075 / 11282082432
_D3 = 87487479700 / 32700410799
_D4 = -10690763975 / 1880347072
_D5 = 701980252875 / 199316789632
_D6 = -1453857185 / 822651844
_D7 = 69997945 / 29380423

_SAFE = 0.9
_FAC_MIN = 0.2  # largest shrink per rejected step is 1/5
_FAC_MAX = 10.0
_BETA = 0.04
_EXPO1 = 0.2 - _BETA * 0.75

_N_SAMPLES = 4  # dense samples per step for sign-change detection


@njit(cache=True)
def _rhs(t, y, out, sa, ca, sb, cb, omega, big_omega):
    """Co-rotating frame right-hand side; returns False near a node."""
    w, wp = w_pair_scalar(y[2], t)
    if not abs(w) >= NODE_FLOOR * max(1.0, abs(wp)):
        return False
    r = wp / w
    # Rot(-Omega t) applied to the fixed direction n = (-sin b, cos b)
    c = math.cos(big_omega * t)
    s = math.sin(big_omega * t)
    e1 = -c * sb + s * cb
    e2 = s * sb + c * cb
    out[0] = sa * r.real * e1
    out[1] = sa * r.real * e2
    out[2] = r.imag + omega * sa * (y[0] * e1 + y[1] * e2)
    return True


@njit(cache=True)
def _dense(rc, theta, i):
    th1 = 1.0 - theta
    return rc[0, i] + theta * (rc[1, i] + th1 * (rc[2, i] + theta * (rc[3, i] + th1 * rc[4, i])))


@njit(cache=True)
def _integrate_one(
    x0, y0, z0, sa, ca, sb, cb, omega, L,
    t_start, t_max, rtol, atol, crossing_tol, max_steps, track, path,
    t_ramp=0.0, tol_floor=0.0,
):
    """Integrate one trajectory.

    Returns (status, tau, crossings, steps, n_path, final) where ``final``
    holds (t, x, y, z, vz) at the stopping point in the lab frame.
    """
    big_omega = omega * ca
    final = np.zeros(5)

    y = np.empty(3)
    # lab -> co-rotating coordinates at t_start
    c0 = math.cos(big_omega * t_start)
    s0 = math.sin(big_omega * t_start)
    y[0] = c0 * x0 + s0 * y0
    y[1] = -s0 * x0 + c0 * y0
    y[2] = z0
    t = t_start

    k1 = np.empty(3)
    k2 = np.empty(3)
    k3 = np.empty(3)
    k4 = np.empty(3)
    k5 = np.empty(3)
    k6 = np.empty(3)
    k7 = np.empty(3)
    yt = np.empty(3)
    y1 = np.empty(3)
    rc = np.empty((5, 3))

    n_path = 0
    cap = path.shape[0]
    if cap > 0:
        path[0, 0] = t
        path[0, 1] = x0
        path[0, 2] = y0
        path[0, 3] = z0
        n_path = 1

    if not _rhs(t, y, k1, sa, ca, sb, cb, omega, big_omega):
        return STATUS_NODE, 0.0, 0, 0, n_path, final

    h = t_start
    facold = 1e-4
    steps = 0
    node_retries = 0
    rejected_last = False
    crossings = 0
    tau = -1.0
    sign_prev = y[2] - L >= 0.0

    while True:
        if t >= t_max:
            break
        if steps >= max_steps:
            return STATUS_STEP_BUDGET, 0.0, crossings, steps, n_path, final
        if t + h > t_max:
            h = t_max - t
        steps += 1

        ok = True
        for i in range(3):
            yt[i] = y[i] + h * _A21 * k1[i]
        ok = _rhs(t + _C2 * h, yt, k2, sa, ca, sb, cb, omega, big_omega)
        if ok:
            for i in range(3):
                yt[i] = y[i] + h * (_A31 * k1[i] + _A32 * k2[i])
            ok = _rhs(t + _C3 * h, yt, k3, sa, ca, sb, cb, omega, big_omega)
        if ok:
            for i in range(3):
                yt[i] = y[i] + h * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i])
            ok = _rhs(t + _C4 * h, yt, k4, sa, ca, sb, cb, omega, big_omega)
        if ok:
            for i in range(3):
                yt[i] = y[i] + h * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i] + _A54 * k4[i])
            ok = _rhs(t + _C5 * h, yt, k5, sa, ca, sb, cb, omega, big_omega)
        if ok:
            for i in range(3):
                yt[i] = y[i] + h * (
                    _A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i] + _A64 * k4[i] + _A65 * k5[i]
                )
            ok = _rhs(t + h, yt, k6, sa, ca, sb, cb, omega, big_omega)
        if ok:
            for i in range(3):
                y1[i] = y[i] + h * (
                    _A71 * k1[i] + _A73 * k3[i] + _A74 * k4[i] + _A75 * k5[i] + _A76 * k6[i]
                )
            ok = _rhs(t + h, y1, k7, sa, ca, sb, cb, omega, big_omega)
        if not ok:
            node_retries += 1
            if node_retries > MAX_NODE_RETRIES:
                return STATUS_NODE, 0.0, crossings, steps, n_path, final
            h *= 0.5
            rejected_last = True
            continue

        rt = rtol
        at = atol
        if t < t_ramp:
            scale = max(t / t_ramp, tol_floor / rtol)
            if scale < 1.0:
                rt = rtol * scale
                at = atol * scale
        err = 0.0
        for i in range(3):
            e = h * (_E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i] + _E5 * k5[i] + _E6 * k6[i] + _E7 * k7[i])
            sk = at + rt * max(abs(y[i]), abs(y1[i]))
            err += (e / sk) ** 2
        err = math.sqrt(err / 3.0)
        if not err == err:  # NaN
            h *= 0.5
            rejected_last = True
            continue

        fac11 = err**_EXPO1
        if err <= 1.0:
            fac = fac11 / facold**_BETA
            fac = max(1.0 / _FAC_MAX, min(1.0 / _FAC_MIN, fac / _SAFE))
            h_new = h / fac
            if rejected_last:
                h_new = min(h_new, h)
            facold = max(err, 1e-4)
            node_retries = 0
            rejected_last = False

            for i in range(3):
                ydiff = y1[i] - y[i]
                bspl = h * k1[i] - ydiff
                rc[0, i] = y[i]
                rc[1, i] = ydiff
                rc[2, i] = bspl
                rc[3, i] = ydiff - h * k7[i] - bspl
                rc[4, i] = h * (
                    _D1 * k1[i] + _D3 * k3[i] + _D4 * k4[i] + _D5 * k5[i] + _D6 * k6[i] + _D7 * k7[i]
                )

            # scan dense samples of z - L for sign changes
            theta_prev = 0.0
            for j in range(1, _N_SAMPLES + 1):
                theta = j / _N_SAMPLES
                zj = y1[2] if j == _N_SAMPLES else _dense(rc, theta, 2)
                sign = zj - L >= 0.0
                if sign != sign_prev:
                    crossings += 1
                    if tau < 0.0 and sign:
                        lo = theta_prev
                        hi = theta
                        z_lo = _dense(rc, lo, 2)
                        z_hi = zj
                        while (hi - lo) * h > crossing_tol:
                            mid = 0.5 * (lo + hi)
                            z_mid = _dense(rc, mid, 2)
                            if z_mid - L >= 0.0:
                                hi = mid
                                z_hi = z_mid
                            else:
                                lo = mid
                                z_lo = z_mid
                        if z_hi != z_lo:
                            theta_c = lo + (hi - lo) * (L - z_lo) / (z_hi - z_lo)
                        else:
                            theta_c = hi
                        tau = t + theta_c * h
                        q1 = _dense(rc, theta_c, 0)
                        q2 = _dense(rc, theta_c, 1)
                        ang = big_omega * tau
                        ca_t = math.cos(ang)
                        sa_t = math.sin(ang)
                        final[0] = tau
                        final[1] = ca_t * q1 - sa_t * q2
                        final[2] = sa_t * q1 + ca_t * q2
                        final[3] = _dense(rc, theta_c, 2)
                        ok_v, vx, vy, vz = _lab_velocity(
                            final[1], final[2], final[3], tau, sa, ca, sb, cb, omega
                        )
                        final[4] = vz
                sign_prev = sign
                theta_prev = theta

            t = t + h
            for i in range(3):
                y[i] = y1[i]
                k1[i] = k7[i]

            if n_path < cap:
                ang = big_omega * t
                path[n_path, 0] = t
                path[n_path, 1] = math.cos(ang) * y[0] - math.sin(ang) * y[1]
                path[n_path, 2] = math.sin(ang) * y[0] + math.cos(ang) * y[1]
                path[n_path, 3] = y[2]
                n_path += 1

            if tau >= 0.0 and not track:
                return STATUS_ARRIVED, tau, crossings, steps, n_path, final
            h = h_new
        else:
            h = h / min(1.0 / _FAC_MIN, fac11 / _SAFE)
            rejected_last = True

    if tau >= 0.0:
        return STATUS_ARRIVED, tau, crossings, steps, n_path, final
    ang = big_omega * t
    final[0] = t
    final[1] = math.cos(ang) * y[0] - math.sin(ang) * y[1]
    final[2] = math.sin(ang) * y[0] + math.cos(ang) * y[1]
    final[3] = y[2]
    return STATUS_CENSORED, 0.0, crossings, steps, n_path, final


@njit(cache=True)
def _integrate_many(p0, sa, ca, sb, cb, omega, L, t_start, t_max, rtol, atol, crossing_tol,
                    max_steps, track, t_ramp, tol_floor, status, tau, crossings, steps):
    empty = np.empty((0, 4))
    for k in range(p0.shape[0]):
        st, tk, ck, nk, _, _ = _integrate_one(
            p0[k, 0], p0[k, 1], p0[k, 2], sa, ca, sb, cb, omega, L,
            t_start, t_max, rtol, atol, crossing_tol, max_steps, track, empty,
            t_ramp, tol_floor,
        )
        status[k] = st
        tau[k] = tk
        crossings[k] = ck
        steps[k] = nk


def _check_initial(z):
    if not 0.0 < z < 1.0:
        raise ValueError(f"initial z={z} outside the trap interior (0, 1)")


def integrate_trajectory(initial, spin, params, cfg=SolverConfig(), path_capacity=0):
    """Integrate one Bohmian trajectory until its first arrival at z = L.

    Returns an :class:`ArrivalRecord`; with ``path_capacity > 0`` the
    accepted-step grid ``(t, x, y, z)`` is returned alongside it.
    Raises :class:`StepBudgetExceeded` or :class:`NodeRetriesExceeded`.
    """
    _check_initial(initial.z)
    sa, ca, sb, cb = spin.trig
    path = np.zeros((int(path_capacity), 4))
    status, tau, crossings, steps, n_path, final = _integrate_one(
        float(initial.x), float(initial.y), float(initial.z),
        sa, ca, sb, cb, float(params.omega), float(params.L),
        T_START, float(cfg.horizon(params.L)), float(cfg.rel_tol), float(cfg.abs_tol),
        float(cfg.crossing_tol), int(cfg.max_steps), bool(cfg.track_crossings), path,
        float(cfg.ramp_time), float(cfg.ramp_floor),
    )
    if status == STATUS_STEP_BUDGET:
        raise StepBudgetExceeded(f"step budget of {cfg.max_steps} exhausted from {initial}")
    if status == STATUS_NODE:
        raise NodeRetriesExceeded(f"trajectory from {initial} stuck at a wave-function node")
    record = ArrivalRecord(
        initial=initial,
        tau=float(tau) if status == STATUS_ARRIVED else None,
        crossing_count_hint=int(crossings),
        steps=int(steps),
        final=tuple(float(v) for v in final),
    )
    if path_capacity:
        return record, path[:n_path].copy()
    return record


def integrate_batch(p0, spin, params, cfg=SolverConfig()):
    """Integrate many trajectories; ``p0`` has shape (n, 3).

    Returns ``(status, tau, crossings, steps)`` arrays. ``tau`` is NaN unless
    ``status == STATUS_ARRIVED``. Failures are reported through ``status``,
    not raised.
    """
    p0 = np.ascontiguousarray(p0, dtype=float)
    if p0.ndim != 2 or p0.shape[1] != 3:
        raise ValueError("p0 must have shape (n, 3)")
    if np.any((p0[:, 2] <= 0.0) | (p0[:, 2] >= 1.0)):
        raise ValueError("initial z outside the trap interior (0, 1)")
    n = p0.shape[0]
    status = np.empty(n, dtype=np.int64)
    tau = np.empty(n)
    crossings = np.empty(n, dtype=np.int64)
    steps = np.empty(n, dtype=np.int64)
    sa, ca, sb, cb = spin.trig
    _integrate_many(
        p0, sa, ca, sb, cb, float(params.omega), float(params.L), T_START,
        float(cfg.horizon(params.L)), float(cfg.rel_tol), float(cfg.abs_tol),
        float(cfg.crossing_tol), int(cfg.max_steps), bool(cfg.track_crossings),
        float(cfg.ramp_time), float(cfg.ramp_floor), status, tau, crossings, steps,
    )
    tau[status != STATUS_ARRIVED] = np.nan
    return status, tau, crossings, steps
