"""Time-domain motion of an ion in the full oscillating trap field.

All integrators are fixed-step classical Runge-Kutta. The axial mode uses
the exact closed-form on-axis field; the 3D mode uses a bicubic
interpolation of a precomputed (rho, z) gradient map.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .characterize import (
    axial_frequency, mathieu_q, radial_frequency, trap_height, turning_point,
)
from .errors import EscapeError
from .fieldcore import FieldMap, TrapConfig, field_map, kappa_axial_derivative
from .spectrum import demodulate

STEPS_PER_PERIOD = 100
MIN_STEPS_PER_PERIOD = 50
DEFAULT_MAP_SHAPE = (400, 400)


@dataclass
class Trajectory:
    """Sampled particle state; positions and velocities are Cartesian (x, y, z)."""
    t: np.ndarray
    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    @property
    def z(self):
        return self.position[:, 2]

    @property
    def v_z(self):
        return self.velocity[:, 2]

    @property
    def rho(self):
        return np.hypot(self.position[:, 0], self.position[:, 1])

    @property
    def v_rho(self):
        rho = self.rho
        x, y = self.position[:, 0], self.position[:, 1]
        vx, vy = self.velocity[:, 0], self.velocity[:, 1]
        with np.errstate(invalid="ignore", divide="ignore"):
            out = (x * vx + y * vy) / rho
        return np.where(rho > 0, out, np.hypot(vx, vy))

    def columns(self) -> dict[str, np.ndarray]:
        return {"t_s": self.t, "rho_m": self.rho, "z_m": self.z,
                "v_rho_mps": self.v_rho, "v_z_mps": self.v_z}


def rk4(accel, x, v, t0, dt, n_steps, record_every=1, inside=None):
    """Integrate x'' = accel(t, x) with fixed-step classical Runge-Kutta.

    ``x`` and ``v`` may be floats or numpy arrays. ``inside(x)`` is called
    after every step; returning False raises :class:`EscapeError`.
    Returns lists (t, x, v) of the recorded samples.
    """
    h2 = 0.5 * dt
    ts, xs, vs = [t0], [x], [v]
    t = t0
    for i in range(1, n_steps + 1):
        a1 = accel(t, x)
        x2 = x + h2 * v
        v2 = v + h2 * a1
        a2 = accel(t + h2, x2)
        x3 = x + h2 * v2
        v3 = v + h2 * a2
        a3 = accel(t + h2, x3)
        x4 = x + dt * v3
        v4 = v + dt * a3
        a4 = accel(t + dt, x4)
        x = x + dt * (v + 2.0 * v2 + 2.0 * v3 + v4) / 6.0
        v = v + dt * (a1 + 2.0 * a2 + 2.0 * a3 + a4) / 6.0
        t = t0 + i * dt
        if inside is not None and not inside(x):
            exc = EscapeError(f"particle left the allowed region at t={t:.6e} s")
            exc.t = t
            exc.samples = (ts, xs, vs)
            raise exc
        if i % record_every == 0:
            ts.append(t)
            xs.append(x)
            vs.append(v)
    return ts, xs, vs


def _resolve_dt(config, dt):
    period = 2.0 * math.pi / config.drive.omega_rf
    if dt is None:
        return period / STEPS_PER_PERIOD
    if not dt > 0:
        raise ValueError("dt must be > 0")
    if dt > period / MIN_STEPS_PER_PERIOD * (1 + 1e-12):
        raise ValueError(f"dt={dt:.3e} s exceeds rf period / {MIN_STEPS_PER_PERIOD}")
    return dt


def _n_steps(duration, dt):
    if not duration > 0:
        raise ValueError("duration must be > 0")
    return max(int(round(duration / dt)), 1)


def integrate_axial(config: TrapConfig, z_init: float, v_init: float, duration: float,
                    dt: float | None = None, e_dc: float = 0.0, extra_accel=None,
                    record_every: int = 1) -> Trajectory:
    """Motion along the trap axis under the full time-dependent field.

    ``e_dc`` adds a uniform static field along +z (V/m); ``extra_accel(t, z)``
    adds an arbitrary acceleration (m/s^2).
    """
    if not z_init > 0:
        raise ValueError("z_init must be > 0")
    dt = _resolve_dt(config, dt)
    geom, eps = config.geometry, config.epsilon
    a2, b2 = geom.a ** 2, geom.b ** 2
    c1 = (1.0 - eps) * a2
    qm = config.species.charge / config.species.mass
    k_rf = -qm * config.drive.v_rf
    omega = config.drive.omega_rf
    a_dc = qm * e_dc
    z_lim = 10.0 * turning_point(geom, eps)

    def accel(t, z):
        zz = z * z
        grad = c1 * (zz + a2) ** -1.5 - b2 * (zz + b2) ** -1.5
        a = k_rf * math.cos(omega * t) * grad + a_dc
        if extra_accel is not None:
            a += extra_accel(t, z)
        return a

    ts, zs, vs = rk4(accel, float(z_init), float(v_init), 0.0, dt, _n_steps(duration, dt),
                     record_every, inside=lambda z: 0.0 < z < z_lim)
    n = len(ts)
    pos = np.zeros((n, 3))
    vel = np.zeros((n, 3))
    pos[:, 2] = zs
    vel[:, 2] = vs
    return Trajectory(np.asarray(ts), pos, vel)


class GradientField:
    """Bicubic interpolant of the kappa gradient over a (rho, z) field map."""

    def __init__(self, fmap: FieldMap):
        self.map = fmap
        self.rho_max = float(fmap.rho[-1])
        self.z_min, self.z_max = float(fmap.z[0]), float(fmap.z[-1])
        self._gz = RectBivariateSpline(fmap.rho, fmap.z, fmap.grad_z, kx=3, ky=3)
        self._gr = RectBivariateSpline(fmap.rho, fmap.z, fmap.grad_rho, kx=3, ky=3)
        self._psi = RectBivariateSpline(fmap.rho, fmap.z, fmap.psi, kx=3, ky=3)

    def contains(self, rho, z) -> bool:
        return rho <= self.rho_max and self.z_min <= z <= self.z_max

    def gradient(self, rho, z):
        """(dkappa/drho, dkappa/dz)."""
        return float(self._gr.ev(rho, z)), float(self._gz.ev(rho, z))

    def psi(self, rho, z, d_rho: int = 0, d_z: int = 0):
        return self._psi.ev(rho, z, dx=d_rho, dy=d_z)


def gradient_field(config: TrapConfig, shape=DEFAULT_MAP_SHAPE, rho_max=None,
                   z_range=None) -> GradientField:
    """Field map over [0, 2 z0] x [0.2 z0, 3 z0] unless told otherwise."""
    z0 = trap_height(config.geometry, config.epsilon)
    rho_max = 2.0 * z0 if rho_max is None else rho_max
    z_range = (0.2 * z0, 3.0 * z0) if z_range is None else z_range
    return GradientField(field_map(config, (0.0, rho_max), z_range, shape[0], shape[1]))


def integrate_3d(config: TrapConfig, position, velocity, duration: float,
                 dt: float | None = None, field: GradientField | None = None,
                 e_dc=(0.0, 0.0, 0.0), record_every: int = 1) -> Trajectory:
    """Full 3D motion in the interpolated field.

    ``position``/``velocity`` are (x, y, z), or (rho, z) for a start in the
    x-z meridian plane.
    """
    pos = np.asarray(position, dtype=float)
    vel = np.asarray(velocity, dtype=float)
    if pos.size == 2:
        pos = np.array([pos[0], 0.0, pos[1]])
    if vel.size == 2:
        vel = np.array([vel[0], 0.0, vel[1]])
    dt = _resolve_dt(config, dt)
    if field is None:
        field = gradient_field(config)
    rho0 = math.hypot(pos[0], pos[1])
    if not field.contains(rho0, pos[2]):
        raise ValueError("initial position outside the field-map extent")

    qm = config.species.charge / config.species.mass
    k_rf = -qm * config.drive.v_rf
    omega = config.drive.omega_rf
    a_dc = qm * np.asarray(e_dc, dtype=float)
    gr_ev, gz_ev = field._gr.ev, field._gz.ev

    def accel(t, r):
        x, y, z = r
        rho = math.hypot(x, y)
        gr = float(gr_ev(rho, z))
        gz = float(gz_ev(rho, z))
        s = k_rf * math.cos(omega * t)
        if rho > 0.0:
            gx, gy = gr * x / rho, gr * y / rho
        else:
            gx = gy = 0.0
        return np.array([s * gx, s * gy, s * gz]) + a_dc

    def inside(r):
        return field.contains(math.hypot(r[0], r[1]), r[2])

    ts, xs, vs = rk4(accel, pos, vel, 0.0, dt, _n_steps(duration, dt),
                     record_every, inside)
    return Trajectory(np.asarray(ts), np.array(xs), np.array(vs))


def mathieu_reference(q: float, tau_span: float, init=(1.0, 0.0), dtau: float | None = None):
    """Solve x'' + 2 q cos(2 tau) x = 0 from tau = 0.

    Returns arrays (tau, x, dx/dtau). Default step is 1/100 of the drive
    period pi.
    """
    if not math.isfinite(q):
        raise ValueError("q must be finite")
    dtau = math.pi / STEPS_PER_PERIOD if dtau is None else dtau
    n = max(int(round(tau_span / dtau)), 1)
    two_q = 2.0 * q
    ts, xs, vs = rk4(lambda t, x: -two_q * math.cos(2.0 * t) * x,
                     float(init[0]), float(init[1]), 0.0, dtau, n)
    return np.asarray(ts), np.asarray(xs), np.asarray(vs)


def mathieu_growth_rate(q: float, n_periods: int = 200, steps_per_period: int = 100) -> float:
    """Growth rate (per unit tau) of the larger of the two fundamental solutions.

    Compares the peak amplitude of the second half of the run with the first
    half; bounded solutions give a rate near zero.
    """
    span = n_periods * math.pi
    dtau = math.pi / steps_per_period
    half = n_periods * steps_per_period // 2
    peaks = []
    for init in ((1.0, 0.0), (0.0, 1.0)):
        _, x, v = mathieu_reference(q, span, init, dtau)
        amp = np.hypot(x, v)
        peaks.append((amp[:half].max(), amp[half:].max()))
    first = max(p[0] for p in peaks)
    second = max(p[1] for p in peaks)
    if not np.isfinite(second):
        return math.inf
    return math.log(second / first) / (0.5 * span)


def stability_scan(q_min: float, q_max: float, n: int, n_periods: int = 200,
                   threshold: float = 1e-3) -> list[tuple[float, bool]]:
    """Classify q values of the pure Mathieu equation as stable or not."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if n_periods < 200:
        raise ValueError("classification needs at least 200 drive periods")
    return [(float(q), mathieu_growth_rate(q, n_periods) < threshold)
            for q in np.linspace(q_min, q_max, n)]


def stability_edge(q_lo: float, q_hi: float, tol: float = 1e-3, **kwargs) -> float:
    """Bisect the stable/unstable boundary between a stable ``q_lo`` and unstable ``q_hi``."""
    def stable(q):
        return stability_scan(q, q, 2, **kwargs)[0][1]

    if not stable(q_lo) or stable(q_hi):
        raise ValueError("q_lo must be stable and q_hi unstable")
    while q_hi - q_lo > tol:
        mid = 0.5 * (q_lo + q_hi)
        if stable(mid):
            q_lo = mid
        else:
            q_hi = mid
    return 0.5 * (q_lo + q_hi)


@dataclass
class MicromotionResult:
    trajectory: Trajectory
    node: np.ndarray  # (x, y, z) of the rf node, m
    displacement: np.ndarray  # mean position minus node, m
    driven_amplitude: float  # amplitude of motion at the drive frequency, m


def micromotion_with_dc(config: TrapConfig, e_dc, duration: float, dt: float | None = None,
                        field: GradientField | None = None) -> MicromotionResult:
    """Displacement from the node and excess micromotion caused by a uniform dc field.

    A scalar ``e_dc`` (V/m) acts along z and is integrated on the axis; a
    3-vector uses the 3D field map.
    """
    geom, eps = config.geometry, config.epsilon
    z0 = trap_height(geom, eps)
    q = mathieu_q(config)
    qm = config.species.charge / config.species.mass
    dt = _resolve_dt(config, dt)
    period = 2.0 * math.pi / config.drive.omega_rf
    # whole number of rf periods for the lock-in
    n_periods = max(int(round(duration / period)), 1)
    duration = n_periods * period

    e = np.atleast_1d(np.asarray(e_dc, dtype=float))
    if e.size == 1:
        wz = axial_frequency(config)
        shift = qm * e[0] / wz ** 2
        traj = integrate_axial(config, z0 + shift * (1.0 - 0.5 * q), 0.0, duration, dt,
                               e_dc=float(e[0]))
    elif e.size == 3:
        wz = axial_frequency(config)
        wr = radial_frequency(config)
        shift = qm * e / np.array([wr ** 2, wr ** 2, wz ** 2])
        start = np.array([0.0, 0.0, z0]) + shift * (1.0 - 0.5 * np.array([-0.5 * q, -0.5 * q, q]))
        traj = integrate_3d(config, start, np.zeros(3), duration, dt, field, e_dc=e)
    else:
        raise ValueError("e_dc must be a scalar (along z) or a 3-vector")
    node = np.array([0.0, 0.0, z0])
    disp = traj.position.mean(axis=0) - node
    omega = config.drive.omega_rf
    amp = math.sqrt(sum(demodulate(traj.t, traj.position[:, i], omega) ** 2 for i in range(3)))
    return MicromotionResult(traj, node, disp, amp)
