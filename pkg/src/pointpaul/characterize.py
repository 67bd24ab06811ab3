"""Closed-form trap metrics: node height, turning point, q, frequencies, depth."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, asdict

import numpy as np
from scipy import optimize as _opt

from .errors import NoTrapError, NumericalFailure
from .fieldcore import (
    RingGeometry, TrapConfig, integrate_stack, kappa_axial_derivative,
    DEFAULT_RTOL,
)

Q_VALIDITY_LIMIT = 0.3
RADIAL_FIT_WINDOW = 0.05
RADIAL_FIT_POINTS = 11


def epsilon_critical(geom: RingGeometry) -> float:
    """Largest in-phase drive ratio for which an on-axis node exists."""
    return 1.0 - geom.a / geom.b


def _check_epsilon(geom, epsilon):
    if epsilon >= epsilon_critical(geom):
        raise NoTrapError(
            f"epsilon={epsilon} >= 1 - a/b = {epsilon_critical(geom):.6g}: "
            "no rf node on the axis")
    if epsilon <= 1.0 - (geom.b / geom.a) ** 2:
        raise NoTrapError(f"epsilon={epsilon} too negative for a={geom.a}, b={geom.b}")


def _height_general(geom, epsilon):
    a, b = geom.a, geom.b
    s = (1.0 - epsilon) ** (2.0 / 3.0)
    num = b * b * a ** (4.0 / 3.0) * s - a * a * b ** (4.0 / 3.0)
    den = b ** (4.0 / 3.0) - a ** (4.0 / 3.0) * s
    return math.sqrt(num / den)


def _turning_general(geom, epsilon):
    a, b = geom.a, geom.b
    s = (1.0 - epsilon) ** 0.4
    num = b * b * a ** 0.8 * s - a * a * b ** 0.8
    den = b ** 0.8 - a ** 0.8 * s
    if num <= 0 or den <= 0:
        raise NoTrapError(f"no on-axis turning point at epsilon={epsilon}")
    return math.sqrt(num / den)


def trap_height(geom: RingGeometry, epsilon: float = 0.0) -> float:
    """Height of the rf node above the electrode plane, m."""
    _check_epsilon(geom, epsilon)
    if epsilon == 0.0:
        a23, b23 = geom.a ** (2.0 / 3.0), geom.b ** (2.0 / 3.0)
        z0 = math.sqrt(a23 * a23 * b23 * b23 / (a23 + b23))
    else:
        z0 = _height_general(geom, epsilon)
    # the node must be a field zero of the closed-form on-axis field
    resid = kappa_axial_derivative(geom, epsilon, z0) * z0
    if abs(resid) > 1e-8:
        raise NumericalFailure(f"node height {z0} is not a field zero (residual {resid})")
    return z0


def turning_point(geom: RingGeometry, epsilon: float = 0.0) -> float:
    """Height of the on-axis pseudopotential maximum above the node, m."""
    _check_epsilon(geom, epsilon)
    if epsilon == 0.0:
        a, b = geom.a, geom.b
        return math.sqrt((b ** 1.2 - a ** 1.2) / (a ** -0.8 - b ** -0.8))
    return _turning_general(geom, epsilon)


def geometric_factor(geom: RingGeometry) -> float:
    """Axial field curvature at the node for single-rf drive, 1/m^2.

    Equal to -d^2 kappa/dz^2 on the axis at the node height.
    """
    a23, b23 = geom.a ** (2.0 / 3.0), geom.b ** (2.0 / 3.0)
    a43, b43 = a23 * a23, b23 * b23
    num = 9.0 * (b23 - a23) ** 2 * (b23 + a23) ** 6
    den = b43 * a43 * (b43 + b23 * a23 + a43) ** 5
    return math.sqrt(num / den)


def axial_curvature(geom: RingGeometry, epsilon: float = 0.0) -> float:
    """Geometric factor generalised to dual-rf drive, 1/m^2."""
    if epsilon == 0.0:
        _check_epsilon(geom, epsilon)
        return geometric_factor(geom)
    z0 = trap_height(geom, epsilon)
    a2, b2 = geom.a ** 2, geom.b ** 2
    return (3.0 * a2 * z0 * (1.0 - epsilon) / (a2 + z0 * z0) ** 2.5
            - 3.0 * b2 * z0 / (b2 + z0 * z0) ** 2.5)


def mathieu_q(config: TrapConfig) -> float:
    return config.q_prefactor * axial_curvature(config.geometry, config.epsilon)


def axial_frequency(config: TrapConfig) -> float:
    q = mathieu_q(config)
    if q > Q_VALIDITY_LIMIT:
        warnings.warn(f"q={q:.3f} exceeds {Q_VALIDITY_LIMIT}; the secular "
                      "approximation is unreliable", RuntimeWarning, stacklevel=2)
    return abs(q) * config.drive.omega_rf / (2.0 * math.sqrt(2.0))


def _quadratic_curvature(x, y):
    """Least-squares quadratic fit; returns the x^2 coefficient."""
    if np.any(np.diff(y, 2) <= 0):
        raise NumericalFailure("pseudopotential samples are not convex; cannot fit")
    c2, _, _ = np.polyfit(x, y, 2)
    if not c2 > 0:
        raise NumericalFailure("quadratic fit gave non-positive curvature")
    return c2


def radial_frequency(config: TrapConfig, window: float = RADIAL_FIT_WINDOW,
                     n_points: int = RADIAL_FIT_POINTS, rtol: float = DEFAULT_RTOL) -> float:
    """Radial secular frequency from a quadratic fit of Psi(rho) at the node."""
    if config.drive.v_rf == 0.0:
        return 0.0
    z0 = trap_height(config.geometry, config.epsilon)
    rho = np.linspace(-window, window, n_points) * z0
    res = integrate_stack(config.stack, z0, np.abs(rho), rtol)
    psi = config.psi_prefactor * (res.d_dz ** 2 + res.d_drho ** 2)
    c2 = _quadratic_curvature(rho, psi)
    return math.sqrt(2.0 * c2 / config.species.mass)


def fitted_axial_frequency(config: TrapConfig, window: float = RADIAL_FIT_WINDOW,
                           n_points: int = RADIAL_FIT_POINTS,
                           rtol: float = DEFAULT_RTOL) -> float:
    """Axial secular frequency from a quadratic fit of the quadrature Psi(z)."""
    z0 = trap_height(config.geometry, config.epsilon)
    dz = np.linspace(-window, window, n_points) * z0
    psi = np.empty_like(dz)
    for i, d in enumerate(dz):
        res = integrate_stack(config.stack, z0 + d, [0.0], rtol)
        psi[i] = config.psi_prefactor * (res.d_dz[0] ** 2 + res.d_drho[0] ** 2)
    c2 = _quadratic_curvature(dz, psi)
    return math.sqrt(2.0 * c2 / config.species.mass)


def secular_frequencies(config: TrapConfig) -> tuple[float, float]:
    """(omega_z, omega_rho) in rad/s."""
    return axial_frequency(config), radial_frequency(config)


def fitted_frequency_ratio(config: TrapConfig) -> float:
    """omega_rho / omega_z with both taken from fits to the quadrature Psi."""
    return radial_frequency(config) / fitted_axial_frequency(config)


def trap_depth(config: TrapConfig) -> float:
    """Barrier above the node, Psi(z_max) - Psi(z0), in J."""
    geom, eps = config.geometry, config.epsilon
    zmax = turning_point(geom, eps)
    if eps == 0.0:
        a2, b2 = geom.a ** 2, geom.b ** 2
        g = a2 * (a2 + zmax ** 2) ** -1.5 - b2 * (b2 + zmax ** 2) ** -1.5
        return config.psi_prefactor * g * g
    z0 = trap_height(geom, eps)
    g1 = kappa_axial_derivative(geom, eps, zmax)
    g0 = kappa_axial_derivative(geom, eps, z0)
    return config.psi_prefactor * (g1 * g1 - g0 * g0)


def lower_barrier(config: TrapConfig, n_samples: int = 200) -> float:
    """Barrier between the node and the electrode plane along the axis, in J.

    The largest on-axis Psi between the surface and the node (including the
    surface limit z -> 0+) minus Psi at the node.
    """
    geom, eps = config.geometry, config.epsilon
    z0 = trap_height(geom, eps)

    def psi(z):
        d = kappa_axial_derivative(geom, eps, z)
        return d * d

    zs = np.linspace(0.0, z0, n_samples)
    vals = psi(zs)
    best = vals[0]
    for i in range(1, n_samples - 1):
        if vals[i] > vals[i - 1] and vals[i] >= vals[i + 1]:
            r = _opt.minimize_scalar(lambda z: -psi(z), bounds=(zs[i - 1], zs[i + 1]),
                                     method="bounded", options={"xatol": 1e-12 * z0})
            best = max(best, -r.fun)
    return config.psi_prefactor * (best - psi(z0))


def effective_depth(config: TrapConfig) -> float:
    """Smaller of the barriers above and below the node, in J."""
    return min(trap_depth(config), lower_barrier(config))


def four_rod_references(config: TrapConfig) -> tuple[float, float]:
    """(q_4rod, D_4rod) of a four-rod trap with ion-electrode distance z0."""
    z0 = trap_height(config.geometry, config.epsilon)
    return config.q_prefactor / z0 ** 2, config.psi_prefactor / z0 ** 2


@dataclass
class TrapCharacteristics:
    z0: float
    z_max: float
    f_geometric: float
    q: float
    omega_z: float
    omega_rho: float
    depth: float
    q_4rod: float
    d_4rod: float
    epsilon_used: float

    @property
    def q_ratio(self) -> float:
        return self.q / self.q_4rod if self.q_4rod else math.nan

    @property
    def depth_ratio(self) -> float:
        return self.depth / self.d_4rod if self.d_4rod else math.nan

    @property
    def frequency_ratio(self) -> float:
        return self.omega_rho / self.omega_z if self.omega_z else math.nan

    def as_dict(self) -> dict:
        return asdict(self)


def characterize(config: TrapConfig) -> TrapCharacteristics:
    geom, eps = config.geometry, config.epsilon
    q4, d4 = four_rod_references(config)
    wz, wr = secular_frequencies(config)
    return TrapCharacteristics(
        z0=trap_height(geom, eps),
        z_max=turning_point(geom, eps),
        f_geometric=axial_curvature(geom, eps),
        q=mathieu_q(config),
        omega_z=wz,
        omega_rho=wr,
        depth=effective_depth(config),
        q_4rod=q4,
        d_4rod=d4,
        epsilon_used=eps,
    )


@dataclass
class SweepRow:
    epsilon: float
    z0_prime: float
    z_max_prime: float
    q_prime: float
    depth_prime: float
    depth_upper: float
    depth_lower: float
    valid: bool


@dataclass
class EpsilonSweep:
    rows: list[SweepRow]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    @property
    def epsilon(self) -> np.ndarray:
        return self.column("epsilon")

    def cusp_epsilon(self) -> float:
        """epsilon of the largest effective depth among valid rows."""
        valid = [r for r in self.rows if r.valid]
        if not valid:
            raise NumericalFailure("no valid rows in sweep")
        return max(valid, key=lambda r: r.depth_prime).epsilon


def epsilon_sweep(config: TrapConfig, eps_min: float, eps_max: float, n: int) -> EpsilonSweep:
    """Height, q and depth over ``n`` evenly spaced drive ratios.

    Points where no node exists are kept with ``valid=False`` and NaN values.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if not eps_max > eps_min:
        raise ValueError("eps_max must exceed eps_min")
    rows = []
    for eps in np.linspace(eps_min, eps_max, n):
        eps = float(eps)
        try:
            cfg = config.with_drive(epsilon=eps)
            up = trap_depth(cfg)
            lo = lower_barrier(cfg)
            rows.append(SweepRow(eps, trap_height(cfg.geometry, eps),
                                 turning_point(cfg.geometry, eps), mathieu_q(cfg),
                                 min(up, lo), up, lo, True))
        except (NoTrapError, ValueError):
            nan = math.nan
            rows.append(SweepRow(eps, nan, nan, nan, nan, nan, nan, False))
    return EpsilonSweep(rows)


def depth_cusp(config: TrapConfig) -> float:
    """Drive ratio at which the lower barrier drops below the upper one."""
    geom = config.geometry

    def gap(eps):
        cfg = config.with_drive(epsilon=eps)
        return lower_barrier(cfg) - trap_depth(cfg)

    hi = epsilon_critical(geom) * (1 - 1e-9)
    if gap(0.0) <= 0 or gap(hi) >= 0:
        raise NumericalFailure("depth cusp not bracketed on [0, epsilon_critical)")
    return _opt.brentq(gap, 0.0, hi, xtol=1e-12)
