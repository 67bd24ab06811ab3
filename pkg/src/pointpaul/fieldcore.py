"""Potential and pseudopotential of concentric annular surface electrodes.

The potential above a plane carrying flat annular electrodes at fixed
voltages is written as a Hankel-type integral

    kappa(z, rho) = int_0^inf  sum_i A_i(k) exp(-k z) J0(k rho) dk,
    A_i(k) = V_i [beta_i J1(k beta_i) - alpha_i J1(k alpha_i)].

On the trap axis the integral has a closed form; off axis it is evaluated by
panelled Gauss-Kronrod quadrature. All lengths are SI metres.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special

from .constants import ATOMIC_MASS_UNIT, ELEMENTARY_CHARGE, SPECIES_PRESETS
from .errors import NumericalFailure, QuadratureAccuracyWarning

DEFAULT_RTOL = 1e-9
MAX_K_TIMES_RADIUS = 1e6
MAX_REFINEMENTS = 5


@dataclass(frozen=True)
class AnnularElectrode:
    inner_radius: float
    outer_radius: float
    amplitude: float

    def __post_init__(self):
        if not (0.0 <= self.inner_radius < self.outer_radius):
            raise ValueError(
                f"need 0 <= inner_radius < outer_radius, got "
                f"{self.inner_radius!r}, {self.outer_radius!r}")
        if not math.isfinite(self.amplitude):
            raise ValueError("electrode amplitude must be finite")


@dataclass(frozen=True)
class RingGeometry:
    """Inner radius ``a`` and outer radius ``b`` of the rf ring, in metres."""
    a: float
    b: float

    def __post_init__(self):
        if not (0.0 < self.a < self.b) or not math.isfinite(self.b):
            raise ValueError(f"need 0 < a < b, got a={self.a!r}, b={self.b!r}")

    def scaled(self, s: float) -> "RingGeometry":
        return RingGeometry(self.a * s, self.b * s)


@dataclass(frozen=True)
class RfDrive:
    """Ring rf amplitude (V), angular frequency (rad/s) and inner-disk ratio.

    ``epsilon`` is the amplitude of the centre-electrode rf relative to the
    ring; its sign encodes in-phase (+) or out-of-phase (-) drive.
    """
    v_rf: float
    omega_rf: float
    epsilon: float = 0.0

    def __post_init__(self):
        if not (self.v_rf >= 0.0) or not math.isfinite(self.v_rf):
            raise ValueError(f"v_rf must be finite and >= 0, got {self.v_rf!r}")
        if not (self.omega_rf > 0.0) or not math.isfinite(self.omega_rf):
            raise ValueError(f"omega_rf must be > 0, got {self.omega_rf!r}")
        if not (self.epsilon <= 1.0) or not math.isfinite(self.epsilon):
            raise ValueError(f"epsilon must be finite and <= 1, got {self.epsilon!r}")


@dataclass(frozen=True)
class IonSpecies:
    charge: float
    mass: float

    def __post_init__(self):
        if self.charge == 0 or not math.isfinite(self.charge):
            raise ValueError("charge must be non-zero")
        if not (self.mass > 0.0) or not math.isfinite(self.mass):
            raise ValueError("mass must be > 0")

    @classmethod
    def from_preset(cls, name: str) -> "IonSpecies":
        try:
            mass_amu, charge_e = SPECIES_PRESETS[name]
        except KeyError:
            raise ValueError(f"unknown species preset {name!r}; "
                             f"known: {sorted(SPECIES_PRESETS)}") from None
        return cls(charge_e * ELEMENTARY_CHARGE, mass_amu * ATOMIC_MASS_UNIT)


SR88 = IonSpecies.from_preset("88Sr+")


@dataclass(frozen=True)
class TrapConfig:
    geometry: RingGeometry
    drive: RfDrive
    species: IonSpecies = SR88

    @property
    def epsilon(self) -> float:
        return self.drive.epsilon

    @property
    def stack(self) -> list[AnnularElectrode]:
        return electrode_stack(self.geometry, self.drive.epsilon)

    @property
    def psi_prefactor(self) -> float:
        """Q^2 V^2 / (4 M Omega^2), in J m^2."""
        q, m = self.species.charge, self.species.mass
        return q * q * self.drive.v_rf ** 2 / (4.0 * m * self.drive.omega_rf ** 2)

    @property
    def q_prefactor(self) -> float:
        """2 Q V / (M Omega^2), in m^2; multiply by a curvature to get q."""
        return (2.0 * self.species.charge * self.drive.v_rf
                / (self.species.mass * self.drive.omega_rf ** 2))

    def with_drive(self, **changes) -> "TrapConfig":
        d = self.drive
        params = dict(v_rf=d.v_rf, omega_rf=d.omega_rf, epsilon=d.epsilon)
        params.update(changes)
        return TrapConfig(self.geometry, RfDrive(**params), self.species)


def electrode_stack(geom: RingGeometry, epsilon: float = 0.0) -> list[AnnularElectrode]:
    """Centre disk at ``epsilon`` and ring at unit amplitude (outer plane grounded)."""
    stack = [AnnularElectrode(geom.a, geom.b, 1.0)]
    if epsilon != 0.0:
        stack.insert(0, AnnularElectrode(0.0, geom.a, epsilon))
    return stack


def annular_coefficient(electrode: AnnularElectrode, k):
    """Hankel coefficient V [beta J1(k beta) - alpha J1(k alpha)] of one electrode."""
    k = np.asarray(k, dtype=float)
    if np.any(k < 0):
        raise ValueError("k must be >= 0")
    e = electrode
    out = e.amplitude * (e.outer_radius * special.j1(k * e.outer_radius)
                         - e.inner_radius * special.j1(k * e.inner_radius))
    return out if out.ndim else float(out)


def _axial_terms(geom, z):
    sa = z / np.sqrt(z * z + geom.a ** 2)
    sb = z / np.sqrt(z * z + geom.b ** 2)
    return sa, sb


def kappa_axial(geom: RingGeometry, epsilon, z):
    """Closed-form shape function on the trap axis (rho = 0)."""
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise ValueError("kappa_axial requires z > 0")
    sa, sb = _axial_terms(geom, z)
    out = sa - sb + epsilon * (1.0 - sa)
    return out if out.ndim else float(out)


def kappa_axial_derivative(geom: RingGeometry, epsilon, z, order: int = 1):
    """First or second z-derivative of :func:`kappa_axial`."""
    z = np.asarray(z, dtype=float)
    a2, b2 = geom.a ** 2, geom.b ** 2
    if order == 1:
        out = (1.0 - epsilon) * a2 * (z * z + a2) ** -1.5 - b2 * (z * z + b2) ** -1.5
    elif order == 2:
        out = -3.0 * z * ((1.0 - epsilon) * a2 * (z * z + a2) ** -2.5
                          - b2 * (z * z + b2) ** -2.5)
    else:
        raise ValueError("order must be 1 or 2")
    return out if out.ndim else float(out)


# Gauss-Kronrod 7/15 abscissae and weights (QUADPACK qk15).
_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327])

GK_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
GK_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
_g = np.zeros(8)
_g[1::2] = _WG
G_WEIGHTS = np.concatenate([_g[:-1], _g[::-1]])  # zero at Kronrod-only nodes
del _g


@dataclass
class StackIntegrals:
    """Quadrature results for one height ``z`` and an array of radii."""
    kappa: np.ndarray
    d_dz: np.ndarray
    d_drho: np.ndarray
    error: float
    n_nodes: int
    degraded: bool = False


def _k_cutoff(stack, z, rtol):
    # Tail bound: |A(k)| <= C with C = max|J1| * sum |V| (alpha + beta); the
    # gradient tail C exp(-kz)(k/z + 1/z^2) is the larger one, so cut on it.
    c = 0.5819 * sum(abs(e.amplitude) * (e.inner_radius + e.outer_radius) for e in stack)
    s = sum(abs(e.amplitude) for e in stack)
    r = max(c / (z * rtol * s) * 10.0, math.e)
    x = math.log(r)
    for _ in range(4):
        x = math.log(r * (1.0 + x))
    return x / z


def integrate_stack(stack: Sequence[AnnularElectrode], z: float, rho,
                    rtol: float = DEFAULT_RTOL) -> StackIntegrals:
    """Evaluate kappa and its gradient at height ``z`` for every radius in ``rho``.

    The k axis is cut at the point where the exp(-kz) tail is below tolerance
    and split into panels of half the shortest Bessel oscillation period; each
    panel uses a 15-point Kronrod rule with the embedded 7-point Gauss rule as
    error estimate. Panels are halved until the estimate meets ``rtol``
    (relative to the largest possible |kappa| and |grad kappa|).
    """
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    if not (z > 0):
        raise ValueError("z must be > 0")
    if np.any(rho < 0):
        raise ValueError("rho must be >= 0")
    stack = [e for e in stack if e.amplitude != 0.0]
    if not stack:
        zeros = np.zeros_like(rho)
        return StackIntegrals(zeros, zeros.copy(), zeros.copy(), 0.0, 0)

    r_max = max(e.outer_radius for e in stack)
    r_min = min(e.inner_radius or e.outer_radius for e in stack)
    scale = sum(abs(e.amplitude) for e in stack)
    kmax = _k_cutoff(stack, z, rtol)
    degraded = z < 1e-3 * r_min
    if kmax * r_max > MAX_K_TIMES_RADIUS:
        kmax = MAX_K_TIMES_RADIUS / r_max
        degraded = True
    if degraded:
        warnings.warn(f"z={z:.3e} m is close to the electrode plane; "
                      "quadrature accuracy is degraded", QuadratureAccuracyWarning,
                      stacklevel=2)

    width = math.pi / max(r_max, float(rho.max()))
    n_panels = max(int(math.ceil(kmax / width)), 8)
    tol_k = rtol * scale
    tol_g = rtol * scale / z
    for _ in range(MAX_REFINEMENTS + 1):
        half = 0.5 * kmax / n_panels
        mids = (np.arange(n_panels) * 2 + 1) * half
        k = (mids[:, None] + half * GK_NODES[None, :]).ravel()
        wk = np.tile(GK_WEIGHTS * half, n_panels)
        wg = np.tile(G_WEIGHTS * half, n_panels)

        amp = np.zeros_like(k)
        for e in stack:
            amp += annular_coefficient(e, k)
        base = amp * np.exp(-k * z)
        kr = np.outer(rho, k)
        j0 = special.j0(kr)
        j1 = special.j1(kr)
        kb = k * base
        weights = np.stack([wk, wg], axis=1)
        kap = j0 @ (base[:, None] * weights)
        dz = -(j0 @ (kb[:, None] * weights))
        dr = -(j1 @ (kb[:, None] * weights))
        err_k = np.max(np.abs(kap[:, 0] - kap[:, 1]))
        err_g = max(np.max(np.abs(dz[:, 0] - dz[:, 1])),
                    np.max(np.abs(dr[:, 0] - dr[:, 1])))
        if err_k <= tol_k and err_g <= tol_g:
            return StackIntegrals(kap[:, 0], dz[:, 0], dr[:, 0],
                                  max(err_k / scale, err_g * z / scale),
                                  k.size, degraded)
        n_panels *= 2
    raise NumericalFailure(
        f"quadrature did not converge at z={z:.6e} m (error estimates "
        f"{err_k:.2e}, {err_g:.2e} vs tolerance {tol_k:.2e}, {tol_g:.2e})")


def kappa_numeric(stack: Sequence[AnnularElectrode], z: float, rho: float,
                  rtol: float = DEFAULT_RTOL) -> float:
    """Shape function at (z, rho) by quadrature."""
    if rho < 0:
        raise ValueError("rho must be >= 0")
    return float(integrate_stack(stack, z, [rho], rtol).kappa[0])


def kappa_gradient(stack: Sequence[AnnularElectrode], z: float, rho: float,
                   rtol: float = DEFAULT_RTOL) -> tuple[float, float]:
    """(dkappa/dz, dkappa/drho) at (z, rho), in 1/m."""
    if rho < 0:
        raise ValueError("rho must be >= 0")
    res = integrate_stack(stack, z, [rho], rtol)
    return float(res.d_dz[0]), float(res.d_drho[0])


def pseudopotential(config: TrapConfig, z: float, rho: float = 0.0,
                    rtol: float = DEFAULT_RTOL) -> float:
    """Time-averaged ponderomotive energy in joules at (z, rho)."""
    gz, gr = kappa_gradient(config.stack, z, rho, rtol)
    return config.psi_prefactor * (gz * gz + gr * gr)


def pseudopotential_axial(config: TrapConfig, z):
    """Closed-form on-axis pseudopotential, J."""
    d = kappa_axial_derivative(config.geometry, config.epsilon, z)
    return config.psi_prefactor * d * d


@dataclass
class FieldMap:
    """kappa, its gradient and Psi sampled on a (rho, z) grid.

    Arrays are indexed ``[i_rho, i_z]``.
    """
    rho: np.ndarray
    z: np.ndarray
    kappa: np.ndarray
    grad_z: np.ndarray
    grad_rho: np.ndarray
    psi: np.ndarray
    config: TrapConfig | None = field(default=None, repr=False)

    def __post_init__(self):
        if np.any(np.diff(self.rho) <= 0) or np.any(np.diff(self.z) <= 0):
            raise ValueError("field map axes must be strictly increasing")
        if np.any(self.z <= 0):
            raise ValueError("field map heights must be > 0")

    @property
    def shape(self):
        return self.kappa.shape


def field_map(config: TrapConfig, rho_range, z_range, n_rho: int, n_z: int,
              rtol: float = DEFAULT_RTOL) -> FieldMap:
    """Sample kappa and Psi of ``config`` on a regular (rho, z) grid."""
    rho0, rho1 = map(float, rho_range)
    z0, z1 = map(float, z_range)
    if n_rho < 2 or n_z < 2:
        raise ValueError("need at least 2 samples per axis")
    if not (0 <= rho0 < rho1) or not (0 < z0 < z1):
        raise ValueError("ranges must be ordered, rho >= 0 and z > 0")
    rho = np.linspace(rho0, rho1, n_rho)
    z = np.linspace(z0, z1, n_z)
    stack = config.stack
    kap = np.empty((n_rho, n_z))
    gz = np.empty_like(kap)
    gr = np.empty_like(kap)
    for j, zj in enumerate(z):
        try:
            res = integrate_stack(stack, zj, rho, rtol)
        except NumericalFailure as exc:
            raise NumericalFailure(f"field map row z[{j}]={zj:.6e} m: {exc}") from exc
        kap[:, j] = res.kappa
        gz[:, j] = res.d_dz
        gr[:, j] = res.d_drho
    psi = config.psi_prefactor * (gz ** 2 + gr ** 2)
    return FieldMap(rho, z, kap, gz, gr, psi, config)
