"""Equilibrium configurations of a few ions in the point trap."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .characterize import secular_frequencies, trap_height
from .constants import VACUUM_PERMITTIVITY
from .dynamics import GradientField, gradient_field
from .errors import EscapeError
from .fieldcore import TrapConfig

FORCE_THRESHOLD = 1e-19  # N, per ion


@dataclass
class CrystalConfiguration:
    positions: np.ndarray  # (N, 3), m
    total_energy: float  # J, trap energy measured from the node plus Coulomb
    converged: bool
    max_residual_force: float  # N
    node: np.ndarray = field(default_factory=lambda: np.zeros(3))
    energy_history: list = field(default_factory=list, repr=False)

    @property
    def n_ions(self) -> int:
        return len(self.positions)


def coulomb_energy(u):
    """Sum of 1/r_ij over pairs, and its gradient (dimensionless)."""
    d = u[:, None, :] - u[None, :, :]
    r = np.sqrt((d ** 2).sum(-1))
    n = len(u)
    iu = np.triu_indices(n, 1)
    if np.any(r[iu] <= 0):
        raise ValueError("coincident ions")
    np.fill_diagonal(r, np.inf)
    energy = float((1.0 / r[iu]).sum())
    grad = -(d / r[..., None] ** 3).sum(axis=1)
    return energy, grad


class _HarmonicTrap:
    def __init__(self, ratio):
        # lengths in units of the radial Coulomb length, energies in Q^2/(4 pi eps0 l)
        self.k = np.array([1.0, 1.0, ratio * ratio])

    def __call__(self, u):
        return 0.5 * float((self.k * u * u).sum()), self.k * u


class _FieldTrap:
    def __init__(self, gfield: GradientField, node, length, energy_unit):
        self.f = gfield
        self.node = node
        self.length = length
        self.e0 = energy_unit

    def __call__(self, u):
        r = self.node + u * self.length
        rho = np.hypot(r[:, 0], r[:, 1])
        z = r[:, 2]
        if np.any(rho > self.f.rho_max) or np.any(z < self.f.z_min) or np.any(z > self.f.z_max):
            raise EscapeError("ion left the field-map extent during minimization")
        psi = self.f.psi(rho, z)
        dpsi_drho = self.f.psi(rho, z, d_rho=1)
        dpsi_dz = self.f.psi(rho, z, d_z=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            cx = np.where(rho > 0, r[:, 0] / rho, 0.0)
            cy = np.where(rho > 0, r[:, 1] / rho, 0.0)
        grad = np.stack([dpsi_drho * cx, dpsi_drho * cy, dpsi_dz], axis=1)
        psi0 = float(self.f.psi(0.0, self.node[2]))
        energy = float((psi - psi0).sum()) / self.e0
        return energy, grad * self.length / self.e0


def _total(trap, u):
    et, gt = trap(u)
    ec, gc = coulomb_energy(u) if len(u) > 1 else (0.0, np.zeros_like(u))
    return et + ec, gt + gc


def _max_force(g):
    return float(np.sqrt((g ** 2).sum(axis=1)).max())


def minimize_energy(trap, u0, force_tol=1e-7, max_iter=20000):
    """Gradient descent with Barzilai-Borwein step length and backtracking,
    followed by a damped-dynamics polish.

    Only energy-non-increasing steps are accepted. Returns
    (u, energy, gradient, converged, accepted_energies).
    """
    u = np.array(u0, dtype=float)
    e, g = _total(trap, u)
    history = [e]
    step = 1e-2
    u_prev = g_prev = None
    it = 0
    while _max_force(g) > force_tol and it < max_iter:
        it += 1
        if u_prev is not None:
            s = (u - u_prev).ravel()
            y = (g - g_prev).ravel()
            sy = s @ y
            if sy > 0:
                step = float(s @ s / sy)
        while True:
            u_new = u - step * g
            try:
                e_new, g_new = _total(trap, u_new)
            except (ValueError, EscapeError):
                e_new = math.inf
            if e_new <= e:
                break
            step *= 0.5
            if step < 1e-16:
                break
        if e_new > e:
            break
        u_prev, g_prev = u, g
        u, e, g = u_new, e_new, g_new
        history.append(e)

    if _max_force(g) > force_tol:
        u, e, g = _damped_polish(trap, u, e, g, force_tol, min(max_iter, 5000), history)
    return u, e, g, _max_force(g) <= force_tol, history


def _damped_polish(trap, u, e, g, force_tol, max_iter, history, damping=0.1):
    v = np.zeros_like(u)
    h = 0.05
    for _ in range(max_iter):
        if _max_force(g) <= force_tol or h < 1e-12:
            break
        v = (1.0 - damping) * v - h * g
        u_new = u + h * v
        e_new, g_new = _total(trap, u_new)
        if e_new <= e:
            u, e, g = u_new, e_new, g_new
            history.append(e)
            h = min(h * 1.1, 0.5)
        else:
            v[:] = 0.0
            h *= 0.5
    return u, e, g


def coulomb_length(config: TrapConfig, omega_rho: float) -> float:
    """(Q^2 / (4 pi eps0 M omega_rho^2))^(1/3), m."""
    q, m = config.species.charge, config.species.mass
    return (q * q / (4.0 * math.pi * VACUUM_PERMITTIVITY * m * omega_rho ** 2)) ** (1.0 / 3.0)


def two_ion_separation(config: TrapConfig, omega_rho: float | None = None) -> float:
    """Force-balance spacing of two ions in the radial plane, m."""
    if omega_rho is None:
        omega_rho = secular_frequencies(config)[1]
    q, m = config.species.charge, config.species.mass
    return (q * q / (2.0 * math.pi * VACUUM_PERMITTIVITY * m * omega_rho ** 2)) ** (1.0 / 3.0)


def crystal_field(config: TrapConfig, shape=(121, 121)) -> GradientField:
    """Compact field map around the node, sized for small crystals."""
    z0 = trap_height(config.geometry, config.epsilon)
    return gradient_field(config, shape, rho_max=0.25 * z0, z_range=(0.75 * z0, 1.25 * z0))


def crystal_equilibrium(config: TrapConfig, n: int, rng_seed: int = 0, restarts: int = 16,
                        mode: str = "harmonic", field: GradientField | None = None,
                        force_tol: float | None = None,
                        max_iter: int = 20000) -> CrystalConfiguration:
    """Lowest-energy configuration of ``n`` ions found over ``restarts`` seeded starts.

    ``mode="harmonic"`` replaces Psi by its quadratic expansion about the
    node; ``mode="full"`` interpolates the quadrature pseudopotential.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    z0 = trap_height(config.geometry, config.epsilon)
    node = np.array([0.0, 0.0, z0])
    omega_z, omega_rho = secular_frequencies(config)
    length = coulomb_length(config, omega_rho)
    q = config.species.charge
    e_unit = q * q / (4.0 * math.pi * VACUUM_PERMITTIVITY * length)
    f_unit = e_unit / length

    if mode == "harmonic":
        trap = _HarmonicTrap(omega_z / omega_rho)
    elif mode == "full":
        trap = _FieldTrap(field or crystal_field(config), node, length, e_unit)
    else:
        raise ValueError(f"unknown mode {mode!r}")

    if force_tol is None:
        # tighter than the physical threshold, but above energy round-off
        force_tol = min(FORCE_THRESHOLD / f_unit, 1e-7)
    else:
        force_tol = force_tol / f_unit

    radius = max(1.0, math.sqrt(n))
    best = None
    for child in np.random.SeedSequence(rng_seed).spawn(restarts):
        rng = np.random.default_rng(child)
        u0 = rng.uniform(-radius, radius, size=(n, 3)) * np.array([1.0, 1.0, 0.5])
        u, e, g, ok, hist = minimize_energy(trap, u0, force_tol, max_iter)
        if best is None or (ok, -e) > (best[3], -best[1]):
            best = (u, e, g, ok, hist)
    u, e, g, ok, hist = best
    return CrystalConfiguration(
        positions=node + u * length,
        total_energy=e * e_unit,
        converged=ok,
        max_residual_force=_max_force(g) * f_unit,
        node=node,
        energy_history=[h * e_unit for h in hist],
    )


def planarity(crystal: CrystalConfiguration, tol: float) -> tuple[bool, float]:
    """(all ions within ``tol`` of one z-plane, max z spread in m)."""
    z = crystal.positions[:, 2]
    spread = float(z.max() - z.min())
    return spread <= tol, spread
