"""Trap-depth maximization at fixed node height."""
from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np
from scipy import optimize as _opt

from .errors import NumericalFailure

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
MAX_A_OVER_Z0 = math.sqrt(2.0)  # b -> a+ limit of the node height


@dataclass
class OptimizationResult:
    a_over_z0: float
    b_over_z0: float
    zmax_over_z0: float
    q_over_q4rod: float
    d_over_d4rod: float
    converged: bool
    iterations: int
    z0: float

    @property
    def a(self) -> float:
        return self.a_over_z0 * self.z0

    @property
    def b(self) -> float:
        return self.b_over_z0 * self.z0

    def as_dict(self) -> dict:
        return asdict(self)


def _b_for_height(a, z0):
    # z0^2 = u^2 v^2 / (u + v) with u = a^(2/3), v = b^(2/3): quadratic in v
    u = a ** (2.0 / 3.0)
    z2 = z0 * z0
    v = (z2 + (z2 * z2 + 4.0 * u ** 3 * z2) ** 0.5) / (2.0 * u * u)
    return v ** 1.5


def height_constrained_b(a: float, z0_target: float) -> float:
    """Outer ring radius that puts the single-rf node at ``z0_target``.

    Feasible for 0 < a < sqrt(2) z0_target; the node height grows
    monotonically with b from a / sqrt(2) at b = a.
    """
    if not (z0_target > 0):
        raise ValueError("z0_target must be > 0")
    if not (0 < a < MAX_A_OVER_Z0 * z0_target):
        raise ValueError(f"no b > a gives z0={z0_target} for a={a} "
                         f"(need 0 < a < {MAX_A_OVER_Z0 * z0_target})")
    b = _b_for_height(a, z0_target)
    a23, b23 = a ** (2.0 / 3.0), b ** (2.0 / 3.0)
    z = math.sqrt(a23 * a23 * b23 * b23 / (a23 + b23))
    if not b > a or abs(z / z0_target - 1.0) > 1e-12:
        raise NumericalFailure(f"height constraint residual {z / z0_target - 1.0:.2e}")
    return b


def depth_ratio_along_constraint(a, z0_target):
    """D / D_4rod of the ring with inner radius ``a`` and node at ``z0_target``.

    Closed form, written without branches so it also accepts complex ``a``.
    """
    b = _b_for_height(a, z0_target)
    zmax2 = (b ** 1.2 - a ** 1.2) / (a ** -0.8 - b ** -0.8)
    a2, b2 = a * a, b * b
    g = a2 * (a2 + zmax2) ** -1.5 - b2 * (b2 + zmax2) ** -1.5
    return g * g * z0_target ** 2


def golden_section_max(func, lo, hi, tol, max_iter=500):
    """Maximize a unimodal ``func`` on [lo, hi] by golden-section search.

    Returns (x_best, f_best, iterations, converged).
    """
    x1 = hi - INV_PHI * (hi - lo)
    x2 = lo + INV_PHI * (hi - lo)
    f1, f2 = func(x1), func(x2)
    it = 0
    while hi - lo > tol and it < max_iter:
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - INV_PHI * (hi - lo)
            f1 = func(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + INV_PHI * (hi - lo)
            f2 = func(x2)
        it += 1
    x, f = (x1, f1) if f1 >= f2 else (x2, f2)
    return x, f, it, hi - lo <= tol


def _polish(a_star, z0, h):
    # Golden section stalls near sqrt(machine eps) on a flat maximum; finish on
    # the zero of a complex-step derivative, which is free of cancellation.
    step = 1e-30 * z0

    def slope(a):
        return (depth_ratio_along_constraint(complex(a, step), z0)).imag / step

    lo, hi = a_star - h, a_star + h
    lo = max(lo, 1e-9 * z0)
    hi = min(hi, MAX_A_OVER_Z0 * z0 * (1 - 1e-12))
    if slope(lo) > 0 > slope(hi):
        return _opt.brentq(slope, lo, hi, xtol=1e-15 * z0, rtol=1e-15)
    return a_star


def optimize_depth_at_height(z0_target: float, bracket=(0.05, 1.4),
                             tol: float = 1e-10, max_iter: int = 500) -> OptimizationResult:
    """Inner radius (and hence outer radius) maximizing D / D_4rod at fixed z0.

    ``bracket`` is in units of ``z0_target``; ``tol`` is the final bracket
    width in the same units.
    """
    if not (z0_target > 0):
        raise ValueError("z0_target must be > 0")
    lo, hi = (float(x) * z0_target for x in bracket)
    if not (0 < lo < hi < MAX_A_OVER_Z0 * z0_target):
        raise ValueError(f"bracket must satisfy 0 < lo < hi < sqrt(2), got {bracket}")

    a_gs, _, iters, converged = golden_section_max(
        lambda a: depth_ratio_along_constraint(a, z0_target), lo, hi,
        tol * z0_target, max_iter)
    a = _polish(a_gs, z0_target, 1e-4 * z0_target)
    b = height_constrained_b(a, z0_target)
    zmax = math.sqrt((b ** 1.2 - a ** 1.2) / (a ** -0.8 - b ** -0.8))

    a23, b23 = a ** (2.0 / 3.0), b ** (2.0 / 3.0)
    a43, b43 = a23 * a23, b23 * b23
    f = math.sqrt(9.0 * (b23 - a23) ** 2 * (b23 + a23) ** 6
                  / (b43 * a43 * (b43 + b23 * a23 + a43) ** 5))
    return OptimizationResult(
        a_over_z0=a / z0_target,
        b_over_z0=b / z0_target,
        zmax_over_z0=zmax / z0_target,
        q_over_q4rod=f * z0_target ** 2,
        d_over_d4rod=float(np.real(depth_ratio_along_constraint(a, z0_target))),
        converged=converged,
        iterations=iters,
        z0=z0_target,
    )
