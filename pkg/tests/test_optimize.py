import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import optimize as sopt

from pointpaul.characterize import trap_height
from pointpaul.fieldcore import RingGeometry
from pointpaul.optimize import (
    depth_ratio_along_constraint, golden_section_max, height_constrained_b,
    optimize_depth_at_height,
)

from conftest import OPTIMUM


def height(a, b):
    return math.sqrt(a ** (4 / 3) * b ** (4 / 3) / (a ** (2 / 3) + b ** (2 / 3)))


def depth_ratio(a, b, z0):
    zmax2 = (b ** 1.2 - a ** 1.2) / (a ** -0.8 - b ** -0.8)
    g = a * a * (a * a + zmax2) ** -1.5 - b * b * (b * b + zmax2) ** -1.5
    return g * g * z0 * z0


def test_optimum_geometry():
    r = optimize_depth_at_height(1.0)
    assert r.converged
    for key, got in [("a", r.a_over_z0), ("b", r.b_over_z0), ("zmax", r.zmax_over_z0),
                     ("q_ratio", r.q_over_q4rod), ("d_ratio", r.d_over_d4rod)]:
        assert got == pytest.approx(OPTIMUM[key], rel=1e-4), key


def test_fabrication_scale():
    r = optimize_depth_at_height(960e-6)
    assert r.a == pytest.approx(625.6e-6, abs=0.5e-6)
    assert r.b == pytest.approx(3.434e-3, abs=1e-6)
    assert trap_height(RingGeometry(r.a, r.b)) == pytest.approx(960e-6, rel=1e-12)


@pytest.mark.parametrize("z0", [1e-6, 1e-3, 1.0, 1e3])
def test_scale_invariant(z0):
    ref = optimize_depth_at_height(1.0)
    r = optimize_depth_at_height(z0)
    assert r.a_over_z0 == pytest.approx(ref.a_over_z0, rel=1e-8)
    assert r.d_over_d4rod == pytest.approx(ref.d_over_d4rod, rel=1e-10)


@pytest.mark.parametrize("bracket", [(0.05, 1.4), (0.1, 1.0), (0.3, 0.9), (0.5, 1.2), (0.2, 1.35)])
def test_bracket_independent(bracket):
    ref = optimize_depth_at_height(1.0)
    r = optimize_depth_at_height(1.0, bracket=bracket)
    assert r.a_over_z0 == pytest.approx(ref.a_over_z0, rel=1e-8)


def test_is_local_maximum():
    r = optimize_depth_at_height(1.0)
    best = depth_ratio(r.a, r.b, 1.0)
    for s in (0.99, 1.01):
        a = r.a * s
        b = sopt.brentq(lambda b: height(a, b) - 1.0, a * (1 + 1e-12), 100.0, xtol=1e-14)
        assert depth_ratio(a, b, 1.0) < best


def test_brute_force_grid():
    a = np.linspace(0.05, 1.4, 2000)
    vals = [depth_ratio_along_constraint(x, 1.0) for x in a]
    assert a[int(np.argmax(vals))] == pytest.approx(OPTIMUM["a"], abs=1e-3)


@settings(max_examples=60, deadline=None)
@given(a=st.floats(0.01, 1.41), z0=st.floats(1e-4, 1e2))
def test_constraint_matches_root_find(a, z0):
    a = a * z0
    b = height_constrained_b(a, z0)
    oracle = sopt.brentq(lambda bb: height(a, bb) / z0 - 1.0, a, 1e6 * z0, xtol=1e-300,
                         rtol=1e-14)
    assert b == pytest.approx(oracle, rel=1e-10)


def test_infeasible_inner_radius():
    with pytest.raises(ValueError):
        height_constrained_b(1.5, 1.0)
    with pytest.raises(ValueError):
        height_constrained_b(-0.1, 1.0)
    with pytest.raises(ValueError):
        optimize_depth_at_height(1.0, bracket=(0.5, 1.5))
    with pytest.raises(ValueError):
        optimize_depth_at_height(0.0)


def test_golden_section_on_known_function():
    x, f, it, ok = golden_section_max(lambda x: -(x - 0.3) ** 2 + 2, 0.0, 1.0, 1e-10)
    assert ok
    # function values cannot resolve x much below sqrt(machine eps)
    assert x == pytest.approx(0.3, abs=1e-7)
    assert f == pytest.approx(2.0)
    _, _, it, ok = golden_section_max(lambda x: -(x - 0.3) ** 2, 0.0, 1.0, 1e-10, max_iter=5)
    assert not ok and it == 5
