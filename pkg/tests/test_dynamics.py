import math
from decimal import Decimal, getcontext
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from minmax_lab import dynamics as dy
from minmax_lab import gallery, reductions
from minmax_lab.core import BilinearConstraintSet, LinearVIInstance, MinMaxInstance, QuadraticObjective, zero_objective
from minmax_lab.polytope import project_box
from minmax_lab.verify import verify_qvi

getcontext().prec = 50


def _zero_box(d=1):
    return MinMaxInstance(d, zero_objective(d), BilinearConstraintSet.unconstrained(d),
                          BilinearConstraintSet.unconstrained(d, owner=2), eps=0.1, delta=0.1)


def _zero_joint(d=1):
    g = BilinearConstraintSet.linear([(np.ones(d), np.ones(d), -1.0)])
    return MinMaxInstance.jointly_convex(zero_objective(d), g, eps=0.1, delta=0.1)


# maps


def test_gda_fixed_point_eq_not_vi():
    inst, (x, y) = gallery.eq_not_vi()
    xp, yp = dy.gda_map(inst, x, y)
    assert np.allclose(xp, [1.0]) and np.allclose(yp, [0.0])


def test_gda_zero_objective_is_identity(rng):
    inst = _zero_box(2)
    for _ in range(10):
        x, y = rng.random(2), rng.random(2)
        xp, yp = dy.gda_map(inst, x, y)
        assert np.allclose(xp, x) and np.allclose(yp, y)


def test_gda_eq_not_vi_at_half():
    inst, _ = gallery.eq_not_vi()
    xp, yp = dy.gda_map(inst, np.array([0.5]), np.array([0.5]))
    # x: clamp of 0.5 - 0.8 (2 * 0.5 - 2) = 1.3 into [0, 0.5]; y: 0.5 - 0.8 (2 * 0.5 - 1) = 0.5
    assert xp[0] == pytest.approx(0.5, abs=1e-12) and yp[0] == pytest.approx(0.5, abs=1e-12)


def test_sgda_eq_not_vi():
    inst, (x, y) = gallery.eq_not_vi()
    xp, yp = dy.sgda_map(inst, x, y)
    assert np.allclose(np.r_[xp, yp], [0.6, 0.4], atol=1e-12)


def test_sgda_zero_and_stationary():
    inst = _zero_joint(1)
    xp, yp = dy.sgda_map(inst, np.array([0.3]), np.array([0.2]))
    assert np.allclose(np.r_[xp, yp], [0.3, 0.2])
    obj = QuadraticObjective(1, np.diag([1.0, -1.0]), [-0.6, 0.4], 0.0)   # stationary at (0.3, 0.2)
    g = BilinearConstraintSet.linear([([1.0], [1.0], -1.0)])
    inst = MinMaxInstance.jointly_convex(obj, g, eps=0.1, delta=0.1)
    xp, yp = dy.sgda_map(inst, np.array([0.3]), np.array([0.2]))
    assert np.allclose(np.r_[xp, yp], [0.3, 0.2], atol=1e-12)


def test_sgda_wrong_kind():
    with pytest.raises(ValueError):
        dy.sgda_map(_zero_box(), np.zeros(1), np.zeros(1))


def test_residuals():
    inst, (x, y) = gallery.eq_not_vi()
    assert dy.residual(inst, x, y, "gda") == 0
    assert dy.residual(inst, x, y, "sgda") == pytest.approx(0.4 * math.sqrt(2), abs=1e-9)
    assert dy.residual(_zero_box(2), np.full(2, 0.2), np.full(2, 0.7)) == 0


def test_iterate_examples():
    inst, (x, y) = gallery.eq_not_vi()
    r = dy.iterate(inst, np.r_[x, y], "gda")
    assert r.residual == 0 and r.iterations == 0 and r.converged
    r = dy.iterate(_zero_box(), [0.3, 0.8], "gda")
    assert r.residual == 0 and r.iterations == 0
    r = dy.iterate(inst, [0.5, 0.5], "sgda", damping=0.5, max_iters=10_000)
    assert r.residual < 1e-6
    assert abs(r.residual - dy.residual(inst, r.x, r.y, "sgda")) <= 1e-12
    cert = verify_qvi(reductions.minmax_to_vi(inst), np.r_[r.x, r.y], eps=1e-3)
    assert cert.passed


def test_iterate_rejects_bad_damping():
    inst, (x, y) = gallery.eq_not_vi()
    with pytest.raises(ValueError):
        dy.iterate(inst, np.r_[x, y], damping=0.0)


def test_sgda_fixed_points_are_gda_fixed_points():
    for seed in range(5):
        vi = gallery.random_linearvi(1, seed, monotone=True)
        inst, _ = reductions.linearvi_to_jc_minmax(vi, 1.0)
        r = dy.iterate(inst, [0.5, 0.5], "sgda", damping=0.5, max_iters=20000, target_residual=1e-10)
        if r.residual <= 1e-8:
            assert dy.residual(inst, r.x, r.y, "gda") <= 1e-3


# extragradient


def test_extragradient_examples():
    assert dy.extragradient_vi([[1.0]], [-0.5]).z == pytest.approx([0.5], abs=1e-6)
    vi, _ = reductions.polymatrix_to_linearvi(gallery.matching_pennies())
    assert np.allclose(dy.extragradient_vi(vi.D, vi.c).z, [0.5, 0.5], atol=1e-6)
    assert dy.extragradient_vi([[0.0]], [-1.0]).z == pytest.approx([1.0])


def test_bilinear_gadget_operator_is_monotone(rng):
    vi = gallery.random_linearvi(3, 4)
    inst, _ = reductions.linearvi_to_bilinear_minmax(vi, 1.0)
    F = reductions.minmax_to_qvi(inst).F
    for _ in range(1000):
        a, b = rng.random(6), rng.random(6)
        assert (F(a) - F(b)) @ (a - b) >= -1e-9


@given(st.integers(0, 10**6), st.integers(1, 6))
def test_vi_and_safe_map_relations(seed, d):
    vi = gallery.random_linearvi(d, seed, monotone=True)
    res = dy.extragradient_vi(vi.D, vi.c, tol=1e-10, max_iters=50000)
    alpha = max(1e-12, -res.residual)
    assert dy.safe_map_displacement(vi, res.z) <= math.sqrt(alpha) + 1e-6
    z = np.random.default_rng(seed).random(d)
    a = dy.safe_map_displacement(vi, z)
    assert dy.vi_residual(vi.D, vi.c, z) >= -2 * a * math.sqrt(d) - 1e-6


# formulas


def _alpha_decimal(G, L, delta, eps):
    G, L, delta, eps = (Decimal(repr(v)) for v in (G, L, delta, eps))
    rad = (G + delta) ** 2 + 4 * (eps - L * delta**2 / 2)
    return (rad.sqrt() - (G + delta)) / 2


def test_alpha_examples():
    assert dy.alpha_from_eps_delta(1, 0, 0, 0) == 0
    G, L, delta, eps = 5 * math.sqrt(4), 7, 0.01, 0.001
    assert dy.alpha_from_eps_delta(G, L, delta, eps) == pytest.approx(float(_alpha_decimal(G, L, delta, eps)),
                                                                       rel=1e-12)
    L, delta = 2.0, 0.25
    assert dy.alpha_from_eps_delta(3.0, L, delta, L * delta**2 / 2) == 0
    with pytest.raises(ValueError):
        dy.alpha_from_eps_delta(0.0, 1.0, 10.0, 0.0)


def test_eps_delta_from_alpha_examples():
    assert dy.eps_delta_from_alpha(1, 7) == (1.0, 1.0)
    e, d = dy.eps_delta_from_alpha(7, 1)
    assert e == pytest.approx(7 / 1369, rel=1e-15) and d == pytest.approx(1 / 37, rel=1e-15)
    assert dy.eps_delta_from_alpha(3, 0) == (0, 0)


def test_qvi_alpha_examples():
    assert dy.qvi_alpha(1.0, 2.0, 0.5, 0.25) == 0
    G, L, delta, eps = 3 * math.sqrt(2), 1, 0.05, 0.01
    a = dy.alpha_from_eps_delta(G, L, delta, eps)
    assert dy.qvi_alpha(G, L, delta, eps) == pytest.approx(a * a / 2, rel=1e-12)


def test_qvi_reverse_bound_examples():
    assert dy.qvi_reverse_bound(0, 0.3, 0, 4) == 0
    assert dy.qvi_reverse_bound(1, 0.1, 0.01, 1) == pytest.approx(0.5, abs=1e-15)
    assert dy.qvi_reverse_bound(1, 0.1, 0.01, 2) == pytest.approx(0.5 * math.sqrt(2), rel=1e-15)
    with pytest.raises(ValueError):
        dy.qvi_reverse_bound(1, 0, 0.1, 1)


@given(st.floats(0, 10), st.floats(0, 10), st.floats(0, 1), st.floats(0, 1))
def test_alpha_is_root_of_quadratic(G, L, delta, extra):
    eps = L * delta**2 / 2 + extra
    a = dy.alpha_from_eps_delta(G, L, delta, eps)
    assert a >= 0
    lhs = a * a + (G + delta) * a
    assert lhs == pytest.approx(eps - L * delta**2 / 2, rel=1e-9, abs=1e-12)


@given(st.fractions(min_value=Fraction(1, 100), max_value=10), st.fractions(min_value=0, max_value=10))
def test_eps_delta_exact(L, alpha):
    e, d = dy.eps_delta_from_alpha(float(L), float(alpha))
    s = 5 * L + 2
    assert e == pytest.approx(float(alpha**2 * L / s**2), rel=1e-12, abs=1e-300)
    assert d == pytest.approx(float(alpha / s), rel=1e-12, abs=1e-300)


def test_project_box_used_by_safe_map():
    vi = LinearVIInstance(np.zeros((1, 1)), np.array([1.0]), 0.01)
    assert dy.safe_map_displacement(vi, [0.0]) == 0
    assert dy.safe_map_displacement(vi, [1.0]) == pytest.approx(1.0)
    assert project_box([0.5])[0] == 0.5
