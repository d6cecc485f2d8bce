import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from minmax_lab import gallery, reductions
from minmax_lab.core import (
    BilinearConstraintSet,
    ConstraintPiece,
    CorrespondenceSpec,
    LinearVIInstance,
    MinMaxInstance,
    PolymatrixGame,
    QuadraticObjective,
    eval_constraint,
    eval_objective,
    feasible_set,
    pseudo_gradient,
    zero_objective,
)
from minmax_lab.polytope import feasibility

from conftest import finite_diff_grad


def _zero_instance(d=1):
    g = BilinearConstraintSet.unconstrained(d)
    return MinMaxInstance(d, zero_objective(d), g, BilinearConstraintSet.unconstrained(d, owner=2), eps=0.1, delta=0.1)


# eval_objective


def test_eval_objective_eq_not_vi_probe_is_zero():
    inst, (x, y) = gallery.eq_not_vi()
    assert eval_objective(inst, x, y) == 0.0


def test_eval_objective_zero(rng):
    inst = _zero_instance(2)
    for _ in range(5):
        assert eval_objective(inst, rng.random(2), rng.random(2)) == 0.0


def test_eval_objective_jc_gadget_hand_value():
    obj = reductions.jc_objective(np.zeros((1, 1)), np.array([-1.0]))
    # (x - y) * (D x + c) = 0.3 * -1
    assert obj.value(np.array([0.5]), np.array([0.2])) == pytest.approx(-0.3, abs=1e-15)
    # brute evaluation of the defining formula
    x, y = 0.5, 0.2
    assert obj.value(np.array([x]), np.array([y])) == pytest.approx((x - y) * (0 * x - 1), abs=1e-15)


def test_eval_objective_dimension_mismatch():
    inst, _ = gallery.eq_not_vi()
    with pytest.raises(ValueError):
        eval_objective(inst, np.array([0.1, 0.2]), np.array([0.0]))


# pseudo_gradient


def test_pseudo_gradient_eq_not_vi():
    inst, (x, y) = gallery.eq_not_vi()
    # grad_y f(1, 0) = -8/5 * (0 - 1/2) = 4/5, so the stacked (grad_x, -grad_y) ends in -4/5
    assert np.allclose(pseudo_gradient(inst, x, y), [0.0, -0.8], atol=1e-15)


def test_pseudo_gradient_zero():
    inst = _zero_instance(3)
    assert np.all(pseudo_gradient(inst, np.full(3, 0.3), np.full(3, 0.6)) == 0)


def test_pseudo_gradient_jc_gadget():
    vi = LinearVIInstance(np.ones((1, 1)), np.zeros(1), 0.01, norm_certified=True)
    inst, _ = reductions.linearvi_to_jc_minmax(vi, 1.0)
    pg = pseudo_gradient(inst, np.array([0.5]), np.array([0.5]))
    assert np.allclose(pg, [0.5, 0.5], atol=1e-15)
    f = lambda z: inst.objective.value(z[:1], z[1:])
    fd = finite_diff_grad(f, np.array([0.5, 0.5]))
    assert np.allclose(pg, fd * [1, -1], atol=1e-6)


# eval_constraint


def test_eval_constraint_joint_line():
    inst, (x, y) = gallery.eq_not_vi()
    assert eval_constraint(inst.g1, x, y) == 0.0


def test_eval_constraint_sentinel():
    g = BilinearConstraintSet((ConstraintPiece(np.zeros((2, 2)), np.zeros(2), np.zeros(2), -1.0),))
    for x, y in [(np.zeros(2), np.ones(2)), (np.full(2, 0.3), np.full(2, 0.9))]:
        assert eval_constraint(g, x, y) == -1.0


def test_eval_constraint_inf_norm_ball():
    g = BilinearConstraintSet.inf_norm_ball(2, 0.1)
    assert len(g.pieces) == 4
    x, y = np.array([0.3, 0.3]), np.array([0.15, 0.3])
    brute = max(abs(a - b) for a, b in zip(x, y)) - 0.1
    assert eval_constraint(g, x, y) == pytest.approx(brute, abs=1e-15)
    assert eval_constraint(g, x, y) == pytest.approx(0.05, abs=1e-15)


def test_eval_constraint_requires_pieces():
    with pytest.raises(ValueError):
        BilinearConstraintSet(())


# feasible_set


def test_feasible_set_joint_substitution():
    inst, _ = gallery.eq_not_vi()
    lo, hi = feasible_set(inst.g1, np.array([0.4]), 1, 0.0).interval_bounds()
    assert lo[0] == 0.0 and hi[0] == pytest.approx(0.6, abs=1e-15)


def test_feasible_set_bilinear_gadget_slice():
    g2 = BilinearConstraintSet.inf_norm_ball(2, 0.0, owner=2)
    x = np.array([0.3, 0.005])
    lo, hi = feasible_set(g2, x, 2, 0.01).interval_bounds()
    assert np.allclose(lo, [0.29, 0.0], atol=1e-15)
    assert np.allclose(hi, [0.31, 0.015], atol=1e-15)


def test_feasible_set_irrational_kakutani_rows():
    spec = gallery.irrational_kakutani()
    Q = spec.at(np.array([0.5, 0.5]), 0.0)
    lo, hi = Q.interval_bounds()
    assert np.allclose(lo, [0.5, 1.0]) and np.allclose(hi, [0.5, 1.0])
    assert np.allclose(feasibility(Q), [0.5, 1.0], atol=1e-9)


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 0.3))
def test_feasible_set_jc_slices_agree_with_joint(xv, yv, nu):
    vi = gallery.random_linearvi(1, 3)
    inst, _ = reductions.linearvi_to_jc_minmax(vi, 1.0)
    K = inst.joint_polytope(nu)
    K1 = feasible_set(inst.g1, np.array([yv]), 1, nu)
    K2 = feasible_set(inst.g2, np.array([xv]), 2, nu)
    assert K1.contains(np.array([xv])) == K.contains(np.array([xv, yv]))
    assert K2.contains(np.array([yv])) == K.contains(np.array([xv, yv]))


# types


def test_quadratic_gradients_match_finite_differences(rng):
    objs = [gallery.eq_not_vi()[0].objective, gallery.nonexistence_instance("printed").objective,
            gallery.triangle_independent_set()[0].objective]
    for seed in range(3):
        vi = gallery.random_linearvi(2, seed)
        objs += [reductions.jc_objective(vi.D, vi.c), reductions.bilinear_objective(vi.D, vi.c)]
    for obj in objs:
        d = obj.d
        for _ in range(100):
            z = rng.uniform(0.05, 0.95, 2 * d)
            fd = finite_diff_grad(lambda t: obj.value(t[:d], t[d:]), z)
            assert np.allclose(obj.gradient(z[:d], z[d:]), fd, atol=1e-6)


def test_quadratic_declared_bounds_dominate_samples(rng):
    obj = gallery.eq_not_vi()[0].objective
    G, L = obj.gradient_bound(), obj.smoothness()
    for _ in range(500):
        a, b = rng.random(2), rng.random(2)
        ga, gb = obj.gradient(a[:1], a[1:]), obj.gradient(b[:1], b[1:])
        assert np.linalg.norm(ga) <= G + 1e-12
        assert np.linalg.norm(ga - gb) <= L * np.linalg.norm(a - b) + 1e-12


def test_linearvi_invariants():
    with pytest.raises(ValueError):
        LinearVIInstance(np.array([[2.0]]), np.zeros(1), 0.1)
    with pytest.raises(ValueError):
        LinearVIInstance(np.array([[0.9, 0.9], [0.0, 0.0]]), np.zeros(2), 0.1, norm_certified=True)
    with pytest.raises(ValueError):
        LinearVIInstance(np.zeros((1, 1)), np.zeros(1), 0.0)


def test_jointly_convex_requires_linear_shared_constraint():
    obj = zero_objective(1)
    bil = BilinearConstraintSet((ConstraintPiece([[1.0]], [0.0], [0.0], 0.0),))
    with pytest.raises(ValueError):
        MinMaxInstance.jointly_convex(obj, bil, eps=0.1, delta=0.1)
    g = BilinearConstraintSet.linear([([1.0], [1.0], -1.0)])
    with pytest.raises(ValueError):
        MinMaxInstance(1, obj, g, BilinearConstraintSet.unconstrained(1, owner=2), eps=0.1, delta=0.1,
                       kind="jointly-convex")


def test_local_regime_flag():
    inst, _ = gallery.eq_not_vi()
    L = inst.L
    assert inst.with_params(delta=0.5 * math.sqrt(2 * inst.eps / L)).in_local_regime()
    assert not inst.with_params(delta=2 * math.sqrt(2 * inst.eps / L)).in_local_regime()


def test_correspondence_probe_and_polymatrix_bounds():
    spec = CorrespondenceSpec(1, (ConstraintPiece([[0.0]], [1.0], [0.0], -2.0),), 0.0)
    assert spec.probe_nonempty(8) == []
    bad = CorrespondenceSpec(1, (ConstraintPiece([[0.0]], [0.0], [0.0], 1.0),), 0.0)
    assert len(bad.probe_nonempty(8)) == 8
    with pytest.raises(ValueError):
        PolymatrixGame(2, ((0, 1),), {(0, 1): np.full((2, 2), 1.5), (1, 0): np.zeros((2, 2))}, 0.1)
