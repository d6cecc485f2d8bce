import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from minmax_lab import dynamics as dy
from minmax_lab import gallery, reductions as R
from minmax_lab.core import (
    BilinearConstraintSet,
    CorrespondenceSpec,
    LinearVIInstance,
    MinMaxInstance,
    QuadraticObjective,
    feasible_set,
    zero_objective,
)
from minmax_lab.errors import InfeasibleError
from minmax_lab.polytope import lp_min
from minmax_lab.verify import (
    grid_search_local_minmax,
    single_component_violations,
    verify_gda_fixed_point,
    verify_globalization,
    verify_kakutani,
    verify_linearvi,
    verify_local_minmax,
    verify_qvi,
)


def _corner_residual(D, c, z):
    g = D @ z + c
    return min(float(g @ (np.array(v) - z)) for v in itertools.product((0.0, 1.0), repeat=len(z)))


# linear VI


def test_linearvi_examples():
    vi = LinearVIInstance(np.zeros((1, 1)), np.array([1.0]), 0.01)
    assert verify_linearvi(vi, [0.0]).residual == 0
    cert = verify_linearvi(vi, [1.0])
    assert cert.residual == -1 and not cert.passed
    mp, _ = R.polymatrix_to_linearvi(gallery.matching_pennies())
    assert verify_linearvi(mp, [0.5, 0.5]).residual == 0


@given(st.integers(0, 10**6), st.integers(1, 8))
def test_linearvi_closed_form_equals_corner_enumeration(seed, d):
    vi = gallery.random_linearvi(d, seed)
    z = np.random.default_rng(seed).random(d)
    cert = verify_linearvi(vi, z)
    assert cert.residual == pytest.approx(_corner_residual(vi.D, vi.c, z), abs=1e-12)
    assert cert.details["single_component_residual"] >= cert.residual - 1e-15


def test_linearvi_rejects_outside_box():
    vi = gallery.random_linearvi(2, 0)
    with pytest.raises(ValueError):
        verify_linearvi(vi, [1.2, 0.0])


# QVI


def test_qvi_zero_operator():
    qvi = gallery.irrational_kakutani_qvi(0.05)
    z = np.array([0.71, 0.71])
    cert = verify_qvi(qvi, z)
    assert cert.residual == 0 and cert.passed


def test_qvi_eq_not_vi_separation():
    inst, _ = gallery.eq_not_vi()
    cert = verify_qvi(R.minmax_to_vi(inst), [1.0, 0.0])
    assert cert.residual == pytest.approx(inst.claimed["vi_residual"], abs=1e-9)
    assert not cert.passed


@given(st.integers(0, 10**6))
def test_qvi_residual_never_positive(seed):
    rng = np.random.default_rng(seed)
    vi = gallery.random_linearvi(2, seed)
    inst, _ = R.linearvi_to_jc_minmax(vi)
    qvi = R.minmax_to_qvi(inst.with_params(nu=0.05))
    x = rng.random(2)
    z = np.r_[x, np.clip(x + rng.uniform(-0.05, 0.05, 2), 0, 1)]
    cert = verify_qvi(qvi, z)
    if cert.details["member"]:
        assert cert.residual <= 1e-12


def test_qvi_infeasible_slice():
    qvi = gallery.irrational_kakutani_qvi(0.0)
    with pytest.raises(InfeasibleError):
        verify_qvi(qvi, [0.1, 0.1])


# Kakutani


def test_kakutani_examples():
    spec = gallery.irrational_kakutani()
    assert verify_kakutani(spec, [0.70711, 0.70711], nu=1e-3).passed
    for z in ([0.70711, 0.70711], [1 / math.sqrt(2)] * 2, [0.7071067811865476, 0.7071067811865475], [0.5, 1.0]):
        assert not verify_kakutani(spec, z, nu=0.0).passed
    empty = CorrespondenceSpec(2, (), 0.0)
    assert verify_kakutani(empty, [0.3, 0.9]).passed


# local min-max


def test_local_minmax_eq_not_vi_any_params():
    inst, (x, y) = gallery.eq_not_vi()
    for eps, delta in [(1e-3, 0.3), (1e-6, 1.0), (0.0, 0.05)]:
        cert = verify_local_minmax(inst, x, y, eps=eps, delta=delta)
        assert cert.passed and cert.residual == 0


def test_local_minmax_nonexistence_claimed_reading_fails():
    inst = gallery.nonexistence_instance("claimed")
    cert = verify_local_minmax(inst, [0.0], [0.0])
    assert not cert.passed
    assert cert.details["violation_min_player"] == pytest.approx(inst.claimed["argument_gain"], abs=1e-12)
    assert cert.details["single_component"]["min_player"] == pytest.approx(inst.delta)


def test_local_minmax_nonexistence_printed_reading_passes():
    inst = gallery.nonexistence_instance("printed")
    cert = verify_local_minmax(inst, [0.0], [0.0])
    assert cert.passed and cert.residual == 0
    assert inst.delta**2 / 2 <= inst.eps


def test_local_minmax_zero_objective(rng):
    inst = MinMaxInstance(2, zero_objective(2), BilinearConstraintSet.unconstrained(2),
                          BilinearConstraintSet.unconstrained(2, owner=2), eps=0.0, delta=0.2)
    for _ in range(5):
        assert verify_local_minmax(inst, rng.random(2), rng.random(2)).passed


def test_local_minmax_infeasible_probe():
    inst, _ = gallery.eq_not_vi()
    with pytest.raises(InfeasibleError):
        verify_local_minmax(inst, [0.8], [0.8])


def test_local_minmax_reports_grid_slack():
    inst, (x, y) = gallery.eq_not_vi()
    cert = verify_local_minmax(inst, x, y, grid_step=0.01)
    assert cert.details["grid_slack"] == pytest.approx(inst.G * 0.01)


# GDA fixed points


def test_gda_fixed_point_examples():
    inst, (x, y) = gallery.eq_not_vi()
    assert verify_gda_fixed_point(inst, x, y, 1e-9).passed
    half = np.array([0.5])
    r = dy.residual(inst, half, half)
    assert verify_gda_fixed_point(inst, half, half, 0.1).passed == (r <= 0.1)
    zero = MinMaxInstance(1, zero_objective(1), BilinearConstraintSet.unconstrained(1),
                          BilinearConstraintSet.unconstrained(1, owner=2), eps=0.1, delta=0.1)
    assert verify_gda_fixed_point(zero, [0.4], [0.6], 0.0).passed


def test_gda_fixed_points_give_single_component_bounds():
    """alpha-fixed points on interval slices pass single-coordinate checks at alpha(1 + G_inf) + L delta^2 / 2."""
    rng = np.random.default_rng(7)
    checked = 0
    for trial in range(40):
        d = 2
        A = rng.uniform(-0.3, 0.3, (2 * d, 2 * d))
        obj = QuadraticObjective(d, A, rng.uniform(-0.5, 0.5, 2 * d), 0.0)
        inst = MinMaxInstance(d, obj, BilinearConstraintSet.unconstrained(d),
                              BilinearConstraintSet.unconstrained(d, owner=2), eps=0.0, delta=0.1)
        res = dy.iterate(inst, rng.random(2 * d), "gda", damping=0.3, max_iters=3000, target_residual=1e-12)
        alpha = max(res.residual, 1e-12)
        if alpha > 0.05:
            continue
        assert verify_gda_fixed_point(inst, res.x, res.y, alpha).passed
        Z = rng.random((2000, 2 * d))
        G_inf = float(np.abs(Z @ obj.hessian.T + obj.h).max())
        L = obj.smoothness()
        v1, v2 = single_component_violations(inst, res.x, res.y)
        bound = dy.fixed_point_deviation_bound(alpha, G_inf, L, inst.delta) + 1e-9
        assert max(v1, v2) <= bound
        checked += 1
    assert checked >= 10


def test_local_minmax_points_pass_qvi_at_reverse_bound():
    cases = []
    for seed in range(4):
        vi = gallery.random_linearvi(1, seed)
        for make in (R.linearvi_to_jc_minmax, R.linearvi_to_bilinear_minmax):
            inst, _ = make(vi, 1.0)
            cert = grid_search_local_minmax(inst, 200)
            cases.append((inst, cert))
    inst, (x, y) = gallery.eq_not_vi()
    cases.append((inst, verify_local_minmax(inst, x, y)))
    for inst, cert in cases:
        assert cert.passed
        x, y = cert.point["x"], cert.point["y"]
        tol = dy.qvi_reverse_bound(inst.L, inst.delta, inst.eps, inst.d) + cert.details["grid_slack"]
        qc = verify_qvi(R.minmax_to_qvi(inst), np.r_[x, y], eps=tol)
        assert qc.passed, (inst.name, qc.residual, tol)


# globalization


def test_globalization_bilinear_gadget_lp():
    vi = gallery.random_linearvi(2, 5)
    inst, _ = R.linearvi_to_bilinear_minmax(vi)
    y = np.array([0.3, 0.6])
    g = inst.objective.gradient(np.zeros(2), y)[:2]
    x_opt, _ = lp_min(feasible_set(inst.g1, y, 1, inst.nu), g)
    cert = verify_globalization(inst, x_opt, y)
    assert cert.method == "lp-simplex" and cert.residual == pytest.approx(0, abs=1e-12) and cert.passed


def test_globalization_constant_objective():
    inst = MinMaxInstance(2, QuadraticObjective(2, np.zeros((4, 4)), np.zeros(4), 0.7),
                          BilinearConstraintSet.unconstrained(2), BilinearConstraintSet.unconstrained(2, owner=2),
                          eps=0.0, delta=0.1)
    assert verify_globalization(inst, [0.2, 0.9], [0.4, 0.4]).passed


def test_globalization_eq_not_vi():
    inst, (x, y) = gallery.eq_not_vi()
    cert = verify_globalization(inst, x, y)
    assert cert.passed and cert.residual == 0


def test_globalization_rejects_nonconvex():
    inst = gallery.nonexistence_instance("printed")
    with pytest.raises(ValueError):
        verify_globalization(inst, [0.0], [0.0])


# grid search oracle


def test_grid_search_result_is_verified():
    vi, _ = R.polymatrix_to_linearvi(gallery.random_polymatrix(2, 11))
    inst, _ = R.linearvi_to_jc_minmax(vi)
    cert = grid_search_local_minmax(inst, 200)
    assert cert.passed
    again = verify_local_minmax(inst, cert.point["x"], cert.point["y"], grid_step=inst.delta / 6)
    assert again.passed and again.residual == cert.residual
