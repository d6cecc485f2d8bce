import itertools
import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from minmax_lab import gallery
from minmax_lab.errors import InfeasibleError
from minmax_lab.polytope import (
    BoxPolytope,
    feasibility,
    lp_min,
    one_sided_hausdorff,
    project_box,
    project_polytope,
)

coord = st.floats(-2, 3, allow_nan=False)


def _vertices_2d(P):
    """Brute-force vertices of a 2-d box polytope (oracle for LP tests)."""
    A = np.vstack([P.A, -np.eye(2), np.eye(2)]) if P.m else np.vstack([-np.eye(2), np.eye(2)])
    b = np.r_[P.beta, 0, 0, 1, 1] if P.m else np.r_[0, 0, 1, 1]
    out = []
    for i, j in itertools.combinations(range(len(b)), 2):
        M = A[[i, j]]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        v = np.linalg.solve(M, b[[i, j]])
        if np.all(A @ v <= b + 1e-9):
            out.append(v)
    return np.array(out)


# project_box


@pytest.mark.parametrize("p,q", [((1.3, -0.2), (1, 0)), ((0.5, 0.5), (0.5, 0.5)), ((2, 2, -5), (1, 1, 0))])
def test_project_box(p, q):
    assert np.array_equal(project_box(p), np.array(q, dtype=float))


# project_polytope


def test_project_halfplane_symmetric():
    P = BoxPolytope([[1.0, 1.0]], [1.0])
    assert np.allclose(project_polytope(P, [1, 1]), [0.5, 0.5], atol=1e-9)


def test_project_interval_product_is_clamp():
    P = BoxPolytope.from_intervals([0.4, 0.4], [0.6, 0.6])
    assert np.allclose(project_polytope(P, [0, 1]), [0.4, 0.6], atol=1e-12)


def test_project_kkt_example_against_grid():
    P = BoxPolytope([[1.0, 2.0]], [1.0])
    q = project_polytope(P, [1, 1])
    assert np.allclose(q, [0.6, 0.2], atol=1e-9)
    # dense grid argmin of the distance, step 1e-3 then refined at 1e-4 around the best
    g = np.arange(0, 1.0001, 1e-3)
    X, Y = np.meshgrid(g, g, indexing="ij")
    ok = X + 2 * Y <= 1 + 1e-12
    dist = np.where(ok, (X - 1) ** 2 + (Y - 1) ** 2, np.inf)
    i = np.unravel_index(np.argmin(dist), dist.shape)
    assert abs(X[i] - 0.6) <= 2e-3 and abs(Y[i] - 0.2) <= 2e-3


def test_project_infeasible_raises():
    with pytest.raises(InfeasibleError):
        project_polytope(BoxPolytope([[1.0, 0.0]], [-0.5]), [0.5, 0.5])


def _random_polytope(draw_rows, seed):
    rng = np.random.default_rng(seed)
    A = rng.uniform(-1, 1, (draw_rows, 2))
    z0 = rng.random(2)
    beta = A @ z0 + rng.uniform(0, 0.3, draw_rows)
    return BoxPolytope(A, beta), z0


@given(st.integers(1, 4), st.integers(0, 10**6), coord, coord)
def test_projection_idempotent_and_optimal(m, seed, a, b):
    P, z0 = _random_polytope(m, seed)
    p = np.array([a, b])
    q = project_polytope(P, p)
    assert P.contains(q, 1e-7)
    assert np.linalg.norm(project_polytope(P, q) - q) <= 2e-9 + 1e-8
    # variational inequality of the projection against a feasible point
    assert (z0 - q) @ (q - p) >= -1e-6


# lp_min


def test_lp_min_box_edge():
    z, val = lp_min(BoxPolytope.box(2), [1, 0])
    assert val == 0 and z[0] == 0


def test_lp_min_lexicographic_vertex():
    z, val = lp_min(BoxPolytope([[1.0, 1.0]], [1.0]), [-1, -1])
    assert val == pytest.approx(-1, abs=1e-12)
    assert np.allclose(z, [0, 1], atol=1e-12)


def test_lp_min_zero_cost_is_feasible_point():
    P = BoxPolytope([[1.0, 1.0]], [1.0])
    z, val = lp_min(P, [0, 0])
    assert val == 0 and P.contains(z)


@given(st.integers(1, 4), st.integers(0, 10**6), st.floats(-1, 1), st.floats(-1, 1))
def test_lp_min_matches_vertex_enumeration(m, seed, c0, c1):
    P, _ = _random_polytope(m, seed)
    cost = np.array([c0, c1])
    z, val = lp_min(P, cost)
    V = _vertices_2d(P)
    assert val == pytest.approx(float((V @ cost).min()), abs=1e-9)
    rng = np.random.default_rng(seed)
    for _ in range(20):
        w = rng.dirichlet(np.ones(len(V)))
        assert val <= cost @ (w @ V) + 1e-9


# feasibility


def test_feasibility_examples():
    assert BoxPolytope.box(2).contains(feasibility(BoxPolytope.box(2)))
    assert feasibility(BoxPolytope([[1.0, 0.0]], [-0.5])) is None
    spec = gallery.irrational_kakutani()
    assert np.allclose(feasibility(spec.at(np.array([0.8, 0.8]), 0.0)), [0.8, 0.625], atol=1e-9)


def test_degenerate_rows():
    assert feasibility(BoxPolytope([[0.0, 0.0]], [-0.1])) is None
    P = BoxPolytope([[0.0, 0.0], [1.0, 0.0]], [0.2, 0.5]).cleaned()
    assert P.m == 1


@given(st.integers(1, 3), st.integers(0, 10**6), st.floats(0, 0.5), st.floats(0, 0.5))
def test_relaxation_monotone(m, seed, nu, extra):
    P, _ = _random_polytope(m, seed)
    rng = np.random.default_rng(seed)
    pts = rng.random((50, 2))
    small, large = P.relax(nu), P.relax(nu + extra)
    for z in pts:
        if small.contains(z, 0):
            assert large.contains(z, 0)


# hausdorff


def test_hausdorff_identical_is_zero():
    P = BoxPolytope([[1.0, 1.0]], [1.0])
    assert one_sided_hausdorff(P, P) == pytest.approx(0, abs=1e-9)


def test_hausdorff_half_box():
    Pa = BoxPolytope.box(2)
    Pb = BoxPolytope.from_intervals([0, 0], [0.5, 1])
    assert one_sided_hausdorff(Pa, Pb, samples=256) == pytest.approx(0.5, abs=1e-9)


def test_hausdorff_kakutani_lipschitz_bound(rng):
    spec = gallery.irrational_kakutani()
    gamma, L, d = 0.05, 1.0, 2
    for _ in range(50):
        z = rng.uniform(0.3, 1.0, 2)
        zp = np.clip(z + rng.normal(0, 0.02, 2), 0.3, 1.0)
        Qa, Qb = spec.at(z, gamma), spec.at(zp, gamma)
        if feasibility(Qa) is None or feasibility(Qb) is None:
            continue
        bound = 2 * L * math.sqrt(d) / gamma * np.linalg.norm(z - zp)
        assert one_sided_hausdorff(Qa, Qb) <= bound + 1e-6
