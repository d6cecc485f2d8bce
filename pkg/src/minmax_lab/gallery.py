"""Named instances: the worked examples, counterexamples and random families."""
from __future__ import annotations

import math

import numpy as np

from .core import (
    AffineOperator,
    BilinearConstraintSet,
    ConstraintPiece,
    CorrespondenceSpec,
    LinearVIInstance,
    MinMaxInstance,
    PolymatrixGame,
    QuadraticObjective,
    QVIInstance,
)
from .reductions import EPS_STAR, independent_set_localmin_instance

GALLERY_VERSION = 1
NONEXISTENCE_READINGS = ("claimed", "printed")


def eq_not_vi(eps: float = 1e-3, delta: float = 0.3):
    """Local min-max point that is not a VI solution over the joint set.

    ``f = 4/5 ((x-1)^2 - (y-1/2)^2 + 1/4)`` on ``x + y <= 1``.  Returns the
    instance and the probe point ``(x, y) = (1, 0)``.
    """
    M = np.diag([0.8, -0.8])
    h = np.array([-1.6, 0.8])
    obj = QuadraticObjective(1, M, h, 0.8)
    g = BilinearConstraintSet.linear([([1.0], [1.0], -1.0)])
    claimed = {"smoothness": 8 / 5, "lipschitz": 4 * math.sqrt(5) / 5, "beta_bar": 4 / 5, "vi_residual": -4 / 5}
    inst = MinMaxInstance.jointly_convex(obj, g, eps=eps, delta=delta, nu=0.0, name="eq-not-vi", claimed=claimed)
    return inst, (np.array([1.0]), np.array([0.0]))


def irrational_kakutani(nu: float = 0.0) -> CorrespondenceSpec:
    """``A(x, y) = [[1, 0], [-1, 0], [0, x], [0, -x]]``, ``b = (y, -y, 1/2, -1/2)``.

    Its only fixed point is ``x = y = 1/sqrt(2)``.
    """
    Z = np.zeros((2, 2))
    Bx = np.array([[0.0, 0.0], [1.0, 0.0]])   # z'_1 * z_0 = y' * x
    rows = (
        ConstraintPiece(Z, [1.0, 0.0], [0.0, -1.0], 0.0),
        ConstraintPiece(Z, [-1.0, 0.0], [0.0, 1.0], 0.0),
        ConstraintPiece(Bx, [0.0, 0.0], [0.0, 0.0], -0.5),
        ConstraintPiece(-Bx, [0.0, 0.0], [0.0, 0.0], 0.5),
    )
    return CorrespondenceSpec(2, rows, nu, name="irrational-kakutani")


def irrational_kakutani_qvi(nu: float = 0.0, eps: float = 0.0) -> QVIInstance:
    """The Kakutani instance as a QVI with the zero operator."""
    spec = irrational_kakutani(nu)
    return QVIInstance(spec, AffineOperator(np.zeros((2, 2)), np.zeros(2)), eps, L=1.0, name="irrational-kakutani",
                       claimed={"solution": [1 / math.sqrt(2), 1 / math.sqrt(2)]})


def nonexistence_instance(reading: str = "claimed", eps: float = 0.1, nu: float = 0.0) -> MinMaxInstance:
    """Bilinear-constraint instance whose only feasible point is (0, 0).

    ``printed``: minimiser tied by ``x = y``, maximiser by ``x y <= 0``, and
    ``f = 1 - x^2 / 2``; the minimiser then has no deviation at all.
    ``claimed``: the roles the non-existence argument needs, minimiser under
    ``x y <= 0`` and maximiser tied by ``x = y``, with ``f = 1 - x`` so that the
    deviation to ``x' = delta`` gains exactly delta.
    """
    if reading not in NONEXISTENCE_READINGS:
        raise ValueError(f"reading must be one of {NONEXISTENCE_READINGS}")
    delta = 5 * eps / 4
    tie = BilinearConstraintSet.inf_norm_ball(1, 0.0)
    prod = BilinearConstraintSet((ConstraintPiece([[1.0]], [0.0], [0.0], 0.0),))
    if reading == "printed":
        obj = QuadraticObjective(1, [[-0.5, 0.0], [0.0, 0.0]], [0.0, 0.0], 1.0)
        g1 = tie
        g2 = BilinearConstraintSet(prod.pieces, owner=2)
        gain = "delta**2/2"
    else:
        obj = QuadraticObjective(1, np.zeros((2, 2)), [-1.0, 0.0], 1.0)
        g1 = prod
        g2 = BilinearConstraintSet(tie.pieces, owner=2)
        gain = "delta"
    claimed = {"reading": reading, "feasible_points": [[0.0, 0.0]], "argument_gain": delta,
               "gain_formula": gain, "fails_at_nu0": reading == "claimed"}
    return MinMaxInstance(1, obj, g1, g2, eps=eps, delta=delta, nu=nu, kind="bilinear",
                          name=f"nonexistence-{reading}", claimed=claimed)


def matching_pennies(eps_star: float = EPS_STAR) -> PolymatrixGame:
    A12 = [[1.0, 0.0], [0.0, 1.0]]
    A21 = [[0.0, 1.0], [1.0, 0.0]]
    return PolymatrixGame(2, ((0, 1),), {(0, 1): A12, (1, 0): A21}, eps_star)


def triangle_independent_set(k: int = 2):
    return independent_set_localmin_instance(3, [(0, 1), (0, 2), (1, 2)], k)


def random_polymatrix(n: int, seed: int, max_degree: int = 3, eps_star: float = EPS_STAR) -> PolymatrixGame:
    """Uniform payoffs on a random graph of bounded degree.

    A random path over a shuffled vertex order keeps the graph connected;
    further random edges are added while both ends stay under the bound.
    """
    if n < 2:
        raise ValueError("need at least two players")
    if max_degree < 2:
        raise ValueError("max_degree must be at least 2")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    edges = {tuple(sorted((int(order[i]), int(order[i + 1])))) for i in range(n - 1)}
    deg = np.zeros(n, dtype=int)
    for i, j in edges:
        deg[i] += 1
        deg[j] += 1
    cand = [(i, j) for i in range(n) for j in range(i + 1, n) if (i, j) not in edges]
    for idx in rng.permutation(len(cand)):
        i, j = cand[idx]
        if deg[i] < max_degree and deg[j] < max_degree and rng.random() < 0.5:
            edges.add((i, j))
            deg[i] += 1
            deg[j] += 1
    payoffs = {}
    for i, j in sorted(edges):
        payoffs[(i, j)] = rng.random((2, 2))
        payoffs[(j, i)] = rng.random((2, 2))
    return PolymatrixGame(n, tuple(sorted(edges)), payoffs, eps_star)


def random_linearvi(d: int, seed: int, monotone: bool = False, rho: float = 0.01) -> LinearVIInstance:
    """Random D, c with every row and column l1 norm of D at most 1/2 and |c_i| <= 1/2.

    So ``|(D z + c)_i| <= 1`` on the box.  With ``monotone`` the matrix is a
    positive semidefinite part plus a skew part, hence ``D + D^T`` is PSD.
    """
    rng = np.random.default_rng(seed)
    if monotone:
        A = rng.uniform(-1, 1, (d, d))
        S = A @ A.T / d
        K = rng.uniform(-1, 1, (d, d))
        D = S + (K - K.T) / 2
    else:
        D = rng.uniform(-1, 1, (d, d))
    norm = max(np.abs(D).sum(axis=0).max(), np.abs(D).sum(axis=1).max(), 1e-12)
    D = D * (0.5 / norm)
    c = rng.uniform(-0.5, 0.5, d)
    return LinearVIInstance(D, c, rho, norm_certified=True)
