"""Instance transformations between games, VIs, min-max problems and QVIs."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import (
    AffineOperator,
    BilinearConstraintSet,
    Certificate,
    ConstraintPiece,
    CorrespondenceSpec,
    LinearVIInstance,
    MinMaxInstance,
    PolymatrixGame,
    QuadraticObjective,
    QVIInstance,
    norms_certified,
    _plain,
)
from .verify import grid_search_local_minmax, linearvi_residuals

EPS_STAR = 0.088
JC_G_PER_SQRT_D = 5.0
JC_L = 7.0
BIL_G_PER_SQRT_D = 3.0
BIL_L = 1.0


@dataclass(frozen=True)
class ReductionTrace:
    source: str
    target: str
    constants: dict
    pullback: str
    payload: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _plain({"source": self.source, "target": self.target, "constants": self.constants,
                       "pullback": self.pullback, "payload": self.payload})

    @classmethod
    def from_dict(cls, doc: dict) -> "ReductionTrace":
        return cls(doc["source"], doc["target"], dict(doc["constants"]), doc["pullback"], dict(doc.get("payload", {})))


# ---------------------------------------------------------------------------
# polymatrix -> linear VI


def edge_coefficients(P) -> tuple:
    """``(alpha, beta)`` with ``U = alpha x_i x_j + beta x_i + (terms free of x_i)``.

    For payoff matrix ``[[a, b], [c, d]]`` (rows: own action, columns: the
    neighbour's action, action 0 played with probability x),
    ``alpha = a - b - c + d`` and ``beta = b - d``.
    """
    (a, b), (c, d) = np.asarray(P, dtype=float)
    return a - b - c + d, b - d


def polymatrix_to_linearvi(game: PolymatrixGame):
    n = game.n
    D = np.zeros((n, n))
    c = np.zeros(n)
    for i, j in game.edges:
        for s, t in ((i, j), (j, i)):
            alpha, beta = edge_coefficients(game.payoffs[(s, t)])
            D[s, t] = -alpha / 6.0
            c[s] -= beta / 6.0
    rho = game.eps_star / 6.0
    certified = max(game.degrees(), default=0) <= 3 and norms_certified(D)
    vi = LinearVIInstance(D, c, rho, norm_certified=certified)
    trace = ReductionTrace("polymatrix", "linearvi", {"rho_star": rho, "eps_star": game.eps_star},
                           "probability-of-first-action", {"n": n})
    return vi, trace


def linearvi_solution_to_polymatrix(z, game: PolymatrixGame, trace: Optional[ReductionTrace] = None) -> Certificate:
    """Read z_i as the probability of action 0 and measure exact regrets."""
    z = np.clip(np.asarray(z, dtype=float).reshape(-1), 0.0, 1.0)
    reg = game.regrets(z)
    worst = float(reg.max(initial=0.0))
    return Certificate(
        concept="polymatrix",
        passed=worst <= game.eps_star,
        residual=worst,
        point={"z": z},
        method="pure-deviation-regret",
        params={"eps_star": game.eps_star},
        details={"regrets": reg},
    )


# ---------------------------------------------------------------------------
# linear VI -> min-max gadgets


def jc_constants(gamma: float, rho: float) -> dict:
    return {
        "gamma": gamma,
        "rho_star": rho,
        "Delta": rho / 4,
        "delta": gamma * rho / 15,
        "eps": gamma * rho**2 / 60,
        "nu": 0.0,
    }


def bilinear_constants(gamma: float, rho: float, d: int) -> dict:
    delta = gamma * rho / 15
    return {
        "gamma": gamma,
        "rho_star": rho,
        "delta": delta,
        "eps": gamma * rho**2 / 60,
        "nu": rho * delta / (4 * d),
    }


def _check_gadget_input(vi: LinearVIInstance, gamma: float):
    if not vi.norm_certified:
        raise ValueError("the gadgets need a norm-certified LinearVI instance")
    if not 0 < gamma <= 1:
        raise ValueError("gamma must lie in (0, 1]")


def jc_objective(D, c) -> QuadraticObjective:
    """``f(x, y) = (x - y)^T (D x + c)``."""
    D = np.asarray(D, dtype=float)
    c = np.asarray(c, dtype=float)
    d = c.shape[0]
    Z = np.zeros((d, d))
    M = np.block([[D, Z], [-D, Z]])
    return QuadraticObjective(d, M, np.concatenate([c, -c]), 0.0,
                              source={"evaluator": "gadget-jc", "D": D.tolist(), "c": c.tolist()})


def bilinear_objective(D, c) -> QuadraticObjective:
    """``f(x, y) = x^T (D y + c)``."""
    D = np.asarray(D, dtype=float)
    c = np.asarray(c, dtype=float)
    d = c.shape[0]
    Z = np.zeros((d, d))
    M = np.block([[Z, D], [Z, Z]])
    return QuadraticObjective(d, M, np.concatenate([c, np.zeros(d)]), 0.0,
                              source={"evaluator": "gadget-bilinear", "D": D.tolist(), "c": c.tolist()})


def linearvi_to_jc_minmax(vi: LinearVIInstance, gamma: float = 1.0):
    _check_gadget_input(vi, gamma)
    d = vi.d
    k = jc_constants(gamma, vi.rho)
    g = BilinearConstraintSet.inf_norm_ball(d, k["Delta"])
    G = JC_G_PER_SQRT_D * math.sqrt(d)
    inst = MinMaxInstance.jointly_convex(
        jc_objective(vi.D, vi.c), g, eps=k["eps"], delta=k["delta"], nu=0.0, G=G, L=JC_L, lr=True,
        name="gadget-jc", claimed={"G": G, "L": JC_L},
    )
    trace = ReductionTrace("linearvi", "minmax-jc", k, "x-component",
                           {"D": vi.D, "c": vi.c, "rho": vi.rho, "d": d,
                            "bound": 2 * (k["eps"] / k["delta"] + k["Delta"])})
    return inst, trace


def linearvi_to_bilinear_minmax(vi: LinearVIInstance, gamma: float = 1.0):
    _check_gadget_input(vi, gamma)
    d = vi.d
    k = bilinear_constants(gamma, vi.rho, d)
    g1 = BilinearConstraintSet.unconstrained(d, owner=1)
    g2 = BilinearConstraintSet.inf_norm_ball(d, 0.0, owner=2)
    G = BIL_G_PER_SQRT_D * math.sqrt(d)
    inst = MinMaxInstance(
        d, bilinear_objective(vi.D, vi.c), g1, g2, eps=k["eps"], delta=k["delta"], nu=k["nu"],
        kind="bilinear", G=G, L=BIL_L, lr=True, name="gadget-bilinear", claimed={"G": G, "L": BIL_L},
    )
    trace = ReductionTrace("linearvi", "minmax-bilinear", k, "x-component",
                           {"D": vi.D, "c": vi.c, "rho": vi.rho, "d": d,
                            "bound": (k["eps"] + 2 * d * k["nu"]) / k["delta"]})
    return inst, trace


def minmax_solution_to_linearvi(x, y, trace: ReductionTrace) -> Certificate:
    """Pull a min-max point back to the VI: keep x, check single-coordinate deviations."""
    x = np.asarray(x, dtype=float).reshape(-1)
    D = np.asarray(trace.payload["D"], dtype=float)
    c = np.asarray(trace.payload["c"], dtype=float)
    rho = float(trace.payload["rho"])
    full, single = linearvi_residuals(D, c, x)
    return Certificate(
        concept="linearvi",
        passed=single >= -rho,
        residual=single,
        point={"z": x},
        method="single-component",
        params={"rho": rho},
        details={"full_residual": full, "guaranteed_bound": -float(trace.payload.get("bound", rho)),
                 "gadget": trace.target},
    )


# ---------------------------------------------------------------------------
# min-max -> QVI


def _embed_rows(inst: MinMaxInstance):
    d = inst.d
    Z = np.zeros((d, d))
    z = np.zeros(d)
    rows = []
    for p in inst.g1.pieces:
        rows.append(ConstraintPiece(np.block([[Z, p.B], [Z, Z]]), np.r_[p.b1, z], np.r_[z, p.b2], p.c))
    for p in inst.g2.pieces:
        rows.append(ConstraintPiece(np.block([[Z, Z], [p.B.T, Z]]), np.r_[z, p.b2], np.r_[p.b1, z], p.c))
    return rows


def _pseudo_gradient_operator(inst: MinMaxInstance):
    obj = inst.objective
    d = inst.d
    S = np.r_[np.ones(d), -np.ones(d)]
    if isinstance(obj, QuadraticObjective):
        return AffineOperator(S[:, None] * obj.hessian, S * obj.h)

    def F(z):
        return S * obj.gradient(z[:d], z[d:])

    return F


def minmax_to_qvi(inst: MinMaxInstance, eps: Optional[float] = None) -> QVIInstance:
    """QVI with the pseudo-gradient and ``Q(x, y) = K1(y) x K2(x)``."""
    spec = CorrespondenceSpec(2 * inst.d, tuple(_embed_rows(inst)), inst.nu, name=f"{inst.name}-slices")
    return QVIInstance(spec, _pseudo_gradient_operator(inst), inst.eps if eps is None else eps,
                       L=spec_lipschitz(spec), name=f"{inst.name}-qvi")


def minmax_to_vi(inst: MinMaxInstance, eps: Optional[float] = None) -> QVIInstance:
    """VI over the joint set K of a jointly-convex instance (constant correspondence)."""
    if inst.kind != "jointly-convex":
        raise ValueError("only jointly-convex instances have a joint set")
    n = 2 * inst.d
    rows = tuple(ConstraintPiece(np.zeros((n, n)), np.r_[p.b1, p.b2], np.zeros(n), p.c) for p in inst.g1.pieces)
    spec = CorrespondenceSpec(n, rows, inst.nu, name=f"{inst.name}-joint")
    return QVIInstance(spec, _pseudo_gradient_operator(inst), inst.eps if eps is None else eps,
                       L=0.0, name=f"{inst.name}-vi")


def spec_lipschitz(spec: CorrespondenceSpec) -> float:
    """Larger of the Lipschitz constants of ``z -> A(z) z'`` and ``z -> b(z)``, rowwise."""
    import itertools

    L = 0.0
    corners = None
    if spec.d <= 12:
        corners = np.array(list(itertools.product((0.0, 1.0), repeat=spec.d)))
    for r in spec.rows:
        if corners is not None:
            la = float(np.linalg.norm(corners @ r.B, axis=1).max())
        else:
            la = float(np.linalg.norm(np.abs(r.B).sum(axis=0)))
        L = max(L, la, float(np.linalg.norm(r.b2)))
    return L


def gnep_to_qvi(n: int, l: int, utilities: Sequence[QuadraticObjective | tuple], gammas: Sequence[Sequence[tuple]],
                nu: float = 0.0, eps: float = 0.0) -> QVIInstance:
    """Stack negated own-gradients and the product of the players' constraint maps.

    ``utilities[i]`` is ``(M, h, k)`` over the full profile z (length n*l).
    ``gammas[i]`` lists rows ``(B, b1, b2, c)`` meaning
    ``x_i'^T B z + b1 . x_i' + b2 . z + c <= nu`` with B of shape (l, n*l);
    rows must not depend on player i's own block.
    """
    d = n * l
    if len(utilities) != n or len(gammas) != n:
        raise ValueError("need one utility and one constraint list per player")
    Dm = np.zeros((d, d))
    cv = np.zeros(d)
    rows = []
    concave = []
    for i in range(n):
        blk = slice(i * l, (i + 1) * l)
        M, h, _ = utilities[i]
        M = np.asarray(M, dtype=float).reshape(d, d)
        h = np.asarray(h, dtype=float).reshape(d)
        H = M + M.T
        Dm[blk] = -H[blk]
        cv[blk] = -h[blk]
        concave.append(bool(np.linalg.eigvalsh(H[blk, blk]).max() <= 1e-12))
        for B, b1, b2, c in gammas[i]:
            B = np.asarray(B, dtype=float).reshape(l, d)
            b1 = np.asarray(b1, dtype=float).reshape(l)
            b2 = np.asarray(b2, dtype=float).reshape(d)
            if np.any(B[:, blk] != 0) or np.any(b2[blk] != 0):
                raise ValueError(f"constraint row of player {i} depends on the player's own strategy")
            Bf = np.zeros((d, d))
            Bf[blk] = B
            b1f = np.zeros(d)
            b1f[blk] = b1
            rows.append(ConstraintPiece(Bf, b1f, b2, c))
    spec = CorrespondenceSpec(d, tuple(rows), nu, name="gnep")
    return QVIInstance(spec, AffineOperator(Dm, cv), eps, L=spec_lipschitz(spec), name="gnep-qvi",
                       claimed={"own_concave": concave})


# ---------------------------------------------------------------------------
# independent set


def independent_set_localmin_instance(n_vertices: int, edges, k: int):
    """Local-min instance whose zero point is a local minimum iff no k-independent set exists."""
    d = n_vertices
    if not 0 <= k <= d:
        raise ValueError("need 0 <= k <= |V|")
    M = np.zeros((2 * d, 2 * d))
    for i, j in edges:
        M[i, j] += 1.0 / d**3
    h = np.r_[-np.ones(d), np.zeros(d)]
    obj = QuadraticObjective(d, M, h, 0.0)
    g1 = BilinearConstraintSet.linear([(np.ones(d), np.zeros(d), -float(k))], owner=1)
    g2 = BilinearConstraintSet.unconstrained(d, owner=2)
    eps = max(k - d**-8.0, 0.0)
    delta = math.sqrt(k)
    L = obj.smoothness()
    inst = MinMaxInstance(d, obj, g1, g2, eps=eps, delta=delta, nu=0.0, kind="product",
                          name="indep-set", claimed={"L_max": 1.0 / d, "edges": [list(e) for e in edges], "k": k})
    return inst, np.zeros(d)


# ---------------------------------------------------------------------------
# end-to-end harness


def polymatrix_pipeline(game: PolymatrixGame, gadget: str = "jc", gamma: float = 1.0, grid_count: int = 200,
                        dev_steps: int = 6, grid_slack: float = 0.02) -> dict:
    """Game -> LinearVI -> gadget -> grid search -> pull back -> regret."""
    vi, t_vi = polymatrix_to_linearvi(game)
    if gadget == "jc":
        inst, t_mm = linearvi_to_jc_minmax(vi, gamma)
    elif gadget == "bilinear":
        inst, t_mm = linearvi_to_bilinear_minmax(vi, gamma)
    else:
        raise ValueError("gadget must be 'jc' or 'bilinear'")
    found = grid_search_local_minmax(inst, grid_count, dev_steps)
    out = {"vi": vi, "instance": inst, "traces": [t_vi, t_mm], "search": found}
    if not found.passed:
        out.update(passed=False, regret=float("nan"))
        return out
    x = np.asarray(found.point["x"])
    back = minmax_solution_to_linearvi(x, found.point["y"], t_mm)
    poly = linearvi_solution_to_polymatrix(back.point["z"], game, t_vi)
    regret = poly.residual
    out.update(pullback=back, polymatrix=poly, regret=regret,
               passed=bool(regret <= game.eps_star + grid_slack), tolerance=game.eps_star + grid_slack)
    return out
