"""Domain types: linear VIs, min-max instances, correspondences, QVIs, games.

All types are immutable after construction.  Numpy arrays stored on them are
made read-only, so instances can be shared freely between threads.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InfeasibleError
from .polytope import BoxPolytope

CONSTRAINT_KINDS = ("product", "jointly-convex", "bilinear")


def _frozen(a, shape=None) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if shape is not None:
        arr = arr.reshape(shape)
    arr.setflags(write=False)
    return arr


def _vec(v, d: int, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape[0] != d:
        raise ValueError(f"{name} has length {v.shape[0]}, expected {d}")
    return v


# ---------------------------------------------------------------------------
# linear VI


@dataclass(frozen=True, eq=False)
class LinearVIInstance:
    """Affine operator ``z -> D z + c`` on the unit hypercube."""

    D: np.ndarray
    c: np.ndarray
    rho: float
    norm_certified: bool = False

    def __post_init__(self):
        D = _frozen(self.D)
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise ValueError("D must be square")
        c = _frozen(self.c, (-1,))
        if c.shape[0] != D.shape[0]:
            raise ValueError("c and D dimensions differ")
        if np.any(np.abs(D) > 1) or np.any(np.abs(c) > 1):
            raise ValueError("entries of D and c must lie in [-1, 1]")
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.norm_certified and not norms_certified(D):
            raise ValueError("norm_certified set but a row or column l1 norm exceeds 1")
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "c", c)

    @property
    def d(self) -> int:
        return self.D.shape[0]

    def operator(self, z) -> np.ndarray:
        return self.D @ _vec(z, self.d, "z") + self.c


def norms_certified(D, tol: float = 1e-12) -> bool:
    """True when every row and column of D has l1 norm at most 1."""
    D = np.asarray(D, dtype=float)
    if D.size == 0:
        return True
    return bool(np.abs(D).sum(axis=0).max() <= 1 + tol and np.abs(D).sum(axis=1).max() <= 1 + tol)


# ---------------------------------------------------------------------------
# objectives


@dataclass(frozen=True, eq=False)
class QuadraticObjective:
    """``f(x, y) = z^T M z + h^T z + k`` with ``z = (x, y)``."""

    d: int
    M: np.ndarray
    h: np.ndarray
    k: float = 0.0
    source: Optional[dict] = None

    def __post_init__(self):
        n = 2 * self.d
        object.__setattr__(self, "M", _frozen(self.M, (n, n)))
        object.__setattr__(self, "h", _frozen(self.h, (n,)))
        object.__setattr__(self, "k", float(self.k))

    @property
    def hessian(self) -> np.ndarray:
        return self.M + self.M.T

    def value(self, x, y) -> float:
        z = np.concatenate([_vec(x, self.d, "x"), _vec(y, self.d, "y")])
        return float(z @ self.M @ z + self.h @ z + self.k)

    def values(self, Z: np.ndarray) -> np.ndarray:
        """Vectorised evaluation on the rows of ``Z`` (shape ``(n, 2d)``)."""
        return np.einsum("ni,ij,nj->n", Z, self.M, Z) + Z @ self.h + self.k

    def gradient(self, x, y) -> np.ndarray:
        z = np.concatenate([_vec(x, self.d, "x"), _vec(y, self.d, "y")])
        return self.hessian @ z + self.h

    def smoothness(self) -> float:
        """Spectral norm of the Hessian: the exact gradient Lipschitz constant."""
        return float(np.linalg.norm(self.hessian, 2))

    def gradient_bound(self) -> float:
        """Max of the gradient norm over the box (exact for 2d <= 16)."""
        n = 2 * self.d
        H = self.hessian
        if n <= 16:
            corners = np.array(list(itertools.product((0.0, 1.0), repeat=n)))
            return float(np.linalg.norm(corners @ H.T + self.h, axis=1).max())
        return float(np.linalg.norm(np.abs(H).sum(axis=1) + np.abs(self.h)))

    def depends_on_y(self) -> bool:
        d = self.d
        H = self.hessian
        return bool(np.any(H[d:, :] != 0) or np.any(self.h[d:] != 0))

    def x_block_psd(self, tol: float = 1e-12) -> bool:
        Hx = self.hessian[: self.d, : self.d]
        return bool(np.linalg.eigvalsh(Hx).min() >= -tol)

    def is_linear_in_x(self) -> bool:
        return bool(np.all(self.hessian[: self.d, : self.d] == 0))


@dataclass(frozen=True, eq=False)
class CallableObjective:
    """Opaque objective with user-declared bounds; never certified."""

    d: int
    f: Callable[[np.ndarray, np.ndarray], float]
    grad: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def value(self, x, y) -> float:
        return float(self.f(np.asarray(x, float), np.asarray(y, float)))

    def values(self, Z: np.ndarray) -> np.ndarray:
        d = self.d
        return np.array([self.value(z[:d], z[d:]) for z in Z])

    def gradient(self, x, y) -> np.ndarray:
        return np.asarray(self.grad(np.asarray(x, float), np.asarray(y, float)), dtype=float)

    def depends_on_y(self) -> bool:
        return True


def zero_objective(d: int) -> QuadraticObjective:
    return QuadraticObjective(d, np.zeros((2 * d, 2 * d)), np.zeros(2 * d), 0.0)


# ---------------------------------------------------------------------------
# constraints


@dataclass(frozen=True, eq=False)
class ConstraintPiece:
    """``x^T B y + b1^T x + b2^T y + c``."""

    B: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    c: float

    def __post_init__(self):
        B = _frozen(self.B)
        d = B.shape[0]
        object.__setattr__(self, "B", B.reshape(d, d))
        object.__setattr__(self, "b1", _frozen(self.b1, (d,)))
        object.__setattr__(self, "b2", _frozen(self.b2, (d,)))
        object.__setattr__(self, "c", float(self.c))

    def value(self, x, y) -> float:
        return float(x @ self.B @ y + self.b1 @ x + self.b2 @ y + self.c)

    def is_linear(self) -> bool:
        return not np.any(self.B)


@dataclass(frozen=True, eq=False)
class BilinearConstraintSet:
    """``g(x, y) = max_j piece_j(x, y)``; feasibility reads ``g <= nu``."""

    pieces: tuple
    owner: int = 1

    def __post_init__(self):
        pieces = tuple(self.pieces)
        if not pieces:
            raise ValueError("a constraint set needs at least one piece")
        d = pieces[0].B.shape[0]
        if any(p.B.shape[0] != d for p in pieces):
            raise ValueError("pieces disagree on dimension")
        if self.owner not in (1, 2):
            raise ValueError("owner must be 1 or 2")
        object.__setattr__(self, "pieces", pieces)

    @property
    def d(self) -> int:
        return self.pieces[0].B.shape[0]

    @classmethod
    def unconstrained(cls, d: int, owner: int = 1) -> "BilinearConstraintSet":
        z = np.zeros(d)
        return cls((ConstraintPiece(np.zeros((d, d)), z, z, -1.0),), owner)

    @classmethod
    def linear(cls, rows, owner: int = 1) -> "BilinearConstraintSet":
        """Pieces from ``(ax, ay, c)`` triples meaning ``ax.x + ay.y + c``."""
        pieces = []
        for ax, ay, c in rows:
            ax = np.asarray(ax, float)
            pieces.append(ConstraintPiece(np.zeros((ax.size, ax.size)), ax, ay, c))
        return cls(tuple(pieces), owner)

    @classmethod
    def inf_norm_ball(cls, d: int, radius: float, owner: int = 1) -> "BilinearConstraintSet":
        """``||x - y||_inf <= radius`` as 2d linear pieces."""
        rows = []
        for i in range(d):
            e = np.zeros(d)
            e[i] = 1.0
            rows.append((e, -e, -radius))
            rows.append((-e, e, -radius))
        return cls.linear(rows, owner)

    def value(self, x, y) -> float:
        x = _vec(x, self.d, "x")
        y = _vec(y, self.d, "y")
        return max(p.value(x, y) for p in self.pieces)

    def is_linear(self) -> bool:
        return all(p.is_linear() for p in self.pieces)

    def same_as(self, other: "BilinearConstraintSet") -> bool:
        if self is other:
            return True
        if len(self.pieces) != len(other.pieces):
            return False
        return all(
            np.array_equal(p.B, q.B) and np.array_equal(p.b1, q.b1) and np.array_equal(p.b2, q.b2) and p.c == q.c
            for p, q in zip(self.pieces, other.pieces)
        )

    def slice_rows(self, fixed, player: int):
        """Rows ``(a, beta0)`` over the free player's variable: ``a.v <= beta0 + nu``."""
        fixed = _vec(fixed, self.d, "fixed point")
        A, beta = [], []
        for p in self.pieces:
            if player == 1:
                A.append(p.B @ fixed + p.b1)
                beta.append(-(p.b2 @ fixed) - p.c)
            else:
                A.append(p.B.T @ fixed + p.b2)
                beta.append(-(p.b1 @ fixed) - p.c)
        return np.array(A), np.array(beta)


def feasible_set(gset: BilinearConstraintSet, fixed, player: int, nu: float = 0.0) -> BoxPolytope:
    """Slice of ``{g <= nu}`` in the free player's variable.

    ``player=1`` fixes y and returns rows in x; ``player=2`` fixes x and
    returns rows in y.  Degenerate rows survive; the polytope module drops or
    rejects them.
    """
    if player not in (1, 2):
        raise ValueError("player must be 1 or 2")
    A, beta = gset.slice_rows(fixed, player)
    return BoxPolytope(A, beta + nu)


# ---------------------------------------------------------------------------
# min-max instances


@dataclass(frozen=True, eq=False)
class MinMaxInstance:
    d: int
    objective: object
    g1: BilinearConstraintSet
    g2: BilinearConstraintSet
    eps: float
    delta: float
    nu: float = 0.0
    kind: str = "product"
    G: Optional[float] = None
    L: Optional[float] = None
    lr: bool = False
    name: str = ""
    claimed: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in CONSTRAINT_KINDS:
            raise ValueError(f"kind must be one of {CONSTRAINT_KINDS}")
        if self.objective.d != self.d or self.g1.d != self.d or self.g2.d != self.d:
            raise ValueError("dimension mismatch between objective and constraints")
        if self.kind == "jointly-convex":
            if not self.g1.same_as(self.g2):
                raise ValueError("jointly-convex instances need g1 = g2")
            if not self.g1.is_linear():
                raise ValueError("jointly-convex instances cannot have bilinear pieces")
        if self.eps < 0 or self.delta < 0 or self.nu < 0:
            raise ValueError("eps, delta and nu must be non-negative")
        if self.G is None and isinstance(self.objective, QuadraticObjective):
            object.__setattr__(self, "G", self.objective.gradient_bound())
        if self.L is None and isinstance(self.objective, QuadraticObjective):
            object.__setattr__(self, "L", self.objective.smoothness())
        if self.lr and not self.in_local_regime():
            raise ValueError("flagged LR but delta >= sqrt(2 eps / L)")

    @classmethod
    def jointly_convex(cls, objective, g: BilinearConstraintSet, **kw) -> "MinMaxInstance":
        return cls(objective.d, objective, g, g, kind="jointly-convex", **kw)

    def in_local_regime(self) -> bool:
        if not self.L:
            return True
        return self.delta < math.sqrt(2 * self.eps / self.L)

    def with_params(self, **kw) -> "MinMaxInstance":
        fields = dict(
            d=self.d, objective=self.objective, g1=self.g1, g2=self.g2, eps=self.eps, delta=self.delta,
            nu=self.nu, kind=self.kind, G=self.G, L=self.L, lr=self.lr, name=self.name, claimed=self.claimed,
        )
        fields.update(kw)
        return MinMaxInstance(**fields)

    def joint_polytope(self, nu: Optional[float] = None) -> BoxPolytope:
        """K over (x, y) for jointly-convex instances."""
        if self.kind != "jointly-convex":
            raise ValueError("joint polytope only exists for jointly-convex instances")
        nu = self.nu if nu is None else nu
        A = np.array([np.concatenate([p.b1, p.b2]) for p in self.g1.pieces])
        beta = np.array([nu - p.c for p in self.g1.pieces])
        return BoxPolytope(A, beta)


def eval_objective(inst: MinMaxInstance, x, y) -> float:
    return inst.objective.value(_vec(x, inst.d, "x"), _vec(y, inst.d, "y"))


def pseudo_gradient(inst: MinMaxInstance, x, y) -> np.ndarray:
    """``(grad_x f, -grad_y f)`` stacked."""
    g = inst.objective.gradient(_vec(x, inst.d, "x"), _vec(y, inst.d, "y"))
    g = np.array(g, dtype=float)
    g[inst.d :] *= -1.0
    return g


def eval_constraint(gset: BilinearConstraintSet, x, y) -> float:
    return gset.value(x, y)


# ---------------------------------------------------------------------------
# correspondences and QVIs


@dataclass(frozen=True, eq=False)
class CorrespondenceSpec:
    """``Q_nu(z) = {z' in [0,1]^d : z'^T B_j z + b1_j.z' + b2_j.z + c_j <= nu}``."""

    d: int
    rows: tuple
    nu: float = 0.0
    name: str = ""

    def __post_init__(self):
        rows = tuple(self.rows)
        for r in rows:
            if r.B.shape[0] != self.d:
                raise ValueError("row dimension mismatch")
        if self.nu < 0:
            raise ValueError("nu must be non-negative")
        object.__setattr__(self, "rows", rows)

    def A(self, z) -> np.ndarray:
        z = _vec(z, self.d, "z")
        if not self.rows:
            return np.zeros((0, self.d))
        return np.array([r.B @ z + r.b1 for r in self.rows])

    def b(self, z) -> np.ndarray:
        z = _vec(z, self.d, "z")
        return np.array([-(r.b2 @ z) - r.c for r in self.rows])

    def at(self, z, nu: Optional[float] = None) -> BoxPolytope:
        nu = self.nu if nu is None else nu
        return BoxPolytope(self.A(z), self.b(z) + nu)

    def with_nu(self, nu: float) -> "CorrespondenceSpec":
        return CorrespondenceSpec(self.d, self.rows, nu, self.name)

    def interval_form(self):
        """Per-row ``(var, coef_z, coef0, beta_z, beta0)`` when single-variable.

        Each row reads ``(coef_z . z + coef0) * z'_var <= beta0 - beta_z . z + nu``.
        ``var`` is -1 for rows that never involve z'.  Returns None when some
        row couples several coordinates of z'.
        """
        out = []
        for r in self.rows:
            active = np.flatnonzero(np.any(r.B != 0, axis=1) | (r.b1 != 0))
            if active.size > 1:
                return None
            var = int(active[0]) if active.size else -1
            coef_z = r.B[var] if var >= 0 else np.zeros(self.d)
            coef0 = r.b1[var] if var >= 0 else 0.0
            out.append((var, coef_z, float(coef0), r.b2, float(-r.c)))
        return out

    def probe_nonempty(self, samples: int = 64, seed: int = 0):
        """Best-effort check of the promise that Q_0(z) is never empty.

        Returns the list of sampled z whose Q_0(z) was found empty.
        """
        from .polytope import feasibility

        rng = np.random.default_rng(seed)
        bad = []
        for z in rng.random((samples, self.d)):
            try:
                ok = feasibility(self.at(z, 0.0)) is not None
            except InfeasibleError:
                ok = False
            if not ok:
                bad.append(z)
        return bad


@dataclass(frozen=True, eq=False)
class AffineOperator:
    D: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "D", _frozen(self.D))
        object.__setattr__(self, "c", _frozen(self.c, (-1,)))

    @property
    def d(self) -> int:
        return self.c.shape[0]

    def __call__(self, z) -> np.ndarray:
        return self.D @ np.asarray(z, dtype=float) + self.c

    def bound(self) -> float:
        """Max of the Euclidean norm over the box (exact for d <= 16)."""
        d = self.d
        if d <= 16:
            corners = np.array(list(itertools.product((0.0, 1.0), repeat=d)))
            return float(np.linalg.norm(corners @ self.D.T + self.c, axis=1).max())
        return float(np.linalg.norm(np.abs(self.D).sum(axis=1) + np.abs(self.c)))


@dataclass(frozen=True, eq=False)
class QVIInstance:
    correspondence: CorrespondenceSpec
    F: object
    eps: float
    L: float = 1.0
    G: Optional[float] = None
    name: str = ""
    claimed: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.G is None and isinstance(self.F, AffineOperator):
            object.__setattr__(self, "G", self.F.bound())

    @property
    def d(self) -> int:
        return self.correspondence.d

    @property
    def nu(self) -> float:
        return self.correspondence.nu

    def operator(self, z) -> np.ndarray:
        return np.asarray(self.F(np.asarray(z, dtype=float)), dtype=float)

    def is_affine(self) -> bool:
        return isinstance(self.F, AffineOperator)


# ---------------------------------------------------------------------------
# polymatrix games


@dataclass(frozen=True, eq=False)
class PolymatrixGame:
    """Two actions per player; ``payoffs[(i, j)][s_i, s_j]`` is player i's payoff."""

    n: int
    edges: tuple
    payoffs: dict
    eps_star: float = 0.088
    degree_bounded: bool = True

    def __post_init__(self):
        edges = tuple(sorted((min(i, j), max(i, j)) for i, j in self.edges))
        if len(set(edges)) != len(edges):
            raise ValueError("duplicate edge")
        pay = {}
        for i, j in edges:
            if i == j or not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"bad edge {(i, j)}")
            for key in ((i, j), (j, i)):
                P = _frozen(self.payoffs[key])
                if P.shape != (2, 2):
                    raise ValueError("only two actions per player are supported")
                if np.any(P < 0) or np.any(P > 1):
                    raise ValueError("payoff entries must lie in [0, 1]")
                pay[key] = P
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "payoffs", pay)
        if self.degree_bounded and max(self.degrees(), default=0) > 3:
            raise ValueError("degree-bounded game has a vertex of degree > 3")

    def degrees(self) -> list:
        deg = [0] * self.n
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def neighbours(self, i: int) -> list:
        return [j for a, b in self.edges for j in ((b,) if a == i else (a,) if b == i else ())]

    def utility(self, i: int, x) -> float:
        """Expected payoff of player i when ``x[j]`` is the probability of action 0."""
        x = np.asarray(x, dtype=float)
        u = 0.0
        for j in self.neighbours(i):
            pi = np.array([x[i], 1 - x[i]])
            pj = np.array([x[j], 1 - x[j]])
            u += float(pi @ self.payoffs[(i, j)] @ pj)
        return u

    def regrets(self, x) -> np.ndarray:
        """Best pure-deviation gain of every player."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(self.n)
        for i in range(self.n):
            base = self.utility(i, x)
            best = base
            for a in (0.0, 1.0):
                xd = x.copy()
                xd[i] = a
                best = max(best, self.utility(i, xd))
            out[i] = best - base
        return out


# ---------------------------------------------------------------------------
# certificates


@dataclass(frozen=True)
class Certificate:
    concept: str
    passed: bool
    residual: float
    point: dict
    method: str
    params: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "concept": self.concept,
            "passed": bool(self.passed),
            "residual": float(self.residual),
            "point": {k: [float(t) for t in np.ravel(v)] for k, v in self.point.items()},
            "method": self.method,
            "params": _plain(self.params),
            "details": _plain(self.details),
        }


def _plain(obj):
    """Convert numpy containers to JSON-friendly Python objects."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def as_points(v: Sequence[float]) -> np.ndarray:
    return np.asarray(v, dtype=float).reshape(-1)
