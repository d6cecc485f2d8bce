"""Box-bounded polytopes: projection, linear minimisation, feasibility.

Every polytope here is ``{z in [0,1]^d : A z <= beta}``.  The LP solver is a
dense tableau simplex with Bland's rule; projection uses exact closed forms
where they exist and Dykstra's alternating projections otherwise.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, InfeasibleError

ZERO_ROW_TOL = 1e-14
FEAS_TOL = 1e-9
_PIVOT_TOL = 1e-11


@dataclass(frozen=True, eq=False)
class BoxPolytope:
    """Rows ``A[j] @ z <= beta[j]`` intersected with the unit box."""

    A: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=float, ndmin=2)
        beta = np.array(self.beta, dtype=float).reshape(-1)
        if A.size == 0:
            A = A.reshape(0, A.shape[1] if A.ndim == 2 else 0)
        if A.shape[0] != beta.shape[0]:
            raise ValueError(f"{A.shape[0]} rows but {beta.shape[0]} right-hand sides")
        A.setflags(write=False)
        beta.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "beta", beta)

    @classmethod
    def box(cls, d: int) -> "BoxPolytope":
        return cls(np.zeros((0, d)), np.zeros(0))

    @classmethod
    def from_intervals(cls, lo, hi) -> "BoxPolytope":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        d = lo.shape[0]
        eye = np.eye(d)
        return cls(np.vstack([eye, -eye]), np.concatenate([hi, -lo]))

    @property
    def d(self) -> int:
        return self.A.shape[1]

    @property
    def m(self) -> int:
        return self.A.shape[0]

    def relax(self, nu: float) -> "BoxPolytope":
        return BoxPolytope(self.A, self.beta + nu)

    def intersect(self, other: "BoxPolytope") -> "BoxPolytope":
        return BoxPolytope(np.vstack([self.A, other.A]), np.concatenate([self.beta, other.beta]))

    def cleaned(self) -> "BoxPolytope":
        """Drop all-zero rows; raise if one of them reads ``0 <= negative``."""
        zero = np.all(np.abs(self.A) <= ZERO_ROW_TOL, axis=1)
        if np.any(self.beta[zero] < 0):
            raise InfeasibleError("degenerate row 0 <= beta with beta < 0")
        if not zero.any():
            return self
        return BoxPolytope(self.A[~zero], self.beta[~zero])

    def row_violation(self, z) -> float:
        """Largest violation of the rows and of the box (0 when feasible)."""
        z = np.asarray(z, dtype=float)
        v = max(0.0, float(np.max(-z, initial=0.0)), float(np.max(z - 1.0, initial=0.0)))
        if self.m:
            v = max(v, float(np.max(self.A @ z - self.beta)))
        return v

    def contains(self, z, tol: float = FEAS_TOL) -> bool:
        return self.row_violation(z) <= tol

    def interval_bounds(self):
        """Return ``(lo, hi)`` when every row involves a single variable.

        Returns None when some row couples two or more coordinates.  Raises
        InfeasibleError on a degenerate infeasible row.  ``lo > hi`` in some
        coordinate signals an empty product.
        """
        P = self.cleaned()
        lo = np.zeros(P.d)
        hi = np.ones(P.d)
        for a, b in zip(P.A, P.beta):
            nz = np.flatnonzero(np.abs(a) > ZERO_ROW_TOL)
            if nz.size > 1:
                return None
            i = nz[0]
            if a[i] > 0:
                hi[i] = min(hi[i], b / a[i])
            else:
                lo[i] = max(lo[i], b / a[i])
        return lo, hi

    def to_dict(self) -> dict:
        return {"A": self.A.tolist(), "beta": self.beta.tolist()}


def project_box(p) -> np.ndarray:
    """Componentwise clamp to the unit box."""
    return np.clip(np.asarray(p, dtype=float), 0.0, 1.0)


# ---------------------------------------------------------------------------
# dense simplex


class _Tableau:
    """Standard-form tableau for ``A z <= beta, 0 <= z <= 1``.

    Columns: z (d), row slacks (m), upper-bound slacks (d), artificials.
    """

    def __init__(self, A: np.ndarray, beta: np.ndarray):
        m, d = A.shape
        self.d, self.m = d, m
        n_nat = d + m + d
        neg = np.flatnonzero(beta < 0)
        n_art = neg.size
        rows = m + d
        T = np.zeros((rows, n_nat + n_art))
        rhs = np.zeros(rows)
        T[:m, :d] = A
        T[:m, d : d + m] = np.eye(m)
        rhs[:m] = beta
        T[m:, :d] = np.eye(d)
        T[m:, d + m : n_nat] = np.eye(d)
        rhs[m:] = 1.0
        basis = list(range(d, d + m)) + list(range(d + m, n_nat))
        for k, r in enumerate(neg):
            T[r] *= -1.0
            rhs[r] *= -1.0
            T[r, n_nat + k] = 1.0
            basis[r] = n_nat + k
        self.T, self.rhs, self.basis = T, rhs, basis
        self.n_nat, self.n_art = n_nat, n_art
        self.banned = np.zeros(T.shape[1], dtype=bool)

    def pivot(self, r: int, j: int) -> None:
        T, rhs = self.T, self.rhs
        piv = T[r, j]
        T[r] /= piv
        rhs[r] /= piv
        col = T[:, j].copy()
        col[r] = 0.0
        nz = np.flatnonzero(col)
        if nz.size:
            T[nz] -= np.outer(col[nz], T[r])
            rhs[nz] -= col[nz] * rhs[r]
        T[:, j] = 0.0
        T[r, j] = 1.0
        self.basis[r] = j

    def reduced_costs(self, cost: np.ndarray) -> np.ndarray:
        cb = cost[self.basis]
        return cost - cb @ self.T

    def optimise(self, cost: np.ndarray, max_pivots: int = 100000) -> None:
        """Minimise ``cost`` over the current basis with Bland's rule."""
        for _ in range(max_pivots):
            r_cost = self.reduced_costs(cost)
            r_cost[self.banned] = 0.0
            r_cost[self.basis] = 0.0
            cand = np.flatnonzero(r_cost < -_PIVOT_TOL)
            if cand.size == 0:
                return
            j = int(cand[0])
            col = self.T[:, j]
            pos = np.flatnonzero(col > _PIVOT_TOL)
            if pos.size == 0:
                raise ConvergenceError("unbounded LP on a bounded domain")
            ratios = self.rhs[pos] / col[pos]
            best = ratios.min()
            ties = pos[ratios <= best + 1e-13 * max(1.0, abs(best))]
            r = int(min(ties, key=lambda t: self.basis[t]))
            self.pivot(r, j)
        raise ConvergenceError("simplex pivot budget exhausted")

    def phase_one(self) -> bool:
        if self.n_art == 0:
            self.banned[self.n_nat :] = True
            return True
        cost = np.zeros(self.T.shape[1])
        cost[self.n_nat :] = 1.0
        self.optimise(cost)
        infeas = float(cost[self.basis] @ self.rhs)
        if infeas > 1e-9:
            return False
        # drive artificials out of the basis
        for r in range(len(self.basis)):
            if self.basis[r] >= self.n_nat:
                row = self.T[r, : self.n_nat]
                nz = np.flatnonzero(np.abs(row) > _PIVOT_TOL)
                if nz.size:
                    self.pivot(r, int(nz[0]))
        self.banned[self.n_nat :] = True
        return True

    def point(self) -> np.ndarray:
        x = np.zeros(self.T.shape[1])
        x[self.basis] = self.rhs
        return np.clip(x[: self.d], 0.0, 1.0)

    def restrict_to_optimal_face(self, cost: np.ndarray) -> None:
        r_cost = self.reduced_costs(cost)
        nonbasic = np.ones(self.T.shape[1], dtype=bool)
        nonbasic[self.basis] = False
        self.banned |= nonbasic & (r_cost > 1e-9)


def _simplex(P: BoxPolytope, objectives) -> np.ndarray | None:
    """Lexicographic minimisation of the objective sequence; None if empty."""
    P = P.cleaned()
    tab = _Tableau(P.A, P.beta)
    if not tab.phase_one():
        return None
    n_cols = tab.T.shape[1]
    for obj in objectives:
        cost = np.zeros(n_cols)
        cost[: P.d] = obj
        tab.optimise(cost)
        tab.restrict_to_optimal_face(cost)
    return tab.point()


def lp_min(P: BoxPolytope, cost, lexicographic: bool = True):
    """Minimise ``cost @ z`` over P; return ``(vertex, value)``.

    Ties between optimal vertices go to the lexicographically smallest one
    when ``lexicographic`` is set.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.shape != (P.d,):
        raise ValueError(f"cost has shape {cost.shape}, expected ({P.d},)")
    bounds = P.interval_bounds()
    if bounds is not None:
        lo, hi = bounds
        if np.any(lo > hi + FEAS_TOL):
            raise InfeasibleError("empty interval product")
        hi = np.maximum(hi, lo)
        z = np.where(cost < 0, hi, lo)
        return z, float(cost @ z)
    objectives = [cost]
    if lexicographic:
        objectives += list(np.eye(P.d))
    z = _simplex(P, objectives)
    if z is None:
        raise InfeasibleError("polytope is empty")
    return z, float(cost @ z)


def feasibility(P: BoxPolytope):
    """A feasible point of P, or None when P is empty."""
    try:
        bounds = P.interval_bounds()
    except InfeasibleError:
        return None
    if bounds is not None:
        lo, hi = bounds
        return None if np.any(lo > hi + FEAS_TOL) else lo.copy()
    return _simplex(P, [])


def min_relaxation(P: BoxPolytope) -> float:
    """Smallest ``t >= 0`` with ``{A z <= beta + t} ∩ box`` non-empty."""
    P0 = P
    if P0.m == 0:
        return 0.0
    # variables (z, t/(1+t)) keep the extra unknown inside [0, 1]
    scale = 1.0 + float(np.max(np.abs(P0.beta), initial=0.0)) + float(np.abs(P0.A).sum(axis=1).max())
    A = np.hstack([P0.A, -scale * np.ones((P0.m, 1))])
    Q = BoxPolytope(A, P0.beta)
    z, _ = lp_min(Q, np.r_[np.zeros(P0.d), 1.0], lexicographic=False)
    t = max(0.0, float(np.max(P0.A @ z[:-1] - P0.beta)))
    return t


# ---------------------------------------------------------------------------
# projection


def _project_halfspace_box(p, a, b):
    """Exact projection onto ``{a @ x <= b} ∩ [0,1]^d``; None if empty.

    Breakpoint search on ``x(lam) = clip(p - lam a)``, whose image under
    ``a @ .`` is piecewise linear and non-increasing in lam.
    """
    x0 = np.clip(p, 0.0, 1.0)
    if a @ x0 <= b:
        return x0
    nz = np.abs(a) > ZERO_ROW_TOL
    if not nz.any():
        return None
    # value as lam -> infinity
    x_inf = np.where(a > 0, 0.0, np.where(a < 0, 1.0, x0))
    if a @ x_inf > b + 1e-12:
        return None
    bps = np.concatenate([(p[nz] - 0.0) / a[nz], (p[nz] - 1.0) / a[nz]])
    bps = np.unique(bps[bps > 0])
    lam_prev, g_prev = 0.0, a @ x0
    for lam in bps:
        g = a @ np.clip(p - lam * a, 0.0, 1.0)
        if g <= b:
            # linear on [lam_prev, lam]
            t = (g_prev - b) / (g_prev - g) if g_prev != g else 1.0
            lam_star = lam_prev + t * (lam - lam_prev)
            return np.clip(p - lam_star * a, 0.0, 1.0)
        lam_prev, g_prev = lam, g
    # beyond the last breakpoint the map is constant
    return x_inf


def _project_two_rows(p, A2, b2, tol):
    """Projection onto two half-spaces and the box by dual coordinate ascent."""
    lam = np.zeros(2)
    x = np.clip(p, 0.0, 1.0)
    for _ in range(10000):
        lam_old = lam.copy()
        for j in range(2):
            shift = p - A2[1 - j] * lam[1 - j]
            a, b = A2[j], b2[j]
            x_j = np.clip(shift, 0.0, 1.0)
            if a @ x_j <= b:
                lam[j] = 0.0
                continue
            y = _project_halfspace_box(shift, a, b)
            if y is None:
                return None
            nz = np.abs(a) > ZERO_ROW_TOL
            # recover the multiplier from a coordinate strictly inside the box
            inner = nz & (y > 1e-12) & (y < 1 - 1e-12)
            if inner.any():
                i = np.flatnonzero(inner)[0]
                lam[j] = max(0.0, (shift[i] - y[i]) / a[i])
            else:
                lam[j] = _multiplier_by_bisection(shift, a, b)
        x = np.clip(p - A2.T @ lam, 0.0, 1.0)
        if np.max(np.abs(lam - lam_old)) <= tol * 1e-3:
            break
    return x


def _multiplier_by_bisection(shift, a, b):
    lo, hi = 0.0, 1.0
    while a @ np.clip(shift - hi * a, 0.0, 1.0) > b and hi < 1e12:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if a @ np.clip(shift - mid * a, 0.0, 1.0) > b:
            lo = mid
        else:
            hi = mid
    return hi


def _dykstra(p, A, beta, tol, max_sweeps):
    x = np.clip(p, 0.0, 1.0)
    m = A.shape[0]
    inc = np.zeros((m + 1, p.shape[0]))
    norms = np.einsum("ij,ij->i", A, A)
    for sweep in range(max_sweeps):
        x_prev = x.copy()
        y = x + inc[m]
        x = np.clip(y, 0.0, 1.0)
        inc[m] = y - x
        for j in range(m):
            y = x + inc[j]
            s = A[j] @ y - beta[j]
            x = y - (s / norms[j]) * A[j] if s > 0 else y
            inc[j] = y - x
        if np.linalg.norm(x - x_prev) <= 0.1 * tol:
            x_c = np.clip(x, 0.0, 1.0)
            if m == 0 or np.max(A @ x_c - beta) <= tol:
                return x_c
    raise ConvergenceError(f"Dykstra did not converge in {max_sweeps} sweeps")


def project_polytope(P: BoxPolytope, p, tol: float = 1e-9, max_sweeps: int = 100000) -> np.ndarray:
    """Euclidean projection of ``p`` onto P, accurate to about ``tol``."""
    p = np.asarray(p, dtype=float)
    if p.shape != (P.d,):
        raise ValueError(f"point has shape {p.shape}, expected ({P.d},)")
    P = P.cleaned()
    bounds = P.interval_bounds()
    if bounds is not None:
        lo, hi = bounds
        if np.any(lo > hi + FEAS_TOL):
            raise InfeasibleError("empty interval product")
        return np.clip(p, lo, np.maximum(lo, hi))
    x = np.clip(p, 0.0, 1.0)
    viol = P.A @ x - P.beta
    if np.all(viol <= 0):
        return x
    if feasibility(P) is None:
        raise InfeasibleError("polytope is empty")
    order = np.argsort(-viol)
    tried = []
    for j in order:
        if viol[j] <= 0 and len(tried) >= 1:
            break
        y = _project_halfspace_box(p, P.A[j], P.beta[j])
        if y is not None and P.contains(y, tol):
            return y
        tried.append(j)
    for j, k in itertools.combinations(order[: min(len(order), 6)], 2):
        y = _project_two_rows(p, P.A[[j, k]], P.beta[[j, k]], tol)
        if y is not None and P.contains(y, tol):
            return y
    return _dykstra(p, P.A, P.beta, tol, max_sweeps)


# ---------------------------------------------------------------------------
# Hausdorff probes


def _sample_vertices(P: BoxPolytope, samples: int, rng) -> np.ndarray:
    bounds = P.interval_bounds()
    if bounds is not None and P.d <= 12:
        lo, hi = bounds
        hi = np.maximum(lo, hi)
        corners = np.array(list(itertools.product((0, 1), repeat=P.d)), dtype=float)
        return lo + corners * (hi - lo)
    pts = []
    for _ in range(samples):
        z, _ = lp_min(P, rng.standard_normal(P.d), lexicographic=False)
        pts.append(z)
    return np.unique(np.round(np.array(pts), 12), axis=0)


def one_sided_hausdorff(Pa: BoxPolytope, Pb: BoxPolytope, samples: int = 64, seed: int = 0) -> float:
    """Max over sampled vertices of Pa of the distance to Pb.

    Distance to a convex set is convex, so its supremum over Pa sits at a
    vertex; with enough samples (or exactly, for interval products in low
    dimension) this reaches the one-sided Hausdorff distance.
    """
    if feasibility(Pa) is None or feasibility(Pb) is None:
        raise InfeasibleError("both polytopes must be non-empty")
    rng = np.random.default_rng(seed)
    best = 0.0
    for v in _sample_vertices(Pa, samples, rng):
        q = project_polytope(Pb, v)
        best = max(best, float(np.linalg.norm(v - q)))
    return best


def hausdorff(Pa: BoxPolytope, Pb: BoxPolytope, samples: int = 64, seed: int = 0) -> float:
    return max(one_sided_hausdorff(Pa, Pb, samples, seed), one_sided_hausdorff(Pb, Pa, samples, seed))
