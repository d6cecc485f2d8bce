"""Sperner-based QVI solver on the Kuhn triangulation of the unit cube."""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional

import numpy as np

from . import kernels
from .core import Certificate, QVIInstance
from .errors import InfeasibleError, PromiseViolation
from .polytope import feasibility, min_relaxation, project_polytope
from .verify import rows_array, verify_qvi

SCAN_BUDGET = 10**8
EMPTY_POLICIES = ("raise", "relax")


@dataclass(frozen=True)
class SpernerGrid:
    d: int
    count: int

    def __post_init__(self):
        if self.d < 1 or self.count < 1:
            raise ValueError("need d >= 1 and a positive grid count")

    @property
    def mu(self) -> Fraction:
        return Fraction(1, self.count)

    def vertex(self, idx) -> np.ndarray:
        return np.asarray(idx, dtype=float) / self.count

    def n_simplices(self) -> int:
        return math.factorial(self.d) * self.count**self.d


@dataclass(frozen=True)
class SpernerSolverParams:
    eta: float
    gamma: float
    grid_count: int
    L: float = 1.0
    d: int = 1

    @property
    def mu(self) -> float:
        return 1.0 / self.grid_count

    @property
    def ell(self) -> float:
        return _ell(self.d, self.mu, self.L, self.gamma, self.eta)

    @property
    def kappa(self) -> float:
        return 2 * self.L * self.d * self.mu / self.gamma

    @property
    def omega(self) -> float:
        return _omega(self.d, self.mu, self.kappa, self.ell, self.eta)


def _ell(d, mu, L, gamma, eta):
    return 2 * d * mu * (4 * L * math.sqrt(d) / gamma + L + eta)


def _omega(d, mu, kappa, ell, eta):
    return math.sqrt(d) * (mu + kappa + math.sqrt(2 * ell / eta))


@dataclass(frozen=True)
class ReferenceParams:
    eta: float
    mu: float
    gamma: float
    ell: float
    kappa: float
    omega: float
    membership_lhs: float
    residual_lhs: float
    terms: tuple
    tractable: bool

    def inequalities_hold(self, nu: float, eps: float) -> bool:
        return self.membership_lhs <= nu and self.residual_lhs <= eps


def reference_params(d: int, eps: float, nu: float, L: float) -> ReferenceParams:
    """Worst-case (eta, mu, gamma) making the grid fine enough for an (eps, nu) solution."""
    if eps <= 0 or nu <= 0 or L <= 0:
        raise ValueError("eps, nu and L must be positive")
    r = math.sqrt(2 * d * L)
    terms = (
        1.0,
        L,
        d**0.25,
        math.sqrt(nu / 2),
        r,
        L ** (-1 / 8),
        1 / (8 * d**2 * math.sqrt(2 * L)),
        1 / (2 * (d * r) ** (1 / 3)),
        eps / (24 * d**3 * r),
    )
    eta = min(terms)
    mu = eta**9
    gamma = eta**2
    ell = _ell(d, mu, L, gamma, eta)
    kappa = 2 * L * d * mu / gamma
    omega = _omega(d, mu, kappa, ell, eta)
    sd = math.sqrt(d)
    mem = gamma + sd * omega
    res = (eta / 2) * omega**2 + sd * (1 + eta) * omega + d * sd * omega / gamma
    log_cells = -d * math.log10(mu) + math.log10(math.factorial(d))
    return ReferenceParams(eta, mu, gamma, ell, kappa, omega, mem, res, terms, log_cells <= math.log10(SCAN_BUDGET))


# ---------------------------------------------------------------------------
# selector and colouring


def proximal_selector(qvi: QVIInstance, z, gamma: float, eta: float, empty: str = "raise"):
    """Projection of ``z - F(z) / eta`` onto ``Q_gamma(z)``.

    Returns ``(p, t)`` where t is the relaxation actually used: gamma, or the
    smallest level making the slice non-empty when ``empty="relax"``.
    """
    if empty not in EMPTY_POLICIES:
        raise ValueError(f"empty must be one of {EMPTY_POLICIES}")
    z = np.asarray(z, dtype=float).reshape(-1)
    t = gamma
    Q = qvi.correspondence.at(z, t)
    if feasibility(Q) is None:
        if empty == "raise":
            raise PromiseViolation(f"Q_gamma(z) is empty at z={z.tolist()}")
        t = max(gamma, min_relaxation(qvi.correspondence.at(z, 0.0)))
        Q = qvi.correspondence.at(z, t)
        if feasibility(Q) is None:
            t *= 1 + 1e-9
            Q = qvi.correspondence.at(z, t + 1e-12)
    try:
        p = project_polytope(Q, z - qvi.operator(z) / eta)
    except InfeasibleError as exc:
        raise PromiseViolation(str(exc)) from exc
    return p, t


def sperner_color(v, p) -> int:
    """Colour of a grid vertex from its selector value (see colors_from_displacement)."""
    v = np.asarray(v, dtype=float).reshape(1, -1)
    p = np.asarray(p, dtype=float).reshape(1, -1)
    return int(kernels.colors_from_displacement(v, p)[0])


def kuhn_simplices(grid: SpernerGrid) -> Iterator[tuple]:
    """Every simplex as a tuple of integer vertex coordinates, in scan order."""
    d, N = grid.d, grid.count
    perms = list(itertools.permutations(range(d)))
    for base in itertools.product(range(N), repeat=d):
        for perm in perms:
            cur = list(base)
            verts = [tuple(cur)]
            for axis in perm:
                cur[axis] += 1
                verts.append(tuple(cur))
            yield tuple(verts)


def _interval_rows(qvi: QVIInstance):
    if not qvi.is_affine():
        return None
    form = qvi.correspondence.interval_form()
    if form is None:
        return None
    return rows_array(form)


def _chunks(total: int, threads: int):
    size = max(1, -(-total // max(1, threads)))
    return [(s, min(total, s + size)) for s in range(0, total, size)]


def grid_colors(qvi: QVIInstance, params: SpernerSolverParams, threads: int = 1, empty: str = "relax"):
    """Colours of every grid vertex (C order) and the number of relaxed slices."""
    d, N = qvi.d, params.grid_count
    total = (N + 1) ** d
    rows = _interval_rows(qvi)
    parts = _chunks(total, threads)
    if rows is not None:
        D, cF = qvi.F.D, qvi.F.c

        def work(span):
            return kernels.color_interval_grid(N, d, rows, D, cF, params.eta, params.gamma, span[0], span[1])
    else:
        def work(span):
            V = kernels.grid_vertices(N, d, span[0], span[1])
            P = np.empty_like(V)
            relaxed = 0
            for i, v in enumerate(V):
                P[i], t = proximal_selector(qvi, v, params.gamma, params.eta, empty)
                relaxed += t > params.gamma
            return kernels.colors_from_displacement(V, P), relaxed

    if threads > 1 and len(parts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, parts))
    else:
        results = [work(s) for s in parts]
    colors = np.concatenate([r[0] for r in results])
    relaxed = sum(int(r[1]) for r in results)
    if rows is not None and relaxed and empty == "raise":
        raise PromiseViolation(f"{relaxed} grid vertices have an empty Q_gamma")
    return colors, relaxed, ("interval-kernel" if rows is not None else "generic")


def _selector_many(qvi, V, params, empty):
    rows = _interval_rows(qvi)
    if rows is not None:
        P, _ = kernels.interval_selector(V, rows, qvi.F.D, qvi.F.c, params.eta, params.gamma)
        return P
    return np.array([proximal_selector(qvi, v, params.gamma, params.eta, empty)[0] for v in V])


@dataclass(frozen=True)
class PanchromaticResult:
    vertices: np.ndarray      # (d+1, d) integer lattice coordinates
    colors: tuple
    base: tuple
    perm: tuple
    relaxed: int
    coloring: str

    def points(self, grid_count: int) -> np.ndarray:
        return self.vertices / grid_count


def find_panchromatic(qvi: QVIInstance, params: SpernerSolverParams, threads: int = 1,
                      empty: str = "relax") -> PanchromaticResult:
    """First panchromatic simplex of the Kuhn triangulation in lexicographic order."""
    d, N = qvi.d, params.grid_count
    grid = SpernerGrid(d, N)
    if grid.n_simplices() > SCAN_BUDGET:
        raise ValueError(f"scan of {grid.n_simplices()} simplices exceeds the budget of {SCAN_BUDGET}")
    colors, relaxed, how = grid_colors(qvi, params, threads, empty)
    perms = np.array(list(itertools.permutations(range(d))), dtype=np.int64)
    base_flat, pi = kernels.first_panchromatic(colors, N, d, perms)
    if base_flat < 0:
        raise RuntimeError("no panchromatic simplex found; the colouring breaks the boundary rules")
    base = np.array(np.unravel_index(base_flat, (N,) * d))
    verts = [base.copy()]
    for axis in perms[pi]:
        nxt = verts[-1].copy()
        nxt[axis] += 1
        verts.append(nxt)
    verts = np.array(verts)
    flat = np.ravel_multi_index(verts.T, (N + 1,) * d)
    return PanchromaticResult(verts, tuple(int(c) for c in colors[flat]), tuple(int(b) for b in base),
                              tuple(int(a) for a in perms[pi]), relaxed, how)


def solve_qvi(qvi: QVIInstance, params: SpernerSolverParams, eps: Optional[float] = None,
              nu: Optional[float] = None, threads: int = 1, empty: str = "relax") -> Certificate:
    """Run the Sperner search and LP-verify the colour-0 vertex."""
    res = find_panchromatic(qvi, params, threads, empty)
    V = res.points(params.grid_count)
    P = _selector_many(qvi, V, params, empty)
    k0 = res.colors.index(0)
    v0 = V[k0]
    cert = verify_qvi(qvi, v0, eps, nu)
    spread = float(max(np.linalg.norm(P[k0] - P[i]) for i in range(len(V))))
    details = dict(cert.details)
    details.update({
        "simplex": res.vertices,
        "colors": list(res.colors),
        "selector_values": P,
        "relaxed_vertices": res.relaxed,
        "coloring": res.coloring,
        "selector_spread": spread,
        "selector_spread_bound": params.kappa + math.sqrt(2 * params.ell / params.eta),
        "inclusion_gap": float(np.linalg.norm(P[k0] - v0)),
        "inclusion_bound": params.omega,
        "backend": kernels.BACKEND,
    })
    p = dict(cert.params)
    p.update({"eta": params.eta, "gamma": params.gamma, "grid": params.grid_count, "mu": params.mu})
    return Certificate("qvi", cert.passed, cert.residual, {"z": v0}, "sperner+lp", p, details)
