"""Verifiers turning candidate points into certificates."""
from __future__ import annotations

import math
from fractions import Fraction
from typing import Optional

import numpy as np

from . import kernels
from .core import (
    BilinearConstraintSet,
    Certificate,
    CorrespondenceSpec,
    LinearVIInstance,
    MinMaxInstance,
    QuadraticObjective,
    QVIInstance,
    feasible_set,
)
from .dynamics import residual as map_residual
from .errors import InfeasibleError, PromiseViolation
from .polytope import BoxPolytope, feasibility, lp_min

MEMBERSHIP_TOL = 1e-9


def _pt(v) -> np.ndarray:
    return np.asarray(v, dtype=float).reshape(-1)


# ---------------------------------------------------------------------------
# linear VI


def linearvi_residuals(D, c, z):
    """(full residual over the box, single-coordinate residual)."""
    z = _pt(z)
    g = np.asarray(D, float) @ z + np.asarray(c, float)
    per = np.minimum(g * (0.0 - z), g * (1.0 - z))
    return float(per.sum()), float(per.min(initial=0.0))


def verify_linearvi(vi: LinearVIInstance, z, tol: Optional[float] = None, single_component: bool = False) -> Certificate:
    """Closed-form VI residual; the box minimum splits over coordinates."""
    z = _pt(z)
    if z.shape != (vi.d,):
        raise ValueError("dimension mismatch")
    if np.any(z < 0) or np.any(z > 1):
        raise ValueError("z must lie in the unit box")
    tol = vi.rho if tol is None else tol
    full, single = linearvi_residuals(vi.D, vi.c, z)
    decisive = single if single_component else full
    return Certificate(
        concept="linearvi",
        passed=decisive >= -tol,
        residual=decisive,
        point={"z": z},
        method="closed-form-box",
        params={"rho": vi.rho, "tol": tol, "single_component": single_component},
        details={"full_residual": full, "single_component_residual": single},
    )


# ---------------------------------------------------------------------------
# QVI and Kakutani


def verify_qvi(qvi: QVIInstance, z, eps: Optional[float] = None, nu: Optional[float] = None,
               membership_tol: float = MEMBERSHIP_TOL) -> Certificate:
    """Membership ``z in Q_nu(z)`` plus the LP residual ``min F(z).(z' - z)``."""
    z = _pt(z)
    eps = qvi.eps if eps is None else eps
    nu = qvi.nu if nu is None else nu
    Q = qvi.correspondence.at(z, nu)
    member_gap = Q.row_violation(z)
    F = qvi.operator(z)
    try:
        zmin, val = lp_min(Q, F)
    except InfeasibleError as exc:
        raise InfeasibleError(f"Q_nu(z) is empty at z={z.tolist()}") from exc
    res = val - float(F @ z)
    member = member_gap <= membership_tol
    return Certificate(
        concept="qvi",
        passed=bool(member and res >= -eps),
        residual=res,
        point={"z": z},
        method="lp-simplex",
        params={"eps": eps, "nu": nu},
        details={"membership_violation": member_gap, "member": member, "minimiser": zmin, "F": F},
    )


def _exact_row_values(spec: CorrespondenceSpec, z):
    zf = [Fraction(float(t)) for t in z]
    out = []
    for r in spec.rows:
        B = [[Fraction(float(t)) for t in row] for row in r.B]
        val = Fraction(float(r.c))
        for i in range(spec.d):
            val += Fraction(float(r.b1[i])) * zf[i] + Fraction(float(r.b2[i])) * zf[i]
            for j in range(spec.d):
                val += zf[i] * B[i][j] * zf[j]
        out.append(val)
    return out


def verify_kakutani(spec: CorrespondenceSpec, z, nu: Optional[float] = None, exact: bool = True) -> Certificate:
    """``z in Q_nu(z)``, evaluated in exact rational arithmetic by default."""
    z = _pt(z)
    nu = spec.nu if nu is None else nu
    in_box = bool(np.all(z >= 0) and np.all(z <= 1))
    if exact:
        vals = _exact_row_values(spec, z)
        nu_f = Fraction(float(nu))
        worst = max((v - nu_f for v in vals), default=Fraction(-1))
        ok = in_box and all(v <= nu_f for v in vals)
        worst_f = float(worst)
    else:
        worst_f = spec.at(z, nu).row_violation(z)
        ok = in_box and worst_f <= MEMBERSHIP_TOL
    return Certificate(
        concept="kakutani",
        passed=bool(ok),
        residual=worst_f if spec.rows else 0.0,
        point={"z": z},
        method="exact-rational" if exact else "float-rows",
        params={"nu": nu},
        details={"max_row_excess": worst_f if spec.rows else None, "in_box": in_box},
    )


# ---------------------------------------------------------------------------
# local min-max


def _offset_ranges(center, step, radius, lo, hi, pad):
    R = int(math.floor(radius / step + 1e-9))
    k_lo = np.maximum(np.ceil((lo - center) / step - 1e-9).astype(int) - pad, -R)
    k_hi = np.minimum(np.floor((hi - center) / step + 1e-9).astype(int) + pad, R)
    return k_lo, k_hi


def deviation_points(center, step, radius, P: BoxPolytope, max_points: int = 4_000_000):
    """Lattice ``center + step * k`` inside the radius ball and inside P.

    Interval products are handled by clamping, which also reaches the faces
    of the slice; general polytopes keep the lattice points that satisfy
    every row.  The centre itself is always included.
    """
    center = _pt(center)
    d = center.shape[0]
    if radius <= 0 or step <= 0:
        return center[None, :]
    bounds = P.interval_bounds()
    if bounds is not None:
        lo, hi = bounds
        hi = np.maximum(hi, lo)
        k_lo, k_hi = _offset_ranges(center, step, radius, lo, hi, 1)
    else:
        k_lo, k_hi = _offset_ranges(center, step, radius, np.zeros(d), np.ones(d), 0)
    sizes = np.maximum(k_hi - k_lo + 1, 0)
    total = int(np.prod(sizes.astype(float)))
    if total > max_points:
        raise ValueError(f"deviation lattice has {total} points; use a coarser grid step")
    grids = np.meshgrid(*[np.arange(a, b + 1) for a, b in zip(k_lo, k_hi)], indexing="ij")
    K = np.stack([g.ravel() for g in grids], axis=1).astype(float)
    off = K * step
    off = off[np.einsum("ij,ij->i", off, off) <= radius * radius * (1 + 1e-12)]
    pts = center + off
    if bounds is not None:
        pts = np.clip(pts, lo, hi)
    else:
        keep = np.all((pts >= -1e-12) & (pts <= 1 + 1e-12), axis=1)
        if P.m:
            keep &= np.all(pts @ P.A.T <= P.beta + 1e-12, axis=1)
        pts = pts[keep]
    return np.vstack([center[None, :], pts])


def _segment(P: BoxPolytope, center, i, delta):
    """Feasible step range ``t`` for ``center + t e_i`` inside P and the delta ball."""
    lo_t, hi_t = max(-center[i], -delta), min(1 - center[i], delta)
    for a, b in zip(P.A, P.beta):
        slack = b - a @ center
        if a[i] > 0:
            hi_t = min(hi_t, slack / a[i])
        elif a[i] < 0:
            lo_t = max(lo_t, slack / a[i])
    # the centre is feasible up to rounding; keep t = 0 in range
    return min(lo_t, 0.0), max(hi_t, 0.0)


def _quad_extreme(g, h2, lo, hi, sign):
    """Min (sign=+1) or max (sign=-1) of ``g t + h2 t^2 / 2`` on [lo, hi]."""
    cands = [lo, hi, 0.0] if lo <= 0 <= hi else [lo, hi]
    if h2 != 0:
        t = -g / h2
        if lo <= t <= hi:
            cands.append(t)
    vals = [g * t + 0.5 * h2 * t * t for t in cands]
    return min(vals) if sign > 0 else max(vals)


def single_component_violations(inst: MinMaxInstance, x, y, delta: Optional[float] = None,
                                nu: Optional[float] = None):
    """Exact best single-coordinate gains of each player (quadratic objectives)."""
    obj = inst.objective
    if not isinstance(obj, QuadraticObjective):
        return None
    delta = inst.delta if delta is None else delta
    nu = inst.nu if nu is None else nu
    x, y = _pt(x), _pt(y)
    d = inst.d
    g = obj.gradient(x, y)
    H = obj.hessian
    K1 = feasible_set(inst.g1, y, 1, nu).cleaned()
    K2 = feasible_set(inst.g2, x, 2, nu).cleaned()
    v1 = v2 = 0.0
    for i in range(d):
        lo, hi = _segment(K1, x, i, delta)
        v1 = max(v1, -_quad_extreme(g[i], H[i, i], lo, hi, +1))
        lo, hi = _segment(K2, y, i, delta)
        v2 = max(v2, _quad_extreme(g[d + i], H[d + i, d + i], lo, hi, -1))
    return v1, v2


def _check_feasible(inst, x, y, nu):
    g1 = inst.g1.value(x, y)
    g2 = inst.g2.value(x, y)
    bad = max(g1, g2) > nu + MEMBERSHIP_TOL or np.any(x < -1e-12) or np.any(x > 1 + 1e-12) \
        or np.any(y < -1e-12) or np.any(y > 1 + 1e-12)
    if bad:
        raise InfeasibleError(f"probe point infeasible: g1={g1:.3g}, g2={g2:.3g}, nu={nu:.3g}")
    return g1, g2


def verify_local_minmax(inst: MinMaxInstance, x, y, grid_step: Optional[float] = None,
                        eps: Optional[float] = None, delta: Optional[float] = None,
                        nu: Optional[float] = None, max_points: int = 4_000_000) -> Certificate:
    """Grid check of the (eps, delta) local min-max conditions at (x, y)."""
    eps = inst.eps if eps is None else eps
    delta = inst.delta if delta is None else delta
    nu = inst.nu if nu is None else nu
    x, y = _pt(x), _pt(y)
    d = inst.d
    _check_feasible(inst, x, y, nu)
    step = grid_step if grid_step is not None else (delta / 8 if delta > 0 else 1.0)
    obj = inst.objective
    f0 = obj.value(x, y)
    K1 = feasible_set(inst.g1, y, 1, nu)
    K2 = feasible_set(inst.g2, x, 2, nu)
    X = deviation_points(x, step, delta, K1, max_points)
    vals = _values_fixed(obj, X, y, first=True)
    i1 = int(np.argmin(vals))
    w1 = max(0.0, f0 - float(vals[i1]))
    if obj.depends_on_y():
        Y = deviation_points(y, step, delta, K2, max_points)
        vals = _values_fixed(obj, Y, x, first=False)
        i2 = int(np.argmax(vals))
        w2 = max(0.0, float(vals[i2]) - f0)
        best2 = Y[i2]
        n2 = Y.shape[0]
    else:
        w2, best2, n2 = 0.0, y, 0
    single = single_component_violations(inst, x, y, delta, nu)
    G = inst.G if inst.G is not None else float("nan")
    slack = G * step * math.sqrt(d)
    worst = max(w1, w2)
    passed = worst <= eps and (single is None or max(single) <= eps)
    return Certificate(
        concept="local-minmax",
        passed=bool(passed),
        residual=worst,
        point={"x": x, "y": y},
        method="deviation-lattice",
        params={"eps": eps, "delta": delta, "nu": nu, "grid_step": step},
        details={
            "violation_min_player": w1,
            "violation_max_player": w2,
            "best_min_deviation": X[i1],
            "best_max_deviation": best2,
            "lattice_points": [int(X.shape[0]), int(n2)],
            "grid_slack": slack,
            "single_component": None if single is None else {"min_player": single[0], "max_player": single[1]},
        },
    )


def _values_fixed(obj, P, other, first: bool, chunk: int = 200_000):
    out = np.empty(P.shape[0])
    for s in range(0, P.shape[0], chunk):
        blk = P[s : s + chunk]
        rep = np.broadcast_to(other, blk.shape)
        Z = np.hstack([blk, rep]) if first else np.hstack([rep, blk])
        out[s : s + chunk] = obj.values(Z)
    return out


def verify_gda_fixed_point(inst: MinMaxInstance, x, y, alpha: float, map_kind: str = "gda") -> Certificate:
    """Residual of the projected descent-ascent map compared with alpha."""
    x, y = _pt(x), _pt(y)
    g1 = inst.g1.value(x, y)
    g2 = inst.g2.value(x, y)
    feasible = max(g1, g2) <= inst.nu + MEMBERSHIP_TOL
    r = map_residual(inst, x, y, map_kind)
    return Certificate(
        concept="gda",
        passed=bool(feasible and r <= alpha),
        residual=r,
        point={"x": x, "y": y},
        method=f"{map_kind}-map",
        params={"alpha": alpha, "nu": inst.nu},
        details={"feasible": bool(feasible), "g1": g1, "g2": g2},
    )


def _midpoint_convex(obj, y, d, trials=1000, seed=0) -> bool:
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        a, b = rng.random(d), rng.random(d)
        if obj.value(0.5 * (a + b), y) > 0.5 * (obj.value(a, y) + obj.value(b, y)) + 1e-12:
            return False
    return True


def verify_globalization(inst: MinMaxInstance, x, y, eps: Optional[float] = None, delta: Optional[float] = None,
                         grid_step: float = 0.01) -> Certificate:
    """Global optimality of x over the whole slice, up to the bound ``eps sqrt(d) / delta``."""
    eps = inst.eps if eps is None else eps
    delta = inst.delta if delta is None else delta
    x, y = _pt(x), _pt(y)
    d = inst.d
    obj = inst.objective
    if isinstance(obj, QuadraticObjective):
        if not obj.x_block_psd():
            raise ValueError("objective is not convex in x")
    elif not _midpoint_convex(obj, y, d):
        raise ValueError("objective failed the midpoint convexity probe")
    bound = eps * math.sqrt(d) / delta if delta > 0 else math.inf
    K1 = feasible_set(inst.g1, y, 1, inst.nu)
    f0 = obj.value(x, y)
    if isinstance(obj, QuadraticObjective) and obj.is_linear_in_x():
        gx = obj.gradient(x, y)[:d]
        zmin, val = lp_min(K1, gx)
        gap = float(gx @ x - val)
        method, slack, best = "lp-simplex", 0.0, zmin
    else:
        P = deviation_points(x, grid_step, math.sqrt(d) + grid_step, K1)
        vals = _values_fixed(obj, P, y, first=True)
        k = int(np.argmin(vals))
        gap = max(0.0, f0 - float(vals[k]))
        G = inst.G if inst.G is not None else float("nan")
        method, slack, best = "grid", G * grid_step * math.sqrt(d), P[k]
    return Certificate(
        concept="global",
        passed=bool(gap <= bound),
        residual=gap,
        point={"x": x, "y": y},
        method=method,
        params={"eps": eps, "delta": delta, "bound": bound},
        details={"grid_slack": slack, "best_deviation": best},
    )


# ---------------------------------------------------------------------------
# grid search oracle


def rows_array(rows):
    """Stack interval-form row tuples into the five kernel arrays."""
    if not rows:
        return (np.zeros(0, dtype=np.int64), np.zeros((0, 0)), np.zeros(0), np.zeros((0, 0)), np.zeros(0))
    var = np.array([r[0] for r in rows], dtype=np.int64)
    return (var, np.array([r[1] for r in rows], float), np.array([r[2] for r in rows], float),
            np.array([r[3] for r in rows], float), np.array([r[4] for r in rows], float))


def slice_interval_rows(gset: BilinearConstraintSet, player: int):
    """Interval form of a player's slice rows, or None if some piece couples coordinates."""
    rows = []
    d = gset.d
    for p in gset.pieces:
        if player == 1:
            active = np.flatnonzero(np.any(p.B != 0, axis=1) | (p.b1 != 0))
        else:
            active = np.flatnonzero(np.any(p.B != 0, axis=0) | (p.b2 != 0))
        if active.size > 1:
            return None
        var = int(active[0]) if active.size else -1
        if player == 1:
            coef_z = p.B[var] if var >= 0 else np.zeros(d)
            coef0 = p.b1[var] if var >= 0 else 0.0
            rows.append((var, coef_z, coef0, p.b2, -p.c))
        else:
            coef_z = p.B[:, var] if var >= 0 else np.zeros(d)
            coef0 = p.b2[var] if var >= 0 else 0.0
            rows.append((var, coef_z, coef0, p.b1, -p.c))
    return rows_array(rows)


def ball_offsets(d: int, step: float, radius: float) -> np.ndarray:
    R = int(math.floor(radius / step + 1e-9))
    K = np.stack(np.meshgrid(*([np.arange(-R, R + 1)] * d), indexing="ij"), axis=-1).reshape(-1, d) * step
    return K[np.einsum("ij,ij->i", K, K) <= radius * radius * (1 + 1e-12)]


def grid_search_local_minmax(inst: MinMaxInstance, grid_count: int = 200, dev_steps: int = 6,
                             max_restarts: int = 1000) -> Certificate:
    """Brute-force scan of the grid for an (eps, delta) local min-max point.

    The scan tests clamped lattice deviations of spacing ``delta / dev_steps``;
    the first passing candidate is re-checked by verify_local_minmax (which
    adds the exact single-coordinate test) and the scan resumes if it fails.
    """
    obj = inst.objective
    if not isinstance(obj, QuadraticObjective):
        raise ValueError("grid search needs a quadratic objective")
    rows1 = slice_interval_rows(inst.g1, 1)
    rows2 = slice_interval_rows(inst.g2, 2)
    if rows1 is None or rows2 is None:
        raise ValueError("grid search needs interval-product slices")
    d = inst.d
    step = inst.delta / dev_steps if inst.delta > 0 else 1.0
    offsets = ball_offsets(d, step, inst.delta) if inst.delta > 0 else np.zeros((1, d))
    start, scanned = 0, 0
    for _ in range(max_restarts):
        idx, x, y, w1, w2, scanned = kernels.grid_scan(
            obj.M, obj.h, obj.k, d, grid_count, rows1, rows2, inst.nu, offsets, inst.eps, start)
        if idx < 0:
            break
        cert = verify_local_minmax(inst, x, y, grid_step=step)
        if cert.passed:
            details = dict(cert.details)
            details.update({
                "grid_count": grid_count,
                "candidate_index": int(idx),
                "candidate_grid_slack": (inst.G or 0.0) * math.sqrt(d) / grid_count,
                "backend": kernels.BACKEND,
            })
            return Certificate(cert.concept, True, cert.residual, cert.point, "grid-search", cert.params, details)
        start = idx + 1
    return Certificate(
        concept="local-minmax",
        passed=False,
        residual=float("nan"),
        point={},
        method="grid-search",
        params={"eps": inst.eps, "delta": inst.delta, "nu": inst.nu, "grid_step": step},
        details={"grid_count": grid_count, "scanned": int(scanned), "backend": kernels.BACKEND},
    )
