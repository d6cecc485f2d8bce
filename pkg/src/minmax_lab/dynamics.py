"""Projected descent-ascent maps, iteration drivers and parameter conversions."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import LinearVIInstance, MinMaxInstance, feasible_set, pseudo_gradient
from .errors import InfeasibleError, PromiseViolation
from .polytope import project_box, project_polytope

MAP_KINDS = ("gda", "sgda")


def _split(inst: MinMaxInstance, x, y):
    x = np.asarray(x, dtype=float).reshape(inst.d)
    y = np.asarray(y, dtype=float).reshape(inst.d)
    return x, y


def gda_map(inst: MinMaxInstance, x, y):
    """Unit-step projected descent for x and ascent for y, projecting per player."""
    x, y = _split(inst, x, y)
    g = pseudo_gradient(inst, x, y)
    K1 = feasible_set(inst.g1, y, 1, inst.nu)
    K2 = feasible_set(inst.g2, x, 2, inst.nu)
    try:
        xp = project_polytope(K1, x - g[: inst.d])
        yp = project_polytope(K2, y - g[inst.d :])
    except InfeasibleError as exc:
        raise PromiseViolation(f"empty constraint slice at ({x}, {y}): {exc}") from exc
    return xp, yp


def sgda_map(inst: MinMaxInstance, x, y):
    """Unit-step descent-ascent followed by one joint projection onto K."""
    if inst.kind != "jointly-convex":
        raise ValueError("the safe map needs a jointly-convex instance")
    x, y = _split(inst, x, y)
    g = pseudo_gradient(inst, x, y)
    try:
        z = project_polytope(inst.joint_polytope(), np.concatenate([x, y]) - g)
    except InfeasibleError as exc:
        raise PromiseViolation(f"empty joint constraint set: {exc}") from exc
    return z[: inst.d], z[inst.d :]


def apply_map(inst: MinMaxInstance, x, y, map_kind: str = "gda"):
    if map_kind == "gda":
        return gda_map(inst, x, y)
    if map_kind == "sgda":
        return sgda_map(inst, x, y)
    raise ValueError(f"map_kind must be one of {MAP_KINDS}")


def residual(inst: MinMaxInstance, x, y, map_kind: str = "gda") -> float:
    """Euclidean length of the displacement ``(x, y) - map(x, y)``."""
    x, y = _split(inst, x, y)
    xp, yp = apply_map(inst, x, y, map_kind)
    return float(np.linalg.norm(np.concatenate([x - xp, y - yp])))


@dataclass(frozen=True)
class GdaResult:
    x: np.ndarray
    y: np.ndarray
    residual: float
    iterations: int
    map_kind: str
    converged: bool
    best_iteration: int = 0

    @property
    def point(self):
        return self.x, self.y


def iterate(inst: MinMaxInstance, start, map_kind: str = "gda", damping: float = 1.0,
            max_iters: int = 10000, target_residual: float = 1e-9) -> GdaResult:
    """Damped fixed-point iteration ``z <- (1 - lam) z + lam map(z)``.

    No convergence is promised; the best point seen is returned.
    """
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")
    d = inst.d
    z = np.asarray(start, dtype=float).reshape(2 * d)
    best = (math.inf, z.copy(), 0)
    it = 0
    for it in range(max_iters + 1):
        xp, yp = apply_map(inst, z[:d], z[d:], map_kind)
        zp = np.concatenate([xp, yp])
        r = float(np.linalg.norm(z - zp))
        if r < best[0]:
            best = (r, z.copy(), it)
        if r <= target_residual or it == max_iters:
            break
        z = (1 - damping) * z + damping * zp
    r, zb, bi = best
    return GdaResult(zb[:d], zb[d:], r, it, map_kind, r <= target_residual, bi)


# ---------------------------------------------------------------------------
# monotone linear VIs


def safe_map_displacement(vi: LinearVIInstance, z) -> float:
    """``||z - clip(z - F(z))||``: the fixed-point residual of the safe map on the box."""
    z = np.asarray(z, dtype=float)
    return float(np.linalg.norm(z - project_box(z - vi.operator(z))))


def vi_residual(D, c, z) -> float:
    """``min over the box of F(z).(z' - z)``, computed coordinate by coordinate."""
    z = np.asarray(z, dtype=float)
    g = np.asarray(D, float) @ z + np.asarray(c, float)
    return float(np.minimum(g * (0.0 - z), g * (1.0 - z)).sum())


def _spectral_estimate(D: np.ndarray, iters: int = 50) -> float:
    """Power iteration on ``D^T D``."""
    if not np.any(D):
        return 0.0
    v = np.ones(D.shape[1]) / math.sqrt(D.shape[1])
    s = 0.0
    for _ in range(iters):
        w = D.T @ (D @ v)
        nrm = np.linalg.norm(w)
        if nrm == 0:
            return 0.0
        v = w / nrm
        s = math.sqrt(nrm)
    return s


@dataclass(frozen=True)
class ExtragradientResult:
    z: np.ndarray
    residual: float
    iterations: int
    converged: bool
    step: float


def extragradient_vi(D, c, step: float | None = None, tol: float = 1e-9,
                     max_iters: int = 200000, start=None, check_every: int = 10) -> ExtragradientResult:
    """Korpelevich extragradient for ``F(z) = D z + c`` over the unit box."""
    D = np.atleast_2d(np.asarray(D, dtype=float))
    c = np.asarray(c, dtype=float).reshape(-1)
    if step is None:
        step = 0.25 / max(1.0, _spectral_estimate(D))
    z = np.full(c.shape[0], 0.5) if start is None else np.asarray(start, dtype=float).copy()
    best_z, best_r = z.copy(), vi_residual(D, c, z)
    for it in range(1, max_iters + 1):
        zh = np.clip(z - step * (D @ z + c), 0.0, 1.0)
        z = np.clip(z - step * (D @ zh + c), 0.0, 1.0)
        if it % check_every == 0 or it == max_iters:
            r = vi_residual(D, c, z)
            if r > best_r:
                best_z, best_r = z.copy(), r
            if r >= -tol:
                return ExtragradientResult(z, r, it, True, step)
    return ExtragradientResult(best_z, best_r, max_iters, best_r >= -tol, step)


# ---------------------------------------------------------------------------
# parameter conversions


def _radicand(G, L, delta, eps):
    rad = (G + delta) ** 2 + 4 * (eps - L * delta**2 / 2)
    if rad < 0:
        raise ValueError("negative radicand: eps is too small for this (G, L, delta)")
    return rad


def alpha_from_eps_delta(G: float, L: float, delta: float, eps: float) -> float:
    """Fixed-point tolerance implied by an (eps, delta) local min-max solution."""
    rad = _radicand(G, L, delta, eps)
    den = math.sqrt(rad) + (G + delta)
    if den <= 0:
        return 0.0
    # rationalised root: no cancellation, and the sign of eps - L delta^2 / 2 is kept
    return 2 * (eps - L * delta**2 / 2) / den


def eps_delta_from_alpha(L: float, alpha: float):
    """(eps, delta) for which an alpha-fixed point is a local min-max solution."""
    if L <= 0:
        raise ValueError("L must be positive")
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    s = 5 * L + 2
    return alpha**2 * L / s**2, alpha / s


def qvi_alpha(G: float, L: float, delta: float, eps: float) -> float:
    """QVI tolerance implied by an (eps, delta) local min-max solution."""
    return alpha_from_eps_delta(G, L, delta, eps) ** 2 / 2


def qvi_reverse_bound(L: float, delta: float, eps: float, d: int) -> float:
    """Magnitude of the QVI residual guaranteed for a local min-max solution."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    return math.sqrt(d) * (3 * L * delta + 2 * eps / delta)


def globalization_bound(eps: float, delta: float, d: int) -> float:
    """Global suboptimality of the minimiser for objectives convex in x."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    return eps * math.sqrt(d) / delta


def fixed_point_deviation_bound(alpha: float, G_inf: float, L: float, delta: float) -> float:
    """Single-coordinate deviation gain allowed at an alpha-fixed point."""
    return alpha * (1 + G_inf) + L * delta**2 / 2
