"""Numpy implementations of the hot loops.

These are the reference versions; ``_kernels.pyx`` mirrors them in Cython.
Rows in "interval form" are five arrays ``(var, coef_z, coef0, beta_z, beta0)``
encoding ``(coef_z . z + coef0) * w[var] <= beta0 - beta_z . z + slack``, where
z is the point the slice depends on and w the free variable.
"""
from __future__ import annotations

import itertools

import numpy as np

TINY = 1e-14
TIE_TOL = 1e-12


def interval_bounds(Z, rows, slack, d, relax=False):
    """Per-point interval bounds of the free variable.

    Returns ``(lo, hi, s)``.  With ``relax`` the rows are loosened by the
    smallest ``s >= 0`` making every interval non-empty; otherwise ``s`` is
    zero and empty intervals show up as ``lo > hi``.  Rows with ``var < 0``
    never involve the free variable.
    """
    var, coef_z, coef0, beta_z, beta0 = rows
    n = Z.shape[0]
    m = var.shape[0]
    a = Z @ coef_z.T + coef0 if m else np.zeros((n, 0))
    b = beta0 - Z @ beta_z.T + slack if m else np.zeros((n, 0))
    s = np.zeros(n)
    if relax and m:
        pos = a > TINY
        neg = a < -TINY
        zero = ~(pos | neg)
        s = np.maximum(s, np.max(np.where(zero | pos, -b, 0.0), axis=1))
        s = np.maximum(s, np.max(np.where(neg, -b + a, 0.0), axis=1))
        for j, k in itertools.permutations(range(m), 2):
            if var[j] != var[k] or var[j] < 0:
                continue
            mask = neg[:, j] & pos[:, k]
            if not mask.any():
                continue
            aj = -a[:, j]
            ak = a[:, k]
            with np.errstate(divide="ignore", invalid="ignore"):
                need = (-b[:, j] / aj - b[:, k] / ak) / (1.0 / aj + 1.0 / ak)
            s = np.maximum(s, np.where(mask, need, 0.0))
        b = b + s[:, None]
    lo = np.zeros((n, d))
    hi = np.ones((n, d))
    empty = np.zeros(n, dtype=bool)
    for j in range(m):
        aj = a[:, j]
        bj = b[:, j]
        i = var[j]
        if i < 0:
            empty |= bj < 0
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            q = bj / aj
        up = aj > TINY
        dn = aj < -TINY
        hi[:, i] = np.where(up, np.minimum(hi[:, i], q), hi[:, i])
        lo[:, i] = np.where(dn, np.maximum(lo[:, i], q), lo[:, i])
        empty |= ~(up | dn) & (bj < 0)
    if relax:
        hi = np.maximum(hi, lo)
    else:
        lo[empty] = 1.0
        hi[empty] = 0.0
    return lo, hi, s


def interval_selector(V, rows, D, cF, eta, gamma):
    """Proximal selector on interval-form correspondences, with minimal relaxation."""
    d = V.shape[1]
    lo, hi, s = interval_bounds(V, rows, gamma, d, relax=True)
    q = V - (V @ D.T + cF) / eta
    return np.clip(q, lo, hi), s > 0


def colors_from_displacement(V, P, tie_tol=TIE_TOL):
    """Sperner colours: 0 when the displacement points into the positive orthant.

    Zero components count as non-negative unless the vertex sits on the upper
    face in that coordinate, and as non-positive unless it sits on the lower
    face; this keeps the boundary rules intact under ties.
    """
    disp = P - V
    tie = np.abs(disp) <= tie_tol
    up_ok = (disp > tie_tol) | (tie & (V < 1.0))
    down = (disp < -tie_tol) | (tie & (V > 0.0))
    col = np.argmax(down, axis=1) + 1
    col[np.all(up_ok, axis=1)] = 0
    return col.astype(np.int8)


def grid_vertices(N, d, start=0, stop=None):
    total = (N + 1) ** d
    stop = total if stop is None else stop
    idx = np.arange(start, stop)
    coords = np.array(np.unravel_index(idx, (N + 1,) * d)).T
    return coords / N


def color_interval_grid(N, d, rows, D, cF, eta, gamma, start=0, stop=None):
    V = grid_vertices(N, d, start, stop)
    P, relaxed = interval_selector(V, rows, D, cF, eta, gamma)
    return colors_from_displacement(V, P), int(relaxed.sum())


def first_panchromatic(colors, N, d, perms):
    """First (base, perm) in lexicographic order whose simplex is panchromatic.

    ``colors`` is flat over the ``(N+1)^d`` vertex grid in C order; the base is
    returned as a flat index into the ``N^d`` cubelet grid.  Returns (-1, -1)
    when nothing is found.
    """
    colors = np.asarray(colors)
    strides = np.array([(N + 1) ** (d - 1 - i) for i in range(d)])
    base_coords = np.array(np.unravel_index(np.arange(N**d), (N,) * d)).T
    base_flat = base_coords @ strides
    full = (1 << (d + 1)) - 1
    best = (N**d, len(perms))
    for pi, perm in enumerate(perms):
        cur = base_flat.copy()
        mask = np.left_shift(1, colors[cur].astype(np.int64))
        for axis in perm:
            cur = cur + strides[axis]
            mask |= np.left_shift(1, colors[cur].astype(np.int64))
        hit = np.flatnonzero(mask == full)
        if hit.size and (hit[0], pi) < best:
            best = (int(hit[0]), pi)
    if best[0] == N**d:
        return -1, -1
    return best


def _ragged_product(lo_idx, hi_idx):
    """Row ids and lattice indices enumerating every box ``[lo_idx, hi_idx]`` in C order."""
    n, d = lo_idx.shape
    cnt = np.maximum(hi_idx - lo_idx + 1, 0)
    owner = np.arange(n)
    cur = np.zeros((n, 0), dtype=np.int64)
    for i in range(d):
        reps = cnt[owner, i]
        new_owner = np.repeat(owner, reps)
        new_cur = np.repeat(cur, reps, axis=0)
        starts = np.repeat(np.cumsum(reps) - reps, reps)
        within = np.arange(reps.sum()) - starts
        col = lo_idx[new_owner, i] + within
        owner = new_owner
        cur = np.hstack([new_cur, col[:, None]])
    return owner, cur


def _quad(Z, M, h, k):
    return np.einsum("ni,ij,nj->n", Z, M, Z) + Z @ h + k


def grid_scan(M, h, k, d, N, rows1, rows2, nu, offsets, eps, start=0, chunk=4096):
    """First grid candidate passing the lattice deviation test.

    Candidates are x on the grid ``{0, 1/N, ..., 1}^d`` (lexicographic), then y
    on the grid inside the player-2 slice at x, keeping those with x inside
    the player-1 slice at y.  A candidate passes when no clamped offset gives
    player 1 a drop, or player 2 a gain, above ``eps``.  Returns
    ``(index, x, y, worst1, worst2, scanned)`` with index -1 when none passes.
    """
    M = np.asarray(M, float)
    h = np.asarray(h, float)
    offsets = np.asarray(offsets, float)
    n_x = (N + 1) ** d
    seen = 0
    for x0 in range(0, n_x, chunk):
        X = grid_vertices(N, d, x0, min(n_x, x0 + chunk))
        lo2, hi2, _ = interval_bounds(X, rows2, nu, d)
        lo_idx = np.ceil(lo2 * N - 1e-9).astype(np.int64)
        hi_idx = np.floor(hi2 * N + 1e-9).astype(np.int64)
        owner, yidx = _ragged_product(lo_idx, hi_idx)
        if owner.size == 0:
            continue
        Xc = X[owner]
        Yc = yidx / N
        lo1, hi1, _ = interval_bounds(Yc, rows1, nu, d)
        ok = np.all((Xc >= lo1 - 1e-12) & (Xc <= hi1 + 1e-12), axis=1)
        Xc, Yc, lo2c, hi2c = Xc[ok], Yc[ok], lo2[owner][ok], hi2[owner][ok]
        lo1, hi1 = lo1[ok], hi1[ok]
        n_c = Xc.shape[0]
        first_local = max(0, start - seen)
        if first_local >= n_c:
            seen += n_c
            continue
        sl = slice(first_local, n_c)
        Xc, Yc, lo1, hi1, lo2c, hi2c = Xc[sl], Yc[sl], lo1[sl], hi1[sl], lo2c[sl], hi2c[sl]
        f0 = _quad(np.hstack([Xc, Yc]), M, h, k)
        w1 = np.zeros(Xc.shape[0])
        w2 = np.zeros(Xc.shape[0])
        for o in offsets:
            Xd = np.clip(Xc + o, lo1, hi1)
            w1 = np.maximum(w1, f0 - _quad(np.hstack([Xd, Yc]), M, h, k))
            Yd = np.clip(Yc + o, lo2c, hi2c)
            w2 = np.maximum(w2, _quad(np.hstack([Xc, Yd]), M, h, k) - f0)
        good = np.flatnonzero((w1 <= eps) & (w2 <= eps))
        if good.size:
            g = good[0]
            return seen + first_local + int(g), Xc[g], Yc[g], float(w1[g]), float(w2[g]), seen + first_local + int(g) + 1
        seen += n_c
    return -1, None, None, np.nan, np.nan, seen
