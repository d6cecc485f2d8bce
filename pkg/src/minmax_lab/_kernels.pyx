# cython: language_level=3
"""Compiled versions of the kernels in ``_kernels_py``; same signatures and results."""
import numpy as np
cimport numpy as cnp
from libc.math cimport ceil, floor, fabs
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef double TINY = 1e-14
cdef double TIE_TOL = 1e-12
cdef double INF = float("inf")


cdef inline double _dot(const double[:, ::1] A, Py_ssize_t j, const double* z, int d) noexcept nogil:
    cdef double s = 0.0
    cdef int i
    for i in range(d):
        s += A[j, i] * z[i]
    return s


cdef double _bounds(const double* z, int d, const long[::1] var, const double[:, ::1] coef_z,
                    const double[::1] coef0, const double[:, ::1] beta_z, const double[::1] beta0,
                    double slack, bint relax, double* a, double* b, double* lo, double* hi) noexcept nogil:
    """Fill lo/hi; return the relaxation used, or -1 if a non-relaxed slice is empty."""
    cdef Py_ssize_t m = var.shape[0]
    cdef Py_ssize_t j, k
    cdef int i
    cdef double s = 0.0, need, aj, ak, q
    cdef bint empty = False
    for j in range(m):
        a[j] = _dot(coef_z, j, z, d) + coef0[j]
        b[j] = beta0[j] - _dot(beta_z, j, z, d) + slack
    if relax:
        for j in range(m):
            if a[j] < -TINY:
                need = -b[j] + a[j]
            else:
                need = -b[j]
            if need > s:
                s = need
        for j in range(m):
            if var[j] < 0 or not (a[j] < -TINY):
                continue
            for k in range(m):
                if k == j or var[k] != var[j] or not (a[k] > TINY):
                    continue
                aj = -a[j]
                ak = a[k]
                need = (-b[j] / aj - b[k] / ak) / (1.0 / aj + 1.0 / ak)
                if need > s:
                    s = need
        for j in range(m):
            b[j] += s
    for i in range(d):
        lo[i] = 0.0
        hi[i] = 1.0
    for j in range(m):
        i = var[j]
        if i < 0:
            if b[j] < 0:
                empty = True
            continue
        if a[j] > TINY:
            q = b[j] / a[j]
            if q < hi[i]:
                hi[i] = q
        elif a[j] < -TINY:
            q = b[j] / a[j]
            if q > lo[i]:
                lo[i] = q
        elif b[j] < 0:
            empty = True
    if relax:
        for i in range(d):
            if hi[i] < lo[i]:
                hi[i] = lo[i]
        return s
    if empty:
        for i in range(d):
            lo[i] = 1.0
            hi[i] = 0.0
        return -1.0
    for i in range(d):
        if lo[i] > hi[i]:
            return -1.0
    return 0.0


def color_interval_grid(int N, int d, rows, D, cF, double eta, double gamma, long start=0, stop=None):
    cdef const long[::1] var = np.ascontiguousarray(rows[0], dtype=np.int64)
    cdef const double[:, ::1] coef_z = np.ascontiguousarray(np.reshape(rows[1], (-1, d)), dtype=float)
    cdef const double[::1] coef0 = np.ascontiguousarray(rows[2], dtype=float)
    cdef const double[:, ::1] beta_z = np.ascontiguousarray(np.reshape(rows[3], (-1, d)), dtype=float)
    cdef const double[::1] beta0 = np.ascontiguousarray(rows[4], dtype=float)
    cdef const double[:, ::1] Dm = np.ascontiguousarray(D, dtype=float)
    cdef const double[::1] cv = np.ascontiguousarray(cF, dtype=float)
    cdef long total = (N + 1) ** d
    cdef long stop_ = total if stop is None else stop
    cdef cnp.ndarray[cnp.int8_t, ndim=1] out = np.zeros(stop_ - start, dtype=np.int8)
    cdef cnp.int8_t[::1] colors = out
    cdef Py_ssize_t m = var.shape[0]
    cdef double* buf = <double*> malloc((5 * d + 2 * m + 2) * sizeof(double))
    cdef double* v = buf
    cdef double* lo = buf + d
    cdef double* hi = buf + 2 * d
    cdef double* p = buf + 3 * d
    cdef double* disp = buf + 4 * d
    cdef double* a = buf + 5 * d
    cdef double* b = buf + 5 * d + m
    cdef long idx, rem, relaxed = 0
    cdef int i, l, col
    cdef double s, g, dv
    cdef bint zero_ok, tie
    if buf == NULL:
        raise MemoryError()
    try:
        with nogil:
            for idx in range(start, stop_):
                rem = idx
                for i in range(d - 1, -1, -1):
                    v[i] = (rem % (N + 1)) / <double> N
                    rem = rem // (N + 1)
                s = _bounds(v, d, var, coef_z, coef0, beta_z, beta0, gamma, True, a, b, lo, hi)
                if s > 0:
                    relaxed += 1
                zero_ok = True
                col = 0
                for i in range(d):
                    g = cv[i]
                    for l in range(d):
                        g += Dm[i, l] * v[l]
                    p[i] = v[i] - g / eta
                    if p[i] < lo[i]:
                        p[i] = lo[i]
                    if p[i] > hi[i]:
                        p[i] = hi[i]
                    dv = p[i] - v[i]
                    tie = fabs(dv) <= TIE_TOL
                    if not (dv > TIE_TOL or (tie and v[i] < 1.0)):
                        zero_ok = False
                    if col == 0 and (dv < -TIE_TOL or (tie and v[i] > 0.0)):
                        col = i + 1
                colors[idx - start] = 0 if zero_ok else col
    finally:
        free(buf)
    return out, relaxed


def first_panchromatic(colors_in, int N, int d, perms_in):
    cdef const cnp.int8_t[::1] colors = np.ascontiguousarray(colors_in, dtype=np.int8)
    cdef const long[:, ::1] perms = np.ascontiguousarray(perms_in, dtype=np.int64)
    cdef long n_perm = perms.shape[0]
    cdef long n_base = N ** d
    cdef long full = (1 << (d + 1)) - 1
    cdef long* strides = <long*> malloc(d * sizeof(long))
    cdef long base, rem, flat, cur, mask, pi
    cdef long found_base = -1, found_perm = -1
    cdef int i
    if strides == NULL:
        raise MemoryError()
    try:
        with nogil:
            for i in range(d):
                strides[i] = (N + 1) ** (d - 1 - i)
            for base in range(n_base):
                rem = base
                flat = 0
                for i in range(d - 1, -1, -1):
                    flat += (rem % N) * strides[i]
                    rem = rem // N
                for pi in range(n_perm):
                    cur = flat
                    mask = 1 << colors[cur]
                    for i in range(d):
                        cur += strides[perms[pi, i]]
                        mask |= 1 << colors[cur]
                    if mask == full:
                        found_base = base
                        found_perm = pi
                        break
                if found_base >= 0:
                    break
    finally:
        free(strides)
    return found_base, found_perm


cdef inline double _quad(const double[:, ::1] M, const double[::1] h, double k, const double* z, int n) noexcept nogil:
    cdef double s = k, t
    cdef int i, j
    for i in range(n):
        t = 0.0
        for j in range(n):
            t += M[i, j] * z[j]
        s += z[i] * t + h[i] * z[i]
    return s


def grid_scan(M_in, h_in, double k, int d, int N, rows1, rows2, double nu, offsets_in, double eps,
              long start=0, chunk=None):
    cdef const double[:, ::1] M = np.ascontiguousarray(M_in, dtype=float)
    cdef const double[::1] h = np.ascontiguousarray(h_in, dtype=float)
    cdef const double[:, ::1] off = np.ascontiguousarray(np.reshape(offsets_in, (-1, d)), dtype=float)
    cdef const long[::1] var1 = np.ascontiguousarray(rows1[0], dtype=np.int64)
    cdef const double[:, ::1] cz1 = np.ascontiguousarray(np.reshape(rows1[1], (-1, d)), dtype=float)
    cdef const double[::1] c01 = np.ascontiguousarray(rows1[2], dtype=float)
    cdef const double[:, ::1] bz1 = np.ascontiguousarray(np.reshape(rows1[3], (-1, d)), dtype=float)
    cdef const double[::1] b01 = np.ascontiguousarray(rows1[4], dtype=float)
    cdef const long[::1] var2 = np.ascontiguousarray(rows2[0], dtype=np.int64)
    cdef const double[:, ::1] cz2 = np.ascontiguousarray(np.reshape(rows2[1], (-1, d)), dtype=float)
    cdef const double[::1] c02 = np.ascontiguousarray(rows2[2], dtype=float)
    cdef const double[:, ::1] bz2 = np.ascontiguousarray(np.reshape(rows2[3], (-1, d)), dtype=float)
    cdef const double[::1] b02 = np.ascontiguousarray(rows2[4], dtype=float)
    cdef Py_ssize_t m1 = var1.shape[0], m2 = var2.shape[0], n_off = off.shape[0]
    cdef int n = 2 * d
    cdef double* buf = <double*> malloc((12 * d + 2 * (m1 + m2) + 4) * sizeof(double))
    cdef long* yk = <long*> malloc((3 * d + 1) * sizeof(long))
    cdef double* z = buf                 # current candidate (x, y)
    cdef double* zd = buf + n            # deviation
    cdef double* lo1 = buf + 2 * n
    cdef double* hi1 = lo1 + d
    cdef double* lo2 = hi1 + d
    cdef double* hi2 = lo2 + d
    cdef double* a = hi2 + d
    cdef double* b = a + (m1 + m2)
    cdef long* ylo = yk
    cdef long* yhi = yk + d
    cdef long* ycur = yk + 2 * d
    cdef long n_x = (N + 1) ** d
    cdef long xi, rem, count = 0, found = -1
    cdef int i, t
    cdef Py_ssize_t o
    cdef double f0, f1, w1 = 0.0, w2 = 0.0, s
    cdef bint fail, inside, more
    if buf == NULL or yk == NULL:
        free(buf)
        free(yk)
        raise MemoryError()
    try:
        with nogil:
            for xi in range(n_x):
                rem = xi
                for i in range(d - 1, -1, -1):
                    z[i] = (rem % (N + 1)) / <double> N
                    rem = rem // (N + 1)
                s = _bounds(z, d, var2, cz2, c02, bz2, b02, nu, False, a, b, lo2, hi2)
                if s < 0:
                    continue
                more = True
                for i in range(d):
                    ylo[i] = <long> ceil(lo2[i] * N - 1e-9)
                    yhi[i] = <long> floor(hi2[i] * N + 1e-9)
                    if yhi[i] < ylo[i]:
                        more = False
                    ycur[i] = ylo[i]
                while more:
                    for i in range(d):
                        z[d + i] = ycur[i] / <double> N
                    s = _bounds(z + d, d, var1, cz1, c01, bz1, b01, nu, False, a, b, lo1, hi1)
                    inside = s >= 0
                    if inside:
                        for i in range(d):
                            if z[i] < lo1[i] - 1e-12 or z[i] > hi1[i] + 1e-12:
                                inside = False
                                break
                    if inside:
                        if count >= start:
                            f0 = _quad(M, h, k, z, n)
                            w1 = 0.0
                            w2 = 0.0
                            fail = False
                            for o in range(n_off):
                                for i in range(n):
                                    zd[i] = z[i]
                                for i in range(d):
                                    zd[i] = z[i] + off[o, i]
                                    if zd[i] < lo1[i]:
                                        zd[i] = lo1[i]
                                    if zd[i] > hi1[i]:
                                        zd[i] = hi1[i]
                                f1 = f0 - _quad(M, h, k, zd, n)
                                if f1 > w1:
                                    w1 = f1
                                for i in range(d):
                                    zd[i] = z[i]
                                    zd[d + i] = z[d + i] + off[o, i]
                                    if zd[d + i] < lo2[i]:
                                        zd[d + i] = lo2[i]
                                    if zd[d + i] > hi2[i]:
                                        zd[d + i] = hi2[i]
                                f1 = _quad(M, h, k, zd, n) - f0
                                if f1 > w2:
                                    w2 = f1
                                if w1 > eps or w2 > eps:
                                    fail = True
                                    break
                            if not fail:
                                found = count
                        count += 1
                        if found >= 0:
                            break
                    # advance y lexicographically
                    t = d - 1
                    while t >= 0:
                        ycur[t] += 1
                        if ycur[t] <= yhi[t]:
                            break
                        ycur[t] = ylo[t]
                        t -= 1
                    if t < 0:
                        more = False
                if found >= 0:
                    break
        if found < 0:
            return -1, None, None, float("nan"), float("nan"), count
        x = np.array([z[i] for i in range(d)])
        y = np.array([z[d + i] for i in range(d)])
        return found, x, y, w1, w2, found + 1
    finally:
        free(buf)
        free(yk)
