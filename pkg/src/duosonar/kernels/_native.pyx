# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementations of the hot per-frame kernels.

Semantics mirror :mod:`duosonar.kernels.pure` exactly (same windowing,
same tie-breaking, same arithmetic order), so the two backends are
interchangeable and cross-checked in the test suite.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef inline Py_ssize_t _clamp(Py_ssize_t v, Py_ssize_t lo, Py_ssize_t hi) nogil:
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


def _check_kernel(Py_ssize_t krows, Py_ssize_t kcols):
    if krows < 1 or kcols < 1 or krows % 2 == 0 or kcols % 2 == 0:
        raise ValueError(f"kernel dimensions must be odd and positive, got ({krows}, {kcols})")


def median_filter2d(img, Py_ssize_t krows, Py_ssize_t kcols):
    """Per-pixel median over a krows x kcols window, replicate borders."""
    _check_kernel(krows, kcols)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] a = np.ascontiguousarray(img, dtype=np.float64)
    cdef Py_ssize_t h = a.shape[0], w = a.shape[1]
    cdef Py_ssize_t pr = krows // 2, pc = kcols // 2
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((h, w))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] buf = np.empty(krows * kcols)
    cdef const double[:, :] av = a
    cdef double[:, :] ov = out
    cdef double[:] bv = buf
    cdef Py_ssize_t i, j, di, dj, k, t
    cdef Py_ssize_t mid = (krows * kcols) // 2
    cdef double val
    with nogil:
        for i in range(h):
            for j in range(w):
                k = 0
                for di in range(-pr, pr + 1):
                    for dj in range(-pc, pc + 1):
                        bv[k] = av[_clamp(i + di, 0, h - 1), _clamp(j + dj, 0, w - 1)]
                        k += 1
                # insertion sort; window sizes are tiny
                for k in range(1, krows * kcols):
                    val = bv[k]
                    t = k - 1
                    while t >= 0 and bv[t] > val:
                        bv[t + 1] = bv[t]
                        t -= 1
                    bv[t + 1] = val
                ov[i, j] = bv[mid]
    return out


cdef void _window_extreme(
    const double[:, :] src, double[:, :] dst, Py_ssize_t pr, Py_ssize_t pc, bint take_min
) nogil:
    # replicate-border duplicates never change a min/max, so the window can
    # be iterated as a clamped index range instead of clamping every access
    cdef Py_ssize_t h = src.shape[0], w = src.shape[1]
    cdef Py_ssize_t i, j, wi, wj, i_lo, i_hi, j_lo, j_hi
    cdef double best, v
    for i in range(h):
        i_lo = _clamp(i - pr, 0, h - 1)
        i_hi = _clamp(i + pr, 0, h - 1)
        for j in range(w):
            j_lo = _clamp(j - pc, 0, w - 1)
            j_hi = _clamp(j + pc, 0, w - 1)
            best = src[i_lo, j_lo]
            for wi in range(i_lo, i_hi + 1):
                for wj in range(j_lo, j_hi + 1):
                    v = src[wi, wj]
                    if take_min:
                        if v < best:
                            best = v
                    else:
                        if v > best:
                            best = v
            dst[i, j] = best


def grayscale_open2d(img, Py_ssize_t krows, Py_ssize_t kcols):
    """Grayscale opening (erosion then dilation) with a flat rectangular element."""
    _check_kernel(krows, kcols)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] a = np.ascontiguousarray(img, dtype=np.float64)
    cdef Py_ssize_t h = a.shape[0], w = a.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] eroded = np.empty((h, w))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((h, w))
    cdef const double[:, :] av = a
    cdef double[:, :] ev = eroded, ov = out
    cdef Py_ssize_t pr = krows // 2, pc = kcols // 2
    with nogil:
        _window_extreme(av, ev, pr, pc, True)
        _window_extreme(ev, ov, pr, pc, False)
    return out


def soca_cfar_mask(img, Py_ssize_t reference_cells, Py_ssize_t guard_cells, double alpha, double min_intensity):
    """Smallest-of-cell-averages CFAR detection mask along each column."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] a = np.ascontiguousarray(img, dtype=np.float64)
    cdef Py_ssize_t n_bins = a.shape[0], n_cols = a.shape[1]
    cdef Py_ssize_t r = reference_cells, g = guard_cells
    if 2 * (r + g) > n_bins:
        raise ValueError(
            f"CFAR window needs 2*(reference+guard) <= range bins, "
            f"got 2*({r}+{g}) > {n_bins}"
        )
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] mask = np.zeros((n_bins, n_cols), dtype=np.uint8)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] csum = np.empty(n_bins + 1)
    cdef const double[:, :] av = a
    cdef cnp.uint8_t[:, :] mv = mask
    cdef double[:] cs = csum
    cdef Py_ssize_t i, j
    cdef double lead, lag, noise, x
    cdef bint lead_ok, lag_ok
    with nogil:
        for j in range(n_cols):
            cs[0] = 0.0
            for i in range(n_bins):
                cs[i + 1] = cs[i] + av[i, j]
            for i in range(n_bins):
                lead_ok = i >= g + r
                lag_ok = i <= n_bins - 1 - g - r
                if lead_ok:
                    lead = (cs[i - g] - cs[i - g - r]) / r
                if lag_ok:
                    lag = (cs[i + g + 1 + r] - cs[i + g + 1]) / r
                if lead_ok and lag_ok:
                    noise = lead if lead < lag else lag
                elif lead_ok:
                    noise = lead
                else:
                    noise = lag
                x = av[i, j]
                if x > alpha * noise and x >= min_intensity:
                    mv[i, j] = 1
    return mask.view(np.bool_)


def leading_edge_bins(img, double tau):
    """First range-bin index per column with intensity strictly above tau, else -1."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] a = np.ascontiguousarray(img, dtype=np.float64)
    cdef Py_ssize_t n_bins = a.shape[0], n_cols = a.shape[1]
    cdef cnp.ndarray[cnp.int32_t, ndim=1] out = np.full(n_cols, -1, dtype=np.int32)
    cdef const double[:, :] av = a
    cdef cnp.int32_t[:] ov = out
    cdef Py_ssize_t i, j
    with nogil:
        for j in range(n_cols):
            for i in range(n_bins):
                if av[i, j] > tau:
                    ov[j] = <cnp.int32_t> i
                    break
    return out


def dbscan_labels(points, double eps, Py_ssize_t min_samples):
    """Density clustering labels matching the pure backend's semantics."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] p = np.ascontiguousarray(points, dtype=np.float64)
    cdef Py_ssize_t n = p.shape[0]
    cdef cnp.ndarray[cnp.int32_t, ndim=1] labels = np.full(n, -1, dtype=np.int32)
    if n == 0:
        return labels
    cdef cnp.ndarray[cnp.float64_t, ndim=2] dist2 = np.empty((n, n))
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] core = np.zeros(n, dtype=np.uint8)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] stack = np.empty(n, dtype=np.int64)
    cdef const double[:, :] pv = p
    cdef double[:, :] dv = dist2
    cdef cnp.uint8_t[:] corev = core
    cdef cnp.int32_t[:] lv = labels
    cdef cnp.int64_t[:] sv = stack
    cdef Py_ssize_t i, j, top, cur, count
    cdef double dx, dy, dz, e2 = eps * eps, best
    cdef Py_ssize_t best_j
    cdef cnp.int32_t cluster = 0
    with nogil:
        for i in range(n):
            count = 0
            for j in range(n):
                dx = pv[i, 0] - pv[j, 0]
                dy = pv[i, 1] - pv[j, 1]
                dz = pv[i, 2] - pv[j, 2]
                dv[i, j] = dx * dx + dy * dy + dz * dz
                if dv[i, j] <= e2:
                    count += 1
            if count >= min_samples:
                corev[i] = 1
        # clusters: connected components of core points, ascending seed order
        for i in range(n):
            if corev[i] == 0 or lv[i] != -1:
                continue
            top = 0
            sv[top] = i
            top += 1
            lv[i] = cluster
            while top > 0:
                top -= 1
                cur = sv[top]
                for j in range(n):
                    if corev[j] == 1 and lv[j] == -1 and dv[cur, j] <= e2:
                        lv[j] = cluster
                        sv[top] = j
                        top += 1
            cluster += 1
        # border points join their nearest core's cluster
        for i in range(n):
            if corev[i] == 1:
                continue
            best = -1.0
            best_j = -1
            for j in range(n):
                if corev[j] == 1 and dv[i, j] <= e2:
                    if best_j == -1 or dv[i, j] < best:
                        best = dv[i, j]
                        best_j = j
            if best_j >= 0:
                lv[i] = lv[best_j]
    return labels


def solve_assignment(cost):
    """Minimum-cost bipartite assignment, same algorithm as the pure backend."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] c = np.ascontiguousarray(cost, dtype=np.float64)
    if c.ndim != 2:
        raise ValueError("cost must be a 2-D matrix")
    if not np.all(np.isfinite(c)):
        raise ValueError("cost entries must be finite")
    cdef Py_ssize_t n_rows = c.shape[0], n_cols = c.shape[1]
    if n_rows == 0 or n_cols == 0:
        return np.full(n_rows, -1, dtype=np.int32)
    cdef bint transposed = n_rows > n_cols
    if transposed:
        c = np.ascontiguousarray(c.T)
    cdef Py_ssize_t n = c.shape[0], m = c.shape[1]

    cdef cnp.ndarray[cnp.float64_t, ndim=1] u = np.zeros(n + 1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] v = np.zeros(m + 1)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] p = np.zeros(m + 1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] way = np.zeros(m + 1, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] minv = np.empty(m + 1)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] used = np.empty(m + 1, dtype=np.uint8)
    cdef const double[:, :] cv = c
    cdef double[:] uv = u, vv = v, mv = minv
    cdef cnp.int64_t[:] pv = p, wv = way
    cdef cnp.uint8_t[:] usedv = used
    cdef Py_ssize_t i, j, j0, j1, i0
    cdef double delta, cur
    cdef double INF = np.inf

    with nogil:
        for i in range(1, n + 1):
            pv[0] = i
            j0 = 0
            for j in range(m + 1):
                mv[j] = INF
                usedv[j] = 0
            while True:
                usedv[j0] = 1
                i0 = pv[j0]
                delta = INF
                j1 = -1
                for j in range(1, m + 1):
                    if usedv[j] == 0:
                        cur = cv[i0 - 1, j - 1] - uv[i0] - vv[j]
                        if cur < mv[j]:
                            mv[j] = cur
                            wv[j] = j0
                        if mv[j] < delta:
                            delta = mv[j]
                            j1 = j
                for j in range(m + 1):
                    if usedv[j] == 1:
                        uv[pv[j]] += delta
                        vv[j] -= delta
                    else:
                        mv[j] -= delta
                j0 = j1
                if pv[j0] == 0:
                    break
            while j0 != 0:
                j1 = wv[j0]
                pv[j0] = pv[j1]
                j0 = j1

    cdef cnp.ndarray[cnp.int32_t, ndim=1] col_of = np.full(n, -1, dtype=np.int32)
    for j in range(1, m + 1):
        if p[j] != 0:
            col_of[p[j] - 1] = <cnp.int32_t>(j - 1)
    if transposed:
        out = np.full(n_rows, -1, dtype=np.int32)
        for i in range(n):
            if col_of[i] >= 0:
                out[col_of[i]] = <cnp.int32_t> i
        return out
    return col_of
