"""Numpy implementations of the hot per-frame kernels.

This is the fallback backend used when the compiled extension is not
available. Both backends implement identical semantics; the test suite
checks them against each other and against brute-force oracles.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _check_kernel(krows: int, kcols: int) -> None:
    if krows < 1 or kcols < 1 or krows % 2 == 0 or kcols % 2 == 0:
        raise ValueError(f"kernel dimensions must be odd and positive, got ({krows}, {kcols})")


def _padded_windows(img: np.ndarray, krows: int, kcols: int) -> np.ndarray:
    """(H, W, krows, kcols) view of replicate-padded windows around each pixel."""
    pr, pc = krows // 2, kcols // 2
    padded = np.pad(img, ((pr, pr), (pc, pc)), mode="edge")
    return sliding_window_view(padded, (krows, kcols))


def median_filter2d(img: np.ndarray, krows: int, kcols: int) -> np.ndarray:
    """Per-pixel median over a krows x kcols window, replicate borders."""
    _check_kernel(krows, kcols)
    img = np.asarray(img, dtype=np.float64)
    win = _padded_windows(img, krows, kcols)
    return np.median(win, axis=(2, 3))


def grayscale_open2d(img: np.ndarray, krows: int, kcols: int) -> np.ndarray:
    """Grayscale opening (erosion then dilation) with a flat rectangular element."""
    _check_kernel(krows, kcols)
    img = np.asarray(img, dtype=np.float64)
    eroded = _padded_windows(img, krows, kcols).min(axis=(2, 3))
    return _padded_windows(eroded, krows, kcols).max(axis=(2, 3))


def soca_cfar_mask(
    img: np.ndarray, reference_cells: int, guard_cells: int, alpha: float, min_intensity: float
) -> np.ndarray:
    """Smallest-of-cell-averages CFAR detection mask, swept along each column.

    For cell i the leading window covers the ``reference_cells`` cells ending
    ``guard_cells + 1`` before i, the lagging window mirrors it after i. The
    noise estimate is the smaller of the two window means; near the column
    ends only the window that fully fits is used. A cell is detected when its
    intensity exceeds alpha * noise strictly and is >= min_intensity.
    """
    img = np.asarray(img, dtype=np.float64)
    n_bins, n_cols = img.shape
    r, g = reference_cells, guard_cells
    if 2 * (r + g) > n_bins:
        raise ValueError(
            f"CFAR window needs 2*(reference+guard) <= range bins, "
            f"got 2*({r}+{g}) > {n_bins}"
        )

    # csum[i] = sum of rows [0, i) per column
    csum = np.zeros((n_bins + 1, n_cols))
    np.cumsum(img, axis=0, out=csum[1:])

    idx = np.arange(n_bins)
    lead_ok = idx >= g + r
    lag_ok = idx <= n_bins - 1 - g - r

    lead_mean = np.zeros_like(img)
    lag_mean = np.zeros_like(img)
    li = idx[lead_ok]
    lead_mean[li] = (csum[li - g] - csum[li - g - r]) / r
    gi = idx[lag_ok]
    lag_mean[gi] = (csum[gi + g + 1 + r] - csum[gi + g + 1]) / r

    noise = np.where(
        lead_ok[:, None] & lag_ok[:, None],
        np.minimum(lead_mean, lag_mean),
        np.where(lead_ok[:, None], lead_mean, lag_mean),
    )
    return (img > alpha * noise) & (img >= min_intensity)


def leading_edge_bins(img: np.ndarray, tau: float) -> np.ndarray:
    """First range-bin index per column with intensity strictly above tau, else -1."""
    img = np.asarray(img, dtype=np.float64)
    above = img > tau
    hit = above.any(axis=0)
    first = above.argmax(axis=0)
    return np.where(hit, first, -1).astype(np.int32)


def dbscan_labels(points: np.ndarray, eps: float, min_samples: int) -> np.ndarray:
    """Density clustering labels: clusters are connected components of core
    points, plus each border point attached to its nearest core; noise is -1.

    Neighborhoods use Euclidean distance <= eps and include the point itself.
    Memory is O(N^2); intended for per-frame feature counts.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    labels = np.full(n, -1, dtype=np.int32)
    if n == 0:
        return labels

    d = points[:, None, :] - points[None, :, :]
    dist2 = (d[..., 0] * d[..., 0] + d[..., 1] * d[..., 1] + d[..., 2] * d[..., 2])
    adj = dist2 <= eps * eps
    core = adj.sum(axis=1) >= min_samples

    cluster = 0
    for i in range(n):
        if not core[i] or labels[i] != -1:
            continue
        frontier = np.zeros(n, dtype=bool)
        frontier[i] = True
        member = frontier.copy()
        while frontier.any():
            reached = adj[frontier].any(axis=0) & core & ~member
            member |= reached
            frontier = reached
        labels[member] = cluster
        cluster += 1

    border = ~core & (adj & core[None, :]).any(axis=1)
    for i in np.nonzero(border)[0]:
        candidates = np.nonzero(adj[i] & core)[0]
        labels[i] = labels[candidates[np.argmin(dist2[i, candidates])]]
    return labels


def solve_assignment(cost: np.ndarray) -> np.ndarray:
    """Minimum-cost bipartite assignment of size min(n_rows, n_cols).

    Shortest augmenting-path search with row/column potentials (Hungarian
    method, O(n^2 m)) on the dense cost matrix. Returns, per row, the
    assigned column index, or -1 for rows left over when n_rows > n_cols.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError("cost must be a 2-D matrix")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost entries must be finite")
    n_rows, n_cols = cost.shape
    if n_rows == 0 or n_cols == 0:
        return np.full(n_rows, -1, dtype=np.int32)
    transposed = n_rows > n_cols
    if transposed:
        cost = cost.T
    n, m = cost.shape

    # 1-indexed over columns; p[j] = row matched to column j, 0 = unmatched
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    p = np.zeros(m + 1, dtype=np.int64)
    way = np.zeros(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(m + 1, np.inf)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used[1:]
            cur = cost[i0 - 1] - u[i0] - v[1:]
            improve = free & (cur < minv[1:])
            minv[1:][improve] = cur[improve]
            way[1:][improve] = j0
            masked = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(masked)) + 1
            delta = masked[j1 - 1]
            u[p[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0 != 0:
            j1 = int(way[j0])
            p[j0] = p[j1]
            j0 = j1

    col_of = np.full(n, -1, dtype=np.int32)
    for j in range(1, m + 1):
        if p[j] != 0:
            col_of[p[j] - 1] = j - 1

    if transposed:
        out = np.full(n_rows, -1, dtype=np.int32)
        for r, c in enumerate(col_of):
            if c >= 0:
                out[c] = r
        return out
    return col_of
