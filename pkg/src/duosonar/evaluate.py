"""Map evaluation: rigid alignment, wall metrics, KDE, Hellinger distance.

Point-cloud comparisons assume a wall-aligned frame: the wall runs along
x, z points up, so wall width is measured across y and along-wall
distributions over x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree


@dataclass(frozen=True)
class AlignmentResult:
    """Least-squares rigid registration of ordered correspondences."""

    rotation: np.ndarray
    translation: np.ndarray
    residuals: np.ndarray
    mean_error: float
    ci95_half_width: float

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        return pts @ self.rotation.T + self.translation


def rigid_align(source: np.ndarray, target: np.ndarray) -> AlignmentResult:
    """Best rotation+translation mapping source onto target (SVD method).

    Requires >= 3 ordered, non-collinear correspondences. The per-point
    residual is the Euclidean distance after alignment; the confidence
    interval is the normal-approximation 95% half width of the mean
    residual (sample standard deviation).
    """
    src = np.asarray(source, dtype=np.float64).reshape(-1, 3)
    tgt = np.asarray(target, dtype=np.float64).reshape(-1, 3)
    if src.shape != tgt.shape:
        raise ValueError("source and target must have equal point counts")
    n = src.shape[0]
    if n < 3:
        raise ValueError("need at least 3 correspondences")
    c_src = src.mean(axis=0)
    c_tgt = tgt.mean(axis=0)
    a = src - c_src
    b = tgt - c_tgt
    if np.linalg.matrix_rank(a, tol=1e-9) < 2:
        raise ValueError("correspondences are collinear")
    h = a.T @ b
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    rot = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    tr = c_tgt - rot @ c_src
    residuals = np.linalg.norm(src @ rot.T + tr - tgt, axis=1)
    mean_error = float(residuals.mean())
    std = float(residuals.std(ddof=1)) if n > 1 else 0.0
    return AlignmentResult(
        rotation=rot,
        translation=tr,
        residuals=residuals,
        mean_error=mean_error,
        ci95_half_width=1.96 * std / math.sqrt(n),
    )


def wall_width(points: np.ndarray, trim_fraction: float = 0.05) -> float:
    """Across-wall extent max(y) - min(y) after symmetric tail trimming.

    ``trim_fraction`` of the lowest and of the highest y-values (floor of
    n * fraction each side) are discarded before taking the extent.
    """
    pts = np.asarray(points, dtype=np.float64)
    y = pts[:, 1] if pts.ndim == 2 else pts
    n = y.shape[0]
    if not 0.0 <= trim_fraction < 0.5:
        raise ValueError("trim_fraction must lie in [0, 0.5)")
    k = int(math.floor(n * trim_fraction))
    kept = np.sort(y)[k : n - k] if k else np.sort(y)
    if kept.size == 0:
        raise ValueError("no points left after trimming")
    return float(kept.max() - kept.min())


def mean_pairwise_cosine(
    cloud_a: np.ndarray, cloud_b: np.ndarray, correspondence: str = "nearest"
) -> float:
    """Mean cosine of the angles between corresponding position vectors.

    ``correspondence`` is "nearest" (each point of a pairs with its nearest
    neighbor in b) or "ordered" (i-th with i-th, requiring equal counts).
    Zero-norm position vectors have no direction and are excluded.
    """
    a = np.asarray(cloud_a, dtype=np.float64).reshape(-1, 3)
    b = np.asarray(cloud_b, dtype=np.float64).reshape(-1, 3)
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("clouds must be non-empty")
    if correspondence == "ordered":
        if a.shape[0] != b.shape[0]:
            raise ValueError("ordered correspondence requires equal counts")
        pairs_b = b
    elif correspondence == "nearest":
        _, idx = cKDTree(b).query(a)
        pairs_b = b[idx]
    else:
        raise ValueError(f"unknown correspondence {correspondence!r}")
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(pairs_b, axis=1)
    ok = (na > 0) & (nb > 0)
    if not ok.any():
        raise ValueError("all correspondence pairs have zero-norm vectors")
    cos = (a[ok] * pairs_b[ok]).sum(axis=1) / (na[ok] * nb[ok])
    return float(np.clip(cos, -1.0, 1.0).mean())


def silverman_bandwidth(values: np.ndarray) -> float:
    """Silverman's rule of thumb; raises when the data has zero spread."""
    x = np.asarray(values, dtype=np.float64)
    std = float(x.std())
    q75, q25 = np.percentile(x, [75, 25])
    iqr = float(q75 - q25)
    scale = min(std, iqr / 1.34) if iqr > 0 else std
    if scale <= 0:
        raise ValueError("zero variance: bandwidth undefined")
    return 0.9 * scale * x.size ** (-0.2)


def kde_1d(
    values: np.ndarray, bin_count: int = 100, bandwidth: Optional[float] = None
) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian KDE sampled at bin centers spanning the data range.

    Densities are renormalized so that sum(density) * bin_width = 1 over
    the returned grid. Bandwidth defaults to Silverman's rule.
    """
    x = np.asarray(values, dtype=np.float64).reshape(-1)
    if x.size < 2:
        raise ValueError("need at least 2 values")
    if bin_count < 2:
        raise ValueError("bin_count must be >= 2")
    if x.max() == x.min():
        raise ValueError("zero variance: KDE support is degenerate")
    h = silverman_bandwidth(x) if bandwidth is None else float(bandwidth)
    if h <= 0:
        raise ValueError("bandwidth must be positive")
    centers = np.linspace(x.min(), x.max(), bin_count)
    z = (centers[:, None] - x[None, :]) / h
    density = np.exp(-0.5 * z * z).sum(axis=1) / (x.size * h * math.sqrt(2.0 * math.pi))
    bin_width = centers[1] - centers[0]
    total = density.sum() * bin_width
    return centers, density / total


def hellinger(p_densities: np.ndarray, q_densities: np.ndarray, bin_width: float) -> float:
    """Hellinger distance between two discretized densities on shared bins.

    Computed as sqrt(0.5 * sum((sqrt(p) - sqrt(q))^2) * bin_width), which
    equals sqrt(1 - BC) for normalized densities but is exactly 0 for
    identical inputs instead of amplifying summation noise through the
    square root.
    """
    p = np.asarray(p_densities, dtype=np.float64)
    q = np.asarray(q_densities, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError("densities must share the same bins")
    h2 = 0.5 * float(((np.sqrt(p) - np.sqrt(q)) ** 2).sum() * bin_width)
    return float(np.clip(math.sqrt(h2), 0.0, 1.0))


@dataclass(frozen=True)
class DistributionComparison:
    """Along-wall distribution comparison of two wall-aligned clouds."""

    kde_centers: np.ndarray
    kde_density_a: np.ndarray
    kde_density_b: np.ndarray
    hellinger: float
    mean_cosine: float
    width_a: float
    width_b: float
    width_difference: float

    def to_dict(self) -> dict:
        return {
            "wall_width_a": self.width_a,
            "wall_width_b": self.width_b,
            "width_diff": self.width_difference,
            "mean_cosine": self.mean_cosine,
            "hellinger": self.hellinger,
            "kde": {
                "centers": self.kde_centers.tolist(),
                "density_a": self.kde_density_a.tolist(),
                "density_b": self.kde_density_b.tolist(),
            },
        }


def compare_wall_clouds(
    cloud_a: np.ndarray,
    cloud_b: np.ndarray,
    bin_count: int = 100,
    trim_fraction: float = 0.05,
    bandwidth: Optional[float] = None,
    correspondence: str = "nearest",
) -> DistributionComparison:
    """Wall-width, cosine, and along-wall KDE/Hellinger metrics of two clouds.

    Both clouds must be in the shared wall-aligned frame. The two KDEs are
    evaluated on a common grid spanning the union of the x ranges so the
    Hellinger distance is well defined.
    """
    a = np.asarray(cloud_a, dtype=np.float64).reshape(-1, 3)
    b = np.asarray(cloud_b, dtype=np.float64).reshape(-1, 3)
    if a.shape[0] < 2 or b.shape[0] < 2:
        raise ValueError("clouds must each hold at least 2 points")
    lo = min(a[:, 0].min(), b[:, 0].min())
    hi = max(a[:, 0].max(), b[:, 0].max())
    if hi == lo:
        raise ValueError("zero variance: along-wall extent is degenerate")
    centers = np.linspace(lo, hi, bin_count)
    bin_width = centers[1] - centers[0]
    dens_a = _kde_on_grid(a[:, 0], centers, bandwidth)
    dens_b = _kde_on_grid(b[:, 0], centers, bandwidth)
    w_a = wall_width(a, trim_fraction)
    w_b = wall_width(b, trim_fraction)
    return DistributionComparison(
        kde_centers=centers,
        kde_density_a=dens_a,
        kde_density_b=dens_b,
        hellinger=hellinger(dens_a, dens_b, float(bin_width)),
        mean_cosine=mean_pairwise_cosine(a, b, correspondence),
        width_a=w_a,
        width_b=w_b,
        width_difference=w_a - w_b,
    )


def _kde_on_grid(values: np.ndarray, centers: np.ndarray, bandwidth: Optional[float]) -> np.ndarray:
    h = silverman_bandwidth(values) if bandwidth is None else float(bandwidth)
    if h <= 0:
        raise ValueError("bandwidth must be positive")
    z = (centers[:, None] - values[None, :]) / h
    density = np.exp(-0.5 * z * z).sum(axis=1) / (values.size * h * math.sqrt(2.0 * math.pi))
    total = density.sum() * (centers[1] - centers[0])
    if total <= 0:
        raise ValueError("density integrates to zero on the given grid")
    return density / total
