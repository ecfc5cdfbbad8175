"""Per-sonar denoising chains producing normalized 8-bit frames.

Horizontal chain: row-quantile subtraction, Otsu masking, 8-bit
normalization, 3x1 grayscale opening. Vertical chain: row-mean
subtraction, low-intensity masking of the center bearings, 8-bit
normalization, 3x3 median filter. All steps are pure functions over
:class:`~duosonar.sonar.PolarSonarImage`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .sonar import PolarSonarImage


@dataclass(frozen=True)
class PreprocessConfig:
    """Parameters of one denoising chain.

    ``chain`` selects which composition :func:`run_chain` applies. The
    center-mask threshold for the vertical chain is not a device constant
    and must be tuned per deployment; the default was picked on simulator
    frames.
    """

    chain: str = "horizontal"
    row_quantile: float = 0.10
    center_mask_bearings: tuple[float, float] = (math.radians(-10.0), math.radians(10.0))
    center_mask_threshold: float = 40.0
    open_kernel: tuple[int, int] = (3, 1)
    median_kernel: tuple[int, int] = (3, 3)

    def __post_init__(self) -> None:
        if self.chain not in ("horizontal", "vertical"):
            raise ValueError(f"chain must be horizontal or vertical, got {self.chain!r}")
        if not 0.0 <= self.row_quantile <= 1.0:
            raise ValueError("row_quantile must lie in [0, 1]")
        for kr, kc in (self.open_kernel, self.median_kernel):
            if kr < 1 or kc < 1 or kr % 2 == 0 or kc % 2 == 0:
                raise ValueError("kernel dimensions must be odd and positive")


def row_quantile_values(data: np.ndarray, q: float) -> np.ndarray:
    """Lower nearest-rank q-quantile of every row.

    The quantile of a row of n values is the sorted element at index
    max(ceil(q*n) - 1, 0). This convention is reproducible bit-exactly and
    degrades to the row minimum at q = 0.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError("quantile must lie in [0, 1]")
    n = data.shape[1]
    k = max(int(math.ceil(q * n)) - 1, 0)
    return np.sort(data, axis=1)[:, k]


def subtract_row_quantile(img: PolarSonarImage, q: float) -> PolarSonarImage:
    """Subtract each row's nearest-rank q-quantile, clamping at 0."""
    out = img.data - row_quantile_values(img.data, q)[:, None]
    np.maximum(out, 0.0, out=out)
    return img.with_data(out)


def subtract_row_mean(img: PolarSonarImage) -> PolarSonarImage:
    """Subtract each row's mean, clamping at 0."""
    out = img.data - img.data.mean(axis=1)[:, None]
    np.maximum(out, 0.0, out=out)
    return img.with_data(out)


def otsu_threshold(img: PolarSonarImage) -> float:
    """Threshold maximizing between-class variance over the intensity histogram.

    Intensities are binned at integer levels 0..max_intensity (values are
    rounded to the nearest level). Raises on a constant image, whose
    histogram admits no two classes.
    """
    levels = int(img.intrinsics.max_intensity)
    rounded = np.floor(img.data + 0.5)
    hist = np.bincount(rounded.astype(np.int64).ravel(), minlength=levels + 1).astype(np.float64)
    if np.count_nonzero(hist) < 2:
        raise ValueError("degenerate histogram: image has fewer than two distinct levels")

    total = hist.sum()
    values = np.arange(levels + 1, dtype=np.float64)
    w0 = np.cumsum(hist)
    sum0 = np.cumsum(hist * values)
    w1 = total - w0
    mu0 = np.divide(sum0, w0, out=np.zeros_like(sum0), where=w0 > 0)
    mu1 = np.divide(sum0[-1] - sum0, w1, out=np.zeros_like(sum0), where=w1 > 0)
    between = w0 * w1 * (mu0 - mu1) ** 2
    # threshold t keeps pixels strictly above t; last level can never split
    return float(np.argmax(between[:-1]))


def otsu_mask(img: PolarSonarImage) -> np.ndarray:
    """Boolean mask keeping pixels strictly above the Otsu threshold."""
    return img.data > otsu_threshold(img)


def mask_center_bearings(
    img: PolarSonarImage, interval: tuple[float, float], threshold: float
) -> PolarSonarImage:
    """Zero low-intensity pixels in the columns whose bearing lies in ``interval``.

    Pixels in those columns with intensity strictly below ``threshold`` are
    set to 0; everything else is untouched.
    """
    lo, hi = interval
    intr = img.intrinsics
    if lo > hi:
        raise ValueError("interval must be ordered (lo, hi)")
    if lo < intr.bearing_min or hi > intr.bearing_max:
        raise ValueError("mask interval lies outside the image field of view")
    bearings = intr.bearings()
    cols = (bearings >= lo) & (bearings <= hi)
    out = np.array(img.data)
    zap = cols[None, :] & (out < threshold)
    out[zap] = 0.0
    return img.with_data(out)


def normalize_to_8bit(img: PolarSonarImage) -> PolarSonarImage:
    """Min-max rescale to [0, 255] with half-up rounding.

    An all-zero image is returned unchanged; a constant nonzero image maps
    to 255 everywhere (the maximum always maps to 255).
    """
    data = img.data
    lo, hi = float(data.min()), float(data.max())
    if hi == 0.0:
        return img.with_data(data, bit_depth=8)
    if hi == lo:
        return img.with_data(np.full_like(data, 255.0), bit_depth=8)
    scaled = (data - lo) * (255.0 / (hi - lo))
    return img.with_data(np.floor(scaled + 0.5), bit_depth=8)


def morphological_open(img: PolarSonarImage, kernel: tuple[int, int]) -> PolarSonarImage:
    """Grayscale opening with a flat rectangular element, replicate borders."""
    return img.with_data(kernels.grayscale_open2d(img.data, kernel[0], kernel[1]))


def median_filter(img: PolarSonarImage, kernel: tuple[int, int]) -> PolarSonarImage:
    """Windowed median filter, replicate borders."""
    return img.with_data(kernels.median_filter2d(img.data, kernel[0], kernel[1]))


def preprocess_horizontal(img: PolarSonarImage, cfg: PreprocessConfig | None = None) -> PolarSonarImage:
    """Horizontal-sonar chain: quantile subtraction, Otsu mask, 8-bit, opening."""
    cfg = cfg or PreprocessConfig(chain="horizontal")
    step = subtract_row_quantile(img, cfg.row_quantile)
    if not step.data.any():
        # constant inputs collapse to zero in step 1; nothing left to mask
        return step.with_data(step.data, bit_depth=8)
    masked = step.with_data(np.where(otsu_mask(step), step.data, 0.0))
    normed = normalize_to_8bit(masked)
    return morphological_open(normed, cfg.open_kernel)


def preprocess_vertical(img: PolarSonarImage, cfg: PreprocessConfig | None = None) -> PolarSonarImage:
    """Vertical-sonar chain: mean subtraction, center mask, 8-bit, median."""
    cfg = cfg or PreprocessConfig(chain="vertical")
    step = subtract_row_mean(img)
    step = mask_center_bearings(step, cfg.center_mask_bearings, cfg.center_mask_threshold)
    normed = normalize_to_8bit(step)
    return median_filter(normed, cfg.median_kernel)


def run_chain(img: PolarSonarImage, cfg: PreprocessConfig) -> PolarSonarImage:
    """Dispatch to the chain selected by ``cfg.chain``."""
    if cfg.chain == "horizontal":
        return preprocess_horizontal(img, cfg)
    return preprocess_vertical(img, cfg)
