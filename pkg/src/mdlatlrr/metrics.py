"""Objective fusion-quality metrics.

Images enter as float arrays on the [0, 1] scale. Histogram-based metrics
work on the 8-bit quantised image; SD, Qabf and the SSIM family work on the
pixel values rescaled to 0..255.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import ArgumentError

# Gradient-preservation (Qabf) sigmoid constants
QABF_GAMMA_G = 0.9994
QABF_KAPPA_G = -15.0
QABF_SIGMA_G = 0.5
QABF_GAMMA_A = 0.9879
QABF_KAPPA_A = -22.0
QABF_SIGMA_A = 0.8
QABF_L = 1.0

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = (0.01 * 255) ** 2
SSIM_C2 = (0.03 * 255) ** 2
MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)

METRIC_NAMES = ("En", "MI", "SD", "Qabf", "SCD", "SSIM_a", "MS-SSIM")
# Reported by the original evaluation but not implemented here.
RESERVED_METRICS = ("FMI_p", "FMI_w", "FMI_dct", "VIF", "EPI")


def quantize(img) -> np.ndarray:
    """Clamp to [0, 1] and round half away from zero onto 0..255 (uint8)."""
    a = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    return np.floor(a * 255.0 + 0.5).astype(np.uint8)


def _check_triple(src1, src2, fused):
    a, b, f = (np.asarray(x, dtype=np.float64) for x in (src1, src2, fused))
    if a.ndim != 2 or not (a.shape == b.shape == f.shape):
        raise ArgumentError(f"metric inputs must be equal-shape 2-D images: {a.shape}, {b.shape}, {f.shape}")
    return a, b, f


def _entropy_of_counts(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log2(p)))


def entropy(img) -> float:
    """Shannon entropy (bits) of the 256-bin grey-level histogram."""
    q = quantize(img)
    return _entropy_of_counts(np.bincount(q.ravel(), minlength=256))


def _mi_pair(a: np.ndarray, b: np.ndarray) -> float:
    qa = quantize(a).ravel().astype(np.int64)
    qb = quantize(b).ravel().astype(np.int64)
    joint = np.bincount(qa * 256 + qb, minlength=256 * 256).reshape(256, 256)
    return (
        _entropy_of_counts(joint.sum(axis=1))
        + _entropy_of_counts(joint.sum(axis=0))
        - _entropy_of_counts(joint.ravel())
    )


def mutual_information(src1, src2, fused) -> float:
    """MI(src1, fused) + MI(src2, fused) in bits."""
    a, b, f = _check_triple(src1, src2, fused)
    return _mi_pair(a, f) + _mi_pair(b, f)


def sd_metric(img) -> float:
    """Population standard deviation on the 0..255 scale."""
    a = np.asarray(img, dtype=np.float64) * 255.0
    return float(np.sqrt(np.mean((a - a.mean()) ** 2)))


# --- Qabf ---------------------------------------------------------------------

_SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
_SOBEL_Y = np.array([[1, 2, 1], [0, 0, 0], [-1, -2, -1]], dtype=np.float64)


def sobel_strength_orientation(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Edge strength and orientation with zero padding at the border."""
    gx = ndimage.correlate(img, _SOBEL_X, mode="constant", cval=0.0)
    gy = ndimage.correlate(img, _SOBEL_Y, mode="constant", cval=0.0)
    strength = np.sqrt(gx * gx + gy * gy)
    with np.errstate(divide="ignore", invalid="ignore"):
        angle = np.where(gx == 0, np.pi / 2, np.arctan(gy / np.where(gx == 0, 1.0, gx)))
    return strength, angle


def edge_preservation(g_src, a_src, g_fused, a_fused) -> np.ndarray:
    """Per-pixel Q^{XF} = Q_g * Q_alpha."""
    hi = np.maximum(g_src, g_fused)
    lo = np.minimum(g_src, g_fused)
    ratio = np.divide(lo, hi, out=np.ones_like(hi), where=hi > 0)
    orient = 1.0 - np.abs(a_src - a_fused) / (np.pi / 2)
    qg = QABF_GAMMA_G / (1.0 + np.exp(QABF_KAPPA_G * (ratio - QABF_SIGMA_G)))
    qa = QABF_GAMMA_A / (1.0 + np.exp(QABF_KAPPA_A * (orient - QABF_SIGMA_A)))
    return qg * qa


def qabf(src1, src2, fused) -> float:
    a, b, f = (x * 255.0 for x in _check_triple(src1, src2, fused))
    ga, aa = sobel_strength_orientation(a)
    gb, ab = sobel_strength_orientation(b)
    gf, af = sobel_strength_orientation(f)
    wa, wb = ga ** QABF_L, gb ** QABF_L
    den = np.sum(wa + wb)
    if den == 0:
        return 0.0
    num = np.sum(edge_preservation(ga, aa, gf, af) * wa + edge_preservation(gb, ab, gf, af) * wb)
    return float(num / den)


# --- SCD ------------------------------------------------------------------------

def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    den = np.sqrt(np.sum(xc * xc) * np.sum(yc * yc))
    if den == 0:
        return 0.0
    return float(np.sum(xc * yc) / den)


def scd(src1, src2, fused) -> float:
    """Sum of the correlations of differences."""
    a, b, f = _check_triple(src1, src2, fused)
    return _pearson(f - b, a) + _pearson(f - a, b)


# --- SSIM family --------------------------------------------------------------

def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Normalised 1-D Gaussian taps; the 2-D window is their outer product."""
    x = np.arange(size) - (size - 1) / 2
    g = np.exp(-(x * x) / (2 * sigma * sigma))
    return g / g.sum()


def _filter_valid(img: np.ndarray, taps: np.ndarray) -> np.ndarray:
    half = taps.size // 2
    out = ndimage.correlate1d(img, taps, axis=0, mode="constant")
    out = ndimage.correlate1d(out, taps, axis=1, mode="constant")
    return out[half:-half, half:-half] if half else out


def _ssim_maps(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(ssim_map, cs_map) over valid window positions, inputs on 0..255."""
    if min(x.shape) < SSIM_WINDOW:
        raise ArgumentError(f"image {x.shape} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    g = gaussian_window()
    mx, my = _filter_valid(x, g), _filter_valid(y, g)
    sxx = _filter_valid(x * x, g) - mx * mx
    syy = _filter_valid(y * y, g) - my * my
    sxy = _filter_valid(x * y, g) - mx * my
    cs = (2 * sxy + SSIM_C2) / (sxx + syy + SSIM_C2)
    lum = (2 * mx * my + SSIM_C1) / (mx * mx + my * my + SSIM_C1)
    return lum * cs, cs


def ssim(x, y) -> float:
    """Single-scale SSIM of two [0, 1] images."""
    x = np.asarray(x, dtype=np.float64) * 255.0
    y = np.asarray(y, dtype=np.float64) * 255.0
    return float(_ssim_maps(x, y)[0].mean())


def ssim_a(src1, src2, fused) -> float:
    a, b, f = _check_triple(src1, src2, fused)
    return 0.5 * (ssim(a, f) + ssim(b, f))


def ms_ssim_scales(shape: tuple[int, int]) -> int:
    k, size = 0, min(shape)
    while k < len(MS_SSIM_WEIGHTS) and size >= SSIM_WINDOW:
        k += 1
        size //= 2
    if k == 0:
        raise ArgumentError(f"image {shape} is too small for MS-SSIM")
    return k


def _downsample(img: np.ndarray) -> np.ndarray:
    h, w = img.shape[0] // 2 * 2, img.shape[1] // 2 * 2
    v = img[:h, :w]
    return 0.25 * (v[0::2, 0::2] + v[1::2, 0::2] + v[0::2, 1::2] + v[1::2, 1::2])


def ms_ssim_pair(x, y) -> float:
    """Multi-scale SSIM; negative per-scale terms are clamped to zero."""
    x = np.asarray(x, dtype=np.float64) * 255.0
    y = np.asarray(y, dtype=np.float64) * 255.0
    k = ms_ssim_scales(x.shape)
    w = np.asarray(MS_SSIM_WEIGHTS[:k])
    w = w / w.sum()
    value = 1.0
    for j in range(k):
        s_map, cs_map = _ssim_maps(x, y)
        term = s_map.mean() if j == k - 1 else cs_map.mean()
        value *= max(float(term), 0.0) ** w[j]
        if j < k - 1:
            x, y = _downsample(x), _downsample(y)
    return float(value)


def ms_ssim(src1, src2, fused) -> float:
    a, b, f = _check_triple(src1, src2, fused)
    return 0.5 * (ms_ssim_pair(a, f) + ms_ssim_pair(b, f))


@dataclass
class MetricReport:
    pair_id: str
    values: dict[str, float] = field(default_factory=dict)

    def to_record(self) -> dict:
        return {"pair_id": self.pair_id, **self.values}


def evaluate(src1, src2, fused, pair_id: str = "") -> MetricReport:
    """All seven metrics for one (source, source, fused) triple."""
    a, b, f = _check_triple(src1, src2, fused)
    values = {
        "En": entropy(f),
        "MI": mutual_information(a, b, f),
        "SD": sd_metric(f),
        "Qabf": qabf(a, b, f),
        "SCD": scd(a, b, f),
        "SSIM_a": ssim_a(a, b, f),
        "MS-SSIM": ms_ssim(a, b, f),
    }
    return MetricReport(pair_id, values)


def aggregate(reports: list[MetricReport], pair_id: str = "mean") -> MetricReport:
    """Per-metric arithmetic mean over a batch of reports."""
    if not reports:
        raise ArgumentError("cannot aggregate an empty batch")
    names = list(reports[0].values)
    return MetricReport(pair_id, {k: float(np.mean([r.values[k] for r in reports])) for k in names})
