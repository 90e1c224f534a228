"""Fusion of two registered images through their multi-level decompositions.

Base parts are blended with fixed weights. Detail parts are blended column
by column (one column = one patch), each source weighted by the nuclear or
l1 norm of its patch relative to the pair's total.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .decompose import MAX_LEVELS, check_image
from .errors import ArgumentError
from .latlrr import ProjectionMatrix
from .linalg import batched_nuclear_norm
from .patches import OverlapAccumulator, PatchGeometry, PatchMatrix, iter_patch_blocks, reconstruct_image

NORMS = ("nuclear", "l1")


@dataclass(frozen=True)
class FusionConfig:
    levels: int = 2
    stride: int = 1
    detail_norm: str = "nuclear"
    base_weights: tuple[float, float] = (0.5, 0.5)

    def __post_init__(self):
        if not 1 <= self.levels <= MAX_LEVELS:
            raise ArgumentError(f"levels must be in 1..{MAX_LEVELS}, got {self.levels}")
        if self.stride < 1:
            raise ArgumentError(f"stride must be >= 1, got {self.stride}")
        if self.detail_norm not in NORMS:
            raise ArgumentError(f"detail_norm must be one of {NORMS}, got {self.detail_norm!r}")
        w1, w2 = self.base_weights
        if w1 < 0 or w2 < 0 or abs(w1 + w2 - 1.0) > 1e-12:
            raise ArgumentError(f"base weights must be non-negative and sum to 1, got {self.base_weights}")


@dataclass
class DetailWeights:
    w1: np.ndarray
    w2: np.ndarray


def fuse_base(b1, b2, w1: float = 0.5, w2: float = 0.5) -> np.ndarray:
    b1 = np.asarray(b1, dtype=np.float64)
    b2 = np.asarray(b2, dtype=np.float64)
    if b1.shape != b2.shape:
        raise ArgumentError(f"base parts differ in shape: {b1.shape} vs {b2.shape}")
    return w1 * b1 + w2 * b2


def column_saliency(V: np.ndarray, n: int, norm: str) -> np.ndarray:
    """Per-column activity: nuclear norm of the reshaped patch, or l1 norm."""
    if norm == "nuclear":
        return batched_nuclear_norm(V.T.reshape(-1, n, n))
    if norm == "l1":
        return np.abs(V).sum(axis=0)
    raise ArgumentError(f"unknown norm {norm!r}; expected one of {NORMS}")


def _weights(V1: np.ndarray, V2: np.ndarray, n: int, norm: str) -> tuple[np.ndarray, np.ndarray]:
    a1 = column_saliency(V1, n, norm)
    a2 = column_saliency(V2, n, norm)
    total = a1 + a2
    degenerate = total == 0
    safe = np.where(degenerate, 1.0, total)
    w1 = np.where(degenerate, 0.5, a1 / safe)
    w2 = np.where(degenerate, 0.5, a2 / safe)
    return w1, w2


def _check_pair(v1: PatchMatrix, v2: PatchMatrix) -> None:
    if v1.geometry != v2.geometry:
        raise ArgumentError("detail matrices come from different patch geometries")


def detail_weights(v1: PatchMatrix, v2: PatchMatrix, norm: str = "nuclear") -> DetailWeights:
    _check_pair(v1, v2)
    w1, w2 = _weights(v1.mat, v2.mat, v1.geometry.patch_size, norm)
    return DetailWeights(w1, w2)


def fuse_details(v1: PatchMatrix, v2: PatchMatrix, norm: str = "nuclear") -> tuple[PatchMatrix, np.ndarray]:
    w = detail_weights(v1, v2, norm)
    fused = PatchMatrix(v1.geometry, w.w1 * v1.mat + w.w2 * v2.mat)
    return fused, reconstruct_image(fused)


def iter_fused_levels(
    img1,
    img2,
    proj: ProjectionMatrix,
    cfg: FusionConfig,
    max_columns: int = 32768,
) -> Iterator[np.ndarray]:
    """Yield the unclamped fused image for each level ``1..cfg.levels``.

    Levels share their detail parts, so the level-``k`` result is the fused
    base at level ``k`` plus the first ``k`` fused detail images. Patch
    columns are streamed in blocks to keep memory bounded at stride 1.
    """
    img1 = check_image(img1, proj)
    img2 = check_image(img2, proj)
    if img1.shape != img2.shape:
        raise ArgumentError(f"source images differ in shape: {img1.shape} vs {img2.shape}")
    geom = PatchGeometry.for_image(img1.shape[0], img1.shape[1], proj.n, cfg.stride)
    L = proj.mat
    w_b1, w_b2 = cfg.base_weights

    b1, b2 = img1, img2
    detail_sum = np.zeros_like(img1)
    for _ in range(cfg.levels):
        acc1, acc2, accf = OverlapAccumulator(geom), OverlapAccumulator(geom), OverlapAccumulator(geom)
        for (c0, blk1), (_, blk2) in zip(
            iter_patch_blocks(b1, geom, max_columns), iter_patch_blocks(b2, geom, max_columns)
        ):
            V1 = L @ blk1
            V2 = L @ blk2
            w1, w2 = _weights(V1, V2, proj.n, cfg.detail_norm)
            acc1.add(c0, V1)
            acc2.add(c0, V2)
            accf.add(c0, w1 * V1 + w2 * V2)
        b1 = b1 - acc1.result()
        b2 = b2 - acc2.result()
        detail_sum = detail_sum + accf.result()
        yield fuse_base(b1, b2, w_b1, w_b2) + detail_sum


def fuse_levels(img1, img2, proj: ProjectionMatrix, cfg: FusionConfig, max_columns: int = 32768) -> list[np.ndarray]:
    return list(iter_fused_levels(img1, img2, proj, cfg, max_columns))


def fuse_images(img1, img2, proj: ProjectionMatrix, cfg: FusionConfig, clamp: bool = True) -> np.ndarray:
    """Fuse two registered grayscale images; the result is clamped to [0, 1] unless ``clamp=False``."""
    fused = fuse_levels(img1, img2, proj, cfg)[-1]
    return np.clip(fused, 0.0, 1.0) if clamp else fused
