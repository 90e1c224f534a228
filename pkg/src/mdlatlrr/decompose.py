"""Single-level and multi-level latent low-rank image decomposition."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError
from .latlrr import ProjectionMatrix
from .patches import (
    OverlapAccumulator,
    PatchGeometry,
    PatchMatrix,
    extract_patches,
    iter_patch_blocks,
    reconstruct_image,
)

MAX_LEVELS = 8


@dataclass
class Decomposition:
    details: list[PatchMatrix]
    detail_images: list[np.ndarray]
    base: np.ndarray
    proj: ProjectionMatrix
    stride: int

    @property
    def levels(self) -> int:
        return len(self.details)

    def reconstruct(self) -> np.ndarray:
        return self.base + sum(self.detail_images)


def check_image(img, proj: ProjectionMatrix) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ArgumentError(f"expected a 2-D grayscale image, got shape {img.shape}")
    if min(img.shape) < proj.n:
        raise ArgumentError(
            f"image {img.shape[0]}x{img.shape[1]} is smaller than the {proj.n}x{proj.n} "
            "patch size of the projection matrix"
        )
    return img


def _check_levels(r: int) -> int:
    if not 1 <= r <= MAX_LEVELS:
        raise ArgumentError(f"levels must be in 1..{MAX_LEVELS}, got {r}")
    return int(r)


def dlatlrr(img, proj: ProjectionMatrix, s: int) -> tuple[PatchMatrix, np.ndarray, np.ndarray]:
    """One decomposition step: ``V = L @ P(img)``, ``I_d = R(V)``, ``I_b = img - I_d``."""
    img = check_image(img, proj)
    pm = extract_patches(img, proj.n, s)
    vd = PatchMatrix(pm.geometry, proj.mat @ pm.mat)
    detail = reconstruct_image(vd)
    return vd, detail, img - detail


def mdlatlrr(img, proj: ProjectionMatrix, r: int, s: int) -> Decomposition:
    """Apply :func:`dlatlrr` ``r`` times, each time to the previous base part."""
    r = _check_levels(r)
    base = check_image(img, proj)
    details, detail_images = [], []
    for _ in range(r):
        vd, detail, base = dlatlrr(base, proj, s)
        details.append(vd)
        detail_images.append(detail)
    return Decomposition(details, detail_images, base, proj, s)


def detail_image(img, proj: ProjectionMatrix, s: int, max_columns: int = 32768) -> np.ndarray:
    """``R(L @ P(img))`` computed block by block without holding P(img)."""
    img = check_image(img, proj)
    geom = PatchGeometry.for_image(img.shape[0], img.shape[1], proj.n, s)
    acc = OverlapAccumulator(geom)
    for c0, block in iter_patch_blocks(img, geom, max_columns):
        acc.add(c0, proj.mat @ block)
    return acc.result()


def base_images(img, proj: ProjectionMatrix, r: int, s: int) -> list[np.ndarray]:
    """Memory-light variant of :func:`mdlatlrr` returning ``[I_b^0, ..., I_b^r]``."""
    r = _check_levels(r)
    bases = [check_image(img, proj)]
    for _ in range(r):
        bases.append(bases[-1] - detail_image(bases[-1], proj, s))
    return bases
