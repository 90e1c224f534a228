"""Sliding-window patch extraction and overlap-averaging reconstruction.

Conventions shared by every module:

* a patch is vectorised row-major (pixel ``(a, b)`` of an ``n x n`` window
  lands in row ``a * n + b``);
* windows are scanned row-major, so column ``j`` is window
  ``(j // cols, j % cols)`` with top-left corner ``(s * (j // cols), s * (j % cols))``;
* images whose size does not fit the stride are edge-replicated on the
  bottom/right before extraction and cropped again after reconstruction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ArgumentError, StructuralError


@dataclass(frozen=True)
class PatchGeometry:
    image_height: int
    image_width: int
    patch_size: int
    stride: int
    pad_bottom: int = 0
    pad_right: int = 0

    def __post_init__(self):
        n, s = self.patch_size, self.stride
        if n < 2:
            raise ArgumentError(f"patch size must be >= 2, got {n}")
        if s < 1 or s > n:
            raise ArgumentError(f"stride must satisfy 1 <= s <= n={n}, got {s}")
        if min(self.image_height, self.image_width) < n:
            raise ArgumentError(
                f"patch size {n} exceeds image size {self.image_height}x{self.image_width}"
            )
        if (self.padded_height - n) % s or (self.padded_width - n) % s:
            raise StructuralError("padded image size is not compatible with the stride")

    @classmethod
    def for_image(cls, height: int, width: int, n: int, s: int) -> "PatchGeometry":
        if n < 2:
            raise ArgumentError(f"patch size must be >= 2, got {n}")
        if s < 1 or s > n:
            raise ArgumentError(f"stride must satisfy 1 <= s <= n={n}, got {s}")
        if n > min(height, width):
            raise ArgumentError(f"patch size {n} exceeds image size {height}x{width}")
        return cls(height, width, n, s, (-(height - n)) % s, (-(width - n)) % s)

    @property
    def padded_height(self) -> int:
        return self.image_height + self.pad_bottom

    @property
    def padded_width(self) -> int:
        return self.image_width + self.pad_right

    @property
    def window_rows(self) -> int:
        return (self.padded_height - self.patch_size) // self.stride + 1

    @property
    def window_cols(self) -> int:
        return (self.padded_width - self.patch_size) // self.stride + 1

    @property
    def patch_count(self) -> int:
        return self.window_rows * self.window_cols

    @property
    def patch_dim(self) -> int:
        return self.patch_size * self.patch_size


@dataclass
class PatchMatrix:
    geometry: PatchGeometry
    mat: np.ndarray

    def __post_init__(self):
        expected = (self.geometry.patch_dim, self.geometry.patch_count)
        if self.mat.shape != expected:
            raise StructuralError(
                f"patch matrix shape {self.mat.shape} does not match geometry {expected}"
            )


def _as_image(img) -> np.ndarray:
    a = np.asarray(img, dtype=np.float64)
    if a.ndim != 2:
        raise ArgumentError(f"expected a 2-D grayscale image, got shape {a.shape}")
    return a


def pad_image(img: np.ndarray, geom: PatchGeometry) -> np.ndarray:
    if geom.pad_bottom == 0 and geom.pad_right == 0:
        return img
    return np.pad(img, ((0, geom.pad_bottom), (0, geom.pad_right)), mode="edge")


def _window_view(padded: np.ndarray, geom: PatchGeometry) -> np.ndarray:
    n, s = geom.patch_size, geom.stride
    return sliding_window_view(padded, (n, n))[::s, ::s]


def extract_patches(img, n: int, s: int) -> PatchMatrix:
    """The P(.) operator: every ``n x n`` window at stride ``s`` as one column."""
    img = _as_image(img)
    geom = PatchGeometry.for_image(img.shape[0], img.shape[1], n, s)
    windows = _window_view(pad_image(img, geom), geom)
    mat = windows.reshape(geom.patch_count, geom.patch_dim).T.copy()
    return PatchMatrix(geom, mat)


def iter_patch_blocks(img, geom: PatchGeometry, max_columns: int = 32768) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(first_column, block)`` pieces of ``extract_patches(img).mat``.

    Blocks cover whole window rows, so peak memory stays near
    ``patch_dim * max_columns`` floats regardless of image size.
    """
    img = _as_image(img)
    if img.shape != (geom.image_height, geom.image_width):
        raise StructuralError(f"image shape {img.shape} does not match geometry")
    windows = _window_view(pad_image(img, geom), geom)
    rows_per_block = max(1, max_columns // geom.window_cols)
    for r0 in range(0, geom.window_rows, rows_per_block):
        chunk = windows[r0:r0 + rows_per_block]
        block = chunk.reshape(-1, geom.patch_dim).T
        yield r0 * geom.window_cols, np.ascontiguousarray(block)


class OverlapAccumulator:
    """Accumulates patch columns back onto the image grid (the R(.) operator).

    Per-pixel sums are accumulated window-offset by window-offset; the
    per-pixel coverage counts are exact integers and the division happens
    once in :meth:`result`.
    """

    def __init__(self, geom: PatchGeometry):
        self.geom = geom
        self._sum = np.zeros((geom.padded_height, geom.padded_width))
        self._count = _coverage_counts(geom)

    def add(self, first_column: int, block: np.ndarray) -> None:
        g = self.geom
        n, s, wc = g.patch_size, g.stride, g.window_cols
        if block.shape[0] != g.patch_dim:
            raise StructuralError(f"block has {block.shape[0]} rows, expected {g.patch_dim}")
        if first_column % wc or block.shape[1] % wc:
            raise StructuralError("blocks must cover whole window rows")
        r0 = first_column // wc
        nr = block.shape[1] // wc
        if r0 + nr > g.window_rows:
            raise StructuralError("block extends past the last window row")
        y0 = r0 * s
        for a in range(n):
            rows = slice(y0 + a, y0 + a + s * (nr - 1) + 1, s)
            for b in range(n):
                cols = slice(b, b + s * (wc - 1) + 1, s)
                self._sum[rows, cols] += block[a * n + b].reshape(nr, wc)

    def result(self) -> np.ndarray:
        g = self.geom
        out = self._sum / self._count
        return out[: g.image_height, : g.image_width]


def _coverage_counts(geom: PatchGeometry) -> np.ndarray:
    n, s = geom.patch_size, geom.stride

    def axis_counts(length: int, windows: int) -> np.ndarray:
        c = np.zeros(length, dtype=np.int64)
        for k in range(windows):
            c[k * s: k * s + n] += 1
        return c

    return np.outer(
        axis_counts(geom.padded_height, geom.window_rows),
        axis_counts(geom.padded_width, geom.window_cols),
    )


def coverage_counts(geom: PatchGeometry) -> np.ndarray:
    """Number of windows covering each pixel of the padded image."""
    return _coverage_counts(geom)


def reconstruct_image(pm: PatchMatrix) -> np.ndarray:
    """Average overlapping patch contributions back into an image."""
    if not isinstance(pm, PatchMatrix):
        raise StructuralError("reconstruct_image expects a PatchMatrix")
    acc = OverlapAccumulator(pm.geometry)
    acc.add(0, pm.mat)
    return acc.result()


def reshape_patch(col, n: int) -> np.ndarray:
    """The re(.) operator: a length ``n*n`` column back to an ``n x n`` patch."""
    v = np.asarray(col, dtype=np.float64)
    if v.ndim != 1 or v.size != n * n:
        raise ArgumentError(f"column of length {v.size} cannot be reshaped to {n}x{n}")
    return v.reshape(n, n)
