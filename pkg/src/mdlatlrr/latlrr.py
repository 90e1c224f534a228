"""Learning the latent low-rank projection matrix.

The solver targets

    min ||Z||_* + ||L||_* + lam * ||E||_1   s.t.  X = X Z + L X + E

with the inexact augmented Lagrangian scheme: auxiliary copies ``J = Z`` and
``S = L`` carry the nuclear norms, ``E`` takes an l1 shrinkage step and the
three multipliers follow a gradient-ascent update while the penalty grows
geometrically.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ArgumentError, DataError, NumericalError, PoolSizeError, StructuralError
from .linalg import as_matrix, soft_threshold, svt_with_values
from .patches import PatchGeometry, iter_patch_blocks, pad_image

log = logging.getLogger(__name__)

DETAIL = "detail"
SMOOTH = "smooth"


@dataclass(frozen=True)
class LatLrrParams:
    lam: float = 0.4
    mu0: float = 1e-6
    rho: float = 1.1
    mu_max: float = 1e6
    tol: float = 1e-6
    max_iters: int = 1000

    def __post_init__(self):
        if not self.lam > 0:
            raise ArgumentError(f"lambda must be positive, got {self.lam}")
        if not 0 < self.mu0 < self.mu_max:
            raise ArgumentError("need 0 < mu0 < mu_max")
        if not self.rho > 1:
            raise ArgumentError(f"rho must exceed 1, got {self.rho}")
        if not self.tol > 0:
            raise ArgumentError(f"tol must be positive, got {self.tol}")
        if self.max_iters < 1:
            raise ArgumentError("max_iters must be >= 1")


@dataclass
class LatLrrSolution:
    Z: np.ndarray
    L: np.ndarray
    E: np.ndarray
    iterations: int
    final_residual: float
    converged: bool
    # ||J||_* + ||S||_* + lam * ||E||_1 after each iteration
    objective_history: list[float] = field(default_factory=list)


def _row_space_basis(X: np.ndarray) -> np.ndarray:
    """Orthonormal basis (M x r) of the row space of X, r >= 1."""
    _, s, vt = np.linalg.svd(X, full_matrices=False)
    tol = max(X.shape) * np.finfo(np.float64).eps * (s[0] if s.size else 0.0)
    r = max(1, int(np.count_nonzero(s > tol)))
    return vt[:r].T.copy()


def solve_latlrr(X, params: LatLrrParams | None = None, *, reduce: bool = True) -> LatLrrSolution:
    """Solve the latent LRR problem by inexact ALM.

    With ``reduce=True`` the coefficient matrix is parametrised as
    ``Z = Q @ Zr`` where ``Q`` spans the row space of ``X``. Every iterate of
    the full scheme already lives in that subspace, so both variants produce
    the same sequence in exact arithmetic; the reduced one only needs SVDs
    of ``rank(X) x M`` instead of ``M x M`` matrices.
    """
    p = params or LatLrrParams()
    X = as_matrix(X, "X")
    d, m = X.shape
    if d < 2 or m < 2:
        raise ArgumentError(f"X must be at least 2x2, got {X.shape}")

    with np.errstate(over="ignore", invalid="ignore"):
        if reduce:
            Q = _row_space_basis(X)
            A = X @ Q
        else:
            Q = None
            A = X
        k = A.shape[1]
        gram_a = A.T @ A + np.eye(k)
        gram_x = X @ X.T + np.eye(d)
    if not (np.all(np.isfinite(gram_a)) and np.all(np.isfinite(gram_x))):
        raise NumericalError("X is too large in magnitude: Gram matrices overflow", iteration=0)
    inv_a = np.linalg.inv(gram_a)
    inv_b = np.linalg.inv(gram_x)
    AtX = A.T @ X

    J = np.zeros((k, m))
    Z = np.zeros((k, m))
    L = np.zeros((d, d))
    S = np.zeros((d, d))
    E = np.zeros((d, m))
    Y1 = np.zeros((d, m))
    Y2 = np.zeros((k, m))
    Y3 = np.zeros((d, d))
    mu = p.mu0

    history: list[float] = []
    residual = np.inf
    converged = False
    it = 0
    while it < p.max_iters:
        it += 1
        J, sj = svt_with_values(Z + Y2 / mu, 1.0 / mu)
        S, ss = svt_with_values(L + Y3 / mu, 1.0 / mu)
        Z = inv_a @ (AtX - A.T @ (L @ X) - A.T @ E + J + (A.T @ Y1 - Y2) / mu)
        L = ((X - A @ Z - E) @ X.T + S + (Y1 @ X.T - Y3) / mu) @ inv_b
        xmaz = X - A @ Z - L @ X
        E = soft_threshold(xmaz + Y1 / mu, p.lam / mu)

        leq1 = xmaz - E
        leq2 = Z - J
        leq3 = L - S
        full_leq2 = leq2 if Q is None else Q @ leq2
        residual = max(np.abs(leq1).max(), np.abs(full_leq2).max(), np.abs(leq3).max())
        history.append(float(sj.sum() + ss.sum() + p.lam * np.abs(E).sum()))

        if not (np.isfinite(residual) and np.isfinite(history[-1])):
            raise NumericalError("non-finite values in LatLRR iterate", iteration=it)
        if it == 1 or it % 50 == 0:
            log.debug("iter %d mu=%.3g residual=%.3g obj=%.6g", it, mu, residual, history[-1])
        if residual < p.tol or residual == 0.0:
            converged = True
            break
        Y1 += mu * leq1
        Y2 += mu * leq2
        Y3 += mu * leq3
        mu = min(p.mu_max, mu * p.rho)

    Z_full = Z if Q is None else Q @ Z
    return LatLrrSolution(Z_full, L, E, it, float(residual), converged, history)


def patch_sd(p) -> float:
    """Square root of the summed squared deviation from the patch mean."""
    a = np.asarray(p, dtype=np.float64)
    return float(np.sqrt(np.sum((a - a.mean()) ** 2)))


def column_sd(mat: np.ndarray) -> np.ndarray:
    """``patch_sd`` of every column of a patch matrix."""
    centred = mat - mat.mean(axis=0, keepdims=True)
    return np.sqrt(np.einsum("ij,ij->j", centred, centred))


def classify_patch(p, th: float) -> str:
    if th < 0:
        raise ArgumentError(f"threshold must be non-negative, got {th}")
    return DETAIL if patch_sd(p) > th else SMOOTH


@dataclass
class TrainingSet:
    X: np.ndarray
    labels: np.ndarray  # per column, DETAIL or SMOOTH
    detail_pool: int
    smooth_pool: int

    @property
    def detail_count(self) -> int:
        return int(np.count_nonzero(self.labels == DETAIL))

    @property
    def smooth_count(self) -> int:
        return int(np.count_nonzero(self.labels == SMOOTH))


def classify_pools(images: Sequence[np.ndarray], n: int, s: int, th: float) -> list[np.ndarray]:
    """Per-image boolean masks (True = detail) over the window scan order."""
    if th < 0:
        raise ArgumentError(f"threshold must be non-negative, got {th}")
    masks = []
    for img in images:
        img = np.asarray(img, dtype=np.float64)
        geom = PatchGeometry.for_image(img.shape[0], img.shape[1], n, s)
        mask = np.empty(geom.patch_count, dtype=bool)
        for c0, block in iter_patch_blocks(img, geom):
            mask[c0:c0 + block.shape[1]] = column_sd(block) > th
        masks.append(mask)
    return masks


def _gather_columns(images, n, s, global_idx: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    out = np.empty((n * n, global_idx.size))
    img_of = np.searchsorted(offsets, global_idx, side="right") - 1
    for i, img in enumerate(images):
        sel = np.flatnonzero(img_of == i)
        if sel.size == 0:
            continue
        img = np.asarray(img, dtype=np.float64)
        geom = PatchGeometry.for_image(img.shape[0], img.shape[1], n, s)
        local = global_idx[sel] - offsets[i]
        rows, cols = np.divmod(local, geom.window_cols)
        padded = pad_image(img, geom)
        for j, r, c in zip(sel, rows * s, cols * s):
            out[:, j] = padded[r:r + n, c:c + n].ravel()
    return out


def build_training_set(
    images: Sequence[np.ndarray],
    n: int,
    s: int,
    detail_count: int,
    smooth_count: int,
    th: float,
    seed: int,
) -> TrainingSet:
    """Classify every window of every image by SD and sample both pools.

    Pools are ordered by (image index, window scan order); one seeded
    generator draws ``detail_count`` then ``smooth_count`` indices without
    replacement. Detail columns come first in ``X``.
    """
    if not images:
        raise DataError("no training images given")
    if detail_count < 0 or smooth_count < 0 or detail_count + smooth_count < 2:
        raise ArgumentError("need non-negative counts with at least two patches in total")
    masks = classify_pools(images, n, s, th)
    all_mask = np.concatenate(masks)
    offsets = np.cumsum([0] + [m.size for m in masks])[:-1]
    detail_pool = np.flatnonzero(all_mask)
    smooth_pool = np.flatnonzero(~all_mask)
    log.info("pools: %d detail, %d smooth", detail_pool.size, smooth_pool.size)
    if detail_pool.size < detail_count:
        raise PoolSizeError(DETAIL, detail_pool.size, detail_count)
    if smooth_pool.size < smooth_count:
        raise PoolSizeError(SMOOTH, smooth_pool.size, smooth_count)

    rng = np.random.default_rng(seed)
    picked_d = detail_pool[rng.choice(detail_pool.size, detail_count, replace=False)]
    picked_s = smooth_pool[rng.choice(smooth_pool.size, smooth_count, replace=False)]
    idx = np.concatenate([picked_d, picked_s])
    X = _gather_columns(images, n, s, idx, offsets)
    labels = np.array([DETAIL] * detail_count + [SMOOTH] * smooth_count)
    return TrainingSet(X, labels, int(detail_pool.size), int(smooth_pool.size))


# --- projection matrix -------------------------------------------------------

MAGIC = b"MDLL"
FORMAT_VERSION = 1
PROVENANCE_KEYS = ("lambda", "seed", "detail_count", "smooth_count", "threshold")


@dataclass(frozen=True)
class ProjectionMatrix:
    n: int
    mat: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        mat = np.asarray(self.mat, dtype=np.float64)
        N = self.n * self.n
        if self.n < 2 or mat.shape != (N, N):
            raise StructuralError(f"projection matrix for n={self.n} must be {N}x{N}, got {mat.shape}")
        if not np.all(np.isfinite(mat)):
            raise StructuralError("projection matrix has non-finite entries")
        mat = mat.copy()
        mat.setflags(write=False)
        object.__setattr__(self, "mat", mat)

    def provenance_string(self) -> str:
        return ";".join(f"{k}={v}" for k, v in self.provenance.items())

    def to_bytes(self) -> bytes:
        payload = self.provenance_string().encode("utf-8")
        return b"".join([
            MAGIC,
            struct.pack("<II", FORMAT_VERSION, self.n),
            self.mat.astype("<f8").tobytes(order="C"),
            struct.pack("<I", len(payload)),
            payload,
        ])

    @classmethod
    def from_bytes(cls, data: bytes) -> "ProjectionMatrix":
        if len(data) < 12 or data[:4] != MAGIC:
            raise DataError("not a projection matrix file (bad magic)")
        version, n = struct.unpack_from("<II", data, 4)
        if version != FORMAT_VERSION:
            raise DataError(f"unsupported projection file version {version}")
        N = n * n
        end = 12 + 8 * N * N
        if len(data) < end + 4:
            raise DataError("projection matrix file is truncated")
        mat = np.frombuffer(data, dtype="<f8", count=N * N, offset=12).reshape(N, N)
        (length,) = struct.unpack_from("<I", data, end)
        if len(data) != end + 4 + length:
            raise DataError("projection matrix file has a bad provenance length")
        text = data[end + 4:].decode("utf-8")
        prov = {}
        for item in filter(None, text.split(";")):
            key, sep, value = item.partition("=")
            if not sep:
                raise DataError(f"malformed provenance entry {item!r}")
            prov[key] = value
        try:
            return cls(int(n), mat.astype(np.float64), prov)
        except StructuralError as exc:
            raise DataError(str(exc)) from exc

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "ProjectionMatrix":
        try:
            data = Path(path).read_bytes()
        except OSError as exc:
            raise DataError(f"cannot read projection file {path}: {exc}") from exc
        return cls.from_bytes(data)


def train_projection(
    images: Sequence[np.ndarray],
    n: int,
    s: int = 1,
    detail_count: int = 1000,
    smooth_count: int = 1000,
    th: float = 0.5,
    seed: int = 0,
    params: LatLrrParams | None = None,
) -> tuple[ProjectionMatrix, TrainingSet, LatLrrSolution]:
    params = params or LatLrrParams()
    ts = build_training_set(images, n, s, detail_count, smooth_count, th, seed)
    sol = solve_latlrr(ts.X, params)
    if not sol.converged:
        log.warning("LatLRR stopped after %d iterations, residual %.3g", sol.iterations, sol.final_residual)
    prov = {
        "lambda": repr(float(params.lam)),
        "seed": str(int(seed)),
        "detail_count": str(int(detail_count)),
        "smooth_count": str(int(smooth_count)),
        "threshold": repr(float(th)),
    }
    return ProjectionMatrix(n, sol.L, prov), ts, sol
