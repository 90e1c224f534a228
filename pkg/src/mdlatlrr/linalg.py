"""Dense linear-algebra kernels: SVD, nuclear norm and the two proximal maps.

All routines work on float64 numpy arrays and reject non-finite input.
"""

from __future__ import annotations

import numpy as np

from .errors import ArgumentError, SVDConvergenceError


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Return ``m`` as a finite 2-D float64 array or raise ArgumentError."""
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ArgumentError(f"{name} must be a non-empty 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ArgumentError(f"{name} contains NaN or Inf")
    return a


def svd(m) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD ``m = U @ diag(s) @ V.T`` with ``s`` descending.

    Note that the third factor is returned as ``V`` (not ``V.T``).
    """
    a = as_matrix(m)
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise SVDConvergenceError(f"SVD failed to converge on {a.shape} matrix") from exc
    return u, s, vt.T


def singular_values(m) -> np.ndarray:
    a = as_matrix(m)
    try:
        return np.linalg.svd(a, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise SVDConvergenceError(f"SVD failed to converge on {a.shape} matrix") from exc


def nuclear_norm(m) -> float:
    """Sum of singular values."""
    return float(np.sum(singular_values(m)))


def batched_nuclear_norm(stack: np.ndarray) -> np.ndarray:
    """Nuclear norms of a stack of matrices with shape (k, p, q)."""
    stack = np.asarray(stack, dtype=np.float64)
    if stack.ndim != 3:
        raise ArgumentError(f"expected a (k, p, q) stack, got shape {stack.shape}")
    if stack.shape[0] == 0:
        return np.zeros(0)
    try:
        return np.linalg.svd(stack, compute_uv=False).sum(axis=1)
    except np.linalg.LinAlgError as exc:
        raise SVDConvergenceError("batched SVD failed to converge") from exc


def _check_tau(tau: float) -> float:
    tau = float(tau)
    if not np.isfinite(tau) or tau < 0:
        raise ArgumentError(f"threshold must be a finite non-negative number, got {tau}")
    return tau


def soft_threshold(m, tau: float) -> np.ndarray:
    """Entrywise shrinkage ``sign(x) * max(|x| - tau, 0)``."""
    tau = _check_tau(tau)
    a = np.asarray(m, dtype=np.float64)
    return np.sign(a) * np.maximum(np.abs(a) - tau, 0.0)


def svt_with_values(m, tau: float) -> tuple[np.ndarray, np.ndarray]:
    """Singular value thresholding; also returns the shrunk singular values."""
    tau = _check_tau(tau)
    u, s, v = svd(m)
    shrunk = np.maximum(s - tau, 0.0)
    keep = int(np.count_nonzero(shrunk))
    if keep == 0:
        return np.zeros_like(np.asarray(m, dtype=np.float64)), shrunk
    out = (u[:, :keep] * shrunk[:keep]) @ v[:, :keep].T
    return out, shrunk


def svt(m, tau: float) -> np.ndarray:
    """Proximal operator of ``tau * ||.||_*``."""
    return svt_with_values(m, tau)[0]
