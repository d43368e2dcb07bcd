"""Singular value thresholding for the nuclear-norm proximal problem.

``svt(Y, t)`` returns the global minimizer of

    ||Y - X||_F^2 + 2 t ||X||_*

obtained by soft-thresholding the singular values of ``Y`` at ``t``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["SvtResult", "svt", "svt_batch", "nnp_objective", "nuclear_norm"]

# singular values below this fraction of the largest are treated as zero
_RANK_CUTOFF = 1e-12


@dataclass(frozen=True)
class SvtResult:
    Z: np.ndarray
    singular_values_in: np.ndarray
    singular_values_out: np.ndarray

    @property
    def rank(self) -> int:
        return int(np.count_nonzero(self.singular_values_out > 0))


def _check_finite(Y: np.ndarray) -> None:
    if not np.all(np.isfinite(Y)):
        raise ValueError("input matrix has non-finite entries")


def _shrink(s: np.ndarray, half_rho: float) -> np.ndarray:
    s = np.where(s < _RANK_CUTOFF * s.max(axis=-1, keepdims=True, initial=0.0), 0.0, s)
    return np.maximum(s - half_rho, 0.0)


def svt(Y, half_rho: float) -> SvtResult:
    """Soft-threshold the singular values of ``Y`` by ``half_rho``.

    Parameters
    ----------
    Y : array_like, shape (m, n)
        Matrix to shrink.
    half_rho : float
        Threshold, non-negative. In the clustering Z-step this is ``rho / 2``.

    Returns
    -------
    SvtResult
        ``Z`` together with the singular values before and after shrinkage.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {Y.shape}")
    if half_rho < 0:
        raise ValueError(f"threshold must be non-negative, got {half_rho}")
    _check_finite(Y)
    if Y.size == 0:
        return SvtResult(Y.copy(), np.zeros(0), np.zeros(0))
    U, s, Vt = np.linalg.svd(Y, full_matrices=False)
    d = _shrink(s, half_rho)
    Z = (U * d) @ Vt
    return SvtResult(Z, s, d)


def svt_batch(Y, half_rho: float) -> np.ndarray:
    """Apply :func:`svt` to every matrix of a stack of shape (..., m, n)."""
    Y = np.asarray(Y, dtype=float)
    if half_rho < 0:
        raise ValueError(f"threshold must be non-negative, got {half_rho}")
    _check_finite(Y)
    U, s, Vt = np.linalg.svd(Y, full_matrices=False)
    d = _shrink(s, half_rho)
    return (U * d[..., None, :]) @ Vt


def nuclear_norm(X) -> float:
    return float(np.linalg.svd(np.asarray(X, dtype=float), compute_uv=False).sum())


def nnp_objective(Y, X, lam: float) -> float:
    """``||Y - X||_F^2 + lam * ||X||_*``."""
    Y = np.asarray(Y, dtype=float)
    X = np.asarray(X, dtype=float)
    if Y.shape != X.shape:
        raise ValueError(f"shape mismatch: {Y.shape} vs {X.shape}")
    return float(np.sum((Y - X) ** 2) + lam * nuclear_norm(X))
