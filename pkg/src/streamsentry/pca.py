"""Linear dimensionality reduction over sensor windows.

The model is fit once on a training matrix of normalized windows via the
sample covariance and a symmetric eigendecomposition (the input dimension
is the window length, 100 by default, so this is trivial at desk scale)
and is never refit during streaming. Projection of one window is a single
k x W matrix-vector product.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Eigenvalues at or below max(eigenvalue) * RANK_TOL count as zero variance.
RANK_TOL = 1e-10


@dataclass
class PcaModel:
    """Training mean plus k orthonormal principal components (rows).

    Attributes:
        mean: column mean of the training matrix, shape (W,).
        components: (k, W) row-orthonormal matrix, rows ordered by
            descending explained variance, deterministic sign convention.
        explained_variance: the k leading eigenvalues, non-increasing.
        rank_deficient: True when fewer than k directions carried nonzero
            variance; surplus rows are an arbitrary orthonormal completion.
    """

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    rank_deficient: bool = False

    k: int = field(init=False)
    input_dim: int = field(init=False)

    def __post_init__(self) -> None:
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.components = np.asarray(self.components, dtype=np.float64)
        self.k, self.input_dim = self.components.shape
        if self.mean.shape != (self.input_dim,):
            raise ValueError("mean length must equal component row length")


def _apply_sign_convention(components: np.ndarray) -> np.ndarray:
    """Make each row's largest-magnitude entry positive (ties: lowest index)."""
    out = components.copy()
    for row in out:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1.0
    return out


def fit_pca(X: np.ndarray, k: int) -> PcaModel:
    """Fit the top-k principal components of a (m, W) training matrix.

    Uses the sample covariance (ddof=1) and `eigh`; components come out
    orthonormal and ordered by descending eigenvalue. When the data has
    fewer than k nonzero-variance directions the model is still returned
    with `rank_deficient` set and the surplus rows taken from the
    eigenbasis completion.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D training matrix, got shape {X.shape}")
    m, w = X.shape
    if m < 2:
        raise ValueError(f"need at least 2 training rows, got {m}")
    if not 1 <= k <= min(m, w):
        raise ValueError(f"k must be in [1, min(m, W)] = [1, {min(m, w)}], got {k}")

    mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / (m - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)  # ascending order
    order = np.argsort(eigvals, kind="stable")[::-1]
    eigvals = eigvals[order]
    components = eigvecs[:, order].T[:k]

    explained = np.maximum(eigvals[:k], 0.0)
    cutoff = eigvals.max() * RANK_TOL if eigvals.max() > 0 else 0.0
    nonzero = int(np.sum(eigvals > cutoff))
    return PcaModel(
        mean=mean,
        components=_apply_sign_convention(components),
        explained_variance=explained,
        rank_deficient=nonzero < k,
    )


def project(model: PcaModel, x: np.ndarray) -> np.ndarray:
    """Latent vector components @ (x - mean); accepts (W,) or (B, W)."""
    x = np.asarray(x, dtype=np.float64)
    return (x - model.mean) @ model.components.T


def reconstruct(model: PcaModel, z: np.ndarray) -> np.ndarray:
    """Back-projection mean + components^T @ z; accepts (k,) or (B, k)."""
    z = np.asarray(z, dtype=np.float64)
    return z @ model.components + model.mean
