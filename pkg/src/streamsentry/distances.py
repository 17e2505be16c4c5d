"""Pairwise latent distances and the threshold rules built on them.

At each time step every sensor's window is encoded to a latent vector;
the detector examines the symmetric matrix of pairwise Euclidean
distances between those latents. A sensor is flagged when its distance
to every other sensor exceeds a threshold calibrated on an anomaly-free
training segment. The autoencoder path adds a second channel: a window
whose reconstruction loss exceeds a high training quantile is flagged
regardless of distances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DimMismatchError(Exception):
    """Latent vectors of unequal dimension."""


class EmptyCalibrationError(Exception):
    """Calibration requires at least one distance matrix / loss sample."""


@dataclass(frozen=True)
class DetectorThresholds:
    """Calibrated decision thresholds for one detector path.

    distance_threshold is in latent-space units; loss_threshold (used by
    the autoencoder path only) is in MSE units. The calibration record
    keeps the training statistics and the (c, q) recipe that produced the
    thresholds.
    """

    distance_threshold: float
    loss_threshold: float | None
    calibration: dict

    def __post_init__(self) -> None:
        if self.distance_threshold <= 0:
            raise ValueError("distance_threshold must be positive")
        if self.loss_threshold is not None and self.loss_threshold <= 0:
            raise ValueError("loss_threshold must be positive")


def distance_matrix(latents: np.ndarray) -> np.ndarray:
    """Symmetric n x n Euclidean distance matrix of n latent vectors.

    Accepts an (n, d) array or a sequence of equal-length vectors.
    """
    rows = [np.asarray(v, dtype=np.float64).ravel() for v in latents]
    if len(rows) < 2:
        raise ValueError(f"need at least 2 latent vectors, got {len(rows)}")
    dim = rows[0].shape[0]
    if any(r.shape[0] != dim for r in rows):
        raise DimMismatchError(
            f"latent dimensions differ: {[r.shape[0] for r in rows]}"
        )
    z = np.vstack(rows)
    diff = z[:, None, :] - z[None, :, :]
    d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    np.fill_diagonal(d, 0.0)
    return d


def distance_matrices(latents_per_step: np.ndarray) -> np.ndarray:
    """Distance matrices for a whole stream: (T, n, d) -> (T, n, n)."""
    z = np.asarray(latents_per_step, dtype=np.float64)
    diff = z[:, :, None, :] - z[:, None, :, :]
    d = np.sqrt(np.einsum("tijk,tijk->tij", diff, diff))
    for m in d:
        np.fill_diagonal(m, 0.0)
    return d


def off_diagonal(d: np.ndarray) -> np.ndarray:
    """Flattened off-diagonal entries of one or many square matrices."""
    d = np.asarray(d)
    n = d.shape[-1]
    mask = ~np.eye(n, dtype=bool)
    return d[..., mask].ravel()


def calibrate(
    train_matrices,
    c: float,
    train_losses=None,
    q: float = 0.99,
) -> DetectorThresholds:
    """Thresholds from anomaly-free training data.

    distance_threshold = mean + c * std over all off-diagonal entries of
    the training distance matrices (population std); loss_threshold = the
    q-quantile of per-window training losses when those are supplied.
    """
    mats = np.asarray(train_matrices, dtype=np.float64)
    if mats.size == 0:
        raise EmptyCalibrationError("no training distance matrices")
    if mats.ndim == 2:
        mats = mats[None, :, :]
    entries = off_diagonal(mats)
    mean = float(entries.mean())
    std = float(entries.std())
    distance_threshold = mean + c * std

    loss_threshold = None
    calibration = {"dist_mean": mean, "dist_std": std, "c": float(c)}
    if train_losses is not None:
        losses = np.asarray(train_losses, dtype=np.float64)
        if losses.size == 0:
            raise EmptyCalibrationError("no training losses")
        if not 0.0 < q <= 1.0:
            raise ValueError(f"quantile q must be in (0, 1], got {q}")
        loss_threshold = float(np.quantile(losses, q))
        calibration.update(
            {"loss_mean": float(losses.mean()), "loss_std": float(losses.std()), "q": float(q)}
        )
    return DetectorThresholds(
        distance_threshold=distance_threshold,
        loss_threshold=loss_threshold,
        calibration=calibration,
    )


def classify(
    d: np.ndarray, th: DetectorThresholds, rule: str = "all"
) -> np.ndarray:
    """Per-sensor 0/1 flags from one distance matrix.

    Under the default "all" rule sensor i is flagged iff its distance to
    every other sensor exceeds the threshold: a faulty sensor deviates
    from the whole group, while pairwise noise does not. The "majority"
    rule flags when more than half the distances exceed instead.
    """
    d = np.asarray(d, dtype=np.float64)
    n = d.shape[0]
    over = d > th.distance_threshold
    np.fill_diagonal(over, False)
    counts = over.sum(axis=1)
    if rule == "all":
        return (counts == n - 1).astype(np.int8)
    if rule == "majority":
        return (counts > (n - 1) / 2).astype(np.int8)
    raise ValueError(f"unknown flag rule {rule!r}")


def classify_stream(
    d: np.ndarray, th: DetectorThresholds, rule: str = "all"
) -> np.ndarray:
    """Vectorized `classify` over (T, n, n) matrices -> (T, n) flags."""
    d = np.asarray(d, dtype=np.float64)
    t, n, _ = d.shape
    over = d > th.distance_threshold
    idx = np.arange(n)
    over[:, idx, idx] = False
    counts = over.sum(axis=2)
    if rule == "all":
        return (counts == n - 1).astype(np.int8)
    if rule == "majority":
        return (counts > (n - 1) / 2).astype(np.int8)
    raise ValueError(f"unknown flag rule {rule!r}")


def loss_flag(loss, th: DetectorThresholds):
    """1 iff loss strictly exceeds the loss threshold (boundary stays 0)."""
    if th.loss_threshold is None:
        raise ValueError("thresholds were calibrated without losses")
    return (np.asarray(loss, dtype=np.float64) > th.loss_threshold).astype(np.int8)


def ae_verdict(distance_flags: np.ndarray, loss_flags: np.ndarray) -> np.ndarray:
    """Combined autoencoder flags: elementwise OR of the two channels."""
    a = np.asarray(distance_flags, dtype=np.int8)
    b = np.asarray(loss_flags, dtype=np.int8)
    if a.shape != b.shape:
        raise ValueError(f"flag shapes differ: {a.shape} vs {b.shape}")
    return (a | b).astype(np.int8)
