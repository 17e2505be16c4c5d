"""Core data model for multi-sensor streams.

Every detector in this package consumes the same unit of input: the most
recent W readings of one sensor, held in a fixed-capacity ring buffer and
advanced with stride 1. Normalization statistics are fit once on a
designated training segment and applied to every window thereafter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_WINDOW = 100

# Guards normalization against constant training segments.
STD_FLOOR = 1e-9


class NotFullError(Exception):
    """Raised when a full-window snapshot is requested too early."""


@dataclass(frozen=True)
class Reading:
    """One raw sensor sample: sensor index, time-step index, value."""

    sensor_id: int
    t: int
    value: float

    def __post_init__(self) -> None:
        if self.sensor_id < 0:
            raise ValueError(f"sensor_id must be >= 0, got {self.sensor_id}")
        if self.t < 0:
            raise ValueError(f"t must be >= 0, got {self.t}")


class SensorWindow:
    """Ring buffer of the last `capacity` readings of one sensor.

    Push appends the newest value; once full, each push evicts exactly the
    oldest element. A single window must only ever be mutated by one
    writer; snapshots are caller-owned copies and safe to share.
    """

    def __init__(self, capacity: int = DEFAULT_WINDOW) -> None:
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._buf = np.empty(capacity, dtype=np.float64)
        self._head = 0  # index of the oldest element once full
        self._count = 0

    def __len__(self) -> int:
        return self._count

    @property
    def is_full(self) -> bool:
        return self._count == self.capacity

    def push(self, value: float) -> "SensorWindow":
        """Append `value`, evicting the oldest element when full."""
        if self._count < self.capacity:
            self._buf[self._count] = value
            self._count += 1
        else:
            self._buf[self._head] = value
            self._head = (self._head + 1) % self.capacity
        return self

    def snapshot(self) -> np.ndarray:
        """Return the W values oldest-first as a caller-owned copy."""
        if not self.is_full:
            raise NotFullError(
                f"window holds {self._count} of {self.capacity} values"
            )
        if self._head == 0:
            return self._buf.copy()
        return np.concatenate((self._buf[self._head:], self._buf[: self._head]))

    def values(self) -> list[float]:
        """Current contents oldest-first (works before the window fills)."""
        if self._count < self.capacity:
            return self._buf[: self._count].tolist()
        return self.snapshot().tolist()


class NormStats:
    """Per-sensor mean/std fitted on the training segment only.

    Stds are floored at a small epsilon so constant training segments do
    not blow up downstream arithmetic.
    """

    def __init__(self, mean: np.ndarray, std: np.ndarray) -> None:
        self.mean = np.asarray(mean, dtype=np.float64)
        self.std = np.maximum(np.asarray(std, dtype=np.float64), STD_FLOOR)
        if self.mean.shape != self.std.shape:
            raise ValueError("mean and std must have matching shapes")

    @classmethod
    def fit(cls, train: np.ndarray) -> "NormStats":
        """Fit from a training matrix of shape (steps, n_sensors)."""
        train = np.asarray(train, dtype=np.float64)
        if train.ndim != 2 or train.shape[0] < 1:
            raise ValueError(f"expected a (steps, sensors) matrix, got {train.shape}")
        return cls(train.mean(axis=0), train.std(axis=0))

    @property
    def n_sensors(self) -> int:
        return self.mean.shape[0]

    def normalize(self, vec: np.ndarray, sensor_id: int) -> np.ndarray:
        """(x - mean) / std elementwise for one sensor's window."""
        return (np.asarray(vec, dtype=np.float64) - self.mean[sensor_id]) / self.std[sensor_id]

    def denormalize(self, vec: np.ndarray, sensor_id: int) -> np.ndarray:
        return np.asarray(vec, dtype=np.float64) * self.std[sensor_id] + self.mean[sensor_id]

    def normalize_rows(self, rows: np.ndarray) -> np.ndarray:
        """Normalize a (steps, n_sensors) matrix column-by-column."""
        rows = np.asarray(rows, dtype=np.float64)
        return (rows - self.mean) / self.std


def check_labels(readings: np.ndarray, labels: np.ndarray) -> None:
    """Validate that a ground-truth track matches its reading matrix."""
    readings = np.asarray(readings)
    labels = np.asarray(labels)
    if readings.shape != labels.shape:
        raise ValueError(
            f"labels shape {labels.shape} != readings shape {readings.shape}"
        )
    if not np.isin(labels, (0, 1)).all():
        raise ValueError("labels must be 0/1")


def pooled_windows(train: np.ndarray, stats: NormStats, w: int) -> np.ndarray:
    """All full normalized stride-1 windows from every sensor, stacked.

    From a (steps, n) training matrix this yields an
    ((steps - w + 1) * n, w) matrix: the shared training set for both
    dimensionality reducers.
    """
    train = np.asarray(train, dtype=np.float64)
    steps, n = train.shape
    if steps < w:
        raise ValueError(f"need at least {w} training steps, got {steps}")
    out = []
    for s in range(n):
        col = stats.normalize(train[:, s], s)
        out.append(sliding_windows(col, w))
    return np.vstack(out)


def sliding_windows(series: np.ndarray, w: int) -> np.ndarray:
    """Stride-1 full windows of a 1-D series as a (len - w + 1, w) matrix."""
    series = np.asarray(series, dtype=np.float64)
    if series.ndim != 1 or series.shape[0] < w:
        raise ValueError(f"series of length >= {w} required, got {series.shape}")
    return np.lib.stride_tricks.sliding_window_view(series, w).copy()
