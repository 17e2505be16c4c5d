"""Confusion counts, precision/recall/F1 and correlation helpers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class LengthMismatchError(Exception):
    """Flag and label tracks of different lengths."""


class DegenerateVarianceError(Exception):
    """Pearson correlation of a constant series is undefined."""


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def confusion(flags, labels) -> ConfusionCounts:
    """Standard binary confusion counts for one sensor's flag track.

    Both inputs must already be restricted to determined steps (warm-up
    filtered out by the caller).
    """
    f = np.asarray(flags, dtype=np.int64)
    y = np.asarray(labels, dtype=np.int64)
    if f.shape != y.shape:
        raise LengthMismatchError(f"flags {f.shape} vs labels {y.shape}")
    if not np.isin(f, (0, 1)).all() or not np.isin(y, (0, 1)).all():
        raise ValueError("flags and labels must be 0/1 (filter warm-up first)")
    return ConfusionCounts(
        tp=int(np.sum((f == 1) & (y == 1))),
        fp=int(np.sum((f == 1) & (y == 0))),
        fn=int(np.sum((f == 0) & (y == 1))),
        tn=int(np.sum((f == 0) & (y == 0))),
    )


def prf1(c: ConfusionCounts) -> tuple[float, float, float]:
    """(precision, recall, f1) with every 0/0 defined as 0."""
    precision = c.tp / (c.tp + c.fp) if (c.tp + c.fp) else 0.0
    recall = c.tp / (c.tp + c.fn) if (c.tp + c.fn) else 0.0
    f1 = 2 * precision * recall / (precision + recall) if (precision + recall) else 0.0
    return precision, recall, f1


def pearson_r(x, y) -> float:
    """Sample Pearson correlation; raises on constant inputs."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatchError(f"series shapes {x.shape} vs {y.shape}")
    if x.size < 2:
        raise ValueError("need at least 2 points")
    xc = x - x.mean()
    yc = y - y.mean()
    denom = np.sqrt((xc * xc).sum() * (yc * yc).sum())
    if denom == 0.0:
        raise DegenerateVarianceError("a series has zero variance")
    return float(np.clip((xc * yc).sum() / denom, -1.0, 1.0))


def window_labels(labels: np.ndarray, w: int) -> np.ndarray:
    """Per-step window truth: step t is anomalous if any labeled reading
    falls inside its window span [t - w + 1, t].

    Input and output are (T,) 0/1 arrays for one sensor; entries before
    t = w - 1 are returned as 0 and should be excluded along with warm-up.
    """
    y = np.asarray(labels, dtype=np.int8)
    if y.ndim != 1:
        raise ValueError("window_labels expects one sensor's label track")
    windows = np.lib.stride_tricks.sliding_window_view(y, w)
    out = np.zeros_like(y)
    out[w - 1 :] = windows.max(axis=1)
    return out
