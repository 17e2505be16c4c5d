"""Streaming detectors and the screen-then-confirm orchestration.

Three detectors share one input convention: at each time step the runner
pushes the step's n readings into per-sensor windows, and once every
window is full the detector decides on the (n, W) matrix of normalized
window snapshots.

* PcaDetector projects each window and thresholds pairwise latent
  distances.
* AeDetector runs the LSTM encoder-decoder on each window and ORs its
  distance flags with its reconstruction-loss flags.
* HybridDetector runs the PCA screen every step and invokes the
  autoencoder only on screened steps; the autoencoder's verdict is final
  there. Invocation counters and per-step wall-clock times are recorded.

Timing wraps the detector decision only (window pushes excluded) on the
monotonic clock, since the comparison of interest is detector cost.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from streamsentry import distances as dist
from streamsentry import lstm_ae, pca
from streamsentry.distances import DetectorThresholds
from streamsentry.lstm_ae import AeModel
from streamsentry.pca import PcaModel
from streamsentry.windows import NormStats, SensorWindow

STAGE_WARMUP = "warmup"
STAGE_PCA_CLEAR = "pca_clear"
STAGE_PCA_FLAGGED = "pca_flagged"
STAGE_AE_CLEAR = "ae_clear"
STAGE_AE_FLAGGED = "ae_flagged"
STAGE_AE_CONFIRMED = "ae_confirmed"
STAGE_AE_CLEARED = "ae_cleared"

UNDETERMINED = -1


@dataclass
class Verdict:
    """Per-step decision: flags per sensor, producing stage, wall-clock cost.

    flags holds 0/1 per sensor, or -1 for every sensor during warm-up.
    """

    t: int
    flags: np.ndarray
    stage: str
    step_time_ns: int = 0

    @property
    def determined(self) -> bool:
        return self.stage != STAGE_WARMUP


class PcaDetector:
    """Linear screen: project windows, threshold pairwise latent distances."""

    name = "pca"

    def __init__(self, model: PcaModel, thresholds: DetectorThresholds,
                 flag_rule: str = "all") -> None:
        self.model = model
        self.thresholds = thresholds
        self.flag_rule = flag_rule

    def decide(self, win_matrix: np.ndarray) -> np.ndarray:
        z = pca.project(self.model, win_matrix)
        d = dist.distance_matrix(z)
        return dist.classify(d, self.thresholds, self.flag_rule)

    def decide_stream(self, windows_per_step: np.ndarray) -> np.ndarray:
        """Vectorized flags for (T, n, W) stacked windows."""
        t, n, w = windows_per_step.shape
        z = pca.project(self.model, windows_per_step.reshape(t * n, w))
        d = dist.distance_matrices(z.reshape(t, n, -1))
        return dist.classify_stream(d, self.thresholds, self.flag_rule)

    def latents(self, win_matrix: np.ndarray) -> np.ndarray:
        return pca.project(self.model, win_matrix)


class AeDetector:
    """Nonlinear confirmer: latent distances OR'd with loss exceedances."""

    name = "ae"

    def __init__(self, model: AeModel, thresholds: DetectorThresholds,
                 flag_rule: str = "all") -> None:
        self.model = model
        self.thresholds = thresholds
        self.flag_rule = flag_rule

    def decide(self, win_matrix: np.ndarray) -> np.ndarray:
        z, _, losses = lstm_ae.forward_batch(self.model, win_matrix)
        d = dist.distance_matrix(z)
        dflags = dist.classify(d, self.thresholds, self.flag_rule)
        lflags = dist.loss_flag(losses, self.thresholds)
        return dist.ae_verdict(dflags, lflags)

    def decide_stream(self, windows_per_step: np.ndarray) -> np.ndarray:
        t, n, w = windows_per_step.shape
        z, _, losses = lstm_ae.forward_batch(
            self.model, windows_per_step.reshape(t * n, w)
        )
        d = dist.distance_matrices(z.reshape(t, n, -1))
        dflags = dist.classify_stream(d, self.thresholds, self.flag_rule)
        lflags = dist.loss_flag(losses, self.thresholds).reshape(t, n)
        return dist.ae_verdict(dflags, lflags)

    def latents(self, win_matrix: np.ndarray) -> np.ndarray:
        return lstm_ae.forward_batch(self.model, win_matrix)[0]


class HybridDetector:
    """PCA screens every step; the autoencoder decides screened steps.

    When the screen flags any sensor, the autoencoder evaluates all
    sensors at that step (its distance matrix needs every latent) and its
    combined flags fully override the screen's. Screen flags are kept in
    the stage record for diagnostics: ae_confirmed when the confirmer
    kept at least one flag, ae_cleared when it cleared them all.
    """

    name = "hybrid"

    def __init__(self, pca_detector: PcaDetector, ae_detector: AeDetector) -> None:
        self.screen = pca_detector
        self.confirm = ae_detector
        self.ae_invocations = 0

    def decide_with_stage(self, win_matrix: np.ndarray) -> tuple[np.ndarray, str]:
        screen_flags = self.screen.decide(win_matrix)
        if not screen_flags.any():
            return screen_flags, STAGE_PCA_CLEAR
        self.ae_invocations += 1
        flags = self.confirm.decide(win_matrix)
        stage = STAGE_AE_CONFIRMED if flags.any() else STAGE_AE_CLEARED
        return flags, stage

    def decide(self, win_matrix: np.ndarray) -> np.ndarray:
        return self.decide_with_stage(win_matrix)[0]


@dataclass
class TimingStats:
    """Per-step wall-clock summary (nanoseconds), warm-up excluded."""

    count: int
    mean_ns: float
    median_ns: float
    p95_ns: float

    @classmethod
    def from_samples(cls, samples_ns) -> "TimingStats":
        arr = np.asarray(samples_ns, dtype=np.float64)
        if arr.size == 0:
            return cls(0, 0.0, 0.0, 0.0)
        return cls(
            count=int(arr.size),
            mean_ns=float(arr.mean()),
            median_ns=float(np.median(arr)),
            p95_ns=float(np.quantile(arr, 0.95)),
        )

    @property
    def mean_ms(self) -> float:
        return self.mean_ns / 1e6


@dataclass
class StreamResult:
    verdicts: list[Verdict]
    timing: TimingStats
    steps_total: int = 0
    ae_invocations: int = 0

    def flag_matrix(self) -> np.ndarray:
        """(T, n) array of flags; -1 on warm-up rows."""
        return np.vstack([v.flags for v in self.verdicts])

    def determined_flags(self) -> np.ndarray:
        return np.vstack([v.flags for v in self.verdicts if v.determined])


class StreamRunner:
    """Owns per-sensor windows and steps one detector over a stream."""

    def __init__(self, detector, n_sensors: int, window: int,
                 stats: NormStats | None) -> None:
        self.detector = detector
        self.stats = stats
        self.windows = [SensorWindow(window) for _ in range(n_sensors)]
        self.n = n_sensors
        self.w = window
        self._snap = np.empty((n_sensors, window), dtype=np.float64)
        self.steps_total = 0

    def step(self, readings: np.ndarray, t: int) -> Verdict:
        """Push one step's readings and produce a verdict.

        The timed region covers snapshotting, normalization and the
        detector decision; pushes are excluded.
        """
        self.steps_total += 1
        for s in range(self.n):
            self.windows[s].push(float(readings[s]))
        if not self.windows[0].is_full:
            return Verdict(
                t=t, flags=np.full(self.n, UNDETERMINED, dtype=np.int8),
                stage=STAGE_WARMUP,
            )

        start = time.perf_counter_ns()
        for s in range(self.n):
            self._snap[s] = self.windows[s].snapshot()
        win = self._snap
        if self.stats is not None:
            win = (win - self.stats.mean[:, None]) / self.stats.std[:, None]
        if isinstance(self.detector, HybridDetector):
            flags, stage = self.detector.decide_with_stage(win)
        else:
            flags = self.detector.decide(win)
            if self.detector.name == "pca":
                stage = STAGE_PCA_FLAGGED if flags.any() else STAGE_PCA_CLEAR
            else:
                stage = STAGE_AE_FLAGGED if flags.any() else STAGE_AE_CLEAR
        elapsed = time.perf_counter_ns() - start
        return Verdict(t=t, flags=flags, stage=stage, step_time_ns=int(elapsed))


def run_stream(
    detector,
    readings: np.ndarray,
    stats: NormStats | None = None,
    window: int | None = None,
) -> StreamResult:
    """Apply one detector at every step of a (T, n) reading matrix.

    The first W-1 steps yield warm-up verdicts and are excluded from
    timing. For a HybridDetector the invocation counter starts fresh.
    """
    readings = np.asarray(readings, dtype=np.float64)
    t_total, n = readings.shape
    w = window or getattr(detector, "window", None) or _infer_window(detector)
    if t_total <= w:
        raise ValueError(f"stream length {t_total} must exceed window {w}")
    if isinstance(detector, HybridDetector):
        detector.ae_invocations = 0

    runner = StreamRunner(detector, n, w, stats)
    verdicts = []
    samples = []
    for t in range(t_total):
        v = runner.step(readings[t], t)
        verdicts.append(v)
        if v.determined:
            samples.append(v.step_time_ns)
    return StreamResult(
        verdicts=verdicts,
        timing=TimingStats.from_samples(samples),
        steps_total=runner.steps_total,
        ae_invocations=getattr(detector, "ae_invocations", 0),
    )


def _infer_window(detector) -> int:
    if isinstance(detector, PcaDetector):
        return detector.model.input_dim
    if isinstance(detector, AeDetector):
        return detector.model.cfg.input_len
    if isinstance(detector, HybridDetector):
        return detector.screen.model.input_dim
    raise ValueError(f"cannot infer window length from {type(detector).__name__}")


def stacked_windows(readings: np.ndarray, stats: NormStats | None, w: int) -> np.ndarray:
    """Normalized (T - w + 1, n, w) window stack for offline evaluation."""
    readings = np.asarray(readings, dtype=np.float64)
    t_total, n = readings.shape
    per_sensor = []
    for s in range(n):
        col = readings[:, s]
        if stats is not None:
            col = stats.normalize(col, s)
        per_sensor.append(np.lib.stride_tricks.sliding_window_view(col, w))
    return np.stack(per_sensor, axis=1)


def evaluate_stream(
    detector,
    readings: np.ndarray,
    stats: NormStats | None = None,
    window: int | None = None,
) -> np.ndarray:
    """Offline (batched) flags, identical to run_stream's determined flags.

    Used by the sweep harness where per-step wall-clock honesty is not
    needed; the hybrid is still gated exactly as in streaming, with the
    autoencoder evaluated only at screen-flagged steps.
    """
    w = window or _infer_window(detector)
    wins = stacked_windows(readings, stats, w)
    if isinstance(detector, HybridDetector):
        screen_flags = detector.screen.decide_stream(wins)
        flagged = np.nonzero(screen_flags.any(axis=1))[0]
        out = np.zeros_like(screen_flags)
        if flagged.size:
            out[flagged] = detector.confirm.decide_stream(wins[flagged])
        detector.ae_invocations = int(flagged.size)
        return out
    return detector.decide_stream(wins)
