"""Experiment harness: sensitivity sweeps, ROPE analysis and benchmarks.

Sweeps share one protocol. Detectors are trained and calibrated once per
sweep on a canonical anomaly-free training stream, then each grid point
generates its own scenario from a seed derived from (master seed, grid
index), so points are independent and every report is reproducible.
Scoring follows the range convention: every step from the anomaly onset
onward counts as anomalous on the faulty sensor, however sparse the
injected faults, and warm-up steps are excluded.

Per-point step times in sweep reports are throughput timings of the
batched evaluation path. The honest per-step numbers come from `bench`,
which streams step by step on the monotonic clock with at least three
repetitions and reports the median of per-repetition means.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from streamsentry import distances as dist
from streamsentry import lstm_ae, pca
from streamsentry.detectors import (
    AeDetector,
    HybridDetector,
    PcaDetector,
    TimingStats,
    evaluate_stream,
    run_stream,
    stacked_windows,
)
from streamsentry.distances import DetectorThresholds
from streamsentry.metrics import confusion, pearson_r, prf1
from streamsentry.synth import DistributionSpec, ScenarioSpec, generate
from streamsentry.windows import NormStats, pooled_windows

TRAIN_SEED_TAG = 999_983


@dataclass(frozen=True)
class SweepParams:
    """Engine knobs shared by detector training, calibration and sweeps.

    pca_c / ae_c are the threshold multipliers for the two distance
    channels; ae_q is the training-loss quantile for the reconstruction
    channel. Experiment presets pin their own operating points, mirroring
    the different regimes the detectors are meant to reproduce.
    """

    window: int = 100
    pca_k: int = 2
    hidden: int = 32
    latent: int = 4
    epochs: int = 50
    batch: int = 32
    learning_rate: float = 1e-3
    pca_c: float = 3.0
    ae_c: float = 3.0
    ae_q: float = 0.99
    flag_rule: str = "all"
    normalize: bool = True
    train_steps: int = 250
    calib_steps: int = 350
    calib_segments: int = 4
    ae_calib_wobble: float = 1.0
    n_sensors: int = 4


@dataclass
class DetectorBundle:
    """Trained models plus calibrated thresholds for every detector."""

    stats: NormStats | None
    pca_model: pca.PcaModel
    pca_thresholds: DetectorThresholds
    ae_model: lstm_ae.AeModel
    ae_thresholds: DetectorThresholds
    params: SweepParams

    def pca(self) -> PcaDetector:
        return PcaDetector(self.pca_model, self.pca_thresholds, self.params.flag_rule)

    def ae(self) -> AeDetector:
        return AeDetector(self.ae_model, self.ae_thresholds, self.params.flag_rule)

    def hybrid(self) -> HybridDetector:
        return HybridDetector(self.pca(), self.ae())

    def detector(self, kind: str):
        if kind == "pca":
            return self.pca()
        if kind == "ae":
            return self.ae()
        if kind == "hybrid":
            return self.hybrid()
        raise ValueError(f"unknown detector kind {kind!r}")


def point_seed(master_seed: int, index: int) -> int:
    """Deterministic per-grid-point seed derived from the master seed."""
    ss = np.random.SeedSequence((int(master_seed), int(index)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def training_stream(params: SweepParams, master_seed: int) -> np.ndarray:
    """The canonical anomaly-free stream detectors are fitted on."""
    spec = ScenarioSpec(
        n_sensors=params.n_sensors,
        steps=max(params.train_steps, params.window + 1),
        anomaly_start=0,
        anomaly_kind="none",
        seed=point_seed(master_seed, TRAIN_SEED_TAG),
    )
    readings, _ = generate(spec)
    return readings[: params.train_steps]


def calibration_segments(
    params: SweepParams, master_seed: int, wobble: float = 0.0
) -> list[np.ndarray]:
    """Independent anomaly-free segments used for threshold calibration.

    Per-window losses and pairwise distances carry a random per-segment
    offset (each short segment realizes its own variance), so thresholds
    estimated on a single segment transfer poorly. Pooling several
    independent segments lets the calibration quantiles cover that
    segment-to-segment spread.

    A nonzero `wobble` adds one constant per-sensor offset to each
    segment, drawn uniformly within +-wobble baseline sds. Such offsets
    are benign level differences inside the practical-equivalence band;
    calibrating the confirmer on them is what makes it tolerate small
    mean deviations that the screen still reacts to.
    """
    out = []
    rng = np.random.default_rng(
        np.random.SeedSequence((int(master_seed), TRAIN_SEED_TAG, 7))
    )
    for i in range(params.calib_segments):
        spec = ScenarioSpec(
            n_sensors=params.n_sensors,
            steps=max(params.calib_steps, params.window + 1),
            anomaly_start=0,
            anomaly_kind="none",
            seed=point_seed(master_seed, TRAIN_SEED_TAG + 1 + i),
        )
        readings, _ = generate(spec)
        if wobble > 0.0:
            offsets = rng.uniform(-wobble, wobble, size=params.n_sensors)
            readings = readings + offsets * spec.baseline_sd
        out.append(readings)
    return out


def split_segments(train: np.ndarray, params: SweepParams):
    """Split one anomaly-free range into fitting and calibration parts.

    Used when all available normal data lives in one file: when the range
    is long enough the tail (at least two windows) is held out for
    calibration; short ranges fall back to in-sample calibration.
    """
    t_total = train.shape[0]
    fit_steps = min(params.train_steps, t_total)
    need = params.window * 2
    if t_total - fit_steps >= need:
        return train[:fit_steps], [train[fit_steps:]]
    return train[:fit_steps], None


def train_detectors(
    train: np.ndarray,
    params: SweepParams,
    seed: int = 0,
    calib=None,
    ae_calib=None,
) -> DetectorBundle:
    """Fit normalization, both models and both threshold records.

    `train` is a (steps, n) anomaly-free segment used for fitting. When
    `calib` (one segment or a list of them) is given, thresholds are
    calibrated on those segments' per-step distance matrices and
    per-window losses; otherwise calibration falls back to the fitting
    segment itself. `ae_calib` optionally supplies separate segments for
    the confirmer's thresholds (the screen always calibrates on `calib`).
    """
    train = np.asarray(train, dtype=np.float64)
    p = params
    stats = NormStats.fit(train) if p.normalize else None
    X = _segment_windows(train, stats, p.window)

    pca_model = pca.fit_pca(X, p.pca_k)
    cfg = lstm_ae.AeConfig(
        input_len=p.window,
        hidden=p.hidden,
        latent=p.latent,
        epochs=p.epochs,
        batch=p.batch,
        learning_rate=p.learning_rate,
        seed=seed,
    )
    ae_model = lstm_ae.init_autoencoder(cfg)
    lstm_ae.train_autoencoder(ae_model, X)

    segments = _as_segments(calib, train)
    ae_segments = _as_segments(ae_calib, None) or segments

    pca_mats = []
    for seg in segments:
        wins = stacked_windows(seg, stats, p.window)
        t_steps, n, w = wins.shape
        flat = wins.reshape(t_steps * n, w)
        pca_lat = pca.project(pca_model, flat).reshape(t_steps, n, -1)
        pca_mats.append(dist.distance_matrices(pca_lat))
    pca_thresholds = dist.calibrate(np.concatenate(pca_mats), c=p.pca_c)

    ae_mats = []
    ae_losses = []
    for seg in ae_segments:
        wins = stacked_windows(seg, stats, p.window)
        t_steps, n, w = wins.shape
        flat = wins.reshape(t_steps * n, w)
        ae_lat, _, losses = lstm_ae.forward_batch(ae_model, flat)
        ae_mats.append(dist.distance_matrices(ae_lat.reshape(t_steps, n, -1)))
        ae_losses.append(losses)
    ae_thresholds = dist.calibrate(
        np.concatenate(ae_mats),
        c=p.ae_c,
        train_losses=np.concatenate(ae_losses),
        q=p.ae_q,
    )

    return DetectorBundle(
        stats=stats,
        pca_model=pca_model,
        pca_thresholds=pca_thresholds,
        ae_model=ae_model,
        ae_thresholds=ae_thresholds,
        params=p,
    )


def _as_segments(value, fallback):
    if value is None:
        return None if fallback is None else [fallback]
    if isinstance(value, np.ndarray) and value.ndim == 2:
        return [value]
    return [np.asarray(s, dtype=np.float64) for s in value]


def _segment_windows(train: np.ndarray, stats: NormStats | None, w: int) -> np.ndarray:
    if stats is not None:
        return pooled_windows(train, stats, w)
    return np.vstack(
        [
            np.lib.stride_tricks.sliding_window_view(train[:, s], w)
            for s in range(train.shape[1])
        ]
    ).astype(np.float64)


def train_bundle(params: SweepParams, master_seed: int) -> DetectorBundle:
    """Standard synthetic protocol.

    Fits on the canonical stream, calibrates the screen on clean
    independent segments and the confirmer on segments with benign
    within-band level offsets (see `calibration_segments`).
    """
    fit_part = training_stream(params, master_seed)
    calib = calibration_segments(params, master_seed)
    ae_calib = (
        calibration_segments(params, master_seed, wobble=params.ae_calib_wobble)
        if params.ae_calib_wobble > 0
        else None
    )
    return train_detectors(fit_part, params, master_seed, calib=calib, ae_calib=ae_calib)


def range_labels(spec: ScenarioSpec) -> np.ndarray:
    """Per-step truth under the range convention for the faulty sensor."""
    labels = np.zeros(spec.steps, dtype=np.int8)
    labels[spec.anomaly_start :] = 1
    return labels


def score_flags(
    flags: np.ndarray, labels: np.ndarray, sensor: int, window: int
) -> tuple[float, float, float]:
    """Precision/recall/F1 of one sensor's track, warm-up excluded.

    `flags` is the (T - window + 1, n) matrix from the batched evaluator
    (first determined step is t = window - 1); `labels` is the full (T,)
    per-step truth for the scored sensor.
    """
    track = flags[:, sensor]
    truth = labels[window - 1 :]
    return prf1(confusion(track, truth))


@dataclass
class SweepPoint:
    value: float
    metrics: dict[str, tuple[float, float, float]]
    mean_step_ms: dict[str, float]


@dataclass
class SweepReport:
    """Plot-ready sweep results: one row per grid value per detector."""

    sweep: str
    grid: list[float]
    detectors: list[str]
    points: list[SweepPoint]
    meta: dict = field(default_factory=dict)

    def f1_series(self, detector: str) -> np.ndarray:
        return np.array([p.metrics[detector][2] for p in self.points])

    def csv_rows(self) -> list[list]:
        header = ["value"]
        for d in self.detectors:
            header += [f"{d}_precision", f"{d}_recall", f"{d}_f1", f"{d}_mean_step_ms"]
        rows: list[list] = [header]
        for p in self.points:
            row: list = [p.value]
            for d in self.detectors:
                pr, rc, f1 = p.metrics[d]
                row += [pr, rc, f1, p.mean_step_ms.get(d, "")]
            rows.append(row)
        return rows

    def to_json(self) -> str:
        doc = {
            "sweep": self.sweep,
            "grid": self.grid,
            "detectors": self.detectors,
            "meta": self.meta,
            "points": [
                {
                    "value": p.value,
                    "metrics": {
                        d: {
                            "precision": p.metrics[d][0],
                            "recall": p.metrics[d][1],
                            "f1": p.metrics[d][2],
                        }
                        for d in self.detectors
                    },
                    "mean_step_ms": p.mean_step_ms,
                }
                for p in self.points
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True)


@dataclass(frozen=True)
class RopeBand:
    """Interval of means treated as practically equivalent to normal."""

    low: float = 45.0
    high: float = 55.0

    def __post_init__(self) -> None:
        if not self.low < self.high:
            raise ValueError(f"need low < high, got ({self.low}, {self.high})")

    def contains(self, value: float) -> bool:
        return self.low < value < self.high


def _evaluate_point(
    bundle: DetectorBundle,
    readings: np.ndarray,
    labels: np.ndarray,
    sensor: int,
    detectors,
    timing: bool = True,
) -> tuple[dict, dict]:
    metrics: dict = {}
    step_ms: dict = {}
    w = bundle.params.window
    steps = readings.shape[0] - w + 1
    for kind in detectors:
        det = bundle.detector(kind)
        start = time.perf_counter()
        flags = evaluate_stream(det, readings, bundle.stats, w)
        elapsed = time.perf_counter() - start
        metrics[kind] = score_flags(flags, labels, sensor, w)
        if timing:
            step_ms[kind] = elapsed * 1e3 / steps
    return metrics, step_ms


def mean_sweep(
    dist_kind: str,
    grid,
    params: SweepParams,
    master_seed: int = 0,
    detectors=("pca", "ae"),
    base: ScenarioSpec | None = None,
    timing: bool = True,
    bundle: DetectorBundle | None = None,
) -> SweepReport:
    """F1 versus the mean of the anomalous distribution.

    Each grid mean runs the standard 4-sensor scenario with the second
    half of the faulty sensor redrawn from the chosen distribution at
    that mean (sd fixed at the baseline sd); scores use range labels.
    A pre-trained bundle may be supplied to share models across sweeps.
    """
    base = base or ScenarioSpec(n_sensors=params.n_sensors)
    bundle = bundle or train_bundle(params, master_seed)
    points = []
    for i, mu in enumerate(grid):
        spec = ScenarioSpec(
            n_sensors=base.n_sensors,
            steps=base.steps,
            baseline_mean=base.baseline_mean,
            baseline_sd=base.baseline_sd,
            anomaly_sensor=base.anomaly_sensor,
            anomaly_start=base.anomaly_start,
            anomaly_kind="distribution",
            distribution=DistributionSpec(dist_kind, float(mu), base.baseline_sd),
            probability=1.0,
            seed=point_seed(master_seed, i),
        )
        readings, _ = generate(spec)
        metrics, step_ms = _evaluate_point(
            bundle, readings, range_labels(spec), spec.anomaly_sensor, detectors, timing
        )
        points.append(SweepPoint(float(mu), metrics, step_ms))
    return SweepReport(
        sweep="mean",
        grid=[float(g) for g in grid],
        detectors=list(detectors),
        points=points,
        meta={"distribution": dist_kind, "master_seed": master_seed},
    )


def rope_summary(reports, band: RopeBand = RopeBand()) -> dict:
    """Mean F1 inside and outside the band, per detector per report."""
    out: dict = {}
    for report in reports:
        name = report.meta.get("distribution", report.sweep)
        inside = [i for i, g in enumerate(report.grid) if band.contains(g)]
        outside = [i for i, g in enumerate(report.grid) if not band.contains(g)]
        out[name] = {}
        for d in report.detectors:
            f1 = report.f1_series(d)
            out[name][d] = {
                "inside": float(f1[inside].mean()) if inside else float("nan"),
                "outside": float(f1[outside].mean()) if outside else float("nan"),
            }
    return out


def probability_sweep(
    grid,
    params: SweepParams,
    master_seed: int = 0,
    anomaly: DistributionSpec | str = DistributionSpec("normal", 80.0, 5.0),
    detectors=("pca", "ae"),
    base: ScenarioSpec | None = None,
    onset_f1: float = 0.5,
    timing: bool = True,
    bundle: DetectorBundle | None = None,
) -> SweepReport:
    """F1 versus the probability of anomalous readings.

    `anomaly` is either a replacement distribution (readings redrawn with
    probability p) or the string "erasure" (readings zeroed with
    probability p). The smallest grid p whose F1 exceeds `onset_f1` is
    recorded per detector in meta["onset"].
    """
    base = base or ScenarioSpec(n_sensors=params.n_sensors)
    bundle = bundle or train_bundle(params, master_seed)
    points = []
    for i, p_val in enumerate(grid):
        common = dict(
            n_sensors=base.n_sensors,
            steps=base.steps,
            baseline_mean=base.baseline_mean,
            baseline_sd=base.baseline_sd,
            anomaly_sensor=base.anomaly_sensor,
            anomaly_start=base.anomaly_start,
            seed=point_seed(master_seed, i),
        )
        if anomaly == "erasure":
            spec = ScenarioSpec(
                anomaly_kind="erasure", erasure_rate=float(p_val), **common
            )
        else:
            spec = ScenarioSpec(
                anomaly_kind="distribution",
                distribution=anomaly,
                probability=float(p_val),
                **common,
            )
        readings, _ = generate(spec)
        # p = 0 injects nothing: an anomaly-free stream scores against
        # empty truth (0/0-as-0 convention), not against the range.
        truth = range_labels(spec) if p_val > 0 else np.zeros(spec.steps, dtype=np.int8)
        metrics, step_ms = _evaluate_point(
            bundle, readings, truth, spec.anomaly_sensor, detectors, timing
        )
        points.append(SweepPoint(float(p_val), metrics, step_ms))

    report = SweepReport(
        sweep="p",
        grid=[float(g) for g in grid],
        detectors=list(detectors),
        points=points,
        meta={
            "anomaly": anomaly if isinstance(anomaly, str) else anomaly.kind,
            "master_seed": master_seed,
        },
    )
    onset = {}
    for d in detectors:
        f1 = report.f1_series(d)
        hits = [g for g, v in zip(report.grid, f1) if v > onset_f1]
        onset[d] = min(hits) if hits else None
    report.meta["onset"] = onset
    return report


@dataclass
class BenchResult:
    detector: str
    rep_mean_ms: list[float]
    timing: TimingStats
    precision: float
    recall: float
    f1: float
    flag_rate: float
    ae_invocations: int = 0

    @property
    def median_of_means_ms(self) -> float:
        return float(np.median(self.rep_mean_ms))


def bench(
    bundle: DetectorBundle,
    readings: np.ndarray,
    labels: np.ndarray,
    sensor: int,
    detectors=("pca", "ae", "hybrid"),
    reps: int = 3,
) -> dict[str, BenchResult]:
    """Streamed per-step timing plus accuracy, on one shared stream.

    Every detector consumes the identical reading matrix with identical
    pre-trained models; each repetition streams the whole thing step by
    step. Flags (and therefore scores) are identical across repetitions;
    timing is summarized as the median of per-repetition mean step times.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    w = bundle.params.window
    out: dict[str, BenchResult] = {}
    for kind in detectors:
        rep_means = []
        last = None
        for _ in range(reps):
            det = bundle.detector(kind)
            last = run_stream(det, readings, bundle.stats, w)
            rep_means.append(last.timing.mean_ns / 1e6)
        flags = last.determined_flags()
        track = flags[:, sensor]
        pr, rc, f1 = prf1(confusion(track, labels[w - 1 :]))
        out[kind] = BenchResult(
            detector=kind,
            rep_mean_ms=rep_means,
            timing=last.timing,
            precision=pr,
            recall=rc,
            f1=f1,
            flag_rate=float(flags.any(axis=1).mean()),
            ae_invocations=last.ae_invocations,
        )
    return out


def response_reduction_curve(
    params: SweepParams,
    master_seed: int = 0,
    rates=tuple(np.arange(0.2, 1.01, 0.1)),
    steps: int = 3000,
    delta: float = 10.0,
    bundle: DetectorBundle | None = None,
) -> tuple[SweepReport, float]:
    """Hybrid response-time saving versus anomaly rate, plus Pearson R.

    For each rate r the last r-fraction of the faulty sensor's stream is
    mean-shifted; the autoencoder and the hybrid (sharing models) stream
    it with per-step timing, and the point records the percent reduction
    of the hybrid's mean step time relative to the autoencoder's.
    """
    bundle = bundle or train_bundle(params, master_seed)
    w = bundle.params.window
    points = []
    reductions = []
    rate_list = [float(r) for r in rates]
    for i, rate in enumerate(rate_list):
        start = int(round(steps * (1.0 - rate)))
        start = min(max(start, 0), steps - 1)
        spec = ScenarioSpec(
            n_sensors=params.n_sensors,
            steps=steps,
            anomaly_sensor=params.n_sensors - 1,
            anomaly_start=start,
            anomaly_kind="mean_shift",
            delta=delta,
            seed=point_seed(master_seed, i),
        )
        readings, labels = generate(spec)
        truth = labels[:, spec.anomaly_sensor]

        ae_res = run_stream(bundle.ae(), readings, bundle.stats, w)
        hy_res = run_stream(bundle.hybrid(), readings, bundle.stats, w)
        ae_ms = ae_res.timing.mean_ns / 1e6
        hy_ms = hy_res.timing.mean_ns / 1e6
        reduction = (ae_ms - hy_ms) / ae_ms * 100.0
        reductions.append(reduction)

        metrics = {}
        for name, res in (("ae", ae_res), ("hybrid", hy_res)):
            flags = res.determined_flags()[:, spec.anomaly_sensor]
            metrics[name] = prf1(confusion(flags, truth[w - 1 :]))
        points.append(
            SweepPoint(
                rate,
                metrics,
                {"ae": ae_ms, "hybrid": hy_ms, "reduction_pct": reduction},
            )
        )

    r = pearson_r(np.array(rate_list), np.array(reductions))
    report = SweepReport(
        sweep="anomaly_rate",
        grid=rate_list,
        detectors=["ae", "hybrid"],
        points=points,
        meta={
            "pearson_r": r,
            "reduction_pct": reductions,
            "master_seed": master_seed,
            "steps": steps,
        },
    )
    return report, r
