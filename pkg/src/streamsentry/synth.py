"""Synthetic scenario generation: baseline streams and fault injectors.

Scenarios follow one shape: n sensors emit i.i.d. Gaussian readings and a
single designated sensor misbehaves from an onset step. Four fault
families are provided: a constant mean shift, erasure (readings zeroed
with some probability), redraws from a replacement distribution with
probability p, and alternating-bin mean shifts on long streams.

Labels are per-reading: an entry is 1 exactly where the injector changed
or redrew a value, except the two mean-shift injectors, which label the
whole affected range. All randomness flows through numpy's PCG64
generator seeded via SeedSequence, so identical specs reproduce
bit-identical streams on any platform.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from streamsentry.windows import check_labels

DIST_KINDS = ("normal", "uniform", "poisson", "point")


@dataclass(frozen=True)
class DistributionSpec:
    """Family and moments of the anomalous-reading distribution.

    For `uniform` the support is centered on `mean` with half-width
    sd * sqrt(3) so the standard deviation equals `sd`. For `poisson`
    the rate is `mean` (its own sd is sqrt(mean): the skewed special
    case). `point` emits the constant `mean`.
    """

    kind: str
    mean: float
    sd: float = 5.0

    def __post_init__(self) -> None:
        if self.kind not in DIST_KINDS:
            raise ValueError(f"kind must be one of {DIST_KINDS}, got {self.kind!r}")
        if self.kind in ("normal", "uniform") and self.sd <= 0:
            raise ValueError(f"sd must be positive for {self.kind}, got {self.sd}")
        if self.kind == "poisson" and self.mean < 0:
            raise ValueError(f"poisson rate must be >= 0, got {self.mean}")

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "normal":
            return rng.normal(self.mean, self.sd, size)
        if self.kind == "uniform":
            half = self.sd * np.sqrt(3.0)
            return rng.uniform(self.mean - half, self.mean + half, size)
        if self.kind == "poisson":
            return rng.poisson(self.mean, size).astype(np.float64)
        return np.full(size, float(self.mean))


@dataclass(frozen=True)
class ScenarioSpec:
    """Full description of one synthetic experiment stream."""

    n_sensors: int = 4
    steps: int = 500
    baseline_mean: float = 50.0
    baseline_sd: float = 5.0
    anomaly_sensor: int = 3
    anomaly_start: int = 250
    anomaly_kind: str = "none"  # none | mean_shift | erasure | distribution | bin_shift
    delta: float = 0.0  # mean_shift / bin_shift
    erasure_rate: float = 0.0
    distribution: DistributionSpec | None = None
    probability: float = 1.0  # redraw probability for distribution anomalies
    bin_size: int = 1000
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.anomaly_start < self.steps:
            raise ValueError(
                f"anomaly_start must be in [0, steps), got {self.anomaly_start}"
            )
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError(f"probability must be in [0, 1], got {self.probability}")
        if not 0.0 <= self.erasure_rate <= 1.0:
            raise ValueError(f"erasure_rate must be in [0, 1], got {self.erasure_rate}")
        if self.anomaly_sensor >= self.n_sensors:
            raise ValueError("anomaly_sensor out of range")


def gen_baseline(spec: ScenarioSpec) -> tuple[np.ndarray, np.ndarray]:
    """All-normal stream: (steps, n) i.i.d. Gaussians plus all-zero labels."""
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    sd = max(spec.baseline_sd, 0.0)
    readings = rng.normal(spec.baseline_mean, sd, size=(spec.steps, spec.n_sensors))
    labels = np.zeros_like(readings, dtype=np.int8)
    return readings, labels


def inject_mean_shift(
    readings: np.ndarray,
    labels: np.ndarray,
    sensor: int,
    start: int,
    delta: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Add `delta` to one sensor from `start` on; label the whole range.

    The shift moves the mean while leaving spread and shape untouched. A
    zero delta still sets labels (the degenerate case used by equivalence
    analyses).
    """
    readings = np.array(readings, dtype=np.float64)
    labels = np.array(labels, dtype=np.int8)
    if not 0 <= start < readings.shape[0]:
        raise ValueError(f"start {start} outside stream of {readings.shape[0]} steps")
    readings[start:, sensor] += delta
    labels[start:, sensor] = 1
    check_labels(readings, labels)
    return readings, labels


def inject_erasure(
    readings: np.ndarray,
    labels: np.ndarray,
    sensor: int,
    start: int,
    rate: float,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Zero each post-start reading independently with probability `rate`.

    Only the zeroed steps are labeled: a 95%-intact stream is not 100%
    anomalous, and per-step labels are what the sensitivity sweeps score
    against.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"rate must be in [0, 1], got {rate}")
    readings = np.array(readings, dtype=np.float64)
    labels = np.array(labels, dtype=np.int8)
    rng = np.random.default_rng(np.random.SeedSequence((seed, 2)))
    hits = rng.random(readings.shape[0] - start) < rate
    idx = np.nonzero(hits)[0] + start
    readings[idx, sensor] = 0.0
    labels[idx, sensor] = 1
    return readings, labels


def inject_distribution(
    readings: np.ndarray,
    labels: np.ndarray,
    sensor: int,
    start: int,
    dist: DistributionSpec,
    p: float,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Redraw post-start readings from `dist` with probability p each.

    Labels mark exactly the redrawn steps.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    readings = np.array(readings, dtype=np.float64)
    labels = np.array(labels, dtype=np.int8)
    rng = np.random.default_rng(np.random.SeedSequence((seed, 3)))
    tail = readings.shape[0] - start
    hits = rng.random(tail) < p
    idx = np.nonzero(hits)[0] + start
    readings[idx, sensor] = dist.draw(rng, idx.size)
    labels[idx, sensor] = 1
    return readings, labels


def inject_bin_shift(
    readings: np.ndarray,
    labels: np.ndarray,
    sensor: int,
    bin_size: int,
    delta: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Shift odd-indexed bins (0-based) of one sensor by `delta`.

    Bins partition the stream into consecutive blocks of `bin_size`; a
    trailing partial bin follows its own parity. Shifted bins are fully
    labeled, so with an even bin count half the stream is anomalous, and
    the first bin is always clean (usable for training).
    """
    if bin_size < 1:
        raise ValueError(f"bin_size must be >= 1, got {bin_size}")
    readings = np.array(readings, dtype=np.float64)
    labels = np.array(labels, dtype=np.int8)
    steps = readings.shape[0]
    for b in range(1, (steps + bin_size - 1) // bin_size, 2):
        lo, hi = b * bin_size, min((b + 1) * bin_size, steps)
        readings[lo:hi, sensor] += delta
        labels[lo:hi, sensor] = 1
    return readings, labels


def generate(spec: ScenarioSpec) -> tuple[np.ndarray, np.ndarray]:
    """Build the full scenario: baseline plus the configured injector."""
    readings, labels = gen_baseline(spec)
    s, start = spec.anomaly_sensor, spec.anomaly_start
    if spec.anomaly_kind == "none":
        return readings, labels
    if spec.anomaly_kind == "mean_shift":
        return inject_mean_shift(readings, labels, s, start, spec.delta)
    if spec.anomaly_kind == "erasure":
        return inject_erasure(readings, labels, s, start, spec.erasure_rate, spec.seed)
    if spec.anomaly_kind == "distribution":
        if spec.distribution is None:
            raise ValueError("distribution anomalies need a DistributionSpec")
        return inject_distribution(
            readings, labels, s, start, spec.distribution, spec.probability, spec.seed
        )
    if spec.anomaly_kind == "bin_shift":
        return inject_bin_shift(readings, labels, s, spec.bin_size, spec.delta)
    raise ValueError(f"unknown anomaly_kind {spec.anomaly_kind!r}")


# --- scenario file format: flat "key = value" lines -----------------------

_SCALAR_FIELDS = {
    "n_sensors": int,
    "steps": int,
    "baseline_mean": float,
    "baseline_sd": float,
    "anomaly_sensor": int,
    "anomaly_start": int,
    "anomaly_kind": str,
    "delta": float,
    "erasure_rate": float,
    "probability": float,
    "bin_size": int,
    "seed": int,
}
_DIST_FIELDS = {"dist_kind": str, "dist_mean": float, "dist_sd": float}


def scenario_to_text(spec: ScenarioSpec) -> str:
    """Serialize to the flat key-value scenario format."""
    data = asdict(spec)
    dist = data.pop("distribution")
    lines = [f"{k} = {data[k]}" for k in _SCALAR_FIELDS]
    if dist is not None:
        lines += [
            f"dist_kind = {dist['kind']}",
            f"dist_mean = {dist['mean']}",
            f"dist_sd = {dist['sd']}",
        ]
    return "\n".join(lines) + "\n"


def scenario_from_text(text: str) -> ScenarioSpec:
    """Parse the flat key-value scenario format; unknown keys are errors."""
    values: dict = {}
    dist_values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key in _SCALAR_FIELDS:
            values[key] = _SCALAR_FIELDS[key](value)
        elif key in _DIST_FIELDS:
            dist_values[key] = _DIST_FIELDS[key](value)
        else:
            raise ValueError(f"line {lineno}: unknown scenario key {key!r}")
    if dist_values:
        values["distribution"] = DistributionSpec(
            kind=dist_values.get("dist_kind", "normal"),
            mean=dist_values.get("dist_mean", 50.0),
            sd=dist_values.get("dist_sd", 5.0),
        )
    return ScenarioSpec(**values)


# --- named presets mirroring the reference experiments ---------------------

def preset(name: str, seed: int = 0) -> ScenarioSpec:
    """Scenario presets used by the CLI and the evaluation suites."""
    presets = {
        # 4 sensors, 500 steps, second half of sensor 3 redrawn from
        # Normal(80, 5): the standard simulation layout.
        "fig1-normal-80": ScenarioSpec(
            anomaly_kind="distribution",
            distribution=DistributionSpec("normal", 80.0, 5.0),
            probability=1.0,
            seed=seed,
        ),
        "fig1-point-90": ScenarioSpec(
            anomaly_kind="distribution",
            distribution=DistributionSpec("point", 90.0),
            probability=1.0,
            seed=seed,
        ),
        # 2000-step streams with the fault switched on at mid-stream.
        "meanshift-5": ScenarioSpec(
            steps=2000, anomaly_start=1000, anomaly_kind="mean_shift",
            delta=5.0, seed=seed,
        ),
        "meanshift-40": ScenarioSpec(
            steps=2000, anomaly_start=1000, anomaly_kind="mean_shift",
            delta=40.0, seed=seed,
        ),
        "erasure-5": ScenarioSpec(
            steps=2000, anomaly_start=1000, anomaly_kind="erasure",
            erasure_rate=0.05, seed=seed,
        ),
        "erasure-20": ScenarioSpec(
            steps=2000, anomaly_start=1000, anomaly_kind="erasure",
            erasure_rate=0.20, seed=seed,
        ),
        # 6000 steps in bins of 1000; odd bins shifted by 10 => 50% anomalous.
        "binshift-6000": ScenarioSpec(
            steps=6000, anomaly_start=1000, anomaly_kind="bin_shift",
            bin_size=1000, delta=10.0, seed=seed,
        ),
    }
    if name not in presets:
        raise KeyError(
            f"unknown preset {name!r}; available: {', '.join(sorted(presets))}"
        )
    return presets[name]


PRESET_NAMES = (
    "fig1-normal-80", "fig1-point-90", "meanshift-5", "meanshift-40",
    "erasure-5", "erasure-20", "binshift-6000",
)
