"""Run configuration: flat key-value files, CLI overrides, provenance hash.

Config files are flat "key = value" text ('#' starts a comment); unknown
keys are rejected so typos fail loudly. CLI flags override file keys.
The canonical serialization of a config hashes to a short provenance tag
stamped into every output file.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields, replace

from streamsentry.sweeps import SweepParams


class ConfigError(Exception):
    """Invalid config file or field value."""


@dataclass(frozen=True)
class RunConfig:
    """Engine knobs plus run bookkeeping, validated on construction."""

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
    detector: str = "hybrid"
    seed: int = 0
    train_steps: int = 250
    calib_steps: int = 0
    jobs: int = 1

    def __post_init__(self) -> None:
        positive = (
            "window", "pca_k", "hidden", "latent", "epochs", "batch", "jobs",
            "train_steps",
        )
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.calib_steps < 0:
            raise ConfigError(f"calib_steps must be >= 0, got {self.calib_steps}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive")
        if not 0.0 < self.ae_q <= 1.0:
            raise ConfigError(f"ae_q must be in (0, 1], got {self.ae_q}")
        if self.flag_rule not in ("all", "majority"):
            raise ConfigError(f"flag_rule must be all|majority, got {self.flag_rule!r}")
        if self.detector not in ("pca", "ae", "hybrid"):
            raise ConfigError(
                f"detector must be pca|ae|hybrid, got {self.detector!r}"
            )
        if self.latent > self.hidden:
            raise ConfigError("latent must not exceed hidden")
        if self.pca_k > self.window:
            raise ConfigError("pca_k must not exceed window")

    def sweep_params(self, **overrides) -> SweepParams:
        """The training/calibration knobs as a SweepParams."""
        base = dict(
            window=self.window,
            pca_k=self.pca_k,
            hidden=self.hidden,
            latent=self.latent,
            epochs=self.epochs,
            batch=self.batch,
            learning_rate=self.learning_rate,
            pca_c=self.pca_c,
            ae_c=self.ae_c,
            ae_q=self.ae_q,
            flag_rule=self.flag_rule,
            normalize=self.normalize,
        )
        base.update(overrides)
        return SweepParams(**base)

    def config_hash(self) -> str:
        """12-hex-char digest of the canonical key=value serialization."""
        text = "\n".join(
            f"{f.name}={getattr(self, f.name)}" for f in fields(RunConfig)
        )
        return hashlib.sha256(text.encode()).hexdigest()[:12]


_BOOL_STRINGS = {"true": True, "1": True, "yes": True,
                 "false": False, "0": False, "no": False}


def _convert(name: str, kind, raw: str):
    if kind is bool:
        try:
            return _BOOL_STRINGS[raw.lower()]
        except KeyError:
            raise ConfigError(f"{name}: expected true/false, got {raw!r}") from None
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {kind.__name__}") from None


def parse_config_text(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse flat key=value text into a RunConfig; unknown keys are errors."""
    known = {f.name: f.type for f in fields(RunConfig)}
    kinds = {
        name: (bool if "bool" in str(t) else float if "float" in str(t)
               else int if "int" in str(t) else str)
        for name, t in known.items()
    }
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        values[key] = _convert(key, kinds[key], value)
    if base is not None:
        return replace(base, **values)
    return RunConfig(**values)


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), base=base)


def apply_overrides(cfg: RunConfig, overrides: dict) -> RunConfig:
    """Apply non-None CLI overrides on top of a config."""
    clean = {k: v for k, v in overrides.items() if v is not None}
    if not clean:
        return cfg
    return replace(cfg, **clean)
