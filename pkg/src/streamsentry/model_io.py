"""Versioned binary containers for trained models, plus threshold JSON.

Both model kinds share one container: an 8-byte magic with a format
version, a 4-byte payload tag, a 12-char provenance field (config hash)
plus the training seed, then the payload dimensions and little-endian
float64 arrays. Writers are deterministic: identical models produce
byte-identical files.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from streamsentry.distances import DetectorThresholds
from streamsentry.lstm_ae import AeConfig, AeModel, LossStats, PARAM_NAMES
from streamsentry.pca import PcaModel
from streamsentry.windows import NormStats

MAGIC = b"SSMODEL\x01"
TAG_PCA = b"PCA\x00"
TAG_AE = b"LSTM"


class ModelFormatError(Exception):
    """Bad magic, tag, or inconsistent payload."""


def _pack_header(tag: bytes, config_hash: str, seed: int) -> bytes:
    tagged = (config_hash or "")[:12].ljust(12).encode("ascii")
    return MAGIC + tag + tagged + struct.pack("<q", seed)


def _read_header(buf: bytes, expect_tag: bytes | None = None):
    if buf[:8] != MAGIC:
        raise ModelFormatError(f"bad magic {buf[:8]!r}")
    tag = buf[8:12]
    if expect_tag is not None and tag != expect_tag:
        raise ModelFormatError(
            f"model file holds a {tag.rstrip(b'x00')!r} payload, expected {expect_tag!r}"
        )
    config_hash = buf[12:24].decode("ascii").strip()
    (seed,) = struct.unpack_from("<q", buf, 24)
    return tag, config_hash, seed, 32


def _arr_bytes(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def save_pca(
    path, model: PcaModel, config_hash: str = "", seed: int = 0
) -> None:
    """Write a PCA model: dims, mean, explained variance, row-major components."""
    out = bytearray(_pack_header(TAG_PCA, config_hash, seed))
    out += struct.pack("<IIB", model.k, model.input_dim, int(model.rank_deficient))
    out += _arr_bytes(model.mean)
    out += _arr_bytes(model.explained_variance)
    out += _arr_bytes(model.components)
    Path(path).write_bytes(bytes(out))


def load_pca(path) -> tuple[PcaModel, str, int]:
    buf = Path(path).read_bytes()
    _, config_hash, seed, pos = _read_header(buf, TAG_PCA)
    k, w, deficient = struct.unpack_from("<IIB", buf, pos)
    pos += struct.calcsize("<IIB")

    def take(count: int) -> np.ndarray:
        nonlocal pos
        arr = np.frombuffer(buf, dtype="<f8", count=count, offset=pos).copy()
        pos += count * 8
        return arr

    mean = take(w)
    explained = take(k)
    components = take(k * w).reshape(k, w)
    if pos != len(buf):
        raise ModelFormatError(f"{len(buf) - pos} trailing bytes")
    model = PcaModel(
        mean=mean,
        components=components,
        explained_variance=explained,
        rank_deficient=bool(deficient),
    )
    return model, config_hash, seed


def save_ae(path, model: AeModel, config_hash: str = "", seed: int = 0) -> None:
    """Write the autoencoder: config, loss statistics, parameter arrays."""
    cfg = model.cfg
    out = bytearray(_pack_header(TAG_AE, config_hash, seed))
    out += struct.pack(
        "<IIIIIdq",
        cfg.input_len, cfg.hidden, cfg.latent, cfg.epochs, cfg.batch,
        cfg.learning_rate, cfg.seed,
    )
    stats = model.loss_stats
    out += struct.pack("<B", int(stats is not None))
    if stats is not None:
        out += struct.pack("<dd", stats.mean, stats.std)
        out += struct.pack("<I", len(LossStats.QUANTILE_GRID))
        for q in LossStats.QUANTILE_GRID:
            out += struct.pack("<dd", q, stats.quantiles[q])
    for name in PARAM_NAMES:
        out += _arr_bytes(model.params[name])
    Path(path).write_bytes(bytes(out))


def load_ae(path) -> tuple[AeModel, str, int]:
    buf = Path(path).read_bytes()
    _, config_hash, seed, pos = _read_header(buf, TAG_AE)
    fields = struct.unpack_from("<IIIIIdq", buf, pos)
    pos += struct.calcsize("<IIIIIdq")
    cfg = AeConfig(
        input_len=fields[0], hidden=fields[1], latent=fields[2],
        epochs=fields[3], batch=fields[4], learning_rate=fields[5],
        seed=int(fields[6]),
    )
    (has_stats,) = struct.unpack_from("<B", buf, pos)
    pos += 1
    loss_stats = None
    if has_stats:
        mean, std = struct.unpack_from("<dd", buf, pos)
        pos += 16
        (n_q,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        quantiles = {}
        for _ in range(n_q):
            q, v = struct.unpack_from("<dd", buf, pos)
            pos += 16
            quantiles[q] = v
        loss_stats = LossStats(mean=mean, std=std, quantiles=quantiles)

    template = _param_shapes(cfg)
    params = {}
    for name in PARAM_NAMES:
        shape = template[name]
        count = int(np.prod(shape))
        params[name] = (
            np.frombuffer(buf, dtype="<f8", count=count, offset=pos)
            .copy()
            .reshape(shape)
        )
        pos += count * 8
    if pos != len(buf):
        raise ModelFormatError(f"{len(buf) - pos} trailing bytes")
    return AeModel(cfg=cfg, params=params, loss_stats=loss_stats), config_hash, seed


def _param_shapes(cfg: AeConfig) -> dict[str, tuple]:
    h, latent = cfg.hidden, cfg.latent
    return {
        "enc_wx": (4 * h, 1),
        "enc_wh": (4 * h, h),
        "enc_b": (4 * h,),
        "to_latent_w": (latent, h),
        "to_latent_b": (latent,),
        "from_latent_w": (h, latent),
        "from_latent_b": (h,),
        "dec_wx": (4 * h, 1),
        "dec_wh": (4 * h, h),
        "dec_b": (4 * h,),
        "out_w": (1, h),
        "out_b": (1,),
    }


def detect_tag(path) -> bytes:
    """Payload tag of a model file without loading it."""
    buf = Path(path).read_bytes()[:12]
    if buf[:8] != MAGIC:
        raise ModelFormatError(f"bad magic {buf[:8]!r}")
    return buf[8:12]


# --- calibration record (thresholds + normalization) as JSON ---------------

def thresholds_to_dict(th: DetectorThresholds) -> dict:
    return {
        "distance_threshold": th.distance_threshold,
        "loss_threshold": th.loss_threshold,
        "calibration": th.calibration,
    }


def thresholds_from_dict(d: dict) -> DetectorThresholds:
    return DetectorThresholds(
        distance_threshold=d["distance_threshold"],
        loss_threshold=d.get("loss_threshold"),
        calibration=d.get("calibration", {}),
    )


def save_calibration(
    path,
    pca_thresholds: DetectorThresholds,
    ae_thresholds: DetectorThresholds,
    stats: NormStats | None,
    extra: dict | None = None,
) -> None:
    doc = {
        "format": "streamsentry-calibration-1",
        "pca": thresholds_to_dict(pca_thresholds),
        "ae": thresholds_to_dict(ae_thresholds),
        "normalization": None
        if stats is None
        else {"mean": stats.mean.tolist(), "std": stats.std.tolist()},
    }
    doc.update(extra or {})
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_calibration(path):
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "streamsentry-calibration-1":
        raise ModelFormatError(f"unrecognized calibration file {path}")
    stats = None
    if doc.get("normalization"):
        stats = NormStats(
            np.asarray(doc["normalization"]["mean"]),
            np.asarray(doc["normalization"]["std"]),
        )
    return (
        thresholds_from_dict(doc["pca"]),
        thresholds_from_dict(doc["ae"]),
        stats,
        doc,
    )
