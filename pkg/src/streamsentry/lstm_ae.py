"""LSTM encoder-decoder for nonlinear window compression.

One scalar reading enters the encoder per time step; the final encoder
hidden state maps linearly to a small latent code. The decoder starts
from a linear lift of that code and unrolls the same number of steps with
zero inputs (no teacher forcing, so inference matches training), emitting
one reconstructed scalar per step. Reconstruction quality is scored as
mean squared error over the window.

Everything here is plain float64 numpy: the forward pass, the full
backpropagation-through-time gradient, and the adaptive-moment update
rule used for training. A finite-difference gradient check validates the
analytic gradients on small models.

Gate layout: the per-gate weight matrices are stored stacked as a single
(4H, D) input map and (4H, H) recurrent map in the fixed order
input gate, forget gate, cell candidate, output gate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PARAM_NAMES = (
    "enc_wx", "enc_wh", "enc_b",
    "to_latent_w", "to_latent_b",
    "from_latent_w", "from_latent_b",
    "dec_wx", "dec_wh", "dec_b",
    "out_w", "out_b",
)


class DivergedError(Exception):
    """Raised when training ends with a non-finite mean loss."""


@dataclass(frozen=True)
class AeConfig:
    """Hyperparameters for the autoencoder."""

    input_len: int = 100
    hidden: int = 32
    latent: int = 4
    epochs: int = 50
    batch: int = 32
    learning_rate: float = 1e-3
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("input_len", "hidden", "latent", "epochs", "batch"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.latent > self.hidden:
            raise ValueError(
                f"latent ({self.latent}) must not exceed hidden ({self.hidden})"
            )


@dataclass
class LossStats:
    """Distribution of per-window reconstruction losses on the training set."""

    mean: float
    std: float
    quantiles: dict[float, float]

    QUANTILE_GRID = (0.5, 0.9, 0.95, 0.99, 0.999)

    @classmethod
    def from_losses(cls, losses: np.ndarray) -> "LossStats":
        losses = np.asarray(losses, dtype=np.float64)
        qs = {q: float(np.quantile(losses, q)) for q in cls.QUANTILE_GRID}
        return cls(mean=float(losses.mean()), std=float(losses.std()), quantiles=qs)


@dataclass
class AeModel:
    """Parameter container for the encoder-decoder plus training loss stats."""

    cfg: AeConfig
    params: dict[str, np.ndarray]
    loss_stats: LossStats | None = None
    adam_state: dict = field(default_factory=dict, repr=False)

    def param_vector(self) -> np.ndarray:
        """All parameters flattened in the fixed PARAM_NAMES order."""
        return np.concatenate([self.params[n].ravel() for n in PARAM_NAMES])

    def set_param_vector(self, vec: np.ndarray) -> None:
        pos = 0
        for n in PARAM_NAMES:
            a = self.params[n]
            a[...] = vec[pos : pos + a.size].reshape(a.shape)
            pos += a.size
        if pos != vec.size:
            raise ValueError(f"vector has {vec.size} entries, model needs {pos}")


def init_autoencoder(cfg: AeConfig) -> AeModel:
    """Seeded uniform(-r, r) init with r = 1/sqrt(hidden); forget bias 1."""
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    h, latent = cfg.hidden, cfg.latent
    r = 1.0 / np.sqrt(h)

    def u(*shape: int) -> np.ndarray:
        return rng.uniform(-r, r, size=shape)

    params = {
        "enc_wx": u(4 * h, 1),
        "enc_wh": u(4 * h, h),
        "enc_b": u(4 * h),
        "to_latent_w": u(latent, h),
        "to_latent_b": u(latent),
        "from_latent_w": u(h, latent),
        "from_latent_b": u(h),
        "dec_wx": u(4 * h, 1),
        "dec_wh": u(4 * h, h),
        "dec_b": u(4 * h),
        "out_w": u(1, h),
        "out_b": u(1),
    }
    params["enc_b"][h : 2 * h] = 1.0
    params["dec_b"][h : 2 * h] = 1.0
    return AeModel(cfg=cfg, params=params)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # exp overflow at very negative inputs saturates to the correct limit 0
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


def _cell_forward(wx, wh, b, x_t, h_prev, c_prev):
    """One LSTM step for a batch. x_t: (B, 1) or None for a zero input."""
    hs = h_prev.shape[1]
    a = h_prev @ wh.T + b
    if x_t is not None:
        a += x_t @ wx.T
    # input and forget gates share one fused sigmoid over a contiguous block
    i_f = _sigmoid(a[:, : 2 * hs])
    i = i_f[:, :hs]
    f = i_f[:, hs:]
    g = np.tanh(a[:, 2 * hs : 3 * hs])
    o = _sigmoid(a[:, 3 * hs :])
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    return h, c, (x_t, h_prev, c_prev, i, f, g, o, tc)


def _cell_backward(wx, wh, cache, dh, dc, grads, wx_name, wh_name, b_name):
    """Backprop one LSTM step; returns (dh_prev, dc_prev)."""
    x_t, h_prev, c_prev, i, f, g, o, tc = cache
    hs = h_prev.shape[1]

    do = dh * tc
    dc = dc + dh * o * (1.0 - tc * tc)
    df = dc * c_prev
    di = dc * g
    dg = dc * i

    da = np.empty((dh.shape[0], 4 * hs))
    da[:, :hs] = di * i * (1.0 - i)
    da[:, hs : 2 * hs] = df * f * (1.0 - f)
    da[:, 2 * hs : 3 * hs] = dg * (1.0 - g * g)
    da[:, 3 * hs :] = do * o * (1.0 - o)

    if x_t is not None:
        # a zero input contributes nothing to the input-map gradient
        grads[wx_name] += da.T @ x_t
    grads[wh_name] += da.T @ h_prev
    grads[b_name] += da.sum(axis=0)

    dh_prev = da @ wh
    dc_prev = dc * f
    return dh_prev, dc_prev


def forward_batch(
    model: AeModel, X: np.ndarray, want_cache: bool = False
):
    """Encode and reconstruct a batch of windows.

    Args:
        X: (B, W) batch of windows (W == cfg.input_len).
        want_cache: retain per-step activations for a backward pass.

    Returns:
        (latents (B, L), recons (B, W), losses (B,)) and, when
        want_cache is set, the cache tuple consumed by `backward_batch`.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    p = model.params
    cfg = model.cfg
    bsz, w = X.shape
    if w != cfg.input_len:
        raise ValueError(f"window length {w} != configured input_len {cfg.input_len}")
    hs = cfg.hidden

    h = np.zeros((bsz, hs))
    c = np.zeros((bsz, hs))
    enc_caches = []
    for t in range(w):
        h, c, cache = _cell_forward(
            p["enc_wx"], p["enc_wh"], p["enc_b"], X[:, t : t + 1], h, c
        )
        if want_cache:
            enc_caches.append(cache)
    enc_h_final = h

    z = enc_h_final @ p["to_latent_w"].T + p["to_latent_b"]
    h = z @ p["from_latent_w"].T + p["from_latent_b"]
    dec_h0 = h
    c = np.zeros((bsz, hs))

    dec_caches = []
    recon = np.empty((bsz, w))
    dec_hs = []
    for t in range(w):
        h, c, cache = _cell_forward(
            p["dec_wx"], p["dec_wh"], p["dec_b"], None, h, c
        )
        if want_cache:
            dec_caches.append(cache)
            dec_hs.append(h)
        recon[:, t : t + 1] = h @ p["out_w"].T + p["out_b"]

    losses = np.mean((recon - X) ** 2, axis=1)
    if not want_cache:
        return z, recon, losses
    cache = (X, enc_caches, enc_h_final, z, dec_h0, dec_caches, dec_hs, recon)
    return z, recon, losses, cache


def forward(model: AeModel, x: np.ndarray):
    """Single-window forward: (latent, reconstruction, loss)."""
    z, recon, losses = forward_batch(model, np.asarray(x)[None, :])
    return z[0], recon[0], float(losses[0])


def encode(model: AeModel, x: np.ndarray) -> np.ndarray:
    """Latent code of one window (the latent part of `forward`)."""
    return forward(model, x)[0]


def backward_batch(model: AeModel, cache) -> dict[str, np.ndarray]:
    """Gradients of the batch-mean reconstruction MSE w.r.t. every parameter."""
    p = model.params
    X, enc_caches, enc_h_final, z, dec_h0, dec_caches, dec_hs, recon = cache
    bsz, w = X.shape
    hs = model.cfg.hidden

    grads = {n: np.zeros_like(p[n]) for n in PARAM_NAMES}

    # loss = mean over batch of mean over steps of squared error
    drecon = 2.0 * (recon - X) / (w * bsz)

    dh = np.zeros((bsz, hs))
    dc = np.zeros((bsz, hs))
    for t in range(w - 1, -1, -1):
        dy = drecon[:, t : t + 1]
        grads["out_w"] += dy.T @ dec_hs[t]
        grads["out_b"] += dy.sum(axis=0)
        dh = dh + dy @ p["out_w"]
        dh, dc = _cell_backward(
            p["dec_wx"], p["dec_wh"], dec_caches[t], dh, dc,
            grads, "dec_wx", "dec_wh", "dec_b",
        )

    # dh now holds d(loss)/d(decoder initial hidden state)
    grads["from_latent_w"] += dh.T @ z
    grads["from_latent_b"] += dh.sum(axis=0)
    dz = dh @ p["from_latent_w"]

    grads["to_latent_w"] += dz.T @ enc_h_final
    grads["to_latent_b"] += dz.sum(axis=0)
    dh = dz @ p["to_latent_w"]
    dc = np.zeros((bsz, hs))
    for t in range(w - 1, -1, -1):
        dh, dc = _cell_backward(
            p["enc_wx"], p["enc_wh"], enc_caches[t], dh, dc,
            grads, "enc_wx", "enc_wh", "enc_b",
        )
    return grads


def batch_loss_and_grads(model: AeModel, X: np.ndarray):
    """Mean loss over a batch plus gradients, in one pass."""
    out = forward_batch(model, X, want_cache=True)
    losses, cache = out[2], out[3]
    return float(losses.mean()), backward_batch(model, cache)


def _adam_step(model: AeModel, grads: dict[str, np.ndarray], lr: float) -> None:
    """Adaptive-moment update (beta1=0.9, beta2=0.999, eps=1e-8)."""
    state = model.adam_state
    if not state:
        state["t"] = 0
        state["m"] = {n: np.zeros_like(model.params[n]) for n in PARAM_NAMES}
        state["v"] = {n: np.zeros_like(model.params[n]) for n in PARAM_NAMES}
    state["t"] += 1
    t = state["t"]
    b1, b2, eps = 0.9, 0.999, 1e-8
    for n in PARAM_NAMES:
        g = grads[n]
        state["m"][n] = b1 * state["m"][n] + (1 - b1) * g
        state["v"][n] = b2 * state["v"][n] + (1 - b2) * g * g
        m_hat = state["m"][n] / (1 - b1**t)
        v_hat = state["v"][n] / (1 - b2**t)
        model.params[n] -= lr * m_hat / (np.sqrt(v_hat) + eps)


def train_autoencoder(
    model: AeModel, X: np.ndarray, cfg: AeConfig | None = None
) -> tuple[AeModel, list[float]]:
    """Mini-batch training on a (m, W) matrix of normal windows.

    The batch order is drawn from the config seed, so a fixed seed gives a
    bit-identical training trajectory. Returns the model (mutated in
    place) and the per-epoch mean loss history; training loss statistics
    are recomputed on X afterwards and stored on the model.

    Raises:
        DivergedError: final epoch mean loss is non-finite.
    """
    cfg = cfg or model.cfg
    X = np.asarray(X, dtype=np.float64)
    m = X.shape[0]
    if m < cfg.batch:
        raise ValueError(f"need at least one full batch ({cfg.batch}), got {m} rows")

    order_rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 1)))
    history: list[float] = []
    for _ in range(cfg.epochs):
        order = order_rng.permutation(m)
        epoch_losses = []
        for start in range(0, m, cfg.batch):
            idx = order[start : start + cfg.batch]
            loss, grads = batch_loss_and_grads(model, X[idx])
            _adam_step(model, grads, cfg.learning_rate)
            epoch_losses.append(loss)
        history.append(float(np.mean(epoch_losses)))

    if not np.isfinite(history[-1]):
        raise DivergedError(f"final mean loss is {history[-1]}")

    train_losses = training_losses(model, X)
    model.loss_stats = LossStats.from_losses(train_losses)
    return model, history


def training_losses(model: AeModel, X: np.ndarray, chunk: int = 2048) -> np.ndarray:
    """Per-window reconstruction losses, computed in chunks."""
    X = np.asarray(X, dtype=np.float64)
    parts = [
        forward_batch(model, X[i : i + chunk])[2] for i in range(0, X.shape[0], chunk)
    ]
    return np.concatenate(parts)


def _loss_reference(params: dict[str, np.ndarray], x: np.ndarray) -> np.longdouble:
    """Reconstruction loss of one window, written out step by step.

    A deliberately independent re-statement of the forward recurrence,
    evaluated in extended precision so that central differences are not
    drowned by rounding noise. Used only by `gradient_check`.
    """
    ld = np.longdouble
    w = x.shape[0]
    hs = params["enc_b"].shape[0] // 4
    p = {n: a.astype(ld) for n, a in params.items()}
    xs = x.astype(ld)

    def step(wx, wh, b, x_t, h_prev, c_prev):
        a = wx[:, 0] * x_t + wh @ h_prev + b
        i = 1.0 / (1.0 + np.exp(-a[:hs]))
        f = 1.0 / (1.0 + np.exp(-a[hs : 2 * hs]))
        g = np.tanh(a[2 * hs : 3 * hs])
        o = 1.0 / (1.0 + np.exp(-a[3 * hs :]))
        c = f * c_prev + i * g
        return o * np.tanh(c), c

    h = np.zeros(hs, dtype=ld)
    c = np.zeros(hs, dtype=ld)
    for t in range(w):
        h, c = step(p["enc_wx"], p["enc_wh"], p["enc_b"], xs[t], h, c)
    z = p["to_latent_w"] @ h + p["to_latent_b"]
    h = p["from_latent_w"] @ z + p["from_latent_b"]
    c = np.zeros(hs, dtype=ld)
    total = ld(0.0)
    for t in range(w):
        h, c = step(p["dec_wx"], p["dec_wh"], p["dec_b"], ld(0.0), h, c)
        y_t = p["out_w"][0] @ h + p["out_b"][0]
        total += (y_t - xs[t]) ** 2
    return total / w


def gradient_check(
    model: AeModel, x: np.ndarray, h: float = 1e-5
) -> float:
    """Max relative error of BPTT gradients vs central finite differences.

    Intended for small models (hidden <= 8, short windows) at float64.
    The finite-difference side perturbs each parameter by +-h around an
    extended-precision re-implementation of the forward loss; the
    relative error per parameter is |a - f| / max(1e-8, |a| + |f|).
    """
    x = np.asarray(x, dtype=np.float64)
    _, grads = batch_loss_and_grads(model, x[None, :])
    analytic = np.concatenate([grads[n].ravel() for n in PARAM_NAMES])

    theta = model.param_vector()
    numeric = np.empty_like(theta)
    params = {n: a.copy() for n, a in model.params.items()}
    probe = AeModel(cfg=model.cfg, params=params)
    for j in range(theta.size):
        orig = theta[j]
        theta[j] = orig + h
        probe.set_param_vector(theta)
        up = _loss_reference(probe.params, x)
        theta[j] = orig - h
        probe.set_param_vector(theta)
        down = _loss_reference(probe.params, x)
        theta[j] = orig
        numeric[j] = float((up - down) / np.longdouble(2.0 * h))

    return float(gradient_errors(analytic, numeric).max())


def gradient_errors(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    """Elementwise relative errors between two gradient vectors."""
    denom = np.maximum(1e-8, np.abs(analytic) + np.abs(numeric))
    return np.abs(analytic - numeric) / denom
