"""Model graphs: the fused CNN+LSTM classifier and the standalone CNN / LSTM
comparison models, with full analytic backpropagation."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import InvalidGeometry, NonFiniteLoss, ShapeMismatch
from . import layers as L

MODEL_KINDS = ("fusion", "cnn_only", "lstm_only")


@dataclass
class FusionModelConfig:
    img_h: int = 64
    img_w: int = 64
    img_channels: int = 3
    conv1_filters: int = 64
    conv1_kernel: int = 5
    pool1: int = 5
    conv2_filters: int = 32
    conv2_kernel: int = 3
    pool2: int = 3
    cnn_dropout: float = 0.4
    cnn_dense: int = 32
    cnn_only_dense: int = 64
    embed_dim: int = 100
    lstm_units: int = 64
    lstm_input_dropout: float = 0.4
    embed_dropout: float = 0.2
    lstm_dense1: int = 64
    lstm_dense2: int = 32
    fuse_dense1: int = 32
    classes: int = 3
    max_len: int = 32

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "FusionModelConfig":
        return cls(**d)


def conv_chain_sizes(cfg: FusionModelConfig) -> list[tuple[int, int]]:
    """Spatial sizes through conv1 -> pool1 -> conv2 -> pool2, raising
    InvalidGeometry when the chain collapses below 1x1."""
    h, w = cfg.img_h, cfg.img_w
    sizes = [(h, w)]
    h, w = h - cfg.conv1_kernel + 1, w - cfg.conv1_kernel + 1
    sizes.append((h, w))
    h, w = h // cfg.pool1, w // cfg.pool1
    sizes.append((h, w))
    h, w = h - cfg.conv2_kernel + 1, w - cfg.conv2_kernel + 1
    sizes.append((h, w))
    h, w = h // cfg.pool2, w // cfg.pool2
    sizes.append((h, w))
    if any(a < 1 or b < 1 for a, b in sizes):
        raise InvalidGeometry(f"conv/pool chain collapses: {sizes}")
    return sizes


def flatten_width(cfg: FusionModelConfig) -> int:
    h, w = conv_chain_sizes(cfg)[-1]
    return h * w * cfg.conv2_filters


def _glorot(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _lstm_params(rng, d: int, units: int) -> dict[str, np.ndarray]:
    b = np.zeros(4 * units)
    b[units:2 * units] = 1.0  # forget-gate bias
    return {
        "lstm_w": _glorot(rng, (d, 4 * units), d, 4 * units),
        "lstm_u": _glorot(rng, (units, 4 * units), units, 4 * units),
        "lstm_b": b,
    }


def _conv_params(rng, cfg: FusionModelConfig) -> dict[str, np.ndarray]:
    k1, c, f1 = cfg.conv1_kernel, cfg.img_channels, cfg.conv1_filters
    k2, f2 = cfg.conv2_kernel, cfg.conv2_filters
    return {
        "conv1_w": _glorot(rng, (k1, k1, c, f1), k1 * k1 * c, k1 * k1 * f1),
        "conv1_b": np.zeros(f1),
        "conv2_w": _glorot(rng, (k2, k2, f1, f2), k2 * k2 * f1, k2 * k2 * f2),
        "conv2_b": np.zeros(f2),
    }


def _dense_params(rng, name: str, n: int, m: int) -> dict[str, np.ndarray]:
    return {f"{name}_w": _glorot(rng, (n, m), n, m), f"{name}_b": np.zeros(m)}


def build_model(kind: str, cfg: FusionModelConfig, seed: int = 0) -> dict[str, np.ndarray]:
    """Glorot-uniform initialized parameter set for the requested topology."""
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    if kind in ("fusion", "cnn_only"):
        flat = flatten_width(cfg)
        params.update(_conv_params(rng, cfg))
        cnn_dense = cfg.cnn_dense if kind == "fusion" else cfg.cnn_only_dense
        params.update(_dense_params(rng, "cnn_dense", flat, cnn_dense))
    if kind in ("fusion", "lstm_only"):
        params.update(_lstm_params(rng, cfg.embed_dim, cfg.lstm_units))
        params.update(_dense_params(rng, "lstm_dense1", cfg.lstm_units, cfg.lstm_dense1))
        params.update(_dense_params(rng, "lstm_dense2", cfg.lstm_dense1, cfg.lstm_dense2))
    if kind == "fusion":
        params.update(_dense_params(rng, "fuse", cfg.cnn_dense + cfg.lstm_dense2,
                                    cfg.fuse_dense1))
        params.update(_dense_params(rng, "out", cfg.fuse_dense1, cfg.classes))
    elif kind == "cnn_only":
        params.update(_dense_params(rng, "out", cfg.cnn_only_dense, cfg.classes))
    else:
        params.update(_dense_params(rng, "out", cfg.lstm_dense2, cfg.classes))
    return params


# ---------------------------------------------------------------------------
# forward / backward
# ---------------------------------------------------------------------------

def _cnn_channel(params, cfg, images, dense_name, dropout_rate, training, rng):
    """conv1 -> pool1 -> conv2 -> pool2 -> flatten -> dropout -> dense(relu)."""
    c1, cache_c1 = L.conv2d(images, params["conv1_w"], params["conv1_b"])
    p1, cache_p1 = L.maxpool(c1, cfg.pool1)
    c2, cache_c2 = L.conv2d(p1, params["conv2_w"], params["conv2_b"])
    p2, cache_p2 = L.maxpool(c2, cfg.pool2)
    flat = p2.reshape(p2.shape[0], -1)
    dropped, mask = L.dropout(flat, dropout_rate, training, rng)
    out, cache_d = L.dense(dropped, params[f"{dense_name}_w"],
                           params[f"{dense_name}_b"], "relu")
    cache = (cache_c1, cache_p1, cache_c2, cache_p2, p2.shape, mask, cache_d,
             dense_name)
    return out, cache


def _cnn_channel_backward(dout, cache, grads):
    cache_c1, cache_p1, cache_c2, cache_p2, p2_shape, mask, cache_d, name = cache
    dflat, dw, db = L.dense_backward(dout, cache_d)
    grads[f"{name}_w"] = grads.get(f"{name}_w", 0) + dw
    grads[f"{name}_b"] = grads.get(f"{name}_b", 0) + db
    dflat = L.dropout_backward(dflat, mask)
    dp2 = dflat.reshape(p2_shape)
    dc2 = L.maxpool_backward(dp2, cache_p2)
    dp1, dw2, db2 = L.conv2d_backward(dc2, cache_c2)
    grads["conv2_w"] = dw2
    grads["conv2_b"] = db2
    dc1 = L.maxpool_backward(dp1, cache_p1)
    _, dw1, db1 = L.conv2d_backward(dc1, cache_c1)
    grads["conv1_w"] = dw1
    grads["conv1_b"] = db1


def _lstm_channel(params, cfg, seqs, training, rng, with_dense2=True):
    """input dropout(s) -> lstm -> dense64(relu) [-> dense32(relu)]."""
    x, mask_e = L.dropout(seqs, cfg.embed_dropout, training, rng)
    x, mask_i = L.dropout(x, cfg.lstm_input_dropout, training, rng)
    h, cache_l = L.lstm(x, params["lstm_w"], params["lstm_u"], params["lstm_b"])
    d1, cache_d1 = L.dense(h, params["lstm_dense1_w"], params["lstm_dense1_b"], "relu")
    if with_dense2:
        d2, cache_d2 = L.dense(d1, params["lstm_dense2_w"],
                               params["lstm_dense2_b"], "relu")
    else:
        d2, cache_d2 = d1, None
    return d2, (mask_e, mask_i, cache_l, cache_d1, cache_d2)


def _lstm_channel_backward(dout, cache, grads):
    mask_e, mask_i, cache_l, cache_d1, cache_d2 = cache
    if cache_d2 is not None:
        dout, dw, db = L.dense_backward(dout, cache_d2)
        grads["lstm_dense2_w"] = dw
        grads["lstm_dense2_b"] = db
    dh, dw, db = L.dense_backward(dout, cache_d1)
    grads["lstm_dense1_w"] = dw
    grads["lstm_dense1_b"] = db
    _, dlw, dlu, dlb = L.lstm_backward(dh, cache_l)
    grads["lstm_w"] = dlw
    grads["lstm_u"] = dlu
    grads["lstm_b"] = dlb


def forward(kind: str, params: dict, cfg: FusionModelConfig,
            images: np.ndarray | None, seqs: np.ndarray | None,
            training: bool = False, rng: np.random.Generator | None = None):
    """Full forward pass; returns (probs, cache) for the requested kind."""
    if kind == "fusion":
        cnn_out, cnn_cache = _cnn_channel(params, cfg, images, "cnn_dense",
                                          cfg.cnn_dropout, training, rng)
        lstm_out, lstm_cache = _lstm_channel(params, cfg, seqs, training, rng)
        fused = np.concatenate([cnn_out, lstm_out], axis=1)
        f1, cache_f = L.dense(fused, params["fuse_w"], params["fuse_b"], "relu")
        logits, cache_o = L.dense(f1, params["out_w"], params["out_b"], "none")
        probs = L.softmax(logits)
        return probs, ("fusion", cnn_cache, lstm_cache, cnn_out.shape[1],
                       cache_f, cache_o)
    if kind == "cnn_only":
        cnn_out, cnn_cache = _cnn_channel(params, cfg, images, "cnn_dense",
                                          cfg.cnn_dropout, training, rng)
        logits, cache_o = L.dense(cnn_out, params["out_w"], params["out_b"], "none")
        return L.softmax(logits), ("cnn_only", cnn_cache, cache_o)
    if kind == "lstm_only":
        lstm_out, lstm_cache = _lstm_channel(params, cfg, seqs, training, rng)
        logits, cache_o = L.dense(lstm_out, params["out_w"], params["out_b"], "none")
        return L.softmax(logits), ("lstm_only", lstm_cache, cache_o)
    raise ValueError(f"unknown model kind {kind!r}")


def _backward(dlogits: np.ndarray, cache, grads: dict):
    kind = cache[0]
    if kind == "fusion":
        _, cnn_cache, lstm_cache, cnn_width, cache_f, cache_o = cache
        df1, dw, db = L.dense_backward(dlogits, cache_o)
        grads["out_w"], grads["out_b"] = dw, db
        dfused, dw, db = L.dense_backward(df1, cache_f)
        grads["fuse_w"], grads["fuse_b"] = dw, db
        _cnn_channel_backward(dfused[:, :cnn_width], cnn_cache, grads)
        _lstm_channel_backward(dfused[:, cnn_width:], lstm_cache, grads)
    elif kind == "cnn_only":
        _, cnn_cache, cache_o = cache
        dcnn, dw, db = L.dense_backward(dlogits, cache_o)
        grads["out_w"], grads["out_b"] = dw, db
        _cnn_channel_backward(dcnn, cnn_cache, grads)
    else:
        _, lstm_cache, cache_o = cache
        dlstm, dw, db = L.dense_backward(dlogits, cache_o)
        grads["out_w"], grads["out_b"] = dw, db
        _lstm_channel_backward(dlstm, lstm_cache, grads)


def loss_and_grads(params: dict, cfg: FusionModelConfig, kind: str,
                   images: np.ndarray | None, seqs: np.ndarray | None,
                   onehot: np.ndarray, l2_lambda: float = 0.0,
                   training: bool = True,
                   rng: np.random.Generator | None = None):
    """Cross-entropy (+ L2 on weight matrices) and its gradients.

    Dropout masks are drawn once per call from `rng` when training.
    """
    probs, cache = forward(kind, params, cfg, images, seqs, training, rng)
    loss, dlogits = L.cross_entropy(probs, onehot)
    grads: dict[str, np.ndarray] = {}
    _backward(dlogits, cache, grads)
    if l2_lambda > 0.0:
        for name, value in params.items():
            if name.endswith("_b"):
                continue
            loss += l2_lambda * float((value ** 2).sum())
            grads[name] = grads[name] + 2.0 * l2_lambda * value
    if not np.isfinite(loss):
        raise NonFiniteLoss(f"loss diverged: {loss}")
    return loss, grads


def predict(params: dict, cfg: FusionModelConfig, kind: str,
            image: np.ndarray | None, seq: np.ndarray | None) -> np.ndarray:
    """Inference-mode class probabilities for a single example."""
    images = None if image is None else image[None]
    seqs = None if seq is None else seq[None]
    if kind in ("fusion", "cnn_only"):
        if images is None:
            raise ShapeMismatch(f"{kind} requires an image input")
        expected = (cfg.img_h, cfg.img_w, cfg.img_channels)
        if images.shape[1:] != expected:
            raise ShapeMismatch(f"image {images.shape[1:]} != config {expected}")
    if kind in ("fusion", "lstm_only"):
        if seqs is None:
            raise ShapeMismatch(f"{kind} requires a sequence input")
        if seqs.shape[2] != cfg.embed_dim:
            raise ShapeMismatch(f"sequence dim {seqs.shape[2]} != {cfg.embed_dim}")
    probs, _ = forward(kind, params, cfg, images, seqs, training=False)
    return probs[0]


def predict_batch(params: dict, cfg: FusionModelConfig, kind: str,
                  images: np.ndarray | None, seqs: np.ndarray | None) -> np.ndarray:
    probs, _ = forward(kind, params, cfg, images, seqs, training=False)
    return probs
