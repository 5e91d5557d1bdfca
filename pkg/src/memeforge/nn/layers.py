"""Batched layer primitives with explicit forward caches and backward passes.

All tensors are float64 numpy arrays. Convolutions are valid (no padding),
pooling strides equal the pool size with floor semantics, and dropout is
inverted (inference is the identity).
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeMismatch


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax, stabilized by max subtraction."""
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# ---------------------------------------------------------------------------
# convolution
# ---------------------------------------------------------------------------

def conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """Valid cross-correlation + bias + ReLU.

    x: (B, H, W, C), w: (kh, kw, C, F), b: (F,). Returns (out, cache).
    """
    if x.ndim != 4 or w.ndim != 4 or x.shape[3] != w.shape[2]:
        raise ShapeMismatch(f"conv2d: x {x.shape} vs w {w.shape}")
    kh, kw = w.shape[:2]
    if kh > x.shape[1] or kw > x.shape[2]:
        raise ShapeMismatch(f"kernel {kh}x{kw} larger than input {x.shape[1:3]}")
    windows = sliding_window_view(x, (kh, kw), axis=(1, 2))  # (B,OH,OW,C,kh,kw)
    z = np.tensordot(windows, w, axes=([3, 4, 5], [2, 0, 1])) + b
    out = relu(z)
    cache = (x, w, z > 0)
    return out, cache


def conv2d_backward(dout: np.ndarray, cache):
    x, w, mask = cache
    dz = dout * mask
    kh, kw, c, f = w.shape
    oh, ow = dz.shape[1], dz.shape[2]
    dx = np.zeros_like(x)
    dw = np.zeros_like(w)
    for i in range(kh):
        for j in range(kw):
            patch = x[:, i:i + oh, j:j + ow, :]
            dw[i, j] = np.tensordot(patch, dz, axes=([0, 1, 2], [0, 1, 2]))
            dx[:, i:i + oh, j:j + ow, :] += dz @ w[i, j].T
    db = dz.sum(axis=(0, 1, 2))
    return dx, dw, db


def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Single-image convenience wrapper: (h, w, c) in, ReLU output out."""
    out, _ = conv2d(x[None], w, b)
    return out[0]


# ---------------------------------------------------------------------------
# max pooling
# ---------------------------------------------------------------------------

def maxpool(x: np.ndarray, pool: int):
    """Channel-wise max over non-overlapping pool x pool windows; trailing
    partial windows are dropped. Returns (out, cache)."""
    b, h, w, c = x.shape
    oh, ow = h // pool, w // pool
    cropped = x[:, :oh * pool, :ow * pool, :]
    tiles = cropped.reshape(b, oh, pool, ow, pool, c)
    tiles = tiles.transpose(0, 1, 3, 2, 4, 5).reshape(b, oh, ow, pool * pool, c)
    idx = tiles.argmax(axis=3)
    out = np.take_along_axis(tiles, idx[:, :, :, None, :], axis=3)[:, :, :, 0, :]
    cache = (x.shape, pool, idx)
    return out, cache


def maxpool_backward(dout: np.ndarray, cache):
    x_shape, pool, idx = cache
    b, h, w, c = x_shape
    oh, ow = h // pool, w // pool
    dtiles = np.zeros((b, oh, ow, pool * pool, c))
    np.put_along_axis(dtiles, idx[:, :, :, None, :], dout[:, :, :, None, :], axis=3)
    dcropped = dtiles.reshape(b, oh, ow, pool, pool, c).transpose(0, 1, 3, 2, 4, 5)
    dx = np.zeros(x_shape)
    dx[:, :oh * pool, :ow * pool, :] = dcropped.reshape(b, oh * pool, ow * pool, c)
    return dx


def maxpool2d(x: np.ndarray, pool: int) -> np.ndarray:
    """Single-image convenience wrapper."""
    out, _ = maxpool(x[None], pool)
    return out[0]


# ---------------------------------------------------------------------------
# dense
# ---------------------------------------------------------------------------

def dense(x: np.ndarray, w: np.ndarray, b: np.ndarray, activation: str = "none"):
    """y = act(x @ w + b) for x of shape (B, n). Returns (out, cache)."""
    if x.shape[-1] != w.shape[0]:
        raise ShapeMismatch(f"dense: x {x.shape} vs w {w.shape}")
    z = x @ w + b
    if activation == "relu":
        out = relu(z)
    elif activation == "softmax":
        out = softmax(z)
    elif activation == "none":
        out = z
    else:
        raise ValueError(f"unknown activation {activation!r}")
    return out, (x, w, z, activation)


def dense_backward(dout: np.ndarray, cache):
    x, w, z, activation = cache
    if activation == "relu":
        dz = dout * (z > 0)
    elif activation == "none":
        dz = dout
    else:
        raise ValueError("softmax backward is handled jointly with the loss")
    dw = x.T @ dz
    db = dz.sum(axis=0)
    dx = dz @ w.T
    return dx, dw, db


def dense_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray,
                  activation: str = "none") -> np.ndarray:
    """Single-vector convenience wrapper."""
    out, _ = dense(np.atleast_2d(x), w, b, activation)
    return out[0] if x.ndim == 1 else out


# ---------------------------------------------------------------------------
# LSTM
# ---------------------------------------------------------------------------
# Gate layout along the last axis of w/u/b: [input, forget, candidate, output].

def lstm(x: np.ndarray, w: np.ndarray, u: np.ndarray, b: np.ndarray):
    """Full-sequence LSTM returning the final hidden state.

    x: (B, T, D), w: (D, 4U), u: (U, 4U), b: (4U,). Zero-padded rows are
    processed like any other step (no masking). Returns (h_T, cache).
    """
    bsz, t_steps, d = x.shape
    units = u.shape[0]
    if w.shape != (d, 4 * units) or b.shape != (4 * units,):
        raise ShapeMismatch(f"lstm: x {x.shape}, w {w.shape}, u {u.shape}")
    h = np.zeros((bsz, units))
    c = np.zeros((bsz, units))
    steps = []
    for t in range(t_steps):
        z = x[:, t, :] @ w + h @ u + b
        i = sigmoid(z[:, :units])
        f = sigmoid(z[:, units:2 * units])
        g = np.tanh(z[:, 2 * units:3 * units])
        o = sigmoid(z[:, 3 * units:])
        c_new = f * c + i * g
        tanh_c = np.tanh(c_new)
        h_new = o * tanh_c
        steps.append((x[:, t, :], h, c, i, f, g, o, tanh_c))
        h, c = h_new, c_new
    return h, (w, u, steps, units)


def lstm_backward(dh_last: np.ndarray, cache):
    w, u, steps, units = cache
    dw = np.zeros_like(w)
    du = np.zeros_like(u)
    db = np.zeros(w.shape[1])
    dh = dh_last
    dc = np.zeros_like(dh_last)
    dx = np.zeros((dh_last.shape[0], len(steps), w.shape[0]))
    for t in range(len(steps) - 1, -1, -1):
        x_t, h_prev, c_prev, i, f, g, o, tanh_c = steps[t]
        do = dh * tanh_c
        dc = dc + dh * o * (1.0 - tanh_c ** 2)
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        dz = np.concatenate([
            di * i * (1.0 - i),
            df * f * (1.0 - f),
            dg * (1.0 - g ** 2),
            do * o * (1.0 - o),
        ], axis=1)
        dw += x_t.T @ dz
        du += h_prev.T @ dz
        db += dz.sum(axis=0)
        dx[:, t, :] = dz @ w.T
        dh = dz @ u.T
        dc = dc * f
    return dx, dw, du, db


def lstm_forward(x: np.ndarray, w: np.ndarray, u: np.ndarray,
                 b: np.ndarray) -> np.ndarray:
    """Single-sequence convenience wrapper: (T, D) in, (units,) out."""
    h, _ = lstm(x[None], w, u, b)
    return h[0]


# ---------------------------------------------------------------------------
# dropout
# ---------------------------------------------------------------------------

def dropout(x: np.ndarray, rate: float, training: bool,
            rng: np.random.Generator | None):
    """Inverted dropout. Returns (out, mask); mask is None at inference."""
    if not training or rate <= 0.0:
        return x, None
    if rng is None:
        raise ValueError("training-mode dropout requires a generator")
    keep = 1.0 - rate
    mask = (rng.random(x.shape) >= rate) / keep
    return x * mask, mask


def dropout_backward(dout: np.ndarray, mask) -> np.ndarray:
    return dout if mask is None else dout * mask


def dropout_apply(x: np.ndarray, rate: float, training: bool,
                  rng: np.random.Generator | None = None) -> np.ndarray:
    out, _ = dropout(x, rate, training, rng)
    return out


# ---------------------------------------------------------------------------
# loss
# ---------------------------------------------------------------------------

def cross_entropy(probs: np.ndarray, onehot: np.ndarray):
    """Mean categorical cross-entropy with a 1e-12 floor inside the log.
    Returns (loss, dlogits) where dlogits is the gradient w.r.t. the
    softmax inputs."""
    bsz = probs.shape[0]
    loss = float(-(onehot * np.log(probs + 1e-12)).sum() / bsz)
    dlogits = (probs - onehot) / bsz
    return loss, dlogits
