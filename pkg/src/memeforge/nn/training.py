"""Adam optimization and the minibatch training loop."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NonFiniteLoss
from .models import FusionModelConfig, loss_and_grads, predict_batch


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    l2_lambda: float = 1e-4
    epochs: int = 50
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0

    @classmethod
    def for_params(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls(m={k: np.zeros_like(p) for k, p in params.items()},
                   v={k: np.zeros_like(p) for k, p in params.items()})


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: AdamState, cfg: TrainConfig):
    """One Adam update; mutates and returns (params, state)."""
    state.t += 1
    b1, b2 = cfg.beta1, cfg.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for name, g in grads.items():
        state.m[name] = b1 * state.m[name] + (1.0 - b1) * g
        state.v[name] = b2 * state.v[name] + (1.0 - b2) * g ** 2
        m_hat = state.m[name] / bc1
        v_hat = state.v[name] / bc2
        params[name] = params[name] - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
    return params, state


@dataclass
class EpochStats:
    epoch: int
    loss: float
    accuracy: float


def train(params: dict[str, np.ndarray], model_cfg: FusionModelConfig, kind: str,
          images: np.ndarray | None, seqs: np.ndarray | None, onehot: np.ndarray,
          cfg: TrainConfig):
    """Minibatch training with per-epoch shuffling from the seed.

    Returns (params, history); history holds one EpochStats per epoch with
    the mean minibatch loss and inference-mode training accuracy.
    """
    n = onehot.shape[0]
    state = AdamState.for_params(params)
    rng = np.random.default_rng(cfg.seed)
    history: list[EpochStats] = []
    labels = onehot.argmax(axis=1)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            batch_images = None if images is None else images[idx]
            batch_seqs = None if seqs is None else seqs[idx]
            try:
                loss, grads = loss_and_grads(
                    params, model_cfg, kind, batch_images, batch_seqs,
                    onehot[idx], l2_lambda=cfg.l2_lambda, training=True, rng=rng)
            except NonFiniteLoss as exc:
                raise NonFiniteLoss(f"epoch {epoch}: {exc}") from exc
            params, state = adam_step(params, grads, state, cfg)
            losses.append(loss)
        probs = predict_batch(params, model_cfg, kind, images, seqs)
        accuracy = float((probs.argmax(axis=1) == labels).mean())
        history.append(EpochStats(epoch=epoch, loss=float(np.mean(losses)),
                                  accuracy=accuracy))
    return params, history
