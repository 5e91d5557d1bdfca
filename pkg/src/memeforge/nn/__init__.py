"""From-scratch neural engine: layers, model graphs, training, checkpoints."""

from .layers import (  # noqa: F401
    conv2d_forward,
    dense_forward,
    dropout_apply,
    lstm_forward,
    maxpool2d,
    softmax,
)
from .models import (  # noqa: F401
    FusionModelConfig,
    MODEL_KINDS,
    build_model,
    conv_chain_sizes,
    forward,
    loss_and_grads,
    predict,
    predict_batch,
)
from .training import AdamState, TrainConfig, adam_step, train  # noqa: F401
from .checkpoint import load_checkpoint, save_checkpoint  # noqa: F401
