"""From-scratch multilabel text CNN: embedding, 1-D convolution,
max-over-time pooling, sigmoid output layer, with training, inference,
gradient verification, and snapshot persistence."""

from .model import MODEL_FORMAT_VERSION, TextCnnModel, TrainResult, train_model
from .network import CnnParams, bce_loss, forward, init_params, loss_gradients
from .training import TrainConfig, gradient_check, train
from .vocab import Vocabulary, build_vocabulary, vectorize

__all__ = [
    "CnnParams",
    "MODEL_FORMAT_VERSION",
    "TextCnnModel",
    "TrainConfig",
    "TrainResult",
    "Vocabulary",
    "bce_loss",
    "build_vocabulary",
    "forward",
    "gradient_check",
    "init_params",
    "loss_gradients",
    "train",
    "train_model",
    "vectorize",
]
