"""From-scratch 1-D CNN contact classifier: architecture, training, I/O."""

from .network import (
    ArchitectureSpec,
    Conv,
    Dense,
    Dropout,
    Flatten,
    Pool,
    Relu,
    ShapeMismatchError,
    LabelOutOfRangeError,
    backward,
    forward,
    init_params,
    load_params,
    loss,
    predict,
    predict_batch,
    preset,
    save_params,
    trace_shapes,
)
from .training import TrainConfig, EmptyDatasetError, evaluate_accuracy, train, write_training_log

__all__ = [
    "ArchitectureSpec",
    "Conv",
    "Dense",
    "Dropout",
    "Flatten",
    "Pool",
    "Relu",
    "ShapeMismatchError",
    "LabelOutOfRangeError",
    "EmptyDatasetError",
    "TrainConfig",
    "backward",
    "evaluate_accuracy",
    "forward",
    "init_params",
    "load_params",
    "loss",
    "predict",
    "predict_batch",
    "preset",
    "save_params",
    "trace_shapes",
    "train",
    "write_training_log",
]
