"""Scene-object-aware human motion forecasting with spatio-temporal GCNs."""

from .model import ModelConfig, ModelParams, count_parameters, forward
from .train import TrainConfig, train

__version__ = "0.1.0"

__all__ = ["ModelConfig", "ModelParams", "TrainConfig", "count_parameters", "forward", "train"]
