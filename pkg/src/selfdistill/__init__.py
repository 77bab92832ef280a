"""Self-distillation, label smoothing and Beta smoothing as amortized MAP
estimation, with the metrics used to study them."""

from .config import ConfigError, ExperimentConfig, parse_config
from .nn import Batch, MlpModel, init_model, forward, backward, sgd_step
from .estimator import DistillationClassifier

__version__ = "0.1.0"

__all__ = [
    "Batch", "ConfigError", "DistillationClassifier", "ExperimentConfig", "MlpModel",
    "backward", "forward", "init_model", "parse_config", "sgd_step",
]
