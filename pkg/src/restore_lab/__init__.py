"""Multi-scale frequency-selective image restoration."""

from .errors import ConfigError, InputError, NumericError
from .losses import LossConfig, restoration_loss
from .model import LCDNet, ModelConfig

__all__ = ["LCDNet", "ModelConfig", "LossConfig", "restoration_loss", "ConfigError", "InputError", "NumericError"]
__version__ = "0.1.0"
