"""Gaze estimation from head and eye crops with dual head-eye cross-attention.

The package covers the trigonometric gaze codec, multiscale and temporal
preprocessing with pluggable super-resolution, the attention model,
training, evaluation over yaw subsets and annotation rectification.
"""

from .gaze_codec import angular_error, decode, encode
from .config import DhecaConfig, ModelConfig, TrainConfig
from .model import GazeModel, load_model, predict_static, predict_temporal

__version__ = "0.1.0"

__all__ = ["angular_error", "decode", "encode", "DhecaConfig", "ModelConfig", "TrainConfig", "GazeModel",
           "load_model", "predict_static", "predict_temporal", "__version__"]
