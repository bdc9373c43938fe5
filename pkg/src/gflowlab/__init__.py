"""Desk-scale GFlowNet training engine with backward-policy optimization,
exact dynamic-programming oracles, and a config-driven CLI."""

from . import backward, envs, kernels, metrics, objectives, oracle, params, replay
from .config import RunConfig, load_config
from .trainer import TrainResult, train

__version__ = "0.1.0"

__all__ = [
    "backward", "envs", "kernels", "metrics", "objectives", "oracle", "params",
    "replay", "RunConfig", "load_config", "TrainResult", "train", "__version__",
]
