"""Sparse + dense locality-enhanced window transformer for multi-coil MRI reconstruction."""

from .config import ModelConfig, RunConfig, TrainConfig, load_run_config
from .errors import (ConfigError, ContractError, FormatError, NonFiniteError, ResampleError,
                     SDLFError, ShapeError)
from .net import SDLFormer

__all__ = [
    "ConfigError", "ContractError", "FormatError", "ModelConfig", "NonFiniteError", "ResampleError",
    "RunConfig", "SDLFError", "SDLFormer", "ShapeError", "TrainConfig", "load_run_config",
]
__version__ = "0.1.0"
