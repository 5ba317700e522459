"""TimeKAN long-term time-series forecasting on a self-contained NumPy core."""
from .model import ModelConfig, TimeKanModel, count_params, estimate_macs
from .training import FitReport, TrainConfig, fit, mae, mse

__all__ = [
    "ModelConfig",
    "TimeKanModel",
    "TrainConfig",
    "FitReport",
    "fit",
    "mse",
    "mae",
    "count_params",
    "estimate_macs",
]

__version__ = "0.1.0"
