"""Quantile model zoo: one fit/predict contract across all families."""

from .base import QuantileModel, TrainReport, pinball
from .io import FAMILIES, load_checkpoint, make_model, save_checkpoint
from .lqr import LQRModel
from .qgbt import QGBTModel
from .qknn import QKNNModel
from .qmlp import QMLPModel

__all__ = [
    "FAMILIES",
    "LQRModel",
    "QGBTModel",
    "QKNNModel",
    "QMLPModel",
    "QuantileModel",
    "TrainReport",
    "load_checkpoint",
    "make_model",
    "pinball",
    "save_checkpoint",
]
