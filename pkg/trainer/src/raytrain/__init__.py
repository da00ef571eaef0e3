"""Conditional GAN trainer for encoded-geometry to radio-heatmap prediction."""

from .config import TrainConfig
from .evaluate import evaluate, mse_db2
from .infer import infer, predict
from .models import Discriminator, Generator
from .train import Checkpoint, ManifestInvalid, ShapeMismatch, train

__all__ = [
    "TrainConfig",
    "Checkpoint",
    "Generator",
    "Discriminator",
    "train",
    "infer",
    "predict",
    "evaluate",
    "mse_db2",
    "ManifestInvalid",
    "ShapeMismatch",
]

__version__ = "0.1.0"
