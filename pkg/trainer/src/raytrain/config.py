"""Training configuration."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

from raymap.losses import LossWeights

NOISE_MODES = ("gaussian", "none")

# dBm values are mapped to [0, 1] over this range before entering the nets
DBM_FLOOR = -150.0
DBM_SPAN = 150.0


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.0002
    batch_size: int = 128
    noise: str = "gaussian"
    noise_channels: int = 1
    weights: LossWeights = field(default_factory=LossWeights)
    epochs: int = 20
    seed: int = 0
    no_noise: bool = False
    no_physics: bool = False
    base_channels: int = 16

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.noise not in NOISE_MODES:
            raise ValueError(f"noise must be one of {NOISE_MODES}, got {self.noise!r}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")

    @property
    def effective_noise_channels(self) -> int:
        if self.no_noise or self.noise == "none":
            return 0
        return self.noise_channels

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["weights"] = asdict(self.weights)
        return doc

    @staticmethod
    def from_dict(doc: dict) -> "TrainConfig":
        doc = dict(doc)
        doc["weights"] = LossWeights(**doc["weights"])
        return TrainConfig(**doc)
