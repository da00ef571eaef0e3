"""One-shot heatmap inference from a checkpoint."""
from __future__ import annotations

from pathlib import Path

import numpy as np
import torch

from . import data, formats
from .train import Checkpoint, ShapeMismatch, _noise_like


def predict(ckpt: Checkpoint, raster: formats.RasterFile, noise_seed: int = 0) -> np.ndarray:
    """Forward pass; returns the predicted heatmap in dBm, shape (nx, ny)."""
    if raster.channels.shape[0] != 3:
        raise ShapeMismatch(
            f"expected a 3-channel raster, got {raster.channels.shape[0]}"
        )
    gen = ckpt.build_generator()
    x = torch.from_numpy(data.normalize_raster(raster.channels)).unsqueeze(0)
    g = torch.Generator().manual_seed(noise_seed)
    with torch.no_grad():
        pred = gen(x, _noise_like(x, ckpt.config.effective_noise_channels, g))
    return data.unit_to_dbm(pred[0, 0].numpy())


def infer(
    ckpt: Checkpoint,
    raster_path,
    out_path,
    tx_position,
    tx_power: float = 0.0,
    tx_frequency: float = 2.4e9,
    floor_dbm: float = -150.0,
    noise_seed: int = 0,
) -> formats.HeatmapFile:
    """Run the generator on a raster file and write the result as a heatmap file."""
    raster = formats.read_raster(raster_path)
    values = predict(ckpt, raster, noise_seed)
    heat = formats.HeatmapFile(
        values,
        raster.resolution,
        raster.origin,
        raster.receiver_height,
        floor_dbm,
        tuple(tx_position),
        tx_power,
        tx_frequency,
    )
    formats.write_heatmap(Path(out_path), heat)
    return heat
