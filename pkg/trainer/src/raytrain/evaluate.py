"""Held-out evaluation: per-record MSE and aggregate statistics.

The MSE here is an independent implementation of the same definition the
simulator package uses (mean squared dBm difference over all cells); the
two are cross-validated against each other on shared files in the tests.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch

from . import data, formats
from .train import Checkpoint, ManifestInvalid, _noise_like


def mse_db2(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return float(np.mean(d * d))


def constant_mean_baseline(train_records) -> np.ndarray:
    """The best constant predictor: the cell-wise mean training heatmap."""
    return np.mean([r.heatmap.values for r in train_records], axis=0)


def evaluate(ckpt: Checkpoint, manifest_path, split: str = "test", noise_seed: int = 0) -> dict:
    manifest = formats.read_manifest(manifest_path)
    records = formats.split_records(manifest, split)
    if not records:
        raise ManifestInvalid(f"{split} split is empty")
    base = Path(manifest_path).parent
    loaded = data.load_records(base, manifest, split)

    gen = ckpt.build_generator()
    g = torch.Generator().manual_seed(noise_seed)
    per_record = {}
    for rec in loaded:
        x = torch.from_numpy(rec.raster).unsqueeze(0)
        with torch.no_grad():
            pred = gen(x, _noise_like(x, ckpt.config.effective_noise_channels, g))
        pred_dbm = data.unit_to_dbm(pred[0, 0].numpy())
        per_record[rec.record_id] = mse_db2(pred_dbm, rec.heatmap.values)

    return {
        "split": split,
        "records": per_record,
        "mean_mse_db2": float(np.mean(list(per_record.values()))),
    }


def write_report(report: dict, path):
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
