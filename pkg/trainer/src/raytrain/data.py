"""Dataset loading: manifest records to training tensors.

Rasters and heatmaps come straight from the dataset files.  The optional
physics annotations (per-cell dominant mechanism and its oracle path loss)
are recomputed from the stored scene with the simulator, by running it three
times with mechanisms progressively enabled and differencing the linear
power maps.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from raymap import raytracer as rt
from raymap import scene as sc

from .config import DBM_FLOOR, DBM_SPAN
from . import formats

MATERIAL_ID_SCALE = 3.0
HEIGHT_SCALE = 3.0
DOMINANCE_THRESHOLD = 0.9
MECHANISMS = ("direct", "reflection", "diffraction")


def normalize_raster(channels: np.ndarray) -> np.ndarray:
    out = channels.astype(np.float32).copy()
    out[0] /= MATERIAL_ID_SCALE
    out[1] /= HEIGHT_SCALE
    return out


def dbm_to_unit(values: np.ndarray) -> np.ndarray:
    return ((values - DBM_FLOOR) / DBM_SPAN).astype(np.float32)


def unit_to_dbm(values: np.ndarray) -> np.ndarray:
    return values.astype(np.float64) * DBM_SPAN + DBM_FLOOR


@dataclass
class Record:
    record_id: str
    raster: np.ndarray  # normalized (3, nx, ny) float32
    target: np.ndarray  # normalized (nx, ny) float32
    heatmap: formats.HeatmapFile
    mech_mask: np.ndarray | None = None  # (nx, ny) int8, -1 where no dominance
    oracle_pl: np.ndarray | None = None  # (nx, ny) float32 dB


def _grid_from_record(rec: dict) -> sc.GridSpec:
    g = rec["grid"]
    return sc.GridSpec(
        tuple(g["origin"]), g["width"], g["depth"], g["resolution"], g["receiver_height"]
    )


def physics_annotations(dataset_dir, rec: dict):
    """Dominant-mechanism mask and oracle component path loss per cell.

    Mechanism powers come from differencing three simulator passes:
    direct only, direct + reflections, and everything."""
    base = Path(dataset_dir)
    scene = sc.load_scene((base / rec["scene_path"]).read_bytes())
    tx = sc.TxLocation(
        tuple(rec["tx"]["position"]), rec["tx"]["power"], rec["tx"]["frequency"]
    )
    grid = _grid_from_record(rec)

    def lin(order, diff):
        cfg = rt.TraceConfig(max_reflection_order=order, enable_diffraction=diff)
        h = rt.simulate_heatmap(scene, tx, grid, cfg)
        out = 10.0 ** (h.values / 10.0)
        out[h.values <= cfg.floor_dbm] = 0.0
        return out

    direct = lin(0, False)
    with_refl = lin(2, False)
    full = lin(2, True)
    comps = np.stack(
        [direct, np.maximum(with_refl - direct, 0.0), np.maximum(full - with_refl, 0.0)]
    )
    total = comps.sum(axis=0)
    mask = np.full(total.shape, -1, dtype=np.int8)
    oracle = np.zeros(total.shape, dtype=np.float32)
    nonzero = total > 0
    frac = np.where(nonzero, comps / np.maximum(total, 1e-300), 0.0)
    for m in range(3):
        dominant = nonzero & (frac[m] > DOMINANCE_THRESHOLD)
        mask[dominant] = m
        with np.errstate(divide="ignore"):
            pl = tx.power - 10.0 * np.log10(np.maximum(comps[m], 1e-300))
        oracle[dominant] = pl[dominant].astype(np.float32)
    return mask, oracle


def load_records(dataset_dir, manifest: dict, split: str, physics: bool = False):
    base = Path(dataset_dir)
    out = []
    for rec in formats.split_records(manifest, split):
        raster = formats.read_raster(base / rec["raster_path"])
        heat = formats.read_heatmap(base / rec["heatmap_path"])
        if raster.channels.shape[1:] != heat.values.shape:
            raise ValueError(
                f"{rec['record_id']}: raster {raster.channels.shape[1:]} vs "
                f"heatmap {heat.values.shape}"
            )
        r = Record(
            rec["record_id"],
            normalize_raster(raster.channels),
            dbm_to_unit(heat.values),
            heat,
        )
        if physics:
            r.mech_mask, r.oracle_pl = physics_annotations(dataset_dir, rec)
        out.append(r)
    return out


def batch_tensors(records, indices):
    raster = torch.from_numpy(np.stack([records[i].raster for i in indices]))
    target = torch.from_numpy(np.stack([records[i].target for i in indices])).unsqueeze(1)
    return raster, target


def batch_physics(records, indices):
    mask = torch.from_numpy(np.stack([records[i].mech_mask for i in indices]))
    oracle = torch.from_numpy(np.stack([records[i].oracle_pl for i in indices]))
    return mask, oracle
