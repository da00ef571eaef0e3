"""Standalone readers and writers for the simulator's file formats.

These are deliberately independent of the simulator package so that the two
implementations of the binary layouts can be cross-checked against each
other on shared files.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

RASTER_MAGIC = b"EMEG"
HEATMAP_MAGIC = b"EMHM"
FORMAT_VERSION = 1
_RASTER_FMT = "<4sIIIddddI"
_HEATMAP_FMT = "<4sIIIdddddddddd"


class FormatError(ValueError):
    pass


@dataclass(frozen=True)
class RasterFile:
    channels: np.ndarray  # (n_channels, nx, ny) float32
    resolution: float
    origin: tuple[float, float]
    receiver_height: float

    @property
    def nx(self) -> int:
        return self.channels.shape[1]

    @property
    def ny(self) -> int:
        return self.channels.shape[2]


@dataclass(frozen=True)
class HeatmapFile:
    values: np.ndarray  # (nx, ny) float64 dBm
    resolution: float
    origin: tuple[float, float]
    receiver_height: float
    floor_dbm: float
    tx_position: tuple[float, float, float]
    tx_power: float
    tx_frequency: float


def read_raster(path) -> RasterFile:
    data = Path(path).read_bytes()
    hsize = struct.calcsize(_RASTER_FMT)
    if len(data) < hsize:
        raise FormatError(f"raster file too short: {len(data)} bytes")
    magic, version, nx, ny, res, ox, oy, rxh, nch = struct.unpack(
        _RASTER_FMT, data[:hsize]
    )
    if magic != RASTER_MAGIC:
        raise FormatError(f"bad raster magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported raster version {version}")
    expected = hsize + 4 * nch * nx * ny
    if len(data) != expected:
        raise FormatError(f"raster payload {len(data)} != expected {expected}")
    channels = np.frombuffer(data[hsize:], dtype="<f4").reshape(nch, nx, ny)
    return RasterFile(channels.copy(), res, (ox, oy), rxh)


def read_heatmap(path) -> HeatmapFile:
    data = Path(path).read_bytes()
    hsize = struct.calcsize(_HEATMAP_FMT)
    if len(data) < hsize:
        raise FormatError(f"heatmap file too short: {len(data)} bytes")
    (magic, version, nx, ny, res, ox, oy, rxh, floor, tx, ty, tz, tp, tf) = struct.unpack(
        _HEATMAP_FMT, data[:hsize]
    )
    if magic != HEATMAP_MAGIC:
        raise FormatError(f"bad heatmap magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported heatmap version {version}")
    expected = hsize + 4 * nx * ny
    if len(data) != expected:
        raise FormatError(f"heatmap payload {len(data)} != expected {expected}")
    values = np.frombuffer(data[hsize:], dtype="<f4").reshape(nx, ny).astype(np.float64)
    return HeatmapFile(values, res, (ox, oy), rxh, floor, (tx, ty, tz), tp, tf)


def write_heatmap(path, h: HeatmapFile):
    nx, ny = h.values.shape
    header = struct.pack(
        _HEATMAP_FMT,
        HEATMAP_MAGIC,
        FORMAT_VERSION,
        nx,
        ny,
        h.resolution,
        h.origin[0],
        h.origin[1],
        h.receiver_height,
        h.floor_dbm,
        h.tx_position[0],
        h.tx_position[1],
        h.tx_position[2],
        h.tx_power,
        h.tx_frequency,
    )
    payload = header + np.ascontiguousarray(h.values, dtype="<f4").tobytes()
    Path(path).write_bytes(payload)


def read_manifest(path) -> dict:
    p = Path(path)
    try:
        doc = json.loads(p.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read manifest {p}: {exc}") from exc
    if not isinstance(doc, dict) or "records" not in doc:
        raise FormatError(f"{p} is not a dataset manifest")
    return doc


def split_records(manifest: dict, split: str) -> list[dict]:
    return [r for r in manifest["records"] if r["split"] == split]
