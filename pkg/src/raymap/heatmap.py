"""Heatmap persistence, comparison metrics, and image export.

The binary heatmap format ("EMHM") stores the grid header plus row-major
little-endian float32 values and round-trips losslessly at float32 precision.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateReference, GridMismatch, ParseError
from .raytracer import Heatmap
from .scene import GridSpec, TxLocation

HEATMAP_MAGIC = b"EMHM"
HEATMAP_VERSION = 1
_HEADER_FMT = "<4sIIIdddddddddd"

PERCENTILE_LEVELS = (50, 70, 90)


@dataclass(frozen=True)
class Histogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    percentiles: dict[int, float]

    def __post_init__(self):
        if len(self.counts) != len(self.bin_edges) - 1:
            raise ValueError("counts/bin_edges length mismatch")


def _check_grids(a: Heatmap, b: Heatmap):
    if a.grid != b.grid:
        raise GridMismatch(f"grids differ: {a.grid} vs {b.grid}")


def mse(a: Heatmap, b: Heatmap) -> float:
    """Mean squared difference over all cells, in dBm^2."""
    _check_grids(a, b)
    diff = a.values - b.values
    return float(np.mean(diff * diff))


def nearest_rank_percentile(sorted_values: np.ndarray, q: float) -> float:
    """Nearest-rank percentile: element at index ceil(q*N) of the sorted array."""
    n = len(sorted_values)
    if n == 0:
        raise ValueError("empty sample")
    rank = max(1, int(np.ceil(q * n)))
    return float(sorted_values[min(rank, n) - 1])


def normalized_diff_histogram(a: Heatmap, b: Heatmap, bins: int) -> Histogram:
    """Histogram of (a - b) normalized by b's dynamic range, over [-1, 1].

    Percentiles are nearest-rank statistics of the absolute normalized
    differences; b is the reference map."""
    _check_grids(a, b)
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    ref_range = float(b.values.max() - b.values.min())
    if ref_range < 1e-9:
        raise DegenerateReference(f"reference dynamic range {ref_range} too small")
    d = (a.values - b.values).ravel() / ref_range
    clipped = np.clip(d, -1.0, 1.0)
    counts, edges = np.histogram(clipped, bins=bins, range=(-1.0, 1.0))
    abs_sorted = np.sort(np.abs(d))
    pct = {
        lvl: nearest_rank_percentile(abs_sorted, lvl / 100.0) for lvl in PERCENTILE_LEVELS
    }
    return Histogram(edges, counts, pct)


_THERMAL_STOPS = np.array(
    [
        (0, 0, 64),
        (0, 0, 255),
        (0, 255, 255),
        (255, 255, 0),
        (255, 64, 0),
        (255, 255, 255),
    ],
    dtype=np.float64,
)


def _palette_rgb(t: np.ndarray, palette: str) -> np.ndarray:
    """Map t in [0, 1] to (..., 3) uint8 colors."""
    if palette == "grayscale":
        g = np.round(t * 255.0).astype(np.uint8)
        return np.stack([g, g, g], axis=-1)
    if palette == "thermal":
        pos = t * (len(_THERMAL_STOPS) - 1)
        lo = np.clip(np.floor(pos).astype(int), 0, len(_THERMAL_STOPS) - 2)
        frac = pos - lo
        rgb = _THERMAL_STOPS[lo] + frac[..., None] * (_THERMAL_STOPS[lo + 1] - _THERMAL_STOPS[lo])
        return np.round(rgb).astype(np.uint8)
    raise ValueError(f"unknown palette {palette!r}")


def export_image(h: Heatmap, palette: str = "thermal") -> bytes:
    """Binary PPM (P6) render, one pixel per cell; min->cold, max->hot."""
    vmin = float(h.values.min())
    vmax = float(h.values.max())
    if vmax - vmin < 1e-12:
        t = np.full(h.values.shape, 0.5)
    else:
        t = (h.values - vmin) / (vmax - vmin)
    # image rows run top-to-bottom: y descending, x across
    rgb = _palette_rgb(t.T[::-1], palette)
    header = f"P6\n{h.grid.nx} {h.grid.ny}\n255\n".encode("ascii")
    return header + rgb.tobytes()


def save_heatmap(h: Heatmap) -> bytes:
    g = h.grid
    header = struct.pack(
        _HEADER_FMT,
        HEATMAP_MAGIC,
        HEATMAP_VERSION,
        g.nx,
        g.ny,
        g.resolution,
        g.origin[0],
        g.origin[1],
        g.receiver_height,
        h.floor_dbm,
        h.tx.position[0],
        h.tx.position[1],
        h.tx.position[2],
        h.tx.power,
        h.tx.frequency,
    )
    return header + np.ascontiguousarray(h.values, dtype="<f4").tobytes()


def load_heatmap(data: bytes) -> Heatmap:
    hsize = struct.calcsize(_HEADER_FMT)
    if len(data) < hsize:
        raise ParseError(f"heatmap truncated: {len(data)} bytes < {hsize}-byte header")
    (
        magic,
        version,
        nx,
        ny,
        res,
        ox,
        oy,
        rxh,
        floor_dbm,
        tx_x,
        tx_y,
        tx_z,
        tx_p,
        tx_f,
    ) = struct.unpack(_HEADER_FMT, data[:hsize])
    if magic != HEATMAP_MAGIC:
        raise ParseError(f"bad heatmap magic {magic!r}")
    if version != HEATMAP_VERSION:
        raise ParseError(f"unsupported heatmap version {version}")
    expected = hsize + 4 * nx * ny
    if len(data) != expected:
        raise ParseError(f"heatmap payload length {len(data)} != expected {expected}")
    values = np.frombuffer(data[hsize:], dtype="<f4").reshape(nx, ny).astype(np.float64)
    grid = GridSpec((ox, oy), nx * res, ny * res, res, rxh)
    tx = TxLocation((tx_x, tx_y, tx_z), tx_p, tx_f)
    return Heatmap(grid, values, floor_dbm, tx)
