"""Indoor scene model: wall layouts, procedural generation, rasterization.

Scenes are 2.5-D: wall center-line segments in the floor plane, extruded to a
height.  Three archetypes cover the benchmark layouts: a bare rectangular
room, a room cut by partitions with door openings, and a denser multi-region
floor plan.
"""
from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .errors import (
    EmptyPalette,
    InvalidDimensions,
    ParseError,
    TxOutsideGrid,
)
from .materials import MATERIAL_IDS, Material, get_material

DEFAULT_WALL_HEIGHT = 3.0  # m
DEFAULT_WALL_THICKNESS = 0.1  # m
DOOR_WIDTH = 0.9  # m

SCENE_FORMAT_VERSION = 1
RASTER_MAGIC = b"EMEG"
RASTER_VERSION = 1

ARCHETYPES = ("single_room", "multiple_rooms", "complex_floor_plan")


@dataclass(frozen=True)
class WallSegment:
    endpoints: tuple[tuple[float, float], tuple[float, float]]
    height: float = DEFAULT_WALL_HEIGHT
    thickness: float = DEFAULT_WALL_THICKNESS
    material: Material = field(default_factory=lambda: get_material("concrete"))

    def __post_init__(self):
        (x0, y0), (x1, y1) = self.endpoints
        if np.hypot(x1 - x0, y1 - y0) <= 1e-9:
            raise ValueError(f"wall endpoints coincide: {self.endpoints}")
        if self.height <= 0.0:
            raise ValueError(f"wall height must be > 0, got {self.height}")
        if self.thickness < 0.0:
            raise ValueError(f"wall thickness must be >= 0, got {self.thickness}")

    @property
    def length(self) -> float:
        (x0, y0), (x1, y1) = self.endpoints
        return float(np.hypot(x1 - x0, y1 - y0))


@dataclass(frozen=True)
class Scene:
    walls: tuple[WallSegment, ...]
    bounds: tuple[float, float, float, float]  # xmin, ymin, xmax, ymax
    archetype: str = "single_room"
    seed: int = 0

    def __post_init__(self):
        xmin, ymin, xmax, ymax = self.bounds
        if (xmax - xmin) * (ymax - ymin) <= 0.0:
            raise ValueError(f"bounds must enclose positive area: {self.bounds}")
        tol = 1e-6
        for i, w in enumerate(self.walls):
            for (x, y) in w.endpoints:
                if not (xmin - tol <= x <= xmax + tol and ymin - tol <= y <= ymax + tol):
                    raise ValueError(f"wall {i} endpoint ({x}, {y}) outside bounds {self.bounds}")

    def wall_arrays(self):
        """(a, b, height) arrays of shape (m, 2)/(m,) for the geometry kernels."""
        if not self.walls:
            z = np.zeros((0, 2))
            return z, z.copy(), np.zeros(0)
        a = np.array([w.endpoints[0] for w in self.walls], dtype=np.float64)
        b = np.array([w.endpoints[1] for w in self.walls], dtype=np.float64)
        h = np.array([w.height for w in self.walls], dtype=np.float64)
        return a, b, h

    def contains_point(self, x: float, y: float, tol: float = 1e-6) -> bool:
        xmin, ymin, xmax, ymax = self.bounds
        return xmin - tol <= x <= xmax + tol and ymin - tol <= y <= ymax + tol

    def point_in_wall_solid(self, x: float, y: float) -> bool:
        """True when (x, y) lies within thickness/2 of some wall center line."""
        if not self.walls:
            return False
        a, b, _ = self.wall_arrays()
        dist = geometry.point_segment_distance(np.array([[x, y]]), a, b)[0]
        half = np.array([w.thickness for w in self.walls]) / 2.0
        return bool((dist <= half).any())


@dataclass(frozen=True)
class TxLocation:
    position: tuple[float, float, float]
    power: float = 0.0  # dBm
    frequency: float = 2.4e9  # Hz

    def __post_init__(self):
        if self.frequency <= 0.0:
            raise ValueError(f"frequency must be > 0, got {self.frequency}")


@dataclass(frozen=True)
class GridSpec:
    origin: tuple[float, float]
    width: float
    depth: float
    resolution: float
    receiver_height: float = 1.5

    def __post_init__(self):
        if self.resolution <= 0.0:
            raise ValueError(f"resolution must be > 0, got {self.resolution}")
        if self.width < self.resolution or self.depth < self.resolution:
            raise ValueError("grid extent smaller than one cell")

    @property
    def nx(self) -> int:
        return max(1, round(self.width / self.resolution))

    @property
    def ny(self) -> int:
        return max(1, round(self.depth / self.resolution))

    def cell_centers(self):
        """(nx*ny, 2) array of cell centers, x-major order."""
        xs = self.origin[0] + (np.arange(self.nx) + 0.5) * self.resolution
        ys = self.origin[1] + (np.arange(self.ny) + 0.5) * self.resolution
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        return np.column_stack([gx.ravel(), gy.ravel()])

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        ix = int(np.floor((x - self.origin[0]) / self.resolution))
        iy = int(np.floor((y - self.origin[1]) / self.resolution))
        # Points on the far boundary belong to the last cell.
        if ix == self.nx and abs(x - (self.origin[0] + self.width)) < 1e-9:
            ix -= 1
        if iy == self.ny and abs(y - (self.origin[1] + self.depth)) < 1e-9:
            iy -= 1
        return ix, iy


@dataclass(frozen=True)
class EncodedGeometry:
    channels: np.ndarray  # (3, nx, ny) float32
    grid: GridSpec

    def __post_init__(self):
        if self.channels.shape != (3, self.grid.nx, self.grid.ny):
            raise ValueError(
                f"channel shape {self.channels.shape} does not match grid "
                f"({self.grid.nx}x{self.grid.ny})"
            )
        tx_cells = int((self.channels[2] == 1.0).sum())
        if tx_cells != 1 or self.channels[2].sum() != 1.0:
            raise ValueError(f"exactly one Tx cell required, found {tx_cells}")
        if (self.channels[1] < 0.0).any():
            raise ValueError("height channel contains negative values")


# ---------------------------------------------------------------------------
# Procedural generation


def _perimeter(rng, w, d, palette, height, thickness):
    corners = [(0.0, 0.0), (w, 0.0), (w, d), (0.0, d)]
    walls = []
    for i in range(4):
        mat = palette[rng.integers(len(palette))]
        walls.append(WallSegment((corners[i], corners[(i + 1) % 4]), height, thickness, mat))
    return walls


def _partition(rng, span, fixed, vertical, palette, height, thickness, door=DOOR_WIDTH):
    """A straight partition across the room with one door gap, as 1-2 walls."""
    door = min(door, 0.45 * span)
    door_start = float(rng.uniform(0.05 * span, span - door - 0.05 * span))
    mat = palette[rng.integers(len(palette))]
    pieces = []
    for lo, hi in ((0.0, door_start), (door_start + door, span)):
        if hi - lo <= 1e-6:
            continue
        if vertical:
            seg = ((fixed, lo), (fixed, hi))
        else:
            seg = ((lo, fixed), (hi, fixed))
        pieces.append(WallSegment(seg, height, thickness, mat))
    return pieces


def generate_scene(
    archetype: str,
    side_lengths: tuple[float, float],
    palette,
    seed: int,
    wall_height: float = DEFAULT_WALL_HEIGHT,
    wall_thickness: float = DEFAULT_WALL_THICKNESS,
) -> Scene:
    """Deterministically generate a benchmark-style indoor layout.

    Identical arguments always produce an identical wall list; the palette may
    be any iterable of material names or Material objects.
    """
    if archetype not in ARCHETYPES:
        raise ValueError(f"unknown archetype {archetype!r}; expected one of {ARCHETYPES}")
    mats = sorted(
        {m if isinstance(m, Material) else get_material(m) for m in palette},
        key=lambda m: m.name,
    )
    if not mats:
        raise EmptyPalette("material palette is empty")
    w, d = float(side_lengths[0]), float(side_lengths[1])
    if w <= 0.0 or d <= 0.0:
        raise InvalidDimensions(f"side lengths must be positive, got {side_lengths}")
    if archetype != "single_room" and min(w, d) < 1.0:
        raise InvalidDimensions(f"{archetype} requires sides >= 1 m, got {side_lengths}")

    rng = np.random.default_rng(seed)
    walls = _perimeter(rng, w, d, mats, wall_height, wall_thickness)

    if archetype == "multiple_rooms":
        n_parts = int(rng.integers(1, 3))
        for _ in range(n_parts):
            vertical = bool(rng.integers(2))
            span = d if vertical else w
            lo = 0.2 * (w if vertical else d)
            hi = 0.8 * (w if vertical else d)
            fixed = float(rng.uniform(lo, hi))
            walls.extend(_partition(rng, span, fixed, vertical, mats, wall_height, wall_thickness))
    elif archetype == "complex_floor_plan":
        # One full vertical partition, one full horizontal partition, then a
        # stub partition in a random quadrant: >= 4 enclosed regions.
        xcut = float(rng.uniform(0.3 * w, 0.7 * w))
        ycut = float(rng.uniform(0.3 * d, 0.7 * d))
        walls.extend(_partition(rng, d, xcut, True, mats, wall_height, wall_thickness))
        walls.extend(_partition(rng, w, ycut, False, mats, wall_height, wall_thickness))
        n_stubs = int(rng.integers(1, 3))
        for _ in range(n_stubs):
            vertical = bool(rng.integers(2))
            if vertical:
                x = float(rng.uniform(0.1 * w, 0.9 * w))
                y0 = float(rng.uniform(0.0, 0.5 * d))
                length = float(rng.uniform(0.25 * d, 0.45 * d))
                seg = ((x, y0), (x, min(y0 + length, d)))
            else:
                y = float(rng.uniform(0.1 * d, 0.9 * d))
                x0 = float(rng.uniform(0.0, 0.5 * w))
                length = float(rng.uniform(0.25 * w, 0.45 * w))
                seg = ((x0, y), (min(x0 + length, w), y))
            mat = mats[rng.integers(len(mats))]
            walls.append(WallSegment(seg, wall_height, wall_thickness, mat))

    return Scene(tuple(walls), (0.0, 0.0, w, d), archetype, int(seed))


# ---------------------------------------------------------------------------
# Persistence


def save_scene(scene: Scene) -> bytes:
    doc = {
        "version": SCENE_FORMAT_VERSION,
        "archetype": scene.archetype,
        "seed": scene.seed,
        "bounds": list(scene.bounds),
        "walls": [
            {
                "endpoints": [list(p) for p in w.endpoints],
                "height": w.height,
                "thickness": w.thickness,
                "material": w.material.name,
            }
            for w in scene.walls
        ],
    }
    return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode("utf-8")


def load_scene(data: bytes) -> Scene:
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"scene document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("scene document root must be an object")
    for key in ("version", "archetype", "seed", "bounds", "walls"):
        if key not in doc:
            raise ParseError(f"scene document missing {key!r} key")
    if doc["version"] != SCENE_FORMAT_VERSION:
        raise ParseError(f"unsupported scene version {doc['version']}")
    try:
        walls = []
        for i, w in enumerate(doc["walls"]):
            try:
                walls.append(
                    WallSegment(
                        tuple(tuple(float(c) for c in p) for p in w["endpoints"]),
                        float(w["height"]),
                        float(w["thickness"]),
                        get_material(w["material"]),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"walls[{i}]: {exc}") from exc
        return Scene(
            tuple(walls),
            tuple(float(v) for v in doc["bounds"]),
            str(doc["archetype"]),
            int(doc["seed"]),
        )
    except ParseError:
        raise
    except (TypeError, ValueError) as exc:
        raise ParseError(f"malformed scene document: {exc}") from exc


# ---------------------------------------------------------------------------
# Rasterization


def rasterize(scene: Scene, grid: GridSpec, tx: TxLocation) -> EncodedGeometry:
    """Encode a scene + transmitter into the 3-channel learning raster.

    Channel 0: material id of the wall crossing each cell footprint (nearest
    wall to the cell center on overlap), 0 for background.  Channel 1: that
    wall's height in meters.  Channel 2: one-hot transmitter cell.
    """
    nx, ny = grid.nx, grid.ny
    res = grid.resolution
    ox, oy = grid.origin
    mat_ch = np.zeros((nx, ny), dtype=np.float32)
    height_ch = np.zeros((nx, ny), dtype=np.float32)
    best_dist = np.full((nx, ny), np.inf)

    for wall in scene.walls:
        (x0, y0), (x1, y1) = wall.endpoints
        i0 = max(0, int(np.floor((min(x0, x1) - ox) / res)) - 1)
        i1 = min(nx - 1, int(np.floor((max(x0, x1) - ox) / res)) + 1)
        j0 = max(0, int(np.floor((min(y0, y1) - oy) / res)) - 1)
        j1 = min(ny - 1, int(np.floor((max(y0, y1) - oy) / res)) + 1)
        if i0 > i1 or j0 > j1:
            continue
        ii, jj = np.meshgrid(np.arange(i0, i1 + 1), np.arange(j0, j1 + 1), indexing="ij")
        ii = ii.ravel()
        jj = jj.ravel()
        cx0 = ox + ii * res
        cy0 = oy + jj * res
        hit = geometry.segment_aabb_overlap((x0, y0), (x1, y1), cx0, cy0, cx0 + res, cy0 + res)
        if not hit.any():
            continue
        ii, jj = ii[hit], jj[hit]
        centers = np.column_stack([ox + (ii + 0.5) * res, oy + (jj + 0.5) * res])
        dist = geometry.point_segment_distance(
            centers, np.array([[x0, y0]]), np.array([[x1, y1]])
        )[:, 0]
        closer = dist < best_dist[ii, jj]
        ii, jj, dist = ii[closer], jj[closer], dist[closer]
        best_dist[ii, jj] = dist
        mat_ch[ii, jj] = MATERIAL_IDS[wall.material.name]
        height_ch[ii, jj] = wall.height

    tx_ch = np.zeros((nx, ny), dtype=np.float32)
    ix, iy = grid.cell_of(tx.position[0], tx.position[1])
    if not (0 <= ix < nx and 0 <= iy < ny):
        raise TxOutsideGrid(
            f"tx at ({tx.position[0]}, {tx.position[1]}) projects outside the {nx}x{ny} raster"
        )
    tx_ch[ix, iy] = 1.0

    return EncodedGeometry(np.stack([mat_ch, height_ch, tx_ch]), grid)


def save_raster(enc: EncodedGeometry) -> bytes:
    g = enc.grid
    header = struct.pack(
        "<4sIIIddddI",
        RASTER_MAGIC,
        RASTER_VERSION,
        g.nx,
        g.ny,
        g.resolution,
        g.origin[0],
        g.origin[1],
        g.receiver_height,
        enc.channels.shape[0],
    )
    buf = io.BytesIO()
    buf.write(header)
    buf.write(np.ascontiguousarray(enc.channels, dtype="<f4").tobytes())
    return buf.getvalue()


def load_raster(data: bytes) -> EncodedGeometry:
    fmt = "<4sIIIddddI"
    hsize = struct.calcsize(fmt)
    if len(data) < hsize:
        raise ParseError(f"raster truncated: {len(data)} bytes < {hsize}-byte header")
    magic, version, nx, ny, res, ox, oy, rxh, n_ch = struct.unpack(fmt, data[:hsize])
    if magic != RASTER_MAGIC:
        raise ParseError(f"bad raster magic {magic!r}")
    if version != RASTER_VERSION:
        raise ParseError(f"unsupported raster version {version}")
    expected = hsize + 4 * n_ch * nx * ny
    if len(data) != expected:
        raise ParseError(f"raster payload length {len(data)} != expected {expected}")
    channels = np.frombuffer(data[hsize:], dtype="<f4").reshape(n_ch, nx, ny).copy()
    grid = GridSpec((ox, oy), nx * res, ny * res, res, rxh)
    return EncodedGeometry(channels, grid)
