"""Multipath finder and heatmap simulator.

Specular reflections come from the image method (mirror the transmitter
across wall planes, intersect the unfolded straight line with the geometry);
diffraction is first order over free-standing vertical wall edges and wall
top edges.  All receiver points of a heatmap are processed as numpy batches;
cells are independent, so results do not depend on block or thread schedule.
"""
from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import geometry, propagation
from .errors import DegenerateGeometry
from .scene import GridSpec, Scene, TxLocation

_EPS = 1e-9


@dataclass(frozen=True)
class TraceConfig:
    max_reflection_order: int = 2
    enable_diffraction: bool = True
    combine_mode: str = "noncoherent_power_sum"
    floor_dbm: float = -150.0

    def __post_init__(self):
        if not 0 <= self.max_reflection_order <= 3:
            raise ValueError(f"reflection order must be in [0, 3], got {self.max_reflection_order}")
        if self.combine_mode not in ("noncoherent_power_sum", "coherent_phasor_sum"):
            raise ValueError(f"unknown combine mode {self.combine_mode!r}")


@dataclass(frozen=True)
class PathRecord:
    mechanism: str  # direct | reflection | diffraction
    vertices: tuple[tuple[float, float, float], ...]
    total_length: float
    interaction_coefficients: tuple[complex, ...]
    power_dbm: float
    signature: tuple = ()  # wall indices (reflection) or edge key (diffraction)


@dataclass(frozen=True)
class PathSet:
    records: tuple[PathRecord, ...]
    tx: TxLocation
    rx: tuple[float, float, float]


@dataclass(frozen=True)
class Heatmap:
    grid: GridSpec
    values: np.ndarray  # (nx, ny) dBm
    floor_dbm: float
    tx: TxLocation

    def __post_init__(self):
        if self.values.shape != (self.grid.nx, self.grid.ny):
            raise ValueError(
                f"heatmap shape {self.values.shape} does not match grid "
                f"({self.grid.nx}x{self.grid.ny})"
            )


@dataclass
class _Edge:
    key: tuple  # (wall_index, kind) with kind in {"v0", "v1", "top"}
    point: np.ndarray  # reference point on edge (3,)
    axis: np.ndarray  # unit vector along edge (3,)
    length: float
    face: np.ndarray  # unit o-face direction, perpendicular to axis (3,)
    normal: np.ndarray  # axis x face (3,)
    wall: int


class _SceneGeo:
    """Precomputed arrays for one (scene, frequency) pair."""

    def __init__(self, scene: Scene, frequency: float):
        self.scene = scene
        self.frequency = frequency
        self.a, self.b, self.h = scene.wall_arrays()
        self.n_walls = len(scene.walls)
        self.eta = [
            propagation.complex_permittivity(w.material, frequency) for w in scene.walls
        ]
        d = self.b - self.a
        lengths = np.hypot(d[:, 0], d[:, 1]) if self.n_walls else np.zeros(0)
        with np.errstate(invalid="ignore"):
            self.dir2d = d / lengths[:, None] if self.n_walls else d
        # outward-agnostic horizontal normals
        self.normal2d = np.column_stack([-self.dir2d[:, 1], self.dir2d[:, 0]]) if self.n_walls else d
        self.edges = self._build_edges()

    def _free_vertical_endpoint(self, idx: int, p: np.ndarray) -> bool:
        """A wall endpoint spawns a vertical edge only when no other wall
        touches it (corners and T-junctions are not thin-screen edges)."""
        others = [j for j in range(self.n_walls) if j != idx]
        if not others:
            return True
        dist = geometry.point_segment_distance(
            p[None, :], self.a[others], self.b[others]
        )[0]
        return bool((dist > 1e-6).all())

    def _build_edges(self) -> list[_Edge]:
        edges = []
        up = np.array([0.0, 0.0, 1.0])
        for i in range(self.n_walls):
            pa, pb = self.a[i], self.b[i]
            h = self.h[i]
            along = np.append(self.dir2d[i], 0.0)
            for kind, p2, face2 in (("v0", pa, self.dir2d[i]), ("v1", pb, -self.dir2d[i])):
                if not self._free_vertical_endpoint(i, p2):
                    continue
                face = np.append(face2, 0.0)
                axis = up
                edges.append(
                    _Edge((i, kind), np.append(p2, 0.0), axis, h, face, np.cross(axis, face), i)
                )
            # top edge: axis along the wall, faces point downward
            face = np.array([0.0, 0.0, -1.0])
            start = np.array([pa[0], pa[1], h])
            length = float(np.hypot(*(pb - pa)))
            edges.append(
                _Edge((i, "top"), start, along, length, face, np.cross(along, face), i)
            )
        return edges


def _path_power_dbm(tx_power, frequency, lengths, coeff_mag):
    """Per-path received power: Pt - FSPL(total length) + 20log10(|coeffs|)."""
    mag = np.maximum(coeff_mag, 1e-30)
    return tx_power - propagation.fspl(frequency, lengths) + 20.0 * np.log10(mag)


def _blocked(geo: _SceneGeo, p0, p1, z0, z1, exclude_walls=None):
    if geo.n_walls == 0:
        return np.zeros(np.asarray(p0).shape[0], dtype=bool)
    exclude = None
    if exclude_walls:
        exclude = np.zeros((np.asarray(p0).shape[0], geo.n_walls), dtype=bool)
        for w in exclude_walls:
            exclude[:, w] = True
    return geometry.blocked_mask(p0, p1, z0, z1, geo.a, geo.b, geo.h, exclude=exclude)


def _reflection_sequences(n_walls: int, max_order: int):
    for order in range(1, max_order + 1):
        for seq in itertools.product(range(n_walls), repeat=order):
            if any(seq[i] == seq[i + 1] for i in range(order - 1)):
                continue
            yield seq


def _trace_reflection_seq(geo: _SceneGeo, tx3, pts, z_rx, seq, collect):
    """One image-method wall sequence against a batch of receivers.

    Returns (valid_mask, lengths, coeff (complex product), bounce points) with
    bounce info only when collect is set.
    """
    n = pts.shape[0]
    # forward images of the transmitter
    images = [tx3[:2]]
    for w in seq:
        images.append(geometry.mirror_point(images[-1], geo.a[w], geo.b[w]))

    z_tx = tx3[2]
    dz = z_rx - z_tx
    final_img = images[-1]
    horiz = np.hypot(*(pts - final_img).T)
    total_len = np.sqrt(horiz**2 + dz**2)
    ok = total_len > _EPS

    # backtrace bounce points from the receiver toward the source image chain
    cur = pts.copy()
    cur_t = np.ones(n)  # fraction of the unfolded path remaining (1 at rx)
    bounce_pts = []
    bounce_ts = []
    for depth in range(len(seq) - 1, -1, -1):
        w = seq[depth]
        aim = images[depth + 1]
        t, u, valid = geometry.seg_seg_params(
            cur, np.broadcast_to(aim, cur.shape), geo.a[[w]], geo.b[[w]]
        )
        t = t[:, 0]
        u = u[:, 0]
        ok &= valid[:, 0] & (t > _EPS) & (t < 1.0 - _EPS) & (u > -_EPS) & (u < 1.0 + _EPS)
        t_safe = np.where(ok, t, 0.5)
        hit = cur + t_safe[:, None] * (aim - cur)
        # fraction of the unfolded horizontal run remaining at this bounce
        seg_frac = np.hypot(*(hit - cur).T) / np.maximum(horiz, _EPS)
        new_t = cur_t - seg_frac
        bounce_pts.append(hit)
        bounce_ts.append(new_t)
        cur = hit
        cur_t = new_t
        ok &= cur_t > -_EPS

    # z at each bounce: linear along the unfolded path from rx (frac 1) to tx (frac 0)
    zs = [z_tx + tfrac * (z_rx - z_tx) for tfrac in bounce_ts]
    for w, z in zip(reversed(seq), zs):
        ok &= (z > _EPS) & (z < geo.h[w] - _EPS)

    if not ok.any():
        return ok, total_len, np.zeros(n, dtype=complex), None

    # occlusion: legs rx->b1, b1->b2, ..., bk->tx (backtraced order)
    chain_pts = [pts] + bounce_pts + [np.broadcast_to(tx3[:2], (n, 2)).copy()]
    chain_z = [np.full(n, z_rx)] + zs + [np.full(n, z_tx)]
    leg_walls = [None] + list(reversed(seq)) + [None]
    for i in range(len(chain_pts) - 1):
        excl = {w for w in (leg_walls[i], leg_walls[i + 1]) if w is not None}
        idx = np.flatnonzero(ok)
        if idx.size == 0:
            break
        blocked = _blocked(
            geo,
            chain_pts[i][idx],
            chain_pts[i + 1][idx],
            chain_z[i][idx],
            chain_z[i + 1][idx],
            exclude_walls=excl,
        )
        ok[idx[blocked]] = False

    # Fresnel coefficient per bounce (incidence angle from the wall normal)
    coeff = np.ones(n, dtype=complex)
    for i, w in enumerate(reversed(seq)):
        p_in = chain_pts[i]  # point on the rx side of the bounce
        hit = chain_pts[i + 1]
        d2 = hit - p_in
        d3 = np.column_stack([d2, chain_z[i + 1] - chain_z[i]])
        norm = np.linalg.norm(d3, axis=1)
        norm = np.maximum(norm, _EPS)
        cos_t = np.abs(d3[:, 0] * geo.normal2d[w, 0] + d3[:, 1] * geo.normal2d[w, 1]) / norm
        theta = np.arccos(np.clip(cos_t, 0.0, 1.0 - 1e-12))
        theta = np.minimum(theta, np.pi / 2 - 1e-9)
        coeff *= propagation.fresnel_reflection(
            geo.eta[w], np.where(ok, theta, 0.0), "TE"
        )

    bounce_info = None
    if collect:
        bounce_info = (list(reversed(bounce_pts)), list(reversed(zs)))
    return ok, total_len, coeff, bounce_info


def _trace_diffraction_edge(geo: _SceneGeo, tx3, pts, z_rx, edge: _Edge):
    """First-order diffraction over one edge for a batch of receivers.

    Returns (valid, s_tx, s_rx, coeff, diffraction points (n, 3))."""
    n = pts.shape[0]
    rx3 = np.column_stack([pts, np.full(n, z_rx)])
    e0, u = edge.point, edge.axis

    s_t = float((tx3 - e0) @ u)
    perp_t = tx3 - (e0 + s_t * u)
    rho_t = float(np.linalg.norm(perp_t))

    s_r = (rx3 - e0) @ u
    perp_r = rx3 - (e0 + s_r[:, None] * u)
    rho_r = np.linalg.norm(perp_r, axis=1)

    ok = (rho_t > 1e-6) & (rho_r > 1e-6)
    denom = np.maximum(rho_t + rho_r, _EPS)
    s_star = (rho_r * s_t + rho_t * s_r) / denom
    ok &= (s_star >= -_EPS) & (s_star <= edge.length + _EPS)
    if not ok.any():
        return ok, None, None, None, None

    dp = e0 + np.clip(s_star, 0.0, edge.length)[:, None] * u  # (n, 3)
    leg_t = tx3 - dp
    leg_r = rx3 - dp
    s_i = np.linalg.norm(leg_t, axis=1)
    s_d = np.linalg.norm(leg_r, axis=1)
    ok &= (s_i > _EPS) & (s_d > _EPS)

    idx = np.flatnonzero(ok)
    if idx.size:
        blocked = _blocked(
            geo, np.broadcast_to(tx3[:2], (idx.size, 2)), dp[idx, :2],
            tx3[2], dp[idx, 2], exclude_walls={edge.wall},
        )
        ok[idx[blocked]] = False
    idx = np.flatnonzero(ok)
    if idx.size:
        blocked = _blocked(
            geo, dp[idx, :2], pts[idx], dp[idx, 2], z_rx, exclude_walls={edge.wall},
        )
        ok[idx[blocked]] = False
    if not ok.any():
        return ok, None, None, None, None

    # wedge-frame angles: phi measured from the o-face around the edge axis
    def _phi(vec):
        x = vec @ edge.face
        y = vec @ edge.normal
        ang = np.arctan2(y, x)
        return np.mod(ang, 2.0 * np.pi)

    phi_inc = _phi(perp_t / max(rho_t, _EPS))
    phi_dif = _phi(perp_r / np.maximum(rho_r, _EPS)[:, None])
    sin_b = np.sqrt(np.clip(1.0 - ((tx3 - dp) @ u / np.maximum(s_i, _EPS)) ** 2, 1e-12, 1.0))
    beta0 = np.arcsin(sin_b)

    eta = geo.eta[edge.wall]
    coeff = np.zeros(n, dtype=complex)
    sel = np.flatnonzero(ok)
    d_val = propagation.utd_diffraction(
        0.0,
        s_i[sel],
        s_d[sel],
        np.full(sel.size, phi_inc),
        phi_dif[sel],
        geo.frequency,
        eta_faces=(eta, eta),
        beta0=beta0[sel],
    )
    coeff[sel] = d_val * propagation.diffraction_spreading(s_i[sel], s_d[sel])
    return ok, s_i, s_d, coeff, dp


def _make_geo(scene: Scene, tx: TxLocation) -> _SceneGeo:
    return _SceneGeo(scene, tx.frequency)


def _combine(powers_dbm, lengths, coeffs, cfg: TraceConfig, frequency):
    """Combine per-path contributions for one receiver into dBm."""
    if len(powers_dbm) == 0:
        return cfg.floor_dbm
    p = np.asarray(powers_dbm, dtype=np.float64)
    if cfg.combine_mode == "noncoherent_power_sum":
        total = 10.0 * np.log10(np.sum(10.0 ** (p / 10.0)))
    else:
        lam = propagation.SPEED_OF_LIGHT / frequency
        amps = np.sqrt(10.0 ** (p / 10.0)).astype(complex)
        phases = np.exp(-2j * np.pi * np.asarray(lengths) / lam)
        units = np.asarray(
            [c / abs(c) if abs(c) > 0 else 1.0 for c in coeffs], dtype=complex
        )
        total_amp = np.sum(amps * phases * units)
        total = 10.0 * np.log10(max(abs(total_amp) ** 2, 1e-30))
    return float(max(total, cfg.floor_dbm))


def trace_paths(scene: Scene, tx: TxLocation, rx, cfg: TraceConfig | None = None) -> PathSet:
    """All qualifying paths from tx to a single receiver point."""
    cfg = cfg or TraceConfig()
    tx3 = np.asarray(tx.position, dtype=np.float64)
    rx3 = np.asarray(rx, dtype=np.float64)
    if np.linalg.norm(tx3 - rx3) < 1e-6:
        raise DegenerateGeometry(f"tx and rx coincide at {tuple(rx3)}")
    geo = _make_geo(scene, tx)
    pts = rx3[None, :2]
    z_rx = float(rx3[2])
    records = []

    # direct
    if not _blocked(geo, np.broadcast_to(tx3[:2], (1, 2)), pts, tx3[2], z_rx)[0]:
        length = float(np.linalg.norm(rx3 - tx3))
        p = float(_path_power_dbm(tx.power, tx.frequency, length, 1.0))
        records.append(
            PathRecord("direct", (tuple(tx3), tuple(rx3)), length, (), p, ())
        )

    # reflections
    for seq in _reflection_sequences(geo.n_walls, cfg.max_reflection_order):
        ok, total_len, coeff, binfo = _trace_reflection_seq(geo, tx3, pts, z_rx, seq, True)
        if not ok[0]:
            continue
        length = float(total_len[0])
        c = complex(coeff[0])
        p = float(_path_power_dbm(tx.power, tx.frequency, length, abs(c)))
        bpts, bzs = binfo
        verts = [tuple(tx3)]
        for bp, bz in zip(bpts, bzs):
            verts.append((float(bp[0, 0]), float(bp[0, 1]), float(bz[0])))
        verts.append(tuple(rx3))
        records.append(
            PathRecord("reflection", tuple(verts), length, (c,), p, tuple(seq))
        )

    # diffraction
    if cfg.enable_diffraction:
        for edge in geo.edges:
            ok, s_i, s_d, coeff, dp = _trace_diffraction_edge(geo, tx3, pts, z_rx, edge)
            if ok is None or not ok[0]:
                continue
            length = float(s_i[0] + s_d[0])
            c = complex(coeff[0])
            p = float(_path_power_dbm(tx.power, tx.frequency, length, abs(c)))
            verts = (tuple(tx3), tuple(dp[0]), tuple(rx3))
            records.append(
                PathRecord("diffraction", verts, length, (c,), p, edge.key)
            )

    order = {"direct": 0, "reflection": 1, "diffraction": 2}
    records.sort(key=lambda r: (order[r.mechanism], r.signature))
    return PathSet(tuple(records), tx, tuple(rx3))


def received_power(paths: PathSet, cfg: TraceConfig | None = None) -> float:
    """Combine a PathSet into a single received power in dBm."""
    cfg = cfg or TraceConfig()
    powers = [r.power_dbm for r in paths.records]
    lengths = [r.total_length for r in paths.records]
    coeffs = [np.prod(r.interaction_coefficients) if r.interaction_coefficients else 1.0
              for r in paths.records]
    return _combine(powers, lengths, coeffs, cfg, paths.tx.frequency)


def component_path_loss(scene, tx, rx, cfg: TraceConfig | None = None):
    """Per-mechanism path loss (dB): (direct, reflection, diffraction).

    Each entry is tx.power minus the noncoherent sum of that mechanism's path
    powers, or None when the mechanism contributes no path."""
    cfg = cfg or TraceConfig()
    paths = trace_paths(scene, tx, rx, cfg)
    out = []
    for mech in ("direct", "reflection", "diffraction"):
        ps = [r.power_dbm for r in paths.records if r.mechanism == mech]
        if not ps:
            out.append(None)
            continue
        total = 10.0 * np.log10(np.sum(10.0 ** (np.asarray(ps) / 10.0)))
        out.append(float(tx.power - total))
    return tuple(out)


def _batch_amplitudes(geo, tx, pts, z_rx, cfg, min_distance):
    """Per-mechanism linear power sums and phasor sums for a batch of cells."""
    n = pts.shape[0]
    tx3 = np.asarray(tx.position, dtype=np.float64)
    lam = propagation.SPEED_OF_LIGHT / tx.frequency
    lin = {m: np.zeros(n) for m in ("direct", "reflection", "diffraction")}
    amp = {m: np.zeros(n, dtype=complex) for m in ("direct", "reflection", "diffraction")}

    def _accumulate(mech, mask, lengths, coeff):
        if not mask.any():
            return
        idx = np.flatnonzero(mask)
        ln = np.asarray(lengths)[idx] if np.ndim(lengths) else np.full(idx.size, lengths)
        c = np.asarray(coeff)[idx] if np.ndim(coeff) else np.full(idx.size, coeff, dtype=complex)
        p = _path_power_dbm(tx.power, tx.frequency, ln, np.abs(c))
        lin[mech][idx] += 10.0 ** (p / 10.0)
        mag = np.abs(c)
        unit = np.where(mag > 0, c / np.maximum(mag, 1e-300), 1.0)
        amp[mech][idx] += np.sqrt(10.0 ** (p / 10.0)) * np.exp(-2j * np.pi * ln / lam) * unit

    # direct
    dvec = pts - tx3[:2]
    dist = np.sqrt(dvec[:, 0] ** 2 + dvec[:, 1] ** 2 + (z_rx - tx3[2]) ** 2)
    dist_c = np.maximum(dist, min_distance)
    visible = dist > _EPS
    idx = np.flatnonzero(visible)
    if idx.size:
        blocked = _blocked(
            geo, np.broadcast_to(tx3[:2], (idx.size, 2)), pts[idx], tx3[2], z_rx
        )
        visible[idx[blocked]] = False
    _accumulate("direct", visible, dist_c, np.ones(n, dtype=complex))

    for seq in _reflection_sequences(geo.n_walls, cfg.max_reflection_order):
        ok, total_len, coeff, _ = _trace_reflection_seq(geo, tx3, pts, z_rx, seq, False)
        _accumulate("reflection", ok, np.maximum(total_len, min_distance), coeff)

    if cfg.enable_diffraction:
        for edge in geo.edges:
            ok, s_i, s_d, coeff, _ = _trace_diffraction_edge(geo, tx3, pts, z_rx, edge)
            if s_i is None:
                continue
            _accumulate("diffraction", ok, np.maximum(s_i + s_d, min_distance), coeff)

    return lin, amp


def simulate_heatmap(
    scene: Scene,
    tx: TxLocation,
    grid: GridSpec,
    cfg: TraceConfig | None = None,
    threads: int = 1,
    block_rows: int = 32,
) -> Heatmap:
    """Received-power heatmap over all grid cell centers at receiver height.

    The transmitter's own cell clamps the direct distance to resolution/2.
    Results are independent of block size and thread count."""
    cfg = cfg or TraceConfig()
    xmin, ymin, xmax, ymax = scene.bounds
    gx0, gy0 = grid.origin
    if not (
        gx0 >= xmin - 1e-9
        and gy0 >= ymin - 1e-9
        and gx0 + grid.width <= xmax + 1e-9
        and gy0 + grid.depth <= ymax + 1e-9
    ):
        raise ValueError(f"grid {grid} extends outside scene bounds {scene.bounds}")

    geo = _make_geo(scene, tx)
    nx, ny = grid.nx, grid.ny
    centers = grid.cell_centers().reshape(nx, ny, 2)
    values = np.empty((nx, ny), dtype=np.float64)
    min_d = grid.resolution / 2.0

    def _run_block(i0):
        i1 = min(i0 + block_rows, nx)
        pts = centers[i0:i1].reshape(-1, 2)
        lin, amp = _batch_amplitudes(geo, tx, pts, grid.receiver_height, cfg, min_d)
        if cfg.combine_mode == "noncoherent_power_sum":
            total = lin["direct"] + lin["reflection"] + lin["diffraction"]
            with np.errstate(divide="ignore"):
                dbm = 10.0 * np.log10(total)
        else:
            total_amp = amp["direct"] + amp["reflection"] + amp["diffraction"]
            with np.errstate(divide="ignore"):
                dbm = 10.0 * np.log10(np.abs(total_amp) ** 2)
        values[i0:i1] = np.maximum(dbm, cfg.floor_dbm).reshape(i1 - i0, ny)

    starts = list(range(0, nx, block_rows))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(_run_block, starts))
    else:
        for i0 in starts:
            _run_block(i0)

    return Heatmap(grid, values, cfg.floor_dbm, tx)
