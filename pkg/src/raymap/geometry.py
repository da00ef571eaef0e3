"""Vectorized 2-D segment geometry kernels.

All batched functions take numpy arrays and broadcast a batch of query
segments/points against a fixed set of wall segments.  Walls are modeled by
their center-line segments; the vertical extent (0..height) is handled by the
callers interpolating z along the query segment.
"""
from __future__ import annotations

import numpy as np

PARALLEL_EPS = 1e-12


def seg_seg_params(p0, p1, q0, q1):
    """Intersection parameters for batches of segments.

    p0, p1: (n, 2) query segment endpoints; q0, q1: (m, 2) wall endpoints.
    Returns (t, u, valid) of shape (n, m): p0 + t*(p1-p0) == q0 + u*(q1-q0)
    where lines are non-parallel (valid); t/u are NaN when parallel.
    """
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    q0 = np.asarray(q0, dtype=np.float64)
    q1 = np.asarray(q1, dtype=np.float64)

    d = p1 - p0  # (n, 2)
    e = q1 - q0  # (m, 2)
    denom = d[:, None, 0] * e[None, :, 1] - d[:, None, 1] * e[None, :, 0]  # (n, m)
    valid = np.abs(denom) > PARALLEL_EPS
    denom_safe = np.where(valid, denom, 1.0)

    w = q0[None, :, :] - p0[:, None, :]  # (n, m, 2)
    t = (w[:, :, 0] * e[None, :, 1] - w[:, :, 1] * e[None, :, 0]) / denom_safe
    u = (w[:, :, 0] * d[:, None, 1] - w[:, :, 1] * d[:, None, 0]) / denom_safe
    t = np.where(valid, t, np.nan)
    u = np.where(valid, u, np.nan)
    return t, u, valid


def blocked_mask(p0, p1, z0, z1, wall_a, wall_b, wall_h, exclude=None, eps=1e-9):
    """True where the 3-D segment (p0,z0)->(p1,z1) is cut by some wall.

    p0, p1: (n, 2); z0, z1: scalars or (n,); walls: (m, 2)/(m,).
    exclude: optional (n, m) boolean, True to skip that wall for that query
    (used for the interaction walls of the path leg under test).
    A wall blocks when the 2-D crossing falls strictly inside both segments
    and the interpolated z at the crossing is below the wall height.
    """
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    n = p0.shape[0]
    m = np.asarray(wall_a).shape[0]
    if m == 0 or n == 0:
        return np.zeros(n, dtype=bool)

    t, u, valid = seg_seg_params(p0, p1, wall_a, wall_b)
    hit = valid & (t > eps) & (t < 1.0 - eps) & (u > -eps) & (u < 1.0 + eps)
    if exclude is not None:
        hit &= ~exclude

    z0 = np.broadcast_to(np.asarray(z0, dtype=np.float64), (n,))
    z1 = np.broadcast_to(np.asarray(z1, dtype=np.float64), (n,))
    z_at = z0[:, None] + np.where(hit, t, 0.0) * (z1 - z0)[:, None]
    hit &= z_at < np.asarray(wall_h)[None, :] - 1e-12
    return hit.any(axis=1)


def point_segment_distance(points, a, b):
    """Distance from each point (n, 2) to each segment a->b ((m, 2)); (n, m)."""
    points = np.asarray(points, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    ab = b - a  # (m, 2)
    ap = points[:, None, :] - a[None, :, :]  # (n, m, 2)
    ab_len2 = np.maximum((ab * ab).sum(axis=1), PARALLEL_EPS)  # (m,)
    s = np.clip((ap * ab[None, :, :]).sum(axis=2) / ab_len2[None, :], 0.0, 1.0)
    closest = a[None, :, :] + s[:, :, None] * ab[None, :, :]
    return np.hypot(*(points[:, None, :] - closest).transpose(2, 0, 1))


def mirror_point(point, a, b):
    """Reflect a 2-D point across the infinite line through a, b."""
    point = np.asarray(point, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    ab = b - a
    ab = ab / np.hypot(*ab)
    ap = point - a
    along = (ap @ ab) * ab
    perp = ap - along
    return point - 2.0 * perp


def segment_aabb_overlap(p0, p1, x0, y0, x1, y1):
    """Liang-Barsky test of one segment against batches of axis-aligned boxes.

    p0, p1: (2,); box bounds x0 <= x1, y0 <= y1 as arrays of shape (k,).
    Returns boolean (k,): segment intersects the closed box.
    """
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    d = p1 - p0
    tmin = np.zeros_like(np.asarray(x0, dtype=np.float64))
    tmax = np.ones_like(tmin)
    ok = np.ones_like(tmin, dtype=bool)

    for axis, (lo, hi) in enumerate(((x0, x1), (y0, y1))):
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        if abs(d[axis]) < PARALLEL_EPS:
            ok &= (p0[axis] >= lo) & (p0[axis] <= hi)
        else:
            t1 = (lo - p0[axis]) / d[axis]
            t2 = (hi - p0[axis]) / d[axis]
            tlo = np.minimum(t1, t2)
            thi = np.maximum(t1, t2)
            tmin = np.maximum(tmin, tlo)
            tmax = np.minimum(tmax, thi)
    ok &= tmin <= tmax + PARALLEL_EPS
    return ok
