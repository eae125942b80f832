"""Planar polyline/polygon primitives used by the boundary assembly.

Everything is plain numpy on (n, 2) arrays; no external geometry
dependency. Polygons are closed polylines (first row repeated last).
"""

from __future__ import annotations

import numpy as np


def polyline_lengths(poly: np.ndarray) -> np.ndarray:
    return np.linalg.norm(np.diff(poly, axis=0), axis=1)


def point_segment_distances(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distances from point p to each segment [a_i, b_i]."""
    ab = b - a
    ap = p - a
    denom = np.einsum("ij,ij->i", ab, ab)
    t = np.where(denom > 0, np.einsum("ij,ij->i", ap, ab) / np.where(denom > 0, denom, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.linalg.norm(p - proj, axis=1)


def point_polyline_distance(p: np.ndarray, poly: np.ndarray,
                            seg_mask: np.ndarray | None = None) -> float:
    """Min distance from p to a polyline; seg_mask selects usable segments."""
    a = poly[:-1]
    b = poly[1:]
    if seg_mask is not None:
        if not np.any(seg_mask):
            return np.inf
        a = a[seg_mask]
        b = b[seg_mask]
    return float(np.min(point_segment_distances(np.asarray(p, dtype=float), a, b)))


def points_in_polygon(points: np.ndarray, polygon: np.ndarray) -> np.ndarray:
    """Ray-casting membership for a batch of points (strictly inside test
    behaves like the even-odd rule; boundary points are resolved by the
    caller via distance checks)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    x = pts[:, 0][:, None]
    y = pts[:, 1][:, None]
    x0 = polygon[:-1, 0][None, :]
    y0 = polygon[:-1, 1][None, :]
    x1 = polygon[1:, 0][None, :]
    y1 = polygon[1:, 1][None, :]
    straddle = (y0 > y) != (y1 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_cross = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
    hits = straddle & (x_cross > x)
    inside = np.sum(hits, axis=1) % 2 == 1
    return inside if points.ndim > 1 else bool(inside[0])


def polygon_area(polygon: np.ndarray) -> float:
    """Absolute shoelace area of a closed polygon."""
    x = polygon[:, 0]
    y = polygon[:, 1]
    return float(abs(np.sum(x[:-1] * y[1:] - x[1:] * y[:-1])) / 2.0)


def signed_area(polygon: np.ndarray) -> float:
    x = polygon[:, 0]
    y = polygon[:, 1]
    return float(np.sum(x[:-1] * y[1:] - x[1:] * y[:-1]) / 2.0)


def densify(poly: np.ndarray, max_seg: float) -> np.ndarray:
    """Insert points so no segment exceeds max_seg."""
    out = [poly[:1]]
    for i in range(len(poly) - 1):
        a, b = poly[i], poly[i + 1]
        d = np.linalg.norm(b - a)
        n = max(1, int(np.ceil(d / max_seg)))
        ts = np.linspace(0.0, 1.0, n + 1)[1:]
        out.append(a + ts[:, None] * (b - a))
    return np.vstack(out)


def hausdorff_distance(a: np.ndarray, b: np.ndarray,
                       max_seg: float = 0.02) -> float:
    """Symmetric Hausdorff distance between two polylines (densified)."""
    pa = densify(np.asarray(a, dtype=float), max_seg)
    pb = densify(np.asarray(b, dtype=float), max_seg)

    def directed(p, q):
        worst = 0.0
        for chunk in np.array_split(p, max(1, len(p) // 512)):
            d = np.linalg.norm(chunk[:, None, :] - q[None, :, :], axis=2)
            worst = max(worst, float(d.min(axis=1).max()))
        return worst

    return max(directed(pa, pb), directed(pb, pa))


def clip_polyline_to_box(poly: np.ndarray, lo: np.ndarray,
                         hi: np.ndarray) -> list[np.ndarray]:
    """Portions of a polyline inside an axis box, with exact edge crossings.

    Returns a list of sub-polylines; crossing points are interpolated onto
    the box boundary so downstream graph nodes land exactly on it.
    """
    pts = np.asarray(poly, dtype=float)
    inside = np.all((pts >= lo) & (pts <= hi), axis=1)
    pieces: list[list[np.ndarray]] = []
    cur: list[np.ndarray] = []

    def crossing(p_in, p_out):
        """Clip the segment p_in -> p_out at the box wall (p_in inside)."""
        t_best = 1.0
        d = p_out - p_in
        for k in range(2):
            if d[k] > 0 and p_out[k] > hi[k]:
                t_best = min(t_best, (hi[k] - p_in[k]) / d[k])
            elif d[k] < 0 and p_out[k] < lo[k]:
                t_best = min(t_best, (lo[k] - p_in[k]) / d[k])
        return p_in + t_best * d

    for i, p in enumerate(pts):
        if inside[i]:
            if not cur and i > 0:
                cur.append(crossing(p, pts[i - 1]))
            cur.append(p)
        else:
            if cur:
                cur.append(crossing(cur[-1], p))
                if len(cur) >= 2:
                    pieces.append(cur)
                cur = []
    if len(cur) >= 2:
        pieces.append(cur)
    return [np.vstack(c) for c in pieces]


def segments_cross(p1, p2, q1, q2, eps: float = 1e-12) -> bool:
    """Proper intersection test of open segments (shared endpoints ignored)."""
    d1 = p2 - p1
    d2 = q2 - q1
    denom = d1[0] * d2[1] - d1[1] * d2[0]
    if abs(denom) < eps:
        return False
    r = q1 - p1
    t = (r[0] * d2[1] - r[1] * d2[0]) / denom
    u = (r[0] * d1[1] - r[1] * d1[0]) / denom
    return eps < t < 1 - eps and eps < u < 1 - eps


def is_simple(polygon: np.ndarray, decimate_to: int = 400) -> bool:
    """Approximate self-intersection check on a decimated copy."""
    poly = polygon
    if len(poly) > decimate_to:
        idx = np.unique(np.linspace(0, len(poly) - 1, decimate_to).astype(int))
        poly = poly[idx]
    n = len(poly) - 1
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if segments_cross(poly[i], poly[i + 1], poly[j], poly[j + 1]):
                return False
    return True
