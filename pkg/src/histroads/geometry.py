"""Polyline arc-length utilities and windowed pixel distance fields."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .types import GeoTransform, Polyline


def cumulative_lengths(coords: np.ndarray) -> np.ndarray:
    """Arc-length position of each vertex, starting at 0."""
    d = np.hypot(*np.diff(np.asarray(coords, dtype=np.float64), axis=0).T)
    return np.concatenate([[0.0], np.cumsum(d)])


def interpolate(coords: np.ndarray, cum: np.ndarray, s: float) -> np.ndarray:
    s = min(max(s, 0.0), cum[-1])
    k = int(np.searchsorted(cum, s, side="right")) - 1
    k = min(max(k, 0), len(coords) - 2)
    span = cum[k + 1] - cum[k]
    t = 0.0 if span == 0 else (s - cum[k]) / span
    return coords[k] + t * (coords[k + 1] - coords[k])


def substring(line: Polyline, start: float, end: float) -> Polyline:
    """Piece of ``line`` between two arc-length positions (start < end)."""
    coords = line.coords
    cum = cumulative_lengths(coords)
    total = cum[-1]
    start = min(max(start, 0.0), total)
    end = min(max(end, 0.0), total)
    if not end > start:
        raise ValueError(f"empty substring [{start}, {end}]")
    if start == 0.0 and end == total:
        return line
    inner = coords[(cum > start) & (cum < end)]
    first = coords[0] if start == 0.0 else interpolate(coords, cum, start)
    last = coords[-1] if end == total else interpolate(coords, cum, end)
    pts = np.vstack([first, inner, last])
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = np.any(pts[1:] != pts[:-1], axis=1)
    pts = pts[keep]
    if len(pts) < 2:
        raise ValueError(f"substring [{start}, {end}] collapses to a point")
    return Polyline(pts)


def split_at(line: Polyline, positions) -> list:
    """Cut a polyline at sorted interior arc-length positions."""
    bounds = [0.0, *positions, line.length]
    return [substring(line, a, b) for a, b in zip(bounds[:-1], bounds[1:])]


def point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Euclidean distance of points ``p`` (..., 2) to the segment a-b."""
    d = b - a
    dd = float(d @ d)
    rel = p - a
    if dd == 0.0:
        return np.hypot(rel[..., 0], rel[..., 1])
    t = np.clip((rel @ d) / dd, 0.0, 1.0)
    q = rel - t[..., None] * d
    return np.hypot(q[..., 0], q[..., 1])


@dataclass
class DistanceWindow:
    """Distances from pixel centers in a raster window to one polyline.

    ``arclen`` is the arc-length (pixel units) of the nearest point on the
    polyline and ``offset`` the signed perpendicular offset to the nearest
    edge (positive to the left of the direction of travel, in image space).
    """

    row0: int
    col0: int
    dist: np.ndarray
    arclen: np.ndarray
    offset: np.ndarray

    @property
    def slices(self) -> Tuple[slice, slice]:
        h, w = self.dist.shape
        return slice(self.row0, self.row0 + h), slice(self.col0, self.col0 + w)


def distance_window(
    coords_px: np.ndarray,
    shape: Tuple[int, int],
    radius: float,
    with_offsets: bool = False,
) -> Optional[DistanceWindow]:
    """Nearest-edge distance field around a polyline given in pixel space.

    Only pixels whose centers may lie within ``radius`` of the line are
    evaluated; everything else in the returned window is ``inf``. Returns
    None when the line's neighbourhood does not touch the raster.
    """
    pts = np.asarray(coords_px, dtype=np.float64)
    h, w = shape
    lo = np.floor(pts.min(axis=0) - radius).astype(int)
    hi = np.ceil(pts.max(axis=0) + radius).astype(int)
    c0, r0 = max(lo[0], 0), max(lo[1], 0)
    c1, r1 = min(hi[0], w - 1), min(hi[1], h - 1)
    if c0 > c1 or r0 > r1:
        return None
    wh, ww = r1 - r0 + 1, c1 - c0 + 1
    dist = np.full((wh, ww), np.inf)
    arclen = np.zeros((wh, ww))
    offset = np.zeros((wh, ww)) if with_offsets else None
    cum = cumulative_lengths(pts)
    for k in range(len(pts) - 1):
        a, b = pts[k], pts[k + 1]
        elo = np.floor(np.minimum(a, b) - radius).astype(int)
        ehi = np.ceil(np.maximum(a, b) + radius).astype(int)
        ec0, er0 = max(elo[0], c0), max(elo[1], r0)
        ec1, er1 = min(ehi[0], c1), min(ehi[1], r1)
        if ec0 > ec1 or er0 > er1:
            continue
        u = np.arange(ec0, ec1 + 1, dtype=np.float64)[None, :] - a[0]
        v = np.arange(er0, er1 + 1, dtype=np.float64)[:, None] - a[1]
        d = b - a
        dd = d[0] * d[0] + d[1] * d[1]
        t = np.clip((u * d[0] + v * d[1]) / dd, 0.0, 1.0)
        qx = u - t * d[0]
        qy = v - t * d[1]
        dk = np.hypot(qx, qy)
        sl = (slice(er0 - r0, er1 - r0 + 1), slice(ec0 - c0, ec1 - c0 + 1))
        better = dk < dist[sl]
        dist[sl] = np.where(better, dk, dist[sl])
        seglen = np.sqrt(dd)
        arclen[sl] = np.where(better, cum[k] + t * seglen, arclen[sl])
        if with_offsets:
            # image rows grow downward; flip so "left" matches map orientation
            side = -(d[0] * v - d[1] * u) / seglen
            offset[sl] = np.where(better, side, offset[sl])
    return DistanceWindow(r0, c0, dist, arclen, offset)


def line_to_pixels(line: Polyline, transform: GeoTransform) -> np.ndarray:
    return transform.to_pixel_space(line.coords)
