"""Seeded synthetic fixtures: base sheets, random road networks, label noise."""
from __future__ import annotations

import math
from typing import Dict, List, Tuple

import numpy as np
from shapely import LineString
from shapely.strtree import STRtree

from .geometry import cumulative_lengths, interpolate, substring
from .types import N_CLASSES, GeoRaster, GeoTransform, Polyline, RoadNetwork, Semantics

SHEET_ORIGIN = (600000.0, 205000.0)


def sheet_transform(pixel_size: float = 1.25, origin=SHEET_ORIGIN) -> GeoTransform:
    return GeoTransform(origin[0], origin[1], pixel_size)


def synthetic_base(width: int, height: int, transform: GeoTransform, seed: int = 0,
                   tone=(240, 228, 200), noise: float = 6.0, n_contours: int = 12) -> GeoRaster:
    """Cream-toned RGB sheet with grain and a few brown contour-like curves."""
    rng = np.random.default_rng(seed)
    img = np.empty((3, height, width), dtype=np.float32)
    grain = rng.normal(0.0, noise, size=(height, width)).astype(np.float32)
    for b in range(3):
        img[b] = tone[b] + grain
    yy = np.arange(height, dtype=np.float32)[:, None]
    xx = np.arange(width, dtype=np.float32)[None, :]
    for _ in range(n_contours):
        y0 = rng.uniform(0, height)
        amp = rng.uniform(10, 80)
        freq = rng.uniform(0.002, 0.01)
        ph = rng.uniform(0, 2 * math.pi)
        curve = y0 + amp * np.sin(freq * xx + ph)
        on = np.abs(yy - curve) < 0.6
        for b, col in enumerate((150, 110, 70)):
            img[b][on] = col
    return GeoRaster(np.clip(np.rint(img), 0, 255).astype(np.uint8), transform, Semantics.RGB)


def _wander(rng, start, heading, length, step=120.0, jitter_deg=8.0) -> np.ndarray:
    n = max(1, math.ceil(length / step))
    seg = length / n
    pts = [np.asarray(start, dtype=np.float64)]
    h = heading
    for _ in range(n):
        pts.append(pts[-1] + seg * np.array([math.cos(h), math.sin(h)]))
        h += math.radians(rng.uniform(-jitter_deg, jitter_deg))
    return np.asarray(pts)


def _axis_angle_ok(coords: np.ndarray, min_axis_angle: float) -> bool:
    if min_axis_angle <= 0:
        return True
    d = np.diff(coords, axis=0)
    ang = np.degrees(np.arctan2(np.abs(d[:, 1]), np.abs(d[:, 0])))
    return bool(np.all((ang >= min_axis_angle) & (ang <= 90.0 - min_axis_angle)))


def random_network(
    width_m: float,
    height_m: float,
    origin: Tuple[float, float] = SHEET_ORIGIN,
    n_segments: int = 60,
    length_range: Tuple[float, float] = (100.0, 1000.0),
    min_separation: float = 30.0,
    branch_fraction: float = 0.3,
    margin: float = 40.0,
    min_axis_angle: float = 0.0,
    seed: int = 0,
    max_tries: int = 20000,
) -> RoadNetwork:
    """Random gently curving roads that never come closer than ``min_separation``.

    A share of the roads branch off an existing road at a T-junction (the host
    is split there so the network stays topological). Every resulting segment
    length lies in ``length_range``. ``origin`` is the top-left map corner.
    """
    rng = np.random.default_rng(seed)
    lo_len, hi_len = length_range
    x0, y1 = origin
    x1, y0 = x0 + width_m, y1 - height_m
    box = (x0 + margin, y0 + margin, x1 - margin, y1 - margin)
    lines: List[np.ndarray] = []
    tries = 0

    def inside(c):
        return bool(np.all((c[:, 0] >= box[0]) & (c[:, 0] <= box[2]) & (c[:, 1] >= box[1]) & (c[:, 1] <= box[3])))

    while len(lines) < n_segments and tries < max_tries:
        tries += 1
        length = rng.uniform(lo_len, hi_len)
        host = None
        if lines and rng.random() < branch_fraction:
            hosts = [i for i, c in enumerate(lines) if cumulative_lengths(c)[-1] >= 2 * lo_len]
            if not hosts:
                continue
            host = hosts[int(rng.integers(len(hosts)))]
            hc = lines[host]
            hcum = cumulative_lengths(hc)
            s = rng.uniform(lo_len, hcum[-1] - lo_len)
            start = interpolate(hc, hcum, s)
            k = min(int(np.searchsorted(hcum, s, side="right")) - 1, len(hc) - 2)
            tang = hc[k + 1] - hc[k]
            base = math.atan2(tang[1], tang[0])
            heading = base + rng.choice([-1, 1]) * math.radians(rng.uniform(60, 120))
        else:
            start = rng.uniform(box[:2], box[2:])
            heading = rng.uniform(0, 2 * math.pi)
        cand = _wander(rng, start, heading, length)
        if not inside(cand) or not _axis_angle_ok(cand, min_axis_angle):
            continue
        geom = LineString(cand)
        if host is None:
            probe = geom
        else:
            clear = min_separation * 2
            if length <= clear + 1:
                continue
            probe = LineString(substring(Polyline(cand), clear, length).coords)
        others = [LineString(c) for i, c in enumerate(lines) if i != host]
        if others:
            tree = STRtree(others)
            if len(tree.query(probe, predicate="dwithin", distance=min_separation)):
                continue
        if host is not None:
            if LineString(lines[host]).distance(probe) < min_separation:
                continue
            # split the host exactly at the shared junction point
            hp = Polyline(hc)
            a = substring(hp, 0.0, s).coords.copy()
            b = substring(hp, s, hcum[-1]).coords.copy()
            b[0] = a[-1]
            cand[0] = a[-1]
            lines[host] = a
            lines.append(b)
        lines.append(cand)
    if len(lines) < n_segments:
        raise RuntimeError(f"could only place {len(lines)} of {n_segments} roads")
    return RoadNetwork.from_polylines({f"s{i}": Polyline(c) for i, c in enumerate(lines)})


def flip_labels(labels: GeoRaster, p: float, seed: int = 0) -> GeoRaster:
    """Replace each pixel's label, with probability ``p``, by a different random label."""
    rng = np.random.default_rng(seed)
    lab = labels.band
    flip = rng.random(lab.shape) < p
    shift = rng.integers(1, N_CLASSES + 1, size=lab.shape, dtype=np.uint8)
    out = np.where(flip, (lab + shift) % (N_CLASSES + 1), lab).astype(np.uint8)
    return GeoRaster(out, labels.transform, Semantics.CLASS_LABEL)


def grid_network(extent: Tuple[float, float, float, float], spacing: float = 1000.0) -> Dict[str, Polyline]:
    """Horizontal and vertical grid lines at multiples of ``spacing`` (full extent)."""
    x0, y0, x1, y1 = extent
    out = {}
    for i, x in enumerate(np.arange(math.ceil(x0 / spacing), math.floor(x1 / spacing) + 1) * spacing):
        out[f"gx{i}"] = Polyline([[x, y0], [x, y1]])
    for i, y in enumerate(np.arange(math.ceil(y0 / spacing), math.floor(y1 / spacing) + 1) * spacing):
        out[f"gy{i}"] = Polyline([[x0, y], [x1, y]])
    return out
