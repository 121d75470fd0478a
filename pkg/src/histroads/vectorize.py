"""Skeleton raster to topological road network.

Tracing emits one edge per pair of 8-adjacent skeleton pixels (with corner
diagonals suppressed), assembly dissolves degree-2 chains into polylines
between junctions/endpoints, and the generalization steps (Douglas-Peucker,
coordinate-grid removal) run per segment.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .geometry import point_segment_distance
from .morphology import has_2x2_block
from .types import GeoRaster, GeoTransform, Polyline, RasterError, RoadNetwork, Segment

DEFAULT_EPSILON = 1.9
DEFAULT_GRID_BUFFER = 3.75
DEFAULT_NET_TOLERANCE = 2.5
AXIS_RATIO = 10.0


@dataclass(frozen=True, eq=False)
class PixelEdges:
    """Undirected edges between skeleton pixels, as flat pixel indices (a < b)."""

    edges: np.ndarray
    shape: Tuple[int, int]
    transform: GeoTransform
    n_isolated: int = 0

    def __len__(self) -> int:
        return len(self.edges)

    def rowcol(self, idx):
        return np.divmod(idx, self.shape[1])


def trace_skeleton(skeleton: GeoRaster, check: bool = True) -> PixelEdges:
    """Link every pair of 8-adjacent foreground pixels.

    A diagonal link is dropped whenever the two pixels are also joined
    through a common 4-neighbour, which would otherwise close a triangle.
    """
    s = skeleton.band.astype(bool)
    if check and has_2x2_block(s):
        raise RasterError("input is not a one-pixel-wide skeleton (2x2 foreground block found)")
    h, w = s.shape
    p = np.pad(s, 1)
    core = p[1:-1, 1:-1]
    idx = np.arange(h * w).reshape(h, w)

    def nb(dr, dc):
        return p[1 + dr:1 + dr + h, 1 + dc:1 + dc + w]

    parts = []
    # east and south 4-links
    for dr, dc in ((0, 1), (1, 0)):
        m = core & nb(dr, dc)
        r, c = np.nonzero(m)
        parts.append(np.stack([idx[r, c], (r + dr) * w + (c + dc)], axis=1))
    # south-east diagonal: suppressed if east or south pixel set
    m = core & nb(1, 1) & ~nb(0, 1) & ~nb(1, 0)
    r, c = np.nonzero(m)
    parts.append(np.stack([idx[r, c], (r + 1) * w + (c + 1)], axis=1))
    # south-west diagonal: suppressed if west or south pixel set
    m = core & nb(1, -1) & ~nb(0, -1) & ~nb(1, 0)
    r, c = np.nonzero(m)
    parts.append(np.stack([idx[r, c], (r + 1) * w + (c - 1)], axis=1))
    edges = np.concatenate(parts).astype(np.int64) if parts else np.zeros((0, 2), np.int64)
    edges.sort(axis=1)
    edges = np.unique(edges, axis=0) if len(edges) else edges.reshape(0, 2)
    linked = np.zeros(h * w, dtype=bool)
    linked[edges.ravel()] = True
    n_isolated = int(np.count_nonzero(s.ravel() & ~linked))
    return PixelEdges(edges, (h, w), skeleton.transform, n_isolated)


def assemble_segments(pe: PixelEdges) -> RoadNetwork:
    """Dissolve degree-2 pixel chains into polylines between nodes.

    Nodes are pixels of degree != 2. A cycle without such a pixel becomes a
    closed polyline starting at its smallest (row, col) pixel.
    """
    edges = np.asarray(pe.edges, dtype=np.int64).reshape(-1, 2)
    if len(edges) == 0:
        return RoadNetwork({}, {})
    # canonical order makes the result independent of input edge order
    edges = np.unique(np.sort(edges, axis=1), axis=0)
    both = np.concatenate([edges, edges[:, ::-1]])
    order = np.lexsort((both[:, 1], both[:, 0]))
    both = both[order]
    verts, starts, deg = np.unique(both[:, 0], return_index=True, return_counts=True)
    pos = {int(v): (int(s), int(d)) for v, s, d in zip(verts, starts, deg)}
    nbrs = both[:, 1]

    def neighbours(v):
        s, d = pos[v]
        return nbrs[s:s + d]

    visited = set()
    node_ids: Dict[int, int] = {}
    node_px: List[int] = []

    def node_of(v):
        if v not in node_ids:
            node_ids[v] = len(node_px)
            node_px.append(v)
        return node_ids[v]

    chains: List[List[int]] = []

    def walk(start, nxt):
        chain = [start, nxt]
        visited.add((min(start, nxt), max(start, nxt)))
        prev, cur = start, nxt
        while pos[cur][1] == 2 and cur != start:
            a, b = neighbours(cur)
            step = int(b) if int(a) == prev else int(a)
            key = (min(cur, step), max(cur, step))
            if key in visited:
                break
            visited.add(key)
            chain.append(step)
            prev, cur = cur, step
        return chain

    for v in map(int, verts):
        if pos[v][1] == 2:
            continue
        for u in map(int, neighbours(v)):
            if (min(v, u), max(v, u)) in visited:
                continue
            chains.append(walk(v, u))
    # leftover edges belong to pure cycles
    for v in map(int, verts):
        for u in map(int, neighbours(v)):
            if (min(v, u), max(v, u)) in visited:
                continue
            # v is the smallest unvisited pixel of its cycle: verts are sorted
            first = int(min(neighbours(v)))
            chains.append(walk(v, first))

    h, w = pe.shape
    tr = pe.transform
    lines = {}
    ends = {}
    for chain in chains:
        arr = np.asarray(chain)
        r, c = np.divmod(arr, w)
        x, y = tr.pixel_center(c, r)
        ends[len(lines)] = (node_of(chain[0]), node_of(chain[-1]))
        lines[len(lines)] = Polyline(np.stack([x, y], axis=1))

    nodes = {}
    for nid, v in enumerate(node_px):
        r, c = divmod(v, w)
        x, y = tr.pixel_center(c, r)
        nodes[nid] = (float(x), float(y))
    segments = {f"s{k}": Segment(lines[k], *ends[k]) for k in range(len(lines))}
    return RoadNetwork(nodes, segments)


def vectorize_skeleton(skeleton: GeoRaster) -> Tuple[RoadNetwork, int]:
    pe = trace_skeleton(skeleton)
    return assemble_segments(pe), pe.n_isolated


# -- generalization --------------------------------------------------------


def douglas_peucker(coords: np.ndarray, epsilon: float) -> np.ndarray:
    """Indices of vertices kept by Douglas-Peucker (segment distance)."""
    pts = np.asarray(coords, dtype=np.float64)
    n = len(pts)
    keep = np.zeros(n, dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, n - 1)]
    while stack:
        i, j = stack.pop()
        if j - i < 2:
            continue
        d = point_segment_distance(pts[i + 1:j], pts[i], pts[j])
        k = int(np.argmax(d))
        if d[k] > epsilon:
            k += i + 1
            keep[k] = True
            stack.append((k, j))
            stack.append((i, k))
    return np.flatnonzero(keep)


def simplify_polyline(line: Polyline, epsilon: float = DEFAULT_EPSILON) -> Polyline:
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    idx = douglas_peucker(line.coords, epsilon)
    if len(idx) == len(line):
        return line
    return Polyline(line.coords[idx])


def simplify_network(network: RoadNetwork, epsilon: float = DEFAULT_EPSILON) -> RoadNetwork:
    segments = {
        sid: Segment(simplify_polyline(seg.line, epsilon), seg.start_node, seg.end_node)
        for sid, seg in network.segments.items()
    }
    return RoadNetwork(dict(network.nodes), segments)


# -- coordinate grid filtering ---------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    xs: Tuple[float, ...] = ()
    ys: Tuple[float, ...] = ()
    buffer: float = DEFAULT_GRID_BUFFER
    net_tolerance: float = DEFAULT_NET_TOLERANCE

    def __post_init__(self):
        for name in ("xs", "ys"):
            vals = tuple(float(v) for v in getattr(self, name))
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise ValueError(f"grid {name} must be strictly increasing")
            object.__setattr__(self, name, vals)
        if not self.buffer > 0:
            raise ValueError("grid buffer must be positive")
        if not (self.xs or self.ys):
            raise ValueError("grid spec needs at least one grid coordinate")

    @classmethod
    def regular(cls, x0: float, x1: float, y0: float, y1: float, spacing: float = 1000.0, **kw) -> "GridSpec":
        """Grid lines at every multiple of ``spacing`` within the extent."""
        xs = np.arange(math.ceil(x0 / spacing), math.floor(x1 / spacing) + 1) * spacing
        ys = np.arange(math.ceil(y0 / spacing), math.floor(y1 / spacing) + 1) * spacing
        return cls(tuple(xs), tuple(ys), **kw)


def _axis_test(along: np.ndarray, across: np.ndarray, grid_vals: Sequence[float], grid: GridSpec) -> bool:
    if not grid_vals:
        return False
    g = np.asarray(grid_vals)
    near = np.abs(across[:, None] - g[None, :]) <= grid.buffer
    if not near.all(axis=0).any():
        return False
    net_across = abs(float(np.sum(np.diff(across))))
    net_along = abs(float(np.sum(np.diff(along))))
    return net_across <= grid.net_tolerance and AXIS_RATIO * net_across < net_along


def is_grid_line(line: Polyline, grid: GridSpec) -> bool:
    x, y = line.coords[:, 0], line.coords[:, 1]
    return _axis_test(x, y, grid.ys, grid) or _axis_test(y, x, grid.xs, grid)


def filter_grid_lines(network: RoadNetwork, grid: GridSpec) -> Tuple[RoadNetwork, List[str]]:
    """Drop segments that look like horizontal/vertical coordinate grid lines.

    Returns the kept network (node ids preserved) and the removed segment ids.
    """
    removed = [sid for sid, line in network.lines() if is_grid_line(line, grid)]
    gone = set(removed)
    segments = {sid: seg for sid, seg in network.segments.items() if sid not in gone}
    used = {n for seg in segments.values() for n in (seg.start_node, seg.end_node)}
    nodes = {nid: xy for nid, xy in network.nodes.items() if nid in used}
    return RoadNetwork(nodes, segments), removed
