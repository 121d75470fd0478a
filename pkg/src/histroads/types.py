"""Georeferenced raster and road-network data model.

Everything here is treated as immutable once constructed. Rasters hold their
pixels as a ``(bands, height, width)`` numpy array; geometry is kept in map
coordinates (meters).
"""
from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from typing import Dict, Iterator, Mapping, Optional, Tuple

import numpy as np

DEFAULT_PIXEL_SIZE = 1.25
N_CLASSES = 5
N_PROB_BANDS = N_CLASSES + 1
NO_ROAD_BAND = N_CLASSES
PROB_SUM_TOL = 1e-5


class RasterError(ValueError):
    """Raised when raster contents violate their declared semantics."""


class Semantics(str, enum.Enum):
    GRAY = "gray"
    RGB = "rgb"
    BINARY_MASK = "binary-mask"
    CLASS_LABEL = "class-label"
    PROBABILITY = "probability"


class RoadClass(enum.IntEnum):
    WALKING_PATH = 1
    DIRT_ROAD = 2
    DRIVEWAY = 3
    REINFORCED_3_5M = 4
    REINFORCED_OVER_5M = 5


@dataclass(frozen=True)
class GeoTransform:
    """Axis-aligned pixel grid anchored at the top-left corner of pixel (0, 0)."""

    origin_x: float
    origin_y: float
    pixel_size: float = DEFAULT_PIXEL_SIZE

    def __post_init__(self):
        if not self.pixel_size > 0:
            raise ValueError(f"pixel_size must be positive, got {self.pixel_size}")

    def pixel_center(self, col, row):
        """Map coordinates of pixel centers (works on scalars or arrays)."""
        x = self.origin_x + (np.asarray(col) + 0.5) * self.pixel_size
        y = self.origin_y - (np.asarray(row) + 0.5) * self.pixel_size
        return x, y

    def pixel_of(self, x, y):
        """Index (col, row) of the pixel containing a map point."""
        col = np.floor((np.asarray(x) - self.origin_x) / self.pixel_size).astype(np.int64)
        row = np.floor((self.origin_y - np.asarray(y)) / self.pixel_size).astype(np.int64)
        return col, row

    def to_pixel_space(self, xy: np.ndarray) -> np.ndarray:
        """Continuous (col, row) coordinates where pixel centers fall on integers."""
        xy = np.asarray(xy, dtype=np.float64)
        u = (xy[..., 0] - self.origin_x) / self.pixel_size - 0.5
        v = (self.origin_y - xy[..., 1]) / self.pixel_size - 0.5
        return np.stack([u, v], axis=-1)

    def shifted(self, cols: int, rows: int) -> "GeoTransform":
        """Transform of a window whose top-left pixel is (cols, rows) here."""
        return GeoTransform(
            self.origin_x + cols * self.pixel_size,
            self.origin_y - rows * self.pixel_size,
            self.pixel_size,
        )


_BAND_COUNTS = {
    Semantics.GRAY: 1,
    Semantics.RGB: 3,
    Semantics.BINARY_MASK: 1,
    Semantics.CLASS_LABEL: 1,
    Semantics.PROBABILITY: None,
}


@dataclass(frozen=True, eq=False)
class GeoRaster:
    data: np.ndarray
    transform: GeoTransform
    semantics: Semantics = Semantics.GRAY

    def __post_init__(self):
        data = self.data
        if data.ndim == 2:
            data = data[np.newaxis]
            object.__setattr__(self, "data", data)
        if data.ndim != 3:
            raise RasterError(f"expected (bands, height, width) array, got shape {data.shape}")
        nb, h, w = data.shape
        if h <= 0 or w <= 0:
            raise RasterError("raster must have positive width and height")
        semantics = Semantics(self.semantics)
        object.__setattr__(self, "semantics", semantics)
        expected = _BAND_COUNTS[semantics]
        if expected is not None and nb != expected:
            raise RasterError(f"{semantics.value} raster needs {expected} band(s), got {nb}")
        if semantics is Semantics.BINARY_MASK:
            if data.dtype != np.uint8 or data.max(initial=0) > 1:
                raise RasterError("binary-mask band must be uint8 with values in {0, 1}")
        elif semantics is Semantics.CLASS_LABEL:
            if data.dtype != np.uint8 or data.max(initial=0) > N_CLASSES:
                raise RasterError("class-label band must be uint8 with values in 0..5")
        elif semantics in (Semantics.GRAY, Semantics.RGB):
            if data.dtype != np.uint8:
                raise RasterError(f"{semantics.value} raster must be uint8")

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def n_bands(self) -> int:
        return self.data.shape[0]

    @property
    def band(self) -> np.ndarray:
        """The single band of a one-band raster."""
        if self.n_bands != 1:
            raise RasterError("raster has more than one band")
        return self.data[0]

    def same_grid(self, other: "GeoRaster") -> bool:
        return (self.width, self.height) == (other.width, other.height) and self.transform == other.transform

    @classmethod
    def mask(cls, array: np.ndarray, transform: GeoTransform) -> "GeoRaster":
        return cls(np.asarray(array).astype(np.uint8), transform, Semantics.BINARY_MASK)


class ProbabilityField(GeoRaster):
    """Six float32 bands (class 1..5, no-road) summing to one per pixel."""

    def __init__(self, data: np.ndarray, transform: GeoTransform, validate: bool = True):
        data = np.asarray(data)
        if data.ndim != 3 or data.shape[0] != N_PROB_BANDS:
            raise RasterError(f"probability field needs {N_PROB_BANDS} bands, got shape {data.shape}")
        if data.dtype != np.float32:
            data = data.astype(np.float32)
        super().__init__(data, transform, Semantics.PROBABILITY)
        if validate:
            bad = validate_probabilities(data, PROB_SUM_TOL)
            if bad is not None:
                raise RasterError(bad)

    @property
    def class_bands(self) -> np.ndarray:
        return self.data[:N_CLASSES]

    @property
    def no_road(self) -> np.ndarray:
        return self.data[NO_ROAD_BAND]


def validate_probabilities(data: np.ndarray, tol: float) -> Optional[str]:
    """Return a message naming the first offending pixel, or None if valid."""
    if np.isnan(data).any():
        b, r, c = np.argwhere(np.isnan(data))[0]
        return f"NaN probability at pixel (row={r}, col={c}) band {b}"
    if data.min(initial=0.0) < 0.0 or data.max(initial=0.0) > 1.0:
        b, r, c = np.argwhere((data < 0) | (data > 1))[0]
        return f"probability {data[b, r, c]} outside [0, 1] at pixel (row={r}, col={c}) band {b}"
    sums = data.sum(axis=0, dtype=np.float64)
    off = np.abs(sums - 1.0) > tol
    if off.any():
        r, c = np.argwhere(off)[0]
        return f"band sum {sums[r, c]:.6f} != 1 at pixel (row={r}, col={c})"
    return None


class GeometryError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Polyline:
    coords: np.ndarray

    def __post_init__(self):
        xy = np.array(self.coords, dtype=np.float64)
        if xy.ndim != 2 or xy.shape[1] != 2 or len(xy) < 2:
            raise GeometryError("polyline needs at least two (x, y) vertices")
        if np.any(np.all(xy[1:] == xy[:-1], axis=1)):
            raise GeometryError("polyline has consecutive duplicate vertices")
        xy.setflags(write=False)
        object.__setattr__(self, "coords", xy)

    def __len__(self) -> int:
        return len(self.coords)

    @property
    def edge_lengths(self) -> np.ndarray:
        return np.hypot(*np.diff(self.coords, axis=0).T)

    @property
    def length(self) -> float:
        return float(self.edge_lengths.sum())

    @property
    def start(self) -> Tuple[float, float]:
        return tuple(self.coords[0])

    @property
    def end(self) -> Tuple[float, float]:
        return tuple(self.coords[-1])

    @property
    def is_closed(self) -> bool:
        return bool(np.all(self.coords[0] == self.coords[-1]))

    def reversed(self) -> "Polyline":
        return Polyline(self.coords[::-1])


@dataclass(frozen=True, eq=False)
class Segment:
    line: Polyline
    start_node: int
    end_node: int


@dataclass(frozen=True, eq=False)
class RoadNetwork:
    nodes: Mapping[int, Tuple[float, float]] = field(default_factory=dict)
    segments: Mapping[str, Segment] = field(default_factory=dict)

    def __post_init__(self):
        for sid, seg in self.segments.items():
            for end, nid in ((seg.line.start, seg.start_node), (seg.line.end, seg.end_node)):
                if nid not in self.nodes:
                    raise GeometryError(f"segment {sid} references unknown node {nid}")
                if math.dist(end, self.nodes[nid]) > 1e-6:
                    raise GeometryError(f"segment {sid} endpoint does not coincide with node {nid}")

    def __len__(self) -> int:
        return len(self.segments)

    def degree(self) -> Dict[int, int]:
        deg = {nid: 0 for nid in self.nodes}
        for seg in self.segments.values():
            deg[seg.start_node] += 1
            deg[seg.end_node] += 1
        return deg

    def lines(self) -> Iterator[Tuple[str, Polyline]]:
        for sid in sorted(self.segments, key=natural_key):
            yield sid, self.segments[sid].line

    @property
    def total_length(self) -> float:
        return sum(seg.line.length for seg in self.segments.values())

    @classmethod
    def from_polylines(cls, lines: Mapping[str, Polyline], decimals: int = 9) -> "RoadNetwork":
        """Build node topology from coordinate-equal endpoints."""
        nodes: Dict[int, Tuple[float, float]] = {}
        index: Dict[Tuple[float, float], int] = {}
        segments = {}

        def node_for(pt):
            key = (round(pt[0], decimals), round(pt[1], decimals))
            if key not in index:
                index[key] = len(nodes)
                nodes[index[key]] = (float(pt[0]), float(pt[1]))
            return index[key]

        for sid in sorted(lines, key=natural_key):
            line = lines[sid]
            segments[sid] = Segment(line, node_for(line.start), node_for(line.end))
        return cls(nodes, segments)

    def subset(self, keep) -> "RoadNetwork":
        keep = set(keep)
        return RoadNetwork.from_polylines({s: g.line for s, g in self.segments.items() if s in keep})


@dataclass(frozen=True, eq=False)
class Section:
    line: Polyline
    road_class: int
    parent_id: str
    mean_probs: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if int(self.road_class) not in range(1, N_CLASSES + 1):
            raise GeometryError(f"road class must be in 1..5, got {self.road_class}")
        object.__setattr__(self, "road_class", int(self.road_class))


@dataclass(frozen=True, eq=False)
class ClassifiedNetwork:
    sections: Mapping[str, Section] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.sections)

    def items(self):
        for sid in sorted(self.sections, key=natural_key):
            yield sid, self.sections[sid]

    def by_class(self) -> Dict[int, list]:
        out: Dict[int, list] = {c: [] for c in range(1, N_CLASSES + 1)}
        for _, sec in self.items():
            out[sec.road_class].append(sec.line)
        return out

    @classmethod
    def from_assignment(cls, network: RoadNetwork, assignment: Mapping[str, int]) -> "ClassifiedNetwork":
        """One section per segment carrying its assigned class (ground-truth form)."""
        return cls({sid: Section(seg.line, assignment[sid], sid) for sid, seg in network.segments.items()})


def natural_key(s: str):
    """Sort key putting 's2' before 's10'."""
    return [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", str(s))]
