"""Synthetic map painting with class-specific road symbology.

Roads are first overpainted with a background-colored corridor (hiding
whatever was drawn there) and then stroked with the symbol of their assigned
class. Every randomized quantity comes from a per-segment generator derived
from ``(seed, segment id)`` so results are reproducible and independent of
the order in which segments are processed.
"""
from __future__ import annotations

import logging
import zlib
from dataclasses import dataclass, field, replace
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from .geometry import distance_window
from .types import (
    N_CLASSES,
    ClassifiedNetwork,
    GeoRaster,
    GeoTransform,
    RoadNetwork,
    Semantics,
    natural_key,
)

log = logging.getLogger(__name__)

RGB = Tuple[int, int, int]
DEFAULT_BACKGROUND: RGB = (247, 235, 205)
DEFAULT_INK: RGB = (35, 30, 25)
DEFAULT_OVERPAINT_WIDTH = 13
DEFAULT_LABEL_WIDTH = 13
DEFAULT_REGION_WIDTH = 10
SEGMENTATION_LABEL_WIDTH = 10


@dataclass(frozen=True)
class ClassSymbol:
    """How one road class is drawn.

    ``gap`` is the clear space between the two lines of a double-line symbol.
    ``dashed`` lists, per line, whether that line uses the dash pattern; for a
    single line only the first entry matters.
    """

    line_count: int = 1
    stroke_width: float = 1.0
    gap: float = 0.0
    dash: Tuple[float, ...] = ()
    dashed: Tuple[bool, ...] = (False, False)
    color: RGB = DEFAULT_INK
    width_jitter: float = 0.0
    gap_jitter: float = 0.0

    def __post_init__(self):
        if self.line_count not in (1, 2):
            raise ValueError("line_count must be 1 or 2")
        if self.dash and (len(self.dash) != 2 or min(self.dash) <= 0):
            raise ValueError("dash must be an (on, off) pair of positive lengths")
        if self.stroke_width <= 0:
            raise ValueError("stroke_width must be positive")
        object.__setattr__(self, "dash", tuple(float(d) for d in self.dash))
        object.__setattr__(self, "dashed", tuple(bool(d) for d in self.dashed))
        object.__setattr__(self, "color", tuple(int(c) for c in self.color))

    @property
    def max_width(self) -> float:
        """Widest rendered extent in pixels across the randomization range."""
        w = self.stroke_width + self.width_jitter
        if self.line_count == 1:
            return w
        return 2 * w + self.gap + self.gap_jitter

    @property
    def dash_period(self) -> float:
        return sum(self.dash) if self.dash else 0.0


def default_symbols() -> Tuple[ClassSymbol, ...]:
    # estimated from the published symbol key; tune visually if needed
    return (
        ClassSymbol(1, 1.0, 0.0, (6.0, 4.0), (True, False)),
        ClassSymbol(1, 1.0, 0.0),
        ClassSymbol(2, 1.0, 3.0, (6.0, 4.0), (True, False), gap_jitter=1.0),
        ClassSymbol(2, 1.0, 4.0, gap_jitter=1.0),
        ClassSymbol(2, 1.0, 6.0, gap_jitter=1.0),
    )


@dataclass(frozen=True)
class SymbologySpec:
    symbols: Tuple[ClassSymbol, ...] = field(default_factory=default_symbols)
    background: RGB = DEFAULT_BACKGROUND
    overpaint_width: float = DEFAULT_OVERPAINT_WIDTH

    def __post_init__(self):
        if len(self.symbols) != N_CLASSES:
            raise ValueError(f"symbology needs exactly {N_CLASSES} class symbols")
        widest = max(s.max_width for s in self.symbols)
        if self.overpaint_width < widest:
            raise ValueError(f"overpaint_width {self.overpaint_width} is narrower than the widest symbol ({widest})")
        object.__setattr__(self, "background", tuple(int(c) for c in self.background))

    def symbol(self, road_class: int) -> ClassSymbol:
        return self.symbols[road_class - 1]

    def permuted(self, order: Sequence[int]) -> "SymbologySpec":
        """Symbology whose class k uses the symbol of class ``order[k-1]``."""
        return replace(self, symbols=tuple(self.symbols[o - 1] for o in order))


@dataclass(frozen=True, eq=False)
class SyntheticTriplet:
    map: GeoRaster
    labels: GeoRaster
    region_mask: GeoRaster
    assignment: Dict[str, int]
    seed: int
    network: RoadNetwork

    @property
    def ground_truth(self) -> ClassifiedNetwork:
        return ClassifiedNetwork.from_assignment(self.network, self.assignment)


_STREAMS = {"class": 0, "paint": 1}


def segment_rng(seed: int, segment_id: str, stream: str = "paint") -> np.random.Generator:
    key = [int(seed), zlib.crc32(str(segment_id).encode()), _STREAMS[stream]]
    return np.random.default_rng(np.random.SeedSequence(key))


def _ordered(network: RoadNetwork):
    for sid in sorted(network.segments, key=natural_key):
        yield sid, network.segments[sid].line


def _windows(network: RoadNetwork, transform: GeoTransform, shape, radius: float, with_offsets=False):
    outside = 0
    for sid, line in _ordered(network):
        win = distance_window(transform.to_pixel_space(line.coords), shape, radius, with_offsets)
        if win is None:
            outside += 1
            continue
        yield sid, line, win
    if outside:
        log.warning("%d segment(s) lie outside the raster extent and were skipped", outside)


def rasterize_centerlines(network: RoadNetwork, width_px: float, transform: GeoTransform, dims) -> GeoRaster:
    """Binary raster of pixels whose centers lie within ``width_px / 2`` of a segment."""
    if width_px < 1:
        raise ValueError("width_px must be at least 1")
    w, h = dims
    out = np.zeros((h, w), dtype=np.uint8)
    half = width_px / 2.0
    for _, _, win in _windows(network, transform, (h, w), half):
        out[win.slices][win.dist <= half] = 1
    return GeoRaster(out, transform, Semantics.BINARY_MASK)


def rasterize_labels(network: RoadNetwork, assignment: Mapping[str, int], width_px: float,
                     transform: GeoTransform, dims) -> GeoRaster:
    """Class-label raster; where corridors overlap the higher class wins."""
    w, h = dims
    out = np.zeros((h, w), dtype=np.uint8)
    half = width_px / 2.0
    for sid, _, win in _windows(network, transform, (h, w), half):
        view = out[win.slices]
        inside = win.dist <= half
        np.maximum(view, np.where(inside, np.uint8(assignment[sid]), np.uint8(0)), out=view)
    return GeoRaster(out, transform, Semantics.CLASS_LABEL)


def assign_random_classes(network: RoadNetwork, seed: int) -> Dict[str, int]:
    """Independent uniform class draw per segment, keyed by segment id."""
    return {sid: int(segment_rng(seed, sid, "class").integers(1, N_CLASSES + 1)) for sid, _ in _ordered(network)}


def symbol_ink(symbol: ClassSymbol, dist: np.ndarray, arclen: np.ndarray, offset: np.ndarray,
               length: float, width: float, gap: float, phase: float) -> np.ndarray:
    """Boolean ink mask for one stroked symbol given per-pixel line coordinates.

    Strokes have flat caps: pixels whose nearest point is a line end are not
    inked, so double lines stay open at junctions.
    """
    interior = (arclen > 0.0) & (arclen < length)
    if symbol.dash:
        on, off = symbol.dash
        in_dash = np.mod(arclen + phase, on + off) < on
    else:
        in_dash = None
    half = width / 2.0
    if symbol.line_count == 1:
        ink = dist <= half
        if symbol.dashed[0] and in_dash is not None:
            ink &= in_dash
        return ink & interior
    signed = np.where(offset >= 0, dist, -dist)
    centre = gap / 2.0 + half
    ink = np.zeros(dist.shape, dtype=bool)
    for k, side in enumerate((1.0, -1.0)):
        line = np.abs(signed - side * centre) <= half
        if symbol.dashed[k] and in_dash is not None:
            line &= in_dash
        ink |= line
    return ink & interior


def draw_symbol(rgb: np.ndarray, coords_px: np.ndarray, symbol: ClassSymbol, rng: np.random.Generator) -> None:
    """Stroke one polyline (pixel space) onto an (3, H, W) uint8 array in place."""
    width = symbol.stroke_width + (rng.uniform(-symbol.width_jitter, symbol.width_jitter) if symbol.width_jitter else 0.0)
    gap = symbol.gap + (rng.uniform(-symbol.gap_jitter, symbol.gap_jitter) if symbol.gap_jitter else 0.0)
    phase = rng.uniform(0.0, symbol.dash_period) if symbol.dash else 0.0
    width, gap = max(width, 0.5), max(gap, 0.0)
    reach = width / 2.0 if symbol.line_count == 1 else gap / 2.0 + width
    win = distance_window(coords_px, rgb.shape[1:], reach + 1.0, with_offsets=symbol.line_count == 2)
    if win is None:
        return
    length = float(np.hypot(*np.diff(coords_px, axis=0).T).sum())
    offset = win.offset if win.offset is not None else np.zeros_like(win.dist)
    ink = symbol_ink(symbol, win.dist, win.arclen, offset, length, width, gap, phase)
    rs, cs = win.slices
    for b in range(3):
        rgb[b, rs, cs][ink] = symbol.color[b]


def paint_symbology(base: GeoRaster, network: RoadNetwork, assignment: Mapping[str, int],
                    spec: Optional[SymbologySpec] = None, seed: int = 0) -> GeoRaster:
    """Overpaint every road corridor with background, then stroke class symbols.

    Pixels farther than ``overpaint_width / 2`` from every segment are left
    bit-identical to ``base``.
    """
    spec = spec or SymbologySpec()
    if base.semantics is not Semantics.RGB:
        raise ValueError("base map must be an RGB raster")
    rgb = base.data.copy()
    shape = rgb.shape[1:]
    half = spec.overpaint_width / 2.0
    fill = np.asarray(spec.background, dtype=np.uint8)
    for _, _, win in _windows(network, base.transform, shape, half):
        covered = win.dist <= half
        rs, cs = win.slices
        for b in range(3):
            rgb[b, rs, cs][covered] = fill[b]
    for sid, line in _ordered(network):
        draw_symbol(rgb, base.transform.to_pixel_space(line.coords), spec.symbol(assignment[sid]), segment_rng(seed, sid))
    return GeoRaster(rgb, base.transform, Semantics.RGB)


def build_synthetic_dataset(base: GeoRaster, network: RoadNetwork, spec: Optional[SymbologySpec] = None,
                            seed: int = 0, label_width: float = DEFAULT_LABEL_WIDTH,
                            region_width: float = DEFAULT_REGION_WIDTH,
                            assignment: Optional[Mapping[str, int]] = None) -> SyntheticTriplet:
    """Randomly classify, paint and label a road network on top of a base map."""
    spec = spec or SymbologySpec()
    if assignment is None:
        assignment = assign_random_classes(network, seed)
    assignment = dict(assignment)
    dims = (base.width, base.height)
    painted = paint_symbology(base, network, assignment, spec, seed)
    labels = rasterize_labels(network, assignment, label_width, base.transform, dims)
    region = rasterize_centerlines(network, region_width, base.transform, dims)
    return SyntheticTriplet(painted, labels, region, assignment, int(seed), network)
