"""Overlapping sheet tiling and crop-and-place stitching."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from .types import GeoRaster, GeoTransform, ProbabilityField, Semantics

DEFAULT_TILE_SIZE = 500
DEFAULT_OVERLAP = 125


class TilingError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TileGrid:
    tile_size: int
    overlap: int
    source_width: int
    source_height: int
    source_transform: GeoTransform
    tiles: List[Tuple[int, int, GeoRaster]] = field(default_factory=list)

    @property
    def stride(self) -> int:
        return self.tile_size - 2 * self.overlap

    @property
    def n_rows(self) -> int:
        return math.ceil(self.source_height / self.stride)

    @property
    def n_cols(self) -> int:
        return math.ceil(self.source_width / self.stride)

    def tile_transform(self, row: int, col: int) -> GeoTransform:
        return self.source_transform.shifted(col * self.stride - self.overlap, row * self.stride - self.overlap)

    def with_tiles(self, tiles) -> "TileGrid":
        """Same layout, different tile contents (e.g. per-tile predictions)."""
        return TileGrid(self.tile_size, self.overlap, self.source_width, self.source_height,
                        self.source_transform, list(tiles))


def _reflect_pad(data: np.ndarray, top: int, bottom: int, left: int, right: int) -> np.ndarray:
    # 'symmetric' tolerates axes of length 1 and pads wider than the array
    return np.pad(data, ((0, 0), (top, bottom), (left, right)), mode="symmetric")


def make_tiles(raster: GeoRaster, tile_size: int = DEFAULT_TILE_SIZE, overlap: int = DEFAULT_OVERLAP) -> TileGrid:
    """Cut a raster into ``tile_size`` tiles whose central windows tile the sheet.

    The sheet is reflection-padded by ``overlap`` on every side (plus whatever
    is needed to complete the last row/column) so every tile is full size.
    """
    if overlap < 0 or tile_size <= 2 * overlap:
        raise TilingError(f"tile_size ({tile_size}) must exceed twice the overlap ({overlap})")
    grid = TileGrid(tile_size, overlap, raster.width, raster.height, raster.transform)
    stride = grid.stride
    extra_h = grid.n_rows * stride - raster.height
    extra_w = grid.n_cols * stride - raster.width
    padded = _reflect_pad(raster.data, overlap, overlap + extra_h, overlap, overlap + extra_w)
    tiles = []
    for r in range(grid.n_rows):
        for c in range(grid.n_cols):
            r0, c0 = r * stride, c * stride
            block = padded[:, r0:r0 + tile_size, c0:c0 + tile_size].copy()
            tiles.append((r, c, GeoRaster(block, grid.tile_transform(r, c), raster.semantics)))
    return grid.with_tiles(tiles)


def stitch_tiles(grid: TileGrid) -> GeoRaster:
    """Crop every tile to its central stride x stride window and reassemble."""
    by_pos: Dict[Tuple[int, int], GeoRaster] = {}
    for r, c, tile in grid.tiles:
        by_pos[(r, c)] = tile
    missing = [(r, c) for r in range(grid.n_rows) for c in range(grid.n_cols) if (r, c) not in by_pos]
    if missing:
        raise TilingError(f"missing tiles at (row, col) {missing[:5]}{'...' if len(missing) > 5 else ''}")
    first = by_pos[(0, 0)]
    stride, ov, ts = grid.stride, grid.overlap, grid.tile_size
    for pos, tile in by_pos.items():
        if (tile.height, tile.width) != (ts, ts):
            raise TilingError(f"tile {pos} is {tile.width}x{tile.height}, expected {ts}x{ts}")
        if tile.n_bands != first.n_bands or tile.data.dtype != first.data.dtype:
            raise TilingError(f"tile {pos} band layout differs from tile (0, 0)")
    out = np.empty((first.n_bands, grid.n_rows * stride, grid.n_cols * stride), dtype=first.data.dtype)
    for (r, c), tile in by_pos.items():
        out[:, r * stride:(r + 1) * stride, c * stride:(c + 1) * stride] = tile.data[:, ov:ov + stride, ov:ov + stride]
    out = out[:, :grid.source_height, :grid.source_width]
    semantics = first.semantics
    if semantics is Semantics.PROBABILITY:
        return ProbabilityField(np.ascontiguousarray(out), grid.source_transform, validate=False)
    return GeoRaster(np.ascontiguousarray(out), grid.source_transform, semantics)


def tile_name(sheet: str, row: int, col: int) -> str:
    return f"{sheet}_{row}_{col}.png"
