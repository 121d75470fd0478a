"""Binary mask refinement: component filtering, closing and thinning."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage as ndi
from skimage.morphology import skeletonize as _sk_skeletonize

from .types import GeoRaster, RasterError, Semantics

DEFAULT_MIN_AREA = 100
_STRUCT = {4: ndi.generate_binary_structure(2, 1), 8: ndi.generate_binary_structure(2, 2)}
# clockwise 8-neighbourhood starting north-west
_RING = [(-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1)]


@dataclass(frozen=True, eq=False)
class ComponentLabeling:
    labels: np.ndarray
    counts: np.ndarray

    @property
    def n_components(self) -> int:
        return len(self.counts)


def _as_binary(mask) -> np.ndarray:
    arr = mask.band if isinstance(mask, GeoRaster) else np.asarray(mask)
    if arr.ndim != 2:
        raise RasterError(f"mask must be 2-D, got shape {arr.shape}")
    if arr.dtype == bool:
        return arr
    if arr.size and (arr.min() < 0 or arr.max() > 1):
        raise RasterError("mask must be binary (values 0/1)")
    return arr.astype(bool)


def _like(mask, arr: np.ndarray):
    if isinstance(mask, GeoRaster):
        return GeoRaster(arr.astype(np.uint8), mask.transform, Semantics.BINARY_MASK)
    return arr.astype(np.uint8)


def connected_components(mask, connectivity: int = 8) -> ComponentLabeling:
    if connectivity not in _STRUCT:
        raise ValueError("connectivity must be 4 or 8")
    arr = _as_binary(mask)
    labels, n = ndi.label(arr, structure=_STRUCT[connectivity])
    counts = np.bincount(labels.ravel(), minlength=n + 1)[1:]
    return ComponentLabeling(labels.astype(np.int32), counts)


def remove_small_components(mask, min_area: int = DEFAULT_MIN_AREA, connectivity: int = 8):
    """Clear every component with fewer than ``min_area`` pixels."""
    cc = connected_components(mask, connectivity)
    keep = np.concatenate([[False], cc.counts >= min_area])
    return _like(mask, keep[cc.labels])


def close_mask(mask, size: int = 3):
    """Dilate then erode with a uniform square kernel; outside pixels are background."""
    arr = _as_binary(mask)
    pad = size
    padded = np.pad(arr, pad)
    st = np.ones((size, size), dtype=bool)
    closed = ndi.binary_erosion(ndi.binary_dilation(padded, st), st, border_value=0)
    return _like(mask, closed[pad:-pad, pad:-pad])


def _is_simple(s: np.ndarray, r: int, c: int) -> bool:
    """Local simple-point test (8-connected foreground, 4-connected background)."""
    h, w = s.shape
    nb = np.zeros((3, 3), dtype=bool)
    for dr, dc in _RING:
        rr, cc = r + dr, c + dc
        nb[dr + 1, dc + 1] = 0 <= rr < h and 0 <= cc < w and s[rr, cc]
    if nb.sum() < 2:
        return False
    if ndi.label(nb, _STRUCT[8])[1] != 1:
        return False
    bg = ~nb
    bg[1, 1] = False
    lab, _ = ndi.label(bg, _STRUCT[4])
    touching = {lab[p] for p in ((0, 1), (1, 2), (2, 1), (1, 0)) if lab[p]}
    return len(touching) == 1


def _blocks(s: np.ndarray):
    blk = s[:-1, :-1] & s[1:, :-1] & s[:-1, 1:] & s[1:, 1:]
    return [tuple(p) for p in np.argwhere(blk)]


def _stays_connected(s: np.ndarray, r: int, c: int) -> bool:
    """Would removing (r, c) keep its 8-component in one piece?"""
    lab, _ = ndi.label(s, _STRUCT[8])
    k = lab[r, c]
    sl = ndi.find_objects(lab == k)[0]
    piece = lab[sl] == k
    piece[r - sl[0].start, c - sl[1].start] = False
    return ndi.label(piece, _STRUCT[8])[1] == 1


def _remove_blocks(s: np.ndarray) -> np.ndarray:
    s = s.copy()
    for use_global in (False, True):
        changed = True
        while changed:
            changed = False
            for r, c in _blocks(s):
                quad = [(r, c), (r, c + 1), (r + 1, c), (r + 1, c + 1)]
                if not all(s[p] for p in quad):
                    continue
                for rr, cc in quad:
                    ok = _stays_connected(s, rr, cc) if use_global else _is_simple(s, rr, cc)
                    if ok:
                        s[rr, cc] = False
                        changed = True
                        break
    return s


def skeletonize(mask):
    """Thin a mask to one-pixel-wide centerlines.

    Lee's thinning does the bulk of the work; a cleanup pass then removes
    leftover 2x2 blocks without changing the number of 8-connected
    components. A block is kept only if every pixel in it is a cut pixel of
    a tree-like junction.
    """
    arr = _as_binary(mask)
    if not arr.any():
        return _like(mask, arr)
    skel = _sk_skeletonize(arr, method="lee").astype(bool)
    if _blocks(skel):
        skel = _remove_blocks(skel)
    return _like(mask, skel)


def has_2x2_block(mask) -> bool:
    return bool(_blocks(_as_binary(mask)))
