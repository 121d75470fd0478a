"""Class-probability fields: ensembling, hard masking and a template baseline."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage as ndi

from .painter import ClassSymbol, SymbologySpec, symbol_ink
from .types import (
    N_CLASSES,
    N_PROB_BANDS,
    NO_ROAD_BAND,
    PROB_SUM_TOL,
    GeoRaster,
    ProbabilityField,
    RasterError,
    Semantics,
)

DEFAULT_TEMPERATURE = 0.1
ROTATION_STEP_DEG = 15.0
DASH_PHASES = 5


class GridMismatch(RasterError):
    pass


def _check_grid(a: GeoRaster, b: GeoRaster, what: str) -> None:
    if not a.same_grid(b):
        raise GridMismatch(f"{what}: grids differ ({a.width}x{a.height} @ {a.transform} vs "
                           f"{b.width}x{b.height} @ {b.transform})")


def _renormalize(data: np.ndarray, tol: float = PROB_SUM_TOL) -> np.ndarray:
    sums = data.sum(axis=0, dtype=np.float64)
    if np.abs(sums - 1.0).max(initial=0.0) > tol:
        data /= sums.astype(np.float32)[None]
    return data


def ensemble_average(members: Iterable[Union[ProbabilityField, str, Path]]) -> ProbabilityField:
    """Per-pixel, per-band arithmetic mean of ensemble members.

    Members may be given as paths so large ensembles are streamed from disk
    instead of held in memory at once.
    """
    from .io import read_probability_field

    total = None
    first = None
    k = 0
    for m in members:
        field = read_probability_field(m) if isinstance(m, (str, Path)) else m
        if first is None:
            first = field
            total = field.data.astype(np.float64)
        else:
            _check_grid(first, field, "ensemble member")
            total += field.data
        k += 1
    if k == 0:
        raise ValueError("ensemble needs at least one member")
    mean = (total / k).astype(np.float32)
    return ProbabilityField(_renormalize(mean), first.transform)


def apply_hard_mask(field: ProbabilityField, road_region: GeoRaster) -> ProbabilityField:
    """Force no-road outside the road region and renormalize classes inside.

    ``road_region`` is 1 on the (buffered) road corridor. Outside it the
    pixel becomes (0, 0, 0, 0, 0, 1); inside, the no-road band is zeroed and
    the five class bands are rescaled to sum to one. Inside pixels whose
    class bands are all zero get a uniform class distribution.
    """
    _check_grid(field, road_region, "hard mask")
    inside = road_region.band.astype(bool)
    out = field.data.astype(np.float32, copy=True)
    cls = out[:N_CLASSES]
    sums = cls.sum(axis=0)
    empty = inside & (sums <= 0)
    safe = np.where(sums > 0, sums, 1.0).astype(np.float32)
    cls /= safe[None]
    cls[:, empty] = 1.0 / N_CLASSES
    cls[:, ~inside] = 0.0
    out[NO_ROAD_BAND] = np.where(inside, 0.0, 1.0)
    return ProbabilityField(out, field.transform)


def one_hot_field(labels: GeoRaster) -> ProbabilityField:
    """Probability field putting all mass on each pixel's label (0 -> no-road)."""
    lab = labels.band
    data = np.zeros((N_PROB_BANDS,) + lab.shape, dtype=np.float32)
    band = np.where(lab == 0, NO_ROAD_BAND, lab.astype(np.int64) - 1)
    np.put_along_axis(data, band[None], 1.0, axis=0)
    return ProbabilityField(data, labels.transform)


def softmax(scores: np.ndarray, temperature: float, axis: int = -1) -> np.ndarray:
    z = scores / temperature
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


# -- template-matching baseline ---------------------------------------------


def to_gray(raster: GeoRaster) -> np.ndarray:
    data = raster.data.astype(np.float32)
    if raster.semantics is Semantics.RGB:
        return 0.299 * data[0] + 0.587 * data[1] + 0.114 * data[2]
    return data[0]


def _gray(rgb) -> float:
    return 0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2]


def default_window(spec: SymbologySpec) -> int:
    """Smallest odd square holding twice the widest symbol, and one dash period.

    The margin matters: a window centred on one line of a wide double-line
    symbol must also see the second line, or single-line templates win.
    """
    widest = max(s.max_width for s in spec.symbols)
    period = max((s.dash_period for s in spec.symbols), default=0.0)
    side = int(math.ceil(max(2 * widest + 1, period + 1)))
    return side + 1 if side % 2 == 0 else side


def render_template(symbol: ClassSymbol, background, size: int, angle_deg: float, phase: float = 0.0) -> np.ndarray:
    """Gray patch of a straight road through the window center."""
    half = (size - 1) / 2.0
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) - half
    theta = math.radians(angle_deg)
    dx, dy = math.cos(theta), -math.sin(theta)
    along = xx * dx + yy * dy
    perp = -(xx * dy - yy * dx)
    length = 4.0 * size
    ink = symbol_ink(symbol, np.abs(perp), along + length / 2, perp, length,
                     symbol.stroke_width, symbol.gap, phase)
    return np.where(ink, _gray(symbol.color), _gray(background)).astype(np.float32)


@dataclass(frozen=True, eq=False)
class TemplateBank:
    size: int
    matrix: np.ndarray
    class_of: np.ndarray

    @classmethod
    def build(cls, spec: SymbologySpec, size: Optional[int] = None, sigma: float = 0.0) -> "TemplateBank":
        size = size or default_window(spec)
        rows, owners = [], []
        for k, sym in enumerate(spec.symbols):
            asymmetric = sym.line_count == 2 and sym.dash and sym.dashed[0] != sym.dashed[1]
            span = 360.0 if asymmetric else 180.0
            angles = np.arange(0.0, span, ROTATION_STEP_DEG)
            phases = np.arange(DASH_PHASES) * sym.dash_period / DASH_PHASES if sym.dash else [0.0]
            for a in angles:
                for ph in phases:
                    t = render_template(sym, spec.background, size, float(a), float(ph))
                    if sigma > 0:
                        t = ndi.gaussian_filter(t, sigma, mode="nearest")
                    t = t.ravel()
                    t = t - t.mean()
                    n = np.linalg.norm(t)
                    rows.append(t / n if n > 0 else t)
                    owners.append(k)
        return cls(size, np.asarray(rows, dtype=np.float32), np.asarray(owners))


def ncc_scores(gray: np.ndarray, pixels: np.ndarray, bank: TemplateBank, chunk: int = 20000) -> np.ndarray:
    """Best normalized cross-correlation per class for the given (row, col) pixels."""
    r = bank.size // 2
    padded = np.pad(gray, r, mode="reflect")
    windows = sliding_window_view(padded, (bank.size, bank.size))
    out = np.zeros((len(pixels), N_CLASSES), dtype=np.float32)
    order = np.argsort(bank.class_of, kind="stable")
    mat = bank.matrix[order].T
    starts = np.searchsorted(bank.class_of[order], np.arange(N_CLASSES))
    for s in range(0, len(pixels), chunk):
        pr, pc = pixels[s:s + chunk, 0], pixels[s:s + chunk, 1]
        patches = windows[pr, pc].reshape(len(pr), -1).astype(np.float32)
        patches -= patches.mean(axis=1, keepdims=True)
        norms = np.linalg.norm(patches, axis=1, keepdims=True)
        patches /= np.where(norms > 1e-6, norms, np.inf)
        scores = patches @ mat
        out[s:s + chunk] = np.maximum.reduceat(scores, starts, axis=1)
    return out


def baseline_classifier(
    map_raster: GeoRaster,
    spec: Optional[SymbologySpec] = None,
    temperature: float = DEFAULT_TEMPERATURE,
    region: Optional[GeoRaster] = None,
    pool_radius: int = 5,
    window: Optional[int] = None,
    sigma: float = 1.0,
) -> ProbabilityField:
    """Non-learned road-class probabilities from template matching.

    Image and templates are smoothed with a Gaussian of ``sigma`` pixels so
    that thin aliased strokes match across the rotation steps. Each pixel is
    scored against every class template (all rotations and dash phases); the best match per class is then max-pooled over a square
    of half-width ``pool_radius`` pixels so that pixels beside the road axis inherit the
    on-axis match. Scores become probabilities through a softmax with
    ``temperature``. The no-road band is left at 0; hard masking provides it.

    With ``region`` given, only pixels inside it are scored (others get a
    uniform class distribution), which keeps whole-sheet runs affordable.
    """
    spec = spec or SymbologySpec()
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    gray = to_gray(map_raster)
    if sigma > 0:
        gray = ndi.gaussian_filter(gray, sigma)
    h, w = gray.shape
    bank = TemplateBank.build(spec, window, sigma)
    if region is not None:
        _check_grid(map_raster, region, "baseline region")
        wanted = region.band.astype(bool)
    else:
        wanted = np.ones((h, w), dtype=bool)
    side = 2 * pool_radius + 1
    scored = ndi.maximum_filter(wanted, size=side) if pool_radius > 0 else wanted
    pix = np.argwhere(scored)
    scores = np.full((N_CLASSES, h, w), -np.inf, dtype=np.float32)
    if len(pix):
        s = ncc_scores(gray, pix, bank)
        scores[:, pix[:, 0], pix[:, 1]] = s.T
    if pool_radius > 0:
        for k in range(N_CLASSES):
            scores[k] = ndi.maximum_filter(scores[k], size=side, mode="constant", cval=-np.inf)
    data = np.zeros((N_PROB_BANDS, h, w), dtype=np.float32)
    data[:N_CLASSES] = 1.0 / N_CLASSES
    sel = wanted
    if sel.any():
        data[:N_CLASSES, sel] = softmax(scores[:, sel].T.astype(np.float64), temperature).T
    return ProbabilityField(data, map_raster.transform)
