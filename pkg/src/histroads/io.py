"""Raster, probability-field and vector file IO.

Rasters are PNG files with an ESRI world file next to them. World files
reference the *center* of the top-left pixel; internally we keep the corner,
so the half-pixel shift is applied on the way in and out (in exact decimal
arithmetic, which keeps write/read bit-exact).

Probability fields use a small binary container (``.probf``): one line of
JSON header followed by little-endian float32 bands, band-sequential.
"""
from __future__ import annotations

import json
from decimal import Context, Decimal, localcontext
from pathlib import Path
from typing import Optional, Union

import numpy as np
from PIL import Image

from .types import (
    N_CLASSES,
    N_PROB_BANDS,
    ClassifiedNetwork,
    GeoRaster,
    GeoTransform,
    Polyline,
    ProbabilityField,
    RasterError,
    RoadNetwork,
    Section,
    Semantics,
    natural_key,
    validate_probabilities,
)

PathLike = Union[str, Path]

PROBF_FORMAT = "probf"
PROBF_BAND_ORDER = [f"class{c}" for c in range(1, N_CLASSES + 1)] + ["no_road"]
PROBF_READ_TOL = 1e-4


class FormatError(ValueError):
    """Malformed or inconsistent file contents."""


# -- world files -----------------------------------------------------------


def world_file_path(path: PathLike) -> Path:
    path = Path(path)
    ext = path.suffix
    if len(ext) < 3:
        return path.with_suffix(".wld")
    return path.with_suffix(ext[:2] + ext[-1] + "w")


# wide enough that sums of any two doubles are exact
_WIDE = Context(prec=2500)


def _exact(value: float) -> str:
    return str(Decimal(value))


def write_world_file(path: PathLike, transform: GeoTransform) -> None:
    with localcontext(_WIDE):
        half = Decimal(transform.pixel_size) / 2
        cx = Decimal(transform.origin_x) + half
        cy = Decimal(transform.origin_y) - half
    ps = _exact(transform.pixel_size)
    lines = [ps, "0", "0", "-" + ps, str(cx), str(cy)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_world_file(path: PathLike) -> GeoTransform:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"world file not found: {path}")
    vals = path.read_text().split()
    if len(vals) != 6:
        raise FormatError(f"{path}: world file needs 6 values, found {len(vals)}")
    try:
        a, d, b, e, cx, cy = (Decimal(v) for v in vals)
    except ArithmeticError:
        raise FormatError(f"{path}: non-numeric world file entry") from None
    if d != 0 or b != 0:
        raise FormatError(f"{path}: rotated world files are not supported (terms {d}, {b})")
    if a <= 0 or e != a.copy_negate():
        raise FormatError(f"{path}: pixels must be square and north-up (A={a}, E={e})")
    with localcontext(_WIDE):
        half = a / 2
        ox, oy = cx - half, cy + half
    return GeoTransform(float(ox), float(oy), float(a))


# -- rasters ---------------------------------------------------------------


def write_raster(path: PathLike, raster: GeoRaster) -> None:
    """Write an 8-bit raster as PNG plus world file.

    Binary masks are stored as 0/255 so they are visible in ordinary viewers.
    """
    path = Path(path)
    if not path.parent.exists():
        raise FileNotFoundError(f"target directory does not exist: {path.parent}")
    sem = raster.semantics
    if sem is Semantics.PROBABILITY:
        raise FormatError("probability rasters are written with write_probability_field")
    if sem is Semantics.RGB:
        img = Image.fromarray(np.ascontiguousarray(np.moveaxis(raster.data, 0, -1)), mode="RGB")
    else:
        band = raster.band
        if sem is Semantics.BINARY_MASK:
            band = band * np.uint8(255)
        img = Image.fromarray(np.ascontiguousarray(band), mode="L")
    img.save(path, format="PNG")
    write_world_file(world_file_path(path), raster.transform)


def read_raster(path: PathLike, semantics: Optional[Union[Semantics, str]] = None) -> GeoRaster:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"raster not found: {path}")
    transform = read_world_file(world_file_path(path))
    with Image.open(path) as img:
        arr = np.asarray(img)
    data = arr[np.newaxis] if arr.ndim == 2 else np.moveaxis(arr, -1, 0)
    if data.dtype != np.uint8:
        raise FormatError(f"{path}: only 8-bit rasters are supported, got {data.dtype}")
    if semantics is None:
        semantics = Semantics.RGB if data.shape[0] == 3 else Semantics.GRAY
    semantics = Semantics(semantics)
    if semantics is Semantics.RGB and data.shape[0] == 4:
        data = data[:3]
    if semantics is Semantics.BINARY_MASK and data.shape[0] == 1:
        vals = np.unique(data)
        if not set(vals.tolist()) <= {0, 1, 255}:
            raise RasterError(f"{path}: binary mask contains values {vals.tolist()}")
        data = (data > 0).astype(np.uint8)
    try:
        return GeoRaster(np.ascontiguousarray(data), transform, semantics)
    except RasterError as exc:
        raise RasterError(f"{path}: {exc}") from None


# -- probability fields ----------------------------------------------------


def write_probability_field(path: PathLike, field: ProbabilityField) -> None:
    path = Path(path)
    if not path.parent.exists():
        raise FileNotFoundError(f"target directory does not exist: {path.parent}")
    t = field.transform
    header = {
        "format": PROBF_FORMAT,
        "version": 1,
        "width": field.width,
        "height": field.height,
        "bands": N_PROB_BANDS,
        "band_order": PROBF_BAND_ORDER,
        "dtype": "<f4",
        "transform": {"origin_x": t.origin_x, "origin_y": t.origin_y, "pixel_size": t.pixel_size},
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        fh.write(np.ascontiguousarray(field.data, dtype="<f4").tobytes())


def read_probability_field(path: PathLike) -> ProbabilityField:
    path = Path(path)
    with open(path, "rb") as fh:
        line = fh.readline()
        try:
            header = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: bad header ({exc})") from None
        if header.get("format") != PROBF_FORMAT:
            raise FormatError(f"{path}: not a probf file")
        if header.get("bands") != N_PROB_BANDS:
            raise FormatError(f"{path}: expected {N_PROB_BANDS} bands, header declares {header.get('bands')}")
        if header.get("band_order", PROBF_BAND_ORDER) != PROBF_BAND_ORDER:
            raise FormatError(f"{path}: unexpected band order {header['band_order']}")
        w, h = int(header["width"]), int(header["height"])
        payload = fh.read()
    expected = N_PROB_BANDS * w * h * 4
    if len(payload) != expected:
        raise FormatError(f"{path}: payload is {len(payload)} bytes, expected {expected}")
    data = np.frombuffer(payload, dtype="<f4").reshape(N_PROB_BANDS, h, w).astype(np.float32)
    problem = validate_probabilities(data, PROBF_READ_TOL)
    if problem is not None:
        raise RasterError(f"{path}: {problem}")
    tr = header["transform"]
    return ProbabilityField(data, GeoTransform(tr["origin_x"], tr["origin_y"], tr["pixel_size"]), validate=False)


# -- vectors ---------------------------------------------------------------


def _feature(sid, line: Polyline, props) -> dict:
    return {
        "type": "Feature",
        "geometry": {"type": "LineString", "coordinates": line.coords.tolist()},
        "properties": {"segment_id": sid, **props},
    }


def network_to_geojson(network, crs_epsg: Optional[int] = None) -> dict:
    features = []
    if isinstance(network, ClassifiedNetwork):
        for sid, sec in network.items():
            props = {"road_class": sec.road_class, "parent_id": sec.parent_id}
            if sec.mean_probs is not None:
                props["mean_probs"] = [float(p) for p in sec.mean_probs]
            features.append(_feature(sid, sec.line, props))
    else:
        for sid, seg in sorted(network.segments.items(), key=lambda kv: natural_key(kv[0])):
            props = {"start_node": seg.start_node, "end_node": seg.end_node}
            features.append(_feature(sid, seg.line, props))
    doc = {"type": "FeatureCollection", "features": features}
    if crs_epsg is not None:
        doc["crs_epsg"] = int(crs_epsg)
    return doc


def write_network(path: PathLike, network, crs_epsg: Optional[int] = None) -> None:
    path = Path(path)
    if not path.parent.exists():
        raise FileNotFoundError(f"target directory does not exist: {path.parent}")
    path.write_text(json.dumps(network_to_geojson(network, crs_epsg), indent=1) + "\n")


def network_from_geojson(doc: dict, classified: Optional[bool] = None):
    if doc.get("type") != "FeatureCollection":
        raise FormatError("expected a GeoJSON FeatureCollection")
    feats = doc.get("features", [])
    if classified is None:
        classified = any("road_class" in (f.get("properties") or {}) for f in feats)
    lines = {}
    sections = {}
    for i, feat in enumerate(feats):
        geom = feat.get("geometry") or {}
        if geom.get("type") != "LineString":
            raise FormatError(f"feature {i}: geometry type {geom.get('type')!r} is not LineString")
        props = feat.get("properties") or {}
        sid = str(props.get("segment_id", f"s{i}"))
        if sid in lines:
            raise FormatError(f"duplicate segment_id {sid!r}")
        line = Polyline(np.asarray(geom["coordinates"], dtype=np.float64)[:, :2])
        lines[sid] = line
        if classified:
            rc = props.get("road_class")
            if not isinstance(rc, int) or isinstance(rc, bool) or not 1 <= rc <= N_CLASSES:
                raise FormatError(f"feature {sid}: road_class {rc!r} outside 1..{N_CLASSES}")
            probs = props.get("mean_probs")
            sections[sid] = Section(line, rc, str(props.get("parent_id", sid)),
                                    tuple(probs) if probs is not None else None)
    if classified:
        return ClassifiedNetwork(sections)
    return RoadNetwork.from_polylines(lines)


def read_network(path: PathLike, classified: Optional[bool] = None):
    """Read a GeoJSON network; returns ClassifiedNetwork when road classes are present."""
    return network_from_geojson(json.loads(Path(path).read_text()), classified)
