"""File-level stages, the manifest log and the end-to-end runner.

Each stage reads its inputs from disk, writes its outputs and appends one
JSON line to ``manifest.jsonl`` in the output directory. Outputs depend only
on inputs, configuration and seeds, so reruns are byte-identical.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import io as hio
from .assignment import AssignmentParams, classify_network
from .config import PipelineConfig
from .evaluation import line_metrics
from .morphology import close_mask, remove_small_components, skeletonize
from .painter import build_synthetic_dataset, rasterize_centerlines
from .probability import apply_hard_mask, baseline_classifier, ensemble_average, one_hot_field
from .render import render_overlay
from .synthetic import flip_labels, random_network, synthetic_base
from .tiling import make_tiles, stitch_tiles
from .types import ClassifiedNetwork, GeoRaster, GeoTransform, RoadNetwork, Semantics
from .vectorize import GridSpec, filter_grid_lines, simplify_network, vectorize_skeleton

log = logging.getLogger(__name__)

MANIFEST = "manifest.jsonl"


class MissingInput(FileNotFoundError):
    pass


def file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def params_hash(params) -> str:
    return hashlib.sha256(json.dumps(params, sort_keys=True, default=str).encode()).hexdigest()


def run_stage(name: str, fn: Callable[[], None], inputs: Dict[str, Path], outputs: Dict[str, Path],
              params: dict, manifest: Path, seed: Optional[int] = None) -> dict:
    """Run one stage and append its manifest entry.

    Missing inputs are reported by name before any work is done.
    """
    missing = [f"{k} ({p})" for k, p in inputs.items() if not Path(p).exists()]
    if missing:
        raise MissingInput(f"stage '{name}': missing input(s): {', '.join(missing)}")
    t0 = time.perf_counter()
    fn()
    wall = time.perf_counter() - t0
    entry = {
        "stage": name,
        "inputs": {k: file_hash(p) for k, p in sorted(inputs.items())},
        "outputs": {k: file_hash(p) for k, p in sorted(outputs.items()) if Path(p).exists()},
        "config_hash": params_hash(params),
        "seed": seed,
        "wall_time_s": round(wall, 4),
    }
    manifest = Path(manifest)
    manifest.parent.mkdir(parents=True, exist_ok=True)
    with open(manifest, "a") as fh:
        fh.write(json.dumps(entry, sort_keys=True) + "\n")
    log.info("stage %s done in %.2fs", name, wall)
    return entry


# -- single stages on files ----------------------------------------------------


def tile_file(src, out_dir, sheet: str, tile_size: int = 500, overlap: int = 125) -> Path:
    """Cut a raster file into tiles plus a ``<sheet>_tiles.json`` layout file."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    raster = hio.read_raster(src)
    grid = make_tiles(raster, tile_size, overlap)
    names = []
    for r, c, tile in grid.tiles:
        name = f"{sheet}_{r}_{c}.png"
        hio.write_raster(out_dir / name, tile)
        names.append(name)
    t = raster.transform
    layout = {
        "sheet": sheet,
        "width": raster.width,
        "height": raster.height,
        "tile_size": tile_size,
        "overlap": overlap,
        "semantics": raster.semantics.value,
        "transform": {"origin_x": t.origin_x, "origin_y": t.origin_y, "pixel_size": t.pixel_size},
        "tiles": names,
    }
    path = out_dir / f"{sheet}_tiles.json"
    path.write_text(json.dumps(layout, indent=2, sort_keys=True) + "\n")
    return path


def stitch_file(layout_path, out, ext: str = ".png", semantics: Optional[str] = None) -> None:
    """Reassemble tiles listed in a layout file; ``ext`` picks .png or .probf tiles."""
    layout_path = Path(layout_path)
    layout = json.loads(layout_path.read_text())
    t = layout["transform"]
    grid = make_tiles(GeoRaster(np.zeros((1, layout["height"], layout["width"]), np.uint8),
                                GeoTransform(t["origin_x"], t["origin_y"], t["pixel_size"])),
                      layout["tile_size"], layout["overlap"])
    tiles = []
    for r, c, _ in grid.tiles:
        p = layout_path.parent / f"{layout['sheet']}_{r}_{c}{ext}"
        if not p.exists():
            raise MissingInput(f"missing tile {p}")
        if ext == ".probf":
            tile = hio.read_probability_field(p)
        else:
            tile = hio.read_raster(p, semantics or layout.get("semantics"))
        tiles.append((r, c, tile))
    out_raster = stitch_tiles(grid.with_tiles(tiles))
    if out_raster.semantics is Semantics.PROBABILITY:
        hio.write_probability_field(out, out_raster)
    else:
        hio.write_raster(out, out_raster)


def morph_file(src, out, min_area: int = 100, closing_size: int = 3) -> None:
    mask = hio.read_raster(src, Semantics.BINARY_MASK)
    hio.write_raster(out, close_mask(remove_small_components(mask, min_area), closing_size))


def skeleton_file(src, out) -> None:
    hio.write_raster(out, skeletonize(hio.read_raster(src, Semantics.BINARY_MASK)))


def vectorize_file(src, out, epsilon: float = 1.9, crs_epsg: Optional[int] = None) -> RoadNetwork:
    network, n_isolated = vectorize_skeleton(hio.read_raster(src, Semantics.BINARY_MASK))
    if n_isolated:
        log.info("%d isolated skeleton pixel(s) dropped", n_isolated)
    network = simplify_network(network, epsilon)
    hio.write_network(out, network, crs_epsg)
    return network


def grid_for(network: RoadNetwork, spacing: float, buffer: float, net_tolerance: float,
             extent: Optional[Tuple[float, float, float, float]] = None) -> GridSpec:
    """Regular grid covering ``extent`` (defaults to the network bounds)."""
    if extent is None:
        pts = np.concatenate([s.line.coords for s in network.segments.values()])
        extent = (pts[:, 0].min(), pts[:, 1].min(), pts[:, 0].max(), pts[:, 1].max())
    x0, y0, x1, y1 = extent
    xs = np.arange(math.floor(x0 / spacing), math.ceil(x1 / spacing) + 1) * spacing
    ys = np.arange(math.floor(y0 / spacing), math.ceil(y1 / spacing) + 1) * spacing
    return GridSpec(tuple(xs), tuple(ys), buffer, net_tolerance)


def gridfilter_file(src, out, spacing: float = 1000.0, buffer: float = 3.75, net_tolerance: float = 2.5,
                    crs_epsg: Optional[int] = None) -> List[str]:
    network = hio.read_network(src, classified=False)
    if not network.segments:
        hio.write_network(out, network, crs_epsg)
        return []
    kept, removed = filter_grid_lines(network, grid_for(network, spacing, buffer, net_tolerance))
    hio.write_network(out, kept, crs_epsg)
    return removed


def region_for(network: RoadNetwork, like: GeoRaster, width: float = 10.0) -> GeoRaster:
    return rasterize_centerlines(network, width, like.transform, (like.width, like.height))


def baseline_tiled(map_raster: GeoRaster, region: GeoRaster, spec, cfg: PipelineConfig):
    """Baseline classifier run tile by tile and stitched, as an external model would be."""
    p = cfg.probability
    grid = make_tiles(map_raster, cfg.tiling.tile_size, cfg.tiling.overlap)
    rgrid = make_tiles(region, cfg.tiling.tile_size, cfg.tiling.overlap)
    out = []
    for (r, c, tile), (_, _, rtile) in zip(grid.tiles, rgrid.tiles):
        # only the central window survives stitching
        ov, st = grid.overlap, grid.stride
        core = np.zeros_like(rtile.data)
        core[:, ov:ov + st, ov:ov + st] = rtile.data[:, ov:ov + st, ov:ov + st]
        field = baseline_classifier(tile, spec, p.temperature, GeoRaster(core, rtile.transform, rtile.semantics),
                                    p.pool_radius, p.window or None, p.sigma)
        out.append((r, c, field))
    return stitch_tiles(grid.with_tiles(out))


# -- end-to-end --------------------------------------------------------------


@dataclass
class PipelineResult:
    output_dir: Path
    classified: ClassifiedNetwork
    report: Optional[dict]
    failures: Dict[str, str]


def _speckle(mask: np.ndarray, n: int, rng: np.random.Generator) -> None:
    h, w = mask.shape
    for _ in range(n):
        r, c = int(rng.integers(0, h)), int(rng.integers(0, w))
        size = int(rng.integers(2, 9))
        mask[r:r + size, c:c + size] = 1


def run_pipeline(cfg: PipelineConfig, output_dir=None) -> PipelineResult:
    """Run every stage in order; the manifest keeps entries of finished stages."""
    out = Path(output_dir or cfg.io.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = out / MANIFEST
    manifest.unlink(missing_ok=True)
    (out / "config.toml").write_text(cfg.to_toml())
    crs = cfg.io.crs_epsg or None
    spec = cfg.symbology.to_spec()
    paths = {k: out / v for k, v in {
        "map": "map.png", "labels": "labels.png", "region_gt": "region_gt.png", "gt": "ground_truth.geojson",
        "seg": "segmentation.png", "clean": "mask_clean.png", "skel": "skeleton.png",
        "net": "network.geojson", "netf": "network_filtered.geojson", "region": "region.png",
        "probs": "probabilities.probf", "masked": "probabilities_masked.probf",
        "classified": "classified.geojson", "report": "report.json", "overlay": "overlay.png",
    }.items()}
    sd = cfg.seeds

    if cfg.synthetic.enabled:
        s = cfg.synthetic

        def synth():
            tr = GeoTransform(s.origin_x, s.origin_y, s.pixel_size)
            net = random_network(s.width * s.pixel_size, s.height * s.pixel_size, (s.origin_x, s.origin_y),
                                 s.n_segments, (s.min_length, s.max_length), s.min_separation, seed=sd.network)
            base = synthetic_base(s.width, s.height, tr, seed=sd.network)
            trip = build_synthetic_dataset(base, net, spec, sd.paint, s.label_width, cfg.probability.region_width)
            hio.write_raster(paths["map"], trip.map)
            hio.write_raster(paths["labels"], trip.labels)
            hio.write_raster(paths["region_gt"], trip.region_mask)
            hio.write_network(paths["gt"], trip.ground_truth, crs)
            seg = rasterize_centerlines(net, s.segmentation_width, tr, (s.width, s.height))
            data = seg.band.copy()
            _speckle(data, s.speckles, np.random.default_rng(sd.noise))
            hio.write_raster(paths["seg"], GeoRaster(data, tr, Semantics.BINARY_MASK))

        run_stage("paint", synth, {}, {k: paths[k] for k in ("map", "labels", "region_gt", "gt", "seg")},
                  {"synthetic": cfg.synthetic.__dict__, "symbology": cfg.to_dict()["symbology"]}, manifest, sd.paint)
    else:
        paths["map"] = Path(cfg.io.map)
        paths["seg"] = Path(cfg.io.segmentation)
        if cfg.io.ground_truth:
            paths["gt"] = Path(cfg.io.ground_truth)

    stitched = out / "segmentation_stitched.png"

    def seg_tiles():
        # the mask is cut and reassembled as a per-tile model output would be
        seg = hio.read_raster(paths["seg"], Semantics.BINARY_MASK)
        hio.write_raster(stitched, stitch_tiles(make_tiles(seg, cfg.tiling.tile_size, cfg.tiling.overlap)))

    run_stage("tile-stitch", seg_tiles, {"segmentation": paths["seg"]}, {"segmentation": stitched},
              cfg.to_dict()["tiling"], manifest)
    paths["seg"] = stitched
    m = cfg.morphology
    run_stage("morph", lambda: morph_file(paths["seg"], paths["clean"], m.min_area, m.closing_size),
              {"mask": paths["seg"]}, {"mask": paths["clean"]}, m.__dict__, manifest)
    run_stage("skeleton", lambda: skeleton_file(paths["clean"], paths["skel"]),
              {"mask": paths["clean"]}, {"skeleton": paths["skel"]}, {}, manifest)
    run_stage("vectorize", lambda: vectorize_file(paths["skel"], paths["net"], cfg.vectorize.epsilon, crs),
              {"skeleton": paths["skel"]}, {"network": paths["net"]}, cfg.vectorize.__dict__, manifest)
    g = cfg.grid
    if g.enabled:
        run_stage("gridfilter", lambda: gridfilter_file(paths["net"], paths["netf"], g.spacing, g.buffer,
                                                         g.net_tolerance, crs),
                  {"network": paths["net"]}, {"network": paths["netf"]}, g.__dict__, manifest)
    else:
        paths["netf"] = paths["net"]

    p = cfg.probability

    def probs():
        net = hio.read_network(paths["netf"], classified=False)
        map_raster = hio.read_raster(paths["map"])
        region = region_for(net, map_raster, p.region_width)
        hio.write_raster(paths["region"], region)
        if p.source == "baseline":
            field = baseline_tiled(map_raster, region, spec, cfg)
        elif p.source == "oracle":
            labels = hio.read_raster(paths["labels"], Semantics.CLASS_LABEL)
            field = one_hot_field(flip_labels(labels, p.label_noise, sd.noise))
        else:
            field = ensemble_average(p.ensemble)
        hio.write_probability_field(paths["probs"], field)

    ins = {"network": paths["netf"], "map": paths["map"]}
    if p.source == "files":
        ins.update({f"member{i}": Path(f) for i, f in enumerate(p.ensemble)})
    run_stage("probabilities", probs, ins, {"probabilities": paths["probs"], "region": paths["region"]},
              p.__dict__, manifest, sd.noise)

    def mask():
        field = hio.read_probability_field(paths["probs"])
        region = hio.read_raster(paths["region"], Semantics.BINARY_MASK)
        hio.write_probability_field(paths["masked"], apply_hard_mask(field, region))

    run_stage("mask", mask, {"probabilities": paths["probs"], "region": paths["region"]},
              {"probabilities": paths["masked"]}, {}, manifest)

    result = {}

    def assign():
        net = hio.read_network(paths["netf"], classified=False)
        field = hio.read_probability_field(paths["masked"])
        res = classify_network(net, field, cfg.assignment.to_params())
        hio.write_network(paths["classified"], res.network, crs)
        result["res"] = res

    run_stage("assign", assign, {"network": paths["netf"], "probabilities": paths["masked"]},
              {"classified": paths["classified"]}, cfg.assignment.__dict__, manifest)
    report = None
    if paths["gt"].exists():
        def evaluate():
            nonlocal report
            gt = hio.read_network(paths["gt"], classified=True)
            rep = line_metrics(gt, result["res"].network, cfg.evaluation.line_buffer)
            report = rep.to_dict()
            paths["report"].write_text(rep.to_json() + "\n")
            log.info("line metrics\n%s", rep.table())

        run_stage("eval", evaluate, {"ground_truth": paths["gt"], "classified": paths["classified"]},
                  {"report": paths["report"]}, cfg.evaluation.__dict__, manifest)
    if cfg.io.render:
        def render():
            hio.write_raster(paths["overlay"], render_overlay(hio.read_raster(paths["map"]), result["res"].network))

        run_stage("render", render, {"map": paths["map"], "classified": paths["classified"]},
                  {"overlay": paths["overlay"]}, {}, manifest)
    return PipelineResult(out, result["res"].network, report, result["res"].failures)


# -- sensitivity sweep -----------------------------------------------------------


SWEEP_COLUMNS = ["delta", "l", "beta", "class", "completeness", "correctness"]


def sweep_cells(deltas: Sequence[float], lengths: Sequence[float], betas: Sequence[float],
                base: Tuple[float, float, float] = (10.0, 80.0, 6.0), full_grid: bool = False):
    """Parameter cells to evaluate.

    By default one parameter varies at a time around ``base``, duplicates removed;
    ``full_grid`` gives the whole cartesian product.
    """
    if full_grid:
        return [(d, l, b) for d in deltas for l in lengths for b in betas]
    cells = [(d, base[1], base[2]) for d in deltas]
    cells += [(base[0], l, base[2]) for l in lengths]
    cells += [(base[0], base[1], b) for b in betas]
    seen, out = set(), []
    for c in cells:
        if c not in seen:
            seen.add(c)
            out.append(c)
    return out


def _fmt(v):
    return "" if v is None else f"{v:.6f}"


def run_sweep(network_path, field_path, gt_path, out_csv, cells, end_trim: float = 20.0,
              line_buffer: float = 5.0, cache_dir=None) -> Path:
    """Assign and evaluate every cell; per-cell JSON results make reruns resumable."""
    net = hio.read_network(network_path, classified=False)
    field = hio.read_probability_field(field_path)
    gt = hio.read_network(gt_path, classified=True)
    out_csv = Path(out_csv)
    cache = Path(cache_dir) if cache_dir else out_csv.parent / "sweep_cells"
    cache.mkdir(parents=True, exist_ok=True)
    key = params_hash([file_hash(network_path), file_hash(field_path), file_hash(gt_path), end_trim, line_buffer])
    rows = []
    for d, l, b in cells:
        cell = cache / f"d{d:g}_l{l:g}_b{b:g}.json"
        doc = json.loads(cell.read_text()) if cell.exists() else None
        if doc is None or doc.get("key") != key:
            res = classify_network(net, field, AssignmentParams(d, l, b, end_trim))
            doc = {"key": key, "report": line_metrics(gt, res.network, line_buffer).to_dict()}
            cell.write_text(json.dumps(doc, sort_keys=True) + "\n")
        rep = doc["report"]
        for c, s in sorted(rep["classes"].items(), key=lambda kv: int(kv[0])):
            rows.append([f"{d:g}", f"{l:g}", f"{b:g}", c, _fmt(s["completeness"]), _fmt(s["correctness"])])
        w = rep["weighted"]
        rows.append([f"{d:g}", f"{l:g}", f"{b:g}", "weighted", _fmt(w["completeness"]), _fmt(w["correctness"])])
    with open(out_csv, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(SWEEP_COLUMNS)
        wr.writerows(rows)
    return out_csv
