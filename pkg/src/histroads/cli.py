"""Command-line entry point: one subcommand per stage plus pipeline and sweep.

Exit codes: 0 success, 2 configuration or usage error, 3 data error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import io as hio
from .assignment import AssignmentParams, classify_network
from .config import ConfigError, PipelineConfig, default_config_text, load_config
from .evaluation import line_metrics, pixel_metrics
from .painter import build_synthetic_dataset
from .pipeline import (
    MANIFEST,
    gridfilter_file,
    morph_file,
    run_pipeline,
    run_stage,
    run_sweep,
    skeleton_file,
    stitch_file,
    sweep_cells,
    tile_file,
    vectorize_file,
)
from .probability import apply_hard_mask, baseline_classifier, ensemble_average
from .render import render_overlay
from .types import GeometryError, RasterError, Semantics

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3

log = logging.getLogger("histroads")


def _floats(text: str):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _config(args) -> PipelineConfig:
    return load_config(args.config) if getattr(args, "config", None) else PipelineConfig()


def _manifest(args, out) -> Path:
    return Path(args.manifest) if getattr(args, "manifest", None) else Path(out).parent / MANIFEST


def _stage(args, name, fn, inputs, outputs, params, seed=None):
    out = next(iter(outputs.values()))
    run_stage(name, fn, {k: Path(v) for k, v in inputs.items()}, {k: Path(v) for k, v in outputs.items()},
              params, _manifest(args, out), seed)


def cmd_tile(args):
    layout = {}

    def go():
        layout["path"] = tile_file(args.input, args.out_dir, args.sheet, args.tile_size, args.overlap)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _stage(args, "tile", go, {"raster": args.input}, {"layout": out_dir / f"{args.sheet}_tiles.json"},
           {"tile_size": args.tile_size, "overlap": args.overlap})
    print(layout["path"])


def cmd_stitch(args):
    _stage(args, "stitch", lambda: stitch_file(args.layout, args.out, args.ext, args.semantics),
           {"layout": args.layout}, {"raster": args.out}, {"ext": args.ext})


def cmd_morph(args):
    _stage(args, "morph", lambda: morph_file(args.input, args.out, args.min_area, args.closing_size),
           {"mask": args.input}, {"mask": args.out}, {"min_area": args.min_area, "closing_size": args.closing_size})


def cmd_skeleton(args):
    _stage(args, "skeleton", lambda: skeleton_file(args.input, args.out), {"mask": args.input},
           {"skeleton": args.out}, {})


def cmd_vectorize(args):
    _stage(args, "vectorize", lambda: vectorize_file(args.input, args.out, args.epsilon, args.crs),
           {"skeleton": args.input}, {"network": args.out}, {"epsilon": args.epsilon})


def cmd_gridfilter(args):
    removed = []

    def go():
        removed.extend(gridfilter_file(args.input, args.out, args.spacing, args.buffer, args.net_tolerance, args.crs))

    _stage(args, "gridfilter", go, {"network": args.input}, {"network": args.out},
           {"spacing": args.spacing, "buffer": args.buffer, "net_tolerance": args.net_tolerance})
    print(f"removed {len(removed)} grid segment(s)")


def cmd_paint(args):
    spec = _config(args).symbology.to_spec()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def go():
        base = hio.read_raster(args.base)
        net = hio.read_network(args.network, classified=False)
        trip = build_synthetic_dataset(base, net, spec, args.seed, args.label_width, args.region_width)
        hio.write_raster(out / "map.png", trip.map)
        hio.write_raster(out / "labels.png", trip.labels)
        hio.write_raster(out / "region.png", trip.region_mask)
        hio.write_network(out / "ground_truth.geojson", trip.ground_truth, args.crs)

    _stage(args, "paint", go, {"base": args.base, "network": args.network}, {"map": out / "map.png"},
           {"label_width": args.label_width, "region_width": args.region_width}, args.seed)


def cmd_classify_baseline(args):
    spec = _config(args).symbology.to_spec()

    def go():
        raster = hio.read_raster(args.input)
        region = hio.read_raster(args.region, Semantics.BINARY_MASK) if args.region else None
        field = baseline_classifier(raster, spec, args.temperature, region, args.pool_radius,
                                    args.window or None, args.sigma)
        hio.write_probability_field(args.out, field)

    inputs = {"map": args.input}
    if args.region:
        inputs["region"] = args.region
    _stage(args, "classify-baseline", go, inputs, {"probabilities": args.out},
           {"temperature": args.temperature, "pool_radius": args.pool_radius, "sigma": args.sigma,
            "window": args.window})


def cmd_ensemble(args):
    _stage(args, "ensemble", lambda: hio.write_probability_field(args.out, ensemble_average(args.members)),
           {f"member{i}": m for i, m in enumerate(args.members)}, {"probabilities": args.out}, {})


def cmd_mask(args):
    def go():
        field = hio.read_probability_field(args.input)
        region = hio.read_raster(args.region, Semantics.BINARY_MASK)
        hio.write_probability_field(args.out, apply_hard_mask(field, region))

    _stage(args, "mask", go, {"probabilities": args.input, "region": args.region}, {"probabilities": args.out}, {})


def cmd_assign(args):
    params = AssignmentParams(args.delta, args.min_length, args.beta, args.end_trim)
    failures = {}

    def go():
        net = hio.read_network(args.network, classified=False)
        field = hio.read_probability_field(args.probabilities)
        if args.profiles:
            Path(args.profiles).mkdir(parents=True, exist_ok=True)
        res = classify_network(net, field, params, args.profiles)
        hio.write_network(args.out, res.network, args.crs)
        failures.update(res.failures)

    _stage(args, "assign", go, {"network": args.network, "probabilities": args.probabilities},
           {"classified": args.out}, params.__dict__)
    for sid, why in failures.items():
        print(f"warning: segment {sid} not classified: {why}", file=sys.stderr)


def cmd_eval(args):
    doc = {}

    def go():
        gt = hio.read_network(args.ground_truth, classified=True)
        pred = hio.read_network(args.prediction, classified=True)
        rep = line_metrics(gt, pred, args.buffer)
        doc.update(rep.to_dict())
        doc["table"] = rep.table()
        if args.probabilities and args.labels:
            field = hio.read_probability_field(args.probabilities)
            labels = hio.read_raster(args.labels, Semantics.CLASS_LABEL)
            doc["pixel"] = pixel_metrics(field, labels, include_no_road=not args.exclude_no_road,
                                         iou_mode=args.iou).to_dict()
        if args.out:
            body = {k: v for k, v in doc.items() if k != "table"}
            Path(args.out).write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")

    inputs = {"ground_truth": args.ground_truth, "prediction": args.prediction}
    if args.out:
        _stage(args, "eval", go, inputs, {"report": args.out}, {"buffer": args.buffer})
    else:
        missing = [p for p in inputs.values() if not Path(p).exists()]
        if missing:
            raise FileNotFoundError(f"missing input(s): {', '.join(missing)}")
        go()
    print(doc["table"])
    if "pixel" in doc:
        px = doc["pixel"]
        print(f"accuracy {px['accuracy']:.4f}  macro F1 {px['macro_f1']:.4f}  IoU {px['iou']:.4f}  "
              f"Brier {px['brier']:.4f}")


def cmd_pipeline(args):
    cfg = _config(args)
    res = run_pipeline(cfg, args.out_dir)
    if res.report:
        w = res.report["weighted"]
        print(f"weighted completeness {100 * w['completeness']:.2f}%  "
              f"weighted correctness {100 * w['correctness']:.2f}%")
    print(f"outputs in {res.output_dir}")


def cmd_sweep(args):
    cfg = _config(args)
    out_dir = Path(args.out_dir or cfg.io.output_dir)
    net, field, gt = out_dir / "network_filtered.geojson", out_dir / "probabilities_masked.probf", \
        out_dir / "ground_truth.geojson"
    if not cfg.grid.enabled:
        net = out_dir / "network.geojson"
    if not (net.exists() and field.exists()):
        run_pipeline(cfg, out_dir)
    if cfg.io.ground_truth:
        gt = Path(cfg.io.ground_truth)
    s = cfg.sweep
    cells = sweep_cells(args.delta or s.delta, args.min_length or s.min_length, args.beta or s.beta,
                        (cfg.assignment.delta, cfg.assignment.min_length, cfg.assignment.beta),
                        args.full_grid or s.full_grid)
    out = Path(args.out) if args.out else out_dir / "sweep.csv"
    run_sweep(net, field, gt, out, cells, cfg.assignment.end_trim, cfg.evaluation.line_buffer)
    print(f"{len(cells)} parameter cell(s) written to {out}")


def cmd_render(args):
    def go():
        base = hio.read_raster(args.base)
        net = hio.read_network(args.network, classified=True)
        hio.write_raster(args.out, render_overlay(base, net, args.width))

    _stage(args, "render", go, {"base": args.base, "network": args.network}, {"overlay": args.out}, {})


def cmd_config(args):
    text = default_config_text()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="histroads", description="Road extraction and classification for scanned map sheets.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=fn)
        sp.add_argument("--manifest", help="manifest file (default: manifest.jsonl next to the output)")
        return sp

    sp = add("tile", cmd_tile, "cut a raster into overlapping tiles")
    sp.add_argument("input")
    sp.add_argument("out_dir")
    sp.add_argument("--sheet", default="sheet")
    sp.add_argument("--tile-size", type=int, default=500)
    sp.add_argument("--overlap", type=int, default=125)

    sp = add("stitch", cmd_stitch, "reassemble tiles from a layout file")
    sp.add_argument("layout")
    sp.add_argument("out")
    sp.add_argument("--ext", default=".png", choices=[".png", ".probf"])
    sp.add_argument("--semantics", choices=[s.value for s in Semantics if s is not Semantics.PROBABILITY])

    sp = add("morph", cmd_morph, "remove small components and close a binary mask")
    sp.add_argument("input")
    sp.add_argument("out")
    sp.add_argument("--min-area", type=int, default=100)
    sp.add_argument("--closing-size", type=int, default=3)

    sp = add("skeleton", cmd_skeleton, "thin a binary mask to one-pixel centerlines")
    sp.add_argument("input")
    sp.add_argument("out")

    sp = add("vectorize", cmd_vectorize, "trace a skeleton into a simplified GeoJSON network")
    sp.add_argument("input")
    sp.add_argument("out")
    sp.add_argument("--epsilon", type=float, default=1.9)
    sp.add_argument("--crs", type=int, default=None, help="EPSG code recorded in the GeoJSON")

    sp = add("gridfilter", cmd_gridfilter, "drop coordinate-grid lines from a network")
    sp.add_argument("input")
    sp.add_argument("out")
    sp.add_argument("--spacing", type=float, default=1000.0)
    sp.add_argument("--buffer", type=float, default=3.75)
    sp.add_argument("--net-tolerance", type=float, default=2.5)
    sp.add_argument("--crs", type=int, default=None)

    sp = add("paint", cmd_paint, "paint class symbology onto a base map")
    sp.add_argument("base")
    sp.add_argument("network")
    sp.add_argument("out_dir")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--label-width", type=float, default=13.0)
    sp.add_argument("--region-width", type=float, default=10.0)
    sp.add_argument("--config", help="TOML config providing the symbology")
    sp.add_argument("--crs", type=int, default=None)

    sp = add("classify-baseline", cmd_classify_baseline, "template-matching class probabilities")
    sp.add_argument("input")
    sp.add_argument("out")
    sp.add_argument("--region", help="binary mask restricting which pixels are scored")
    sp.add_argument("--temperature", type=float, default=0.1)
    sp.add_argument("--pool-radius", type=int, default=5)
    sp.add_argument("--sigma", type=float, default=1.0)
    sp.add_argument("--window", type=int, default=0, help="template size in pixels (0 = automatic)")
    sp.add_argument("--config", help="TOML config providing the symbology")

    sp = add("ensemble", cmd_ensemble, "average probability fields")
    sp.add_argument("out")
    sp.add_argument("members", nargs="+")

    sp = add("mask", cmd_mask, "hard-mask a probability field with a road-region mask")
    sp.add_argument("input")
    sp.add_argument("region")
    sp.add_argument("out")

    sp = add("assign", cmd_assign, "assign road classes along network segments")
    sp.add_argument("network")
    sp.add_argument("probabilities")
    sp.add_argument("out")
    sp.add_argument("--delta", type=float, default=10.0)
    sp.add_argument("--min-length", type=float, default=80.0)
    sp.add_argument("--beta", type=float, default=6.0)
    sp.add_argument("--end-trim", type=float, default=20.0)
    sp.add_argument("--profiles", help="directory for per-segment profile CSVs")
    sp.add_argument("--crs", type=int, default=None)

    sp = add("eval", cmd_eval, "line (and optionally pixel) metrics")
    sp.add_argument("ground_truth")
    sp.add_argument("prediction")
    sp.add_argument("--buffer", type=float, default=5.0)
    sp.add_argument("--out", help="JSON report path")
    sp.add_argument("--probabilities")
    sp.add_argument("--labels")
    sp.add_argument("--iou", choices=["binary", "macro"], default="binary")
    sp.add_argument("--exclude-no-road", action="store_true")

    sp = add("pipeline", cmd_pipeline, "run every stage end to end")
    sp.add_argument("--config")
    sp.add_argument("--out-dir")

    sp = add("sweep", cmd_sweep, "sensitivity sweep over delta, l and beta")
    sp.add_argument("--config")
    sp.add_argument("--out-dir")
    sp.add_argument("--out", help="CSV path (default: <out-dir>/sweep.csv)")
    sp.add_argument("--delta", type=_floats)
    sp.add_argument("--min-length", type=_floats)
    sp.add_argument("--beta", type=_floats)
    sp.add_argument("--full-grid", action="store_true", help="all combinations instead of one at a time")

    sp = add("render", cmd_render, "draw classified sections over a grayscale map")
    sp.add_argument("base")
    sp.add_argument("network")
    sp.add_argument("out")
    sp.add_argument("--width", type=float, default=3.0)

    sp = add("config", cmd_config, "print the default configuration")
    sp.add_argument("--out")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, RasterError, GeometryError, ValueError, KeyError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
