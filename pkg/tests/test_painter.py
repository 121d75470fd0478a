import logging
import math

import numpy as np
import pytest

from histroads.painter import (
    ClassSymbol,
    SymbologySpec,
    assign_random_classes,
    build_synthetic_dataset,
    paint_symbology,
    rasterize_centerlines,
    rasterize_labels,
)
from histroads.types import GeoRaster, GeoTransform, Polyline, RoadNetwork, Semantics

from oracles import pixels_within

TR = GeoTransform(0.0, 200.0, 1.25)  # 160 x 160 px sheet


def _net(lines):
    return RoadNetwork.from_polylines({k: Polyline(v) for k, v in lines.items()})


def _white(h=160, w=160):
    return GeoRaster(np.full((3, h, w), 255, np.uint8), TR, Semantics.RGB)


def test_centerline_band(tr):
    net = _net({"a": [[50.0, 100.0], [150.0, 100.0]]})
    m = rasterize_centerlines(net, 10, TR, (160, 160)).band
    cols = np.nonzero(m.any(axis=0))[0]
    mid = m[:, (cols.min() + cols.max()) // 2]
    assert mid.sum() == 10
    # rounded ends: the band is longer at the centre row than at its edge rows
    rows = np.nonzero(m.any(axis=1))[0]
    assert m[rows[0]].sum() < m[rows[len(rows) // 2]].sum()
    # body plus two half-disc caps
    expected = 100 / 1.25 * 10 + math.pi * 5 ** 2
    assert abs(m.sum() - expected) / expected < 0.05


def test_empty_network_background():
    net = RoadNetwork({}, {})
    assert not rasterize_centerlines(net, 10, TR, (20, 20)).band.any()
    assert assign_random_classes(net, 1) == {}


@pytest.mark.parametrize("seed", range(3))
def test_region_mask_matches_distance_oracle(seed):
    rng = np.random.default_rng(seed)
    tr = GeoTransform(0.0, 60.0, 1.25)
    coords = rng.uniform(5, 55, (4, 2))
    net = _net({"a": coords})
    got = rasterize_centerlines(net, 10, tr, (48, 48)).band.astype(bool)
    ref = pixels_within(coords, tr, (48, 48), 5 * 1.25)
    assert np.array_equal(got, ref)


def test_assignment_deterministic_and_order_free():
    lines = {f"s{i}": [[i * 10.0, 0.0], [i * 10.0 + 5, 5.0]] for i in range(30)}
    a = assign_random_classes(_net(lines), 7)
    b = assign_random_classes(_net(dict(reversed(list(lines.items())))), 7)
    assert a == b
    assert a != assign_random_classes(_net(lines), 8)


def test_class_frequencies_binomial():
    n = 10_000
    segs = {f"s{i}": Polyline([[float(i), 0.0], [float(i), 1.0]]) for i in range(n)}
    net = RoadNetwork.from_polylines(segs)
    counts = np.bincount(list(assign_random_classes(net, 2024).values()), minlength=6)[1:]
    bound = 5 * math.sqrt(n * 0.2 * 0.8)
    assert np.all(np.abs(counts - n / 5) <= bound)


def test_class2_is_single_solid_stroke():
    # on pixel-centre row 79 so the 1 px stroke covers exactly one row
    net = _net({"a": [[20.0, 100.625], [180.0, 100.625]]})
    out = paint_symbology(_white(), net, {"a": 2}, seed=0).data
    dark = out[0] < 128
    cols = np.nonzero(dark.any(axis=0))[0]
    inner = dark[:, cols.min() + 2:cols.max() - 1]
    # one contiguous run per column, the same row everywhere for a horizontal line
    assert np.all(inner.sum(axis=0) == 1)
    assert np.all(np.diff(cols) == 1)
    # corridor is background-filled
    spec = SymbologySpec()
    row = int(np.nonzero(dark.any(axis=1))[0][0])
    assert tuple(out[:, row + 3, 80]) == spec.background


def test_class1_dash_duty_cycle():
    net = _net({"a": [[10.0, 100.0], [190.0, 100.0]]})
    out = paint_symbology(_white(), net, {"a": 1}, seed=5).data
    dark = (out[0] < 128).any(axis=0)
    n_px = 180 / 1.25
    duty = dark.sum() / n_px
    assert abs(duty - 0.6) <= 0.1 * 0.6


def test_double_line_symbols_have_two_strokes():
    net = _net({"a": [[20.0, 100.0], [180.0, 100.0]]})
    for cls in (4, 5):
        out = paint_symbology(_white(), net, {"a": cls}, seed=1).data
        col = out[0, :, 80] < 128
        runs = np.count_nonzero(np.diff(col.astype(int)) == 1)
        assert runs == 2


def test_untouched_pixels_identical():
    rng = np.random.default_rng(0)
    base = GeoRaster(rng.integers(0, 256, (3, 160, 160), dtype=np.uint8), TR, Semantics.RGB)
    coords = [[30.0, 30.0], [120.0, 150.0], [180.0, 60.0]]
    net = _net({"a": coords})
    spec = SymbologySpec()
    out = paint_symbology(base, net, {"a": 5}, spec, 3).data
    far = ~pixels_within(np.asarray(coords), TR, (160, 160), spec.overpaint_width / 2 * 1.25)
    assert np.array_equal(out[:, far], base.data[:, far])
    assert not np.array_equal(out, base.data)


def test_labels_single_class4_width_13():
    net = _net({"a": [[20.0, 100.625], [180.0, 100.625]]})
    lab = rasterize_labels(net, {"a": 4}, 13, TR, (160, 160)).band
    assert set(np.unique(lab).tolist()) == {0, 4}
    assert (lab[:, 80] == 4).sum() == 13


def test_crossing_labels_higher_class_wins():
    net = _net({"a": [[20.0, 100.0], [180.0, 100.0]], "b": [[100.0, 20.0], [100.0, 180.0]]})
    lab = rasterize_labels(net, {"a": 2, "b": 5}, 13, TR, (160, 160)).band
    assert lab[80, 80] == 5
    assert set(np.unique(lab).tolist()) == {0, 2, 5}
    lab2 = rasterize_labels(net, {"a": 5, "b": 2}, 13, TR, (160, 160)).band
    assert lab2[80, 80] == 5


def test_dataset_deterministic_and_seed_sensitive():
    net = _net({"a": [[20.0, 30.0], [180.0, 170.0]], "b": [[20.0, 170.0], [90.0, 110.0]]})
    a = build_synthetic_dataset(_white(), net, seed=11)
    b = build_synthetic_dataset(_white(), net, seed=11)
    assert np.array_equal(a.map.data, b.map.data) and np.array_equal(a.labels.data, b.labels.data)
    assert a.assignment == b.assignment
    c = build_synthetic_dataset(_white(), net, seed=12, assignment=a.assignment)
    assert not np.array_equal(a.map.data, c.map.data)
    gt = a.ground_truth
    assert {s.road_class for _, s in gt.items()} == set(a.assignment.values())


def test_region_mask_width():
    net = _net({"a": [[20.0, 100.0], [180.0, 100.0]]})
    trip = build_synthetic_dataset(_white(), net, seed=0)
    assert trip.region_mask.band[:, 80].sum() == 10


def test_overpaint_narrower_than_symbol_rejected():
    with pytest.raises(ValueError):
        SymbologySpec(overpaint_width=5)
    with pytest.raises(ValueError):
        SymbologySpec(symbols=(ClassSymbol(),) * 4)


def test_outside_segments_warn(caplog):
    net = _net({"a": [[1000.0, 1000.0], [1100.0, 1000.0]]})
    with caplog.at_level(logging.WARNING):
        out = paint_symbology(_white(), net, {"a": 3}, seed=0)
    assert np.array_equal(out.data, _white().data)
    assert "outside the raster" in caplog.text
