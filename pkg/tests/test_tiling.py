import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from histroads.tiling import TilingError, make_tiles, stitch_tiles, tile_name
from histroads.types import GeoRaster, GeoTransform, ProbabilityField, Semantics


def test_sheet_tile_count(tr):
    r = GeoRaster(np.zeros((1, 4800, 7000), np.uint8), tr)
    g = make_tiles(r)
    assert (g.n_cols, g.n_rows) == (28, 20)
    assert len(g.tiles) == 560
    assert all(t.width == t.height == 500 for _, _, t in g.tiles)


def test_single_stride_raster(tr, rng):
    r = GeoRaster(rng.integers(0, 256, (1, 250, 250), dtype=np.uint8), tr)
    g = make_tiles(r)
    assert len(g.tiles) == 1
    _, _, t = g.tiles[0]
    assert np.array_equal(t.data[:, 125:375, 125:375], r.data)
    assert np.array_equal(stitch_tiles(g).data, r.data)


def test_tile_origin_offset(tr):
    g = make_tiles(GeoRaster(np.zeros((1, 600, 600), np.uint8), tr))
    t01 = dict(((r, c), t) for r, c, t in g.tiles)[(0, 1)]
    assert t01.transform.origin_x == tr.origin_x + (250 - 125) * 1.25
    assert t01.transform.origin_y == tr.origin_y + 125 * 1.25


def test_tile_pixels_are_georeferenced(tr, rng):
    r = GeoRaster(rng.integers(0, 256, (1, 700, 900), dtype=np.uint8), tr)
    g = make_tiles(r)
    for _, _, t in g.tiles[:6]:
        # any tile pixel inside the source shows the source pixel at the same location
        x, y = t.transform.pixel_center(200, 210)
        c, rr = tr.pixel_of(x, y)
        if 0 <= rr < 700 and 0 <= c < 900:
            assert t.data[0, 210, 200] == r.data[0, rr, c]


def test_round_trip_random_mask(tr, rng):
    m = GeoRaster((rng.random((750, 1000)) < 0.3).astype(np.uint8), tr, Semantics.BINARY_MASK)
    back = stitch_tiles(make_tiles(m))
    assert np.array_equal(back.data, m.data)
    assert back.transform == tr and back.semantics is Semantics.BINARY_MASK


@settings(max_examples=30, deadline=None)
@given(h=st.integers(1, 700), w=st.integers(1, 700), ts=st.sampled_from([(500, 125), (64, 16), (9, 4), (10, 0)]))
def test_round_trip_property(h, w, ts):
    data = np.random.default_rng(h * 1000 + w).integers(0, 256, (3, h, w), dtype=np.uint8)
    r = GeoRaster(data, GeoTransform(0.0, 0.0, 1.0), Semantics.RGB)
    assert np.array_equal(stitch_tiles(make_tiles(r, *ts)).data, r.data)


@pytest.mark.slow
def test_full_sheet_round_trip_fast(tr, rng):
    data = rng.integers(0, 256, (1, 4800, 7000), dtype=np.uint8)
    r = GeoRaster(data, tr)
    t0 = time.perf_counter()
    back = stitch_tiles(make_tiles(r))
    dt = time.perf_counter() - t0
    assert np.array_equal(back.data, data)
    assert dt < 2.0


def test_probability_tiles_stitch_to_field(tr, rng):
    d = rng.random((6, 300, 320)).astype(np.float32)
    d /= d.sum(axis=0)
    f = ProbabilityField(d, tr, validate=False)
    back = stitch_tiles(make_tiles(f, 100, 25))
    assert isinstance(back, ProbabilityField)
    assert np.array_equal(back.data, f.data)


def test_missing_tile_error(tr):
    g = make_tiles(GeoRaster(np.zeros((1, 600, 600), np.uint8), tr))
    with pytest.raises(TilingError, match="missing"):
        stitch_tiles(g.with_tiles(g.tiles[1:]))


def test_bad_tile_size(tr):
    with pytest.raises(TilingError):
        make_tiles(GeoRaster(np.zeros((1, 10, 10), np.uint8), tr), 250, 125)


def test_tile_name():
    assert tile_name("TA_1", 2, 3) == "TA_1_2_3.png"
