import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from histroads.morphology import skeletonize
from histroads.types import GeoRaster, Polyline, RasterError, RoadNetwork, Semantics
from histroads.vectorize import (
    DEFAULT_EPSILON,
    GridSpec,
    assemble_segments,
    douglas_peucker,
    filter_grid_lines,
    is_grid_line,
    simplify_network,
    simplify_polyline,
    trace_skeleton,
    vectorize_skeleton,
)

from oracles import point_polyline_distance, road_like_mask


def _sk(tr, rows_cols, shape=(12, 12)):
    m = np.zeros(shape, np.uint8)
    for r, c in rows_cols:
        m[r, c] = 1
    return GeoRaster(m, tr, Semantics.BINARY_MASK)


def test_collinear_pixels_form_path(tr):
    pe = trace_skeleton(_sk(tr, [(3, c) for c in range(2, 7)]))
    assert len(pe) == 4


def test_isolated_pixel(tr):
    pe = trace_skeleton(_sk(tr, [(5, 5)]))
    assert len(pe) == 0 and pe.n_isolated == 1
    net, n_iso = vectorize_skeleton(_sk(tr, [(5, 5)]))
    assert len(net.segments) == 0 and n_iso == 1


def test_l_corner_drops_diagonal(tr):
    pe = trace_skeleton(_sk(tr, [(2, 2), (2, 3), (3, 3)]))
    assert len(pe) == 2
    pairs = {tuple(e) for e in pe.edges.tolist()}
    w = 12
    assert (2 * w + 2, 3 * w + 3) not in pairs


def test_rejects_thick_input(tr):
    with pytest.raises(RasterError):
        trace_skeleton(_sk(tr, [(2, 2), (2, 3), (3, 2), (3, 3)]))


def test_t_shape(tr):
    px = [(2, c) for c in range(1, 10)] + [(r, 5) for r in range(3, 9)]
    net = assemble_segments(trace_skeleton(_sk(tr, px)))
    assert len(net.segments) == 3
    assert len(net.nodes) == 4
    assert sorted(net.degree().values()) == [1, 1, 1, 3]
    assert math.isclose(net.total_length, (8 + 6) * 1.25)


def test_open_chain(tr):
    px = [(4, c) for c in range(1, 6)] + [(5, 6), (6, 7), (6, 8)]
    net = assemble_segments(trace_skeleton(_sk(tr, px)))
    assert len(net.segments) == 1 and len(net.nodes) == 2
    line = next(iter(net.segments.values())).line
    assert len(line) == len(px)
    assert math.isclose(line.length, 1.25 * (4 + 2 * math.sqrt(2) + 1))


def test_ring_is_one_closed_segment(tr):
    px = [(2, c) for c in range(2, 6)] + [(5, c) for c in range(2, 6)] + [(3, 2), (4, 2), (3, 5), (4, 5)]
    assert len(px) == 12
    net = assemble_segments(trace_skeleton(_sk(tr, px)))
    assert len(net.segments) == 1
    seg = next(iter(net.segments.values()))
    assert seg.start_node == seg.end_node
    assert seg.line.is_closed and len(seg.line) == 13


def test_vertices_are_pixel_centers(tr):
    net, _ = vectorize_skeleton(_sk(tr, [(0, c) for c in range(3)]))
    line = next(iter(net.segments.values())).line
    xs = sorted(line.coords[:, 0].tolist())
    assert xs == [600000.625, 600001.875, 600003.125]
    assert set(line.coords[:, 1].tolist()) == {199999.375}


def test_every_skeleton_edge_is_covered(tr):
    rng = np.random.default_rng(3)
    sk = skeletonize(road_like_mask(rng, (60, 60), 4))
    pe = trace_skeleton(GeoRaster(sk.astype(np.uint8), tr, Semantics.BINARY_MASK))
    net = assemble_segments(pe)
    # every pixel edge appears exactly once along the assembled polylines
    n_vertex_steps = sum(len(s.line) - 1 for s in net.segments.values())
    assert n_vertex_steps == len(pe)


def test_collinear_vertices_simplify_to_two():
    line = Polyline(np.column_stack([np.arange(10) * 3.0, np.arange(10) * 1.5]))
    assert len(simplify_polyline(line)) == 2


def test_default_epsilon_exceeds_diagonal_pitch():
    assert 1.25 * math.sqrt(2) < DEFAULT_EPSILON


def _zigzag(rng, n):
    steps = rng.normal(0, 1.0, (n, 2)) * [1.0, 2.0] + [1.5, 0]
    return np.cumsum(steps, axis=0)


@pytest.mark.parametrize("seed", range(20))
def test_simplified_within_epsilon_brute_force(seed):
    rng = np.random.default_rng(seed)
    pts = _zigzag(rng, int(rng.integers(3, 60)))
    keep = douglas_peucker(pts, 1.9)
    simp = pts[keep]
    assert keep[0] == 0 and keep[-1] == len(pts) - 1
    for p in pts:
        assert point_polyline_distance(p, simp) <= 1.9 + 1e-9


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 5.0))
def test_simplify_idempotent(seed, eps):
    pts = _zigzag(np.random.default_rng(seed), 25)
    line = Polyline(pts)
    once = simplify_polyline(line, eps)
    assert np.array_equal(simplify_polyline(once, eps).coords, once.coords)


def test_simplify_network_keeps_topology(tr):
    px = [(2, c) for c in range(1, 10)] + [(r, 5) for r in range(3, 9)]
    net = assemble_segments(trace_skeleton(_sk(tr, px)))
    simp = simplify_network(net)
    assert simp.nodes == net.nodes
    for sid, seg in simp.segments.items():
        assert seg.line.start == net.segments[sid].line.start and seg.line.end == net.segments[sid].line.end
        assert len(seg.line) == 2


GRID = GridSpec(xs=(600000.0, 601000.0), ys=(200000.0, 201000.0))


def test_line_on_grid_removed():
    assert is_grid_line(Polyline([[600100, 201000], [600600, 201000]]), GRID)
    assert is_grid_line(Polyline([[601000, 200100], [601000, 200600]]), GRID)


def test_diagonal_crossing_kept():
    assert not is_grid_line(Polyline([[600100, 200900], [600300, 201100]]), GRID)


def test_zigzag_near_grid():
    xs = np.linspace(600100, 600400, 7)
    ys = 201000 + np.array([0, 1.0, -0.5, 1.2, -0.8, 0.9, 0.4])
    assert is_grid_line(Polyline(np.column_stack([xs, ys])), GRID)
    assert not is_grid_line(Polyline(np.column_stack([xs, ys + 6.0])), GRID)


def test_axis_ratio_rule():
    # net across 2 m within tolerance, but along only 15 m: not grid-like
    assert not is_grid_line(Polyline([[600100, 201000], [600115, 201002]]), GRID)
    assert is_grid_line(Polyline([[600100, 201000], [600125, 201002]]), GRID)


def test_filter_grid_lines_network():
    net = RoadNetwork.from_polylines({
        "g": Polyline([[600100, 201000], [600600, 201000]]),
        "r": Polyline([[600600, 201000], [600900, 201300]]),
    })
    kept, removed = filter_grid_lines(net, GRID)
    assert removed == ["g"]
    assert set(kept.segments) == {"r"}
    assert len(kept.nodes) == 2


def test_grid_spec_validation():
    with pytest.raises(ValueError):
        GridSpec(xs=(2.0, 1.0))
    with pytest.raises(ValueError):
        GridSpec()
    g = GridSpec.regular(600000, 602500, 200000, 201000)
    assert g.xs == (600000.0, 601000.0, 602000.0) and g.ys == (200000.0, 201000.0)
