"""Overlay rendering of classified networks for visual inspection."""
from __future__ import annotations

import numpy as np

from .geometry import distance_window
from .types import ClassifiedNetwork, GeoRaster, Semantics

CLASS_COLORS = {
    1: (31, 90, 220),   # blue
    2: (30, 160, 60),   # green
    3: (140, 60, 180),  # purple
    4: (245, 140, 20),  # orange
    5: (215, 30, 40),   # red
}


def render_overlay(base: GeoRaster, network: ClassifiedNetwork, width_px: float = 3.0,
                   fade: float = 0.6) -> GeoRaster:
    """Grayscale, lightened copy of ``base`` with sections drawn in class colors."""
    data = base.data.astype(np.float32)
    if base.semantics is Semantics.RGB:
        gray = 0.299 * data[0] + 0.587 * data[1] + 0.114 * data[2]
    else:
        gray = data[0] * (255.0 if base.semantics is Semantics.BINARY_MASK else 1.0)
    gray = 255.0 - fade * (255.0 - gray)
    rgb = np.repeat(np.clip(np.rint(gray), 0, 255).astype(np.uint8)[None], 3, axis=0)
    tr = base.transform
    half = width_px / 2.0
    for _, sec in network.items():
        win = distance_window(tr.to_pixel_space(sec.line.coords), (base.height, base.width), half)
        if win is None:
            continue
        on = win.dist <= half
        rs, cs = win.slices
        for b, v in enumerate(CLASS_COLORS[sec.road_class]):
            rgb[b, rs, cs][on] = v
    return GeoRaster(rgb, tr, Semantics.RGB)
