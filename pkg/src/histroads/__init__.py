"""Vectorize and classify roads on scanned topographic map sheets."""

from .types import (
    ClassifiedNetwork,
    GeoRaster,
    GeoTransform,
    Polyline,
    ProbabilityField,
    RoadClass,
    RoadNetwork,
    Section,
    Segment,
    Semantics,
)

__version__ = "0.1.0"

__all__ = [
    "ClassifiedNetwork",
    "GeoRaster",
    "GeoTransform",
    "Polyline",
    "ProbabilityField",
    "RoadClass",
    "RoadNetwork",
    "Section",
    "Segment",
    "Semantics",
]
