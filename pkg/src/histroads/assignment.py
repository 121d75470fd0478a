"""Road-class assignment along vectorized segments.

Each segment is cut into equal parts no longer than ``delta``; the mean class
probabilities inside a ``beta``-radius buffer of every part give a profile
along the segment. Wherever the most probable class changes there is a
candidate split point. Sections shorter than ``min_length`` between split
points are then merged away, and every surviving section is classified by
the zonal mean over its (end-trimmed) extent.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .geometry import cumulative_lengths, distance_window, substring
from .types import (
    N_CLASSES,
    ClassifiedNetwork,
    GeometryError,
    Polyline,
    ProbabilityField,
    RoadNetwork,
    Section,
    natural_key,
)

log = logging.getLogger(__name__)


class ZonalError(ValueError):
    """A zone covers no pixels of the probability field."""


@dataclass(frozen=True)
class AssignmentParams:
    delta: float = 10.0
    min_length: float = 80.0
    beta: float = 6.0
    end_trim: float = 20.0

    def __post_init__(self):
        for name in ("delta", "min_length", "beta", "end_trim"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True, eq=False)
class ZonalProfile:
    starts: np.ndarray
    lengths: np.ndarray
    means: np.ndarray
    empty: np.ndarray

    def __len__(self) -> int:
        return len(self.starts)

    @property
    def classes(self) -> np.ndarray:
        """Most probable class per part; ties go to the lower class id."""
        return np.argmax(self.means, axis=1) + 1

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["part_start_m", "length_m"] + [f"p{c}" for c in range(1, N_CLASSES + 1)])
            for s, l, m in zip(self.starts, self.lengths, self.means):
                w.writerow([f"{s:.6f}", f"{l:.6f}"] + [f"{v:.6f}" for v in m])


@dataclass(frozen=True)
class SplitPoint:
    distance: float
    before: int
    after: int


def discretize_segment(line: Polyline, delta: float) -> np.ndarray:
    """Boundaries of ceil(length / delta) equal parts, as arc-length positions."""
    length = line.length
    if not length > 0:
        raise GeometryError("segment has zero length")
    n = max(1, math.ceil(length / delta - 1e-9))
    bounds = np.arange(n + 1) * (length / n)
    bounds[-1] = length
    return bounds


def zonal_mean(field: ProbabilityField, coords: np.ndarray, beta: float) -> Tuple[np.ndarray, int]:
    """Mean class probabilities over pixel centers within ``beta`` of a polyline.

    Returns the five means and the pixel count; raises ZonalError when the
    buffer does not reach the field at all.
    """
    tr = field.transform
    radius = beta / tr.pixel_size
    win = distance_window(tr.to_pixel_space(coords), (field.height, field.width), radius)
    if win is None:
        raise ZonalError("zone lies outside the probability field")
    inside = win.dist <= radius
    n = int(inside.sum())
    if n == 0:
        return np.zeros(N_CLASSES), 0
    rs, cs = win.slices
    vals = field.data[:N_CLASSES, rs, cs][:, inside]
    return vals.mean(axis=1, dtype=np.float64), n


def zonal_mean_profile(line: Polyline, boundaries: Sequence[float], field: ProbabilityField,
                       beta: float) -> ZonalProfile:
    bounds = np.asarray(boundaries, dtype=np.float64)
    n = len(bounds) - 1
    means = np.zeros((n, N_CLASSES))
    empty = np.zeros(n, dtype=bool)
    reached = False
    for k in range(n):
        part = substring(line, bounds[k], bounds[k + 1])
        try:
            m, count = zonal_mean(field, part.coords, beta)
            reached = True
        except ZonalError:
            m, count = np.zeros(N_CLASSES), 0
        means[k] = m
        empty[k] = count == 0
    if not reached:
        raise ZonalError("segment lies entirely outside the probability field")
    if empty.any() and not empty.all():
        centres = (bounds[:-1] + bounds[1:]) / 2
        for c in range(N_CLASSES):
            means[empty, c] = np.interp(centres[empty], centres[~empty], means[~empty, c])
    return ZonalProfile(bounds[:-1].copy(), np.diff(bounds), means, empty)


def detect_split_candidates(profile: ZonalProfile) -> List[SplitPoint]:
    cls = profile.classes
    out = []
    for k in range(1, len(cls)):
        if cls[k] != cls[k - 1]:
            out.append(SplitPoint(float(profile.starts[k]), int(cls[k - 1]), int(cls[k])))
    return out


def _coalesce(sections: List[List]) -> List[List]:
    out: List[List] = []
    for length, cls in sections:
        if out and out[-1][1] == cls:
            out[-1][0] += length
        else:
            out.append([length, cls])
    return out


def filter_short_sections(sections: Sequence[Tuple[float, int]], min_length: float) -> List[Tuple[float, int]]:
    """Merge away sections shorter than ``min_length``, shortest first.

    * both neighbours share a class: all three become one section;
    * neighbours differ: the short section is halved into its neighbours;
    * at a segment end: the short section joins its only neighbour.
    """
    secs = _coalesce([[float(l), int(c)] for l, c in sections])
    while len(secs) > 1:
        short = [i for i, (l, _) in enumerate(secs) if l < min_length]
        if not short:
            break
        i = min(short, key=lambda j: (secs[j][0], j))
        length = secs[i][0]
        if i == 0:
            secs[1][0] += length
            del secs[0]
        elif i == len(secs) - 1:
            secs[i - 1][0] += length
            del secs[i]
        elif secs[i - 1][1] == secs[i + 1][1]:
            secs[i - 1][0] += length + secs[i + 1][0]
            del secs[i:i + 2]
        else:
            half = length / 2.0
            secs[i - 1][0] += half
            secs[i + 1][0] += length - half
            del secs[i]
        secs = _coalesce(secs)
    return [(l, c) for l, c in secs]


def assign_section_class(line: Polyline, field: ProbabilityField, beta: float, end_trim: float,
                         trim_start: bool = True, trim_end: bool = True) -> Tuple[int, np.ndarray]:
    """Class with the highest zonal mean over the section, ends trimmed.

    Trimming is skipped when the section is no longer than ``2 * end_trim``.
    Returns the class (ties to the lower id) and the five means.
    """
    length = line.length
    a, b = 0.0, length
    if length > 2 * end_trim:
        a = end_trim if trim_start else 0.0
        b = length - end_trim if trim_end else length
    zone = line if (a, b) == (0.0, length) else substring(line, a, b)
    means, n = zonal_mean(field, zone.coords, beta)
    if n == 0 and zone is not line:
        means, n = zonal_mean(field, line.coords, beta)
    if n == 0:
        raise ZonalError("section buffer covers no pixels")
    return int(np.argmax(means)) + 1, means


@dataclass
class SegmentResult:
    sections: List[Section]
    profile: ZonalProfile
    candidates: List[SplitPoint]
    split_points: List[float]


def classify_segment(segment_id: str, line: Polyline, field: ProbabilityField,
                     params: AssignmentParams = AssignmentParams()) -> SegmentResult:
    length = line.length
    bounds = discretize_segment(line, params.delta)
    profile = zonal_mean_profile(line, bounds, field, params.beta)
    candidates = detect_split_candidates(profile)
    cuts = [0.0] + [c.distance for c in candidates] + [length]
    part_cls = profile.classes
    provisional = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        k = int(np.searchsorted(bounds, a, side="right")) - 1
        provisional.append((b - a, int(part_cls[min(k, len(part_cls) - 1)])))
    kept = filter_short_sections(provisional, params.min_length)
    positions = np.concatenate([[0.0], np.cumsum([l for l, _ in kept])])
    positions[-1] = length
    pieces = []
    for k in range(len(kept)):
        piece = substring(line, positions[k], positions[k + 1])
        cls, means = assign_section_class(piece, field, params.beta, params.end_trim,
                                          trim_start=k == 0, trim_end=k == len(kept) - 1)
        pieces.append([positions[k], positions[k + 1], cls, means])
    # neighbours may end up with the same final class
    merged: List[list] = []
    for p in pieces:
        if merged and merged[-1][2] == p[2]:
            prev = merged[-1]
            w0, w1 = prev[1] - prev[0], p[1] - p[0]
            prev[3] = (prev[3] * w0 + p[3] * w1) / (w0 + w1)
            prev[1] = p[1]
        else:
            merged.append(list(p))
    sections = []
    for a, b, cls, means in merged:
        piece = substring(line, a, b)
        sections.append(Section(piece, cls, segment_id, tuple(float(m) for m in means)))
    splits = [float(p[0]) for p in merged[1:]]
    return SegmentResult(sections, profile, candidates, splits)


@dataclass
class ClassificationResult:
    network: ClassifiedNetwork
    split_points: Dict[str, List[float]] = field(default_factory=dict)
    failures: Dict[str, str] = field(default_factory=dict)


def classify_network(network: RoadNetwork, field: ProbabilityField,
                     params: AssignmentParams = AssignmentParams(),
                     profile_dir: Optional[Path] = None) -> ClassificationResult:
    """Classify every segment; failures are collected and processing continues."""
    sections: Dict[str, Section] = {}
    splits: Dict[str, List[float]] = {}
    failures: Dict[str, str] = {}
    for sid in sorted(network.segments, key=natural_key):
        line = network.segments[sid].line
        try:
            res = classify_segment(sid, line, field, params)
        except (ZonalError, GeometryError, ValueError) as exc:
            failures[sid] = str(exc)
            continue
        splits[sid] = res.split_points
        for k, sec in enumerate(res.sections):
            sections[f"{sid}_{k}"] = sec
        if profile_dir is not None:
            res.profile.to_csv(Path(profile_dir) / f"profile_{sid}.csv")
    if failures:
        log.warning("classification failed for %d segment(s): %s", len(failures),
                    ", ".join(sorted(failures, key=natural_key)[:10]))
    return ClassificationResult(ClassifiedNetwork(sections), splits, failures)
