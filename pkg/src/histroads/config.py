"""Pipeline configuration: one TOML file with a section per stage.

Unknown sections or keys are rejected and every value is checked against
the preconditions of the module that consumes it before any stage runs.
"""
from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import List

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .assignment import AssignmentParams
from .painter import ClassSymbol, SymbologySpec, default_symbols


class ConfigError(ValueError):
    pass


@dataclass
class TilingConfig:
    tile_size: int = 500
    overlap: int = 125


@dataclass
class MorphologyConfig:
    min_area: int = 100
    closing_size: int = 3


@dataclass
class VectorizeConfig:
    epsilon: float = 1.9


@dataclass
class GridConfig:
    enabled: bool = True
    spacing: float = 1000.0
    buffer: float = 3.75
    net_tolerance: float = 2.5


@dataclass
class SymbolConfig:
    line_count: int = 1
    stroke_width: float = 1.0
    gap: float = 0.0
    dash: List[float] = field(default_factory=list)
    dashed: List[bool] = field(default_factory=lambda: [False, False])
    color: List[int] = field(default_factory=lambda: [35, 30, 25])
    width_jitter: float = 0.0
    gap_jitter: float = 0.0

    def to_symbol(self) -> ClassSymbol:
        return ClassSymbol(self.line_count, self.stroke_width, self.gap, tuple(self.dash), tuple(self.dashed),
                           tuple(self.color), self.width_jitter, self.gap_jitter)

    @classmethod
    def from_symbol(cls, s: ClassSymbol) -> "SymbolConfig":
        return cls(s.line_count, s.stroke_width, s.gap, list(s.dash), list(s.dashed), list(s.color),
                   s.width_jitter, s.gap_jitter)


@dataclass
class SymbologyConfig:
    background: List[int] = field(default_factory=lambda: [247, 235, 205])
    overpaint_width: float = 13.0
    classes: List[SymbolConfig] = field(default_factory=lambda: [SymbolConfig.from_symbol(s) for s in default_symbols()])

    def to_spec(self) -> SymbologySpec:
        return SymbologySpec(tuple(c.to_symbol() for c in self.classes), tuple(self.background), self.overpaint_width)


@dataclass
class ProbabilityConfig:
    source: str = "baseline"
    ensemble: List[str] = field(default_factory=list)
    temperature: float = 0.1
    pool_radius: int = 5
    sigma: float = 1.0
    window: int = 0
    label_noise: float = 0.05
    region_width: float = 10.0


@dataclass
class AssignmentConfig:
    delta: float = 10.0
    min_length: float = 80.0
    beta: float = 6.0
    end_trim: float = 20.0

    def to_params(self) -> AssignmentParams:
        return AssignmentParams(self.delta, self.min_length, self.beta, self.end_trim)


@dataclass
class EvaluationConfig:
    line_buffer: float = 5.0


@dataclass
class SyntheticConfig:
    enabled: bool = True
    width: int = 2000
    height: int = 2000
    pixel_size: float = 1.25
    origin_x: float = 600000.0
    origin_y: float = 205000.0
    n_segments: int = 40
    min_length: float = 100.0
    max_length: float = 1000.0
    min_separation: float = 30.0
    label_width: float = 13.0
    segmentation_width: float = 10.0
    speckles: int = 30


@dataclass
class SweepConfig:
    delta: List[float] = field(default_factory=lambda: [5.0, 10.0, 20.0])
    min_length: List[float] = field(default_factory=lambda: [40.0, 80.0, 120.0])
    beta: List[float] = field(default_factory=lambda: [4.0, 6.0, 10.0])
    full_grid: bool = False


@dataclass
class IOConfig:
    output_dir: str = "out"
    sheet: str = "sheet"
    map: str = ""
    segmentation: str = ""
    ground_truth: str = ""
    crs_epsg: int = 2056
    render: bool = True


@dataclass
class SeedConfig:
    network: int = 0
    paint: int = 0
    noise: int = 0


SECTIONS = {
    "io": IOConfig,
    "seeds": SeedConfig,
    "synthetic": SyntheticConfig,
    "tiling": TilingConfig,
    "morphology": MorphologyConfig,
    "vectorize": VectorizeConfig,
    "grid": GridConfig,
    "symbology": SymbologyConfig,
    "probability": ProbabilityConfig,
    "assignment": AssignmentConfig,
    "evaluation": EvaluationConfig,
    "sweep": SweepConfig,
}


@dataclass
class PipelineConfig:
    io: IOConfig = field(default_factory=IOConfig)
    seeds: SeedConfig = field(default_factory=SeedConfig)
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)
    tiling: TilingConfig = field(default_factory=TilingConfig)
    morphology: MorphologyConfig = field(default_factory=MorphologyConfig)
    vectorize: VectorizeConfig = field(default_factory=VectorizeConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    symbology: SymbologyConfig = field(default_factory=SymbologyConfig)
    probability: ProbabilityConfig = field(default_factory=ProbabilityConfig)
    assignment: AssignmentConfig = field(default_factory=AssignmentConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        unknown = sorted(set(doc) - set(SECTIONS))
        if unknown:
            raise ConfigError(f"unknown config section(s): {', '.join(unknown)}")
        kw = {}
        for name, klass in SECTIONS.items():
            body = doc.get(name, {})
            if not isinstance(body, dict):
                raise ConfigError(f"[{name}] must be a table")
            if name == "symbology" and "classes" in body:
                body = dict(body)
                body["classes"] = [_build(SymbolConfig, c, f"symbology.classes[{i}]")
                                   for i, c in enumerate(body["classes"])]
            kw[name] = _build(klass, body, name)
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        """Check every value against the consuming module; raise ConfigError."""
        try:
            self.symbology.to_spec()
            self.assignment.to_params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        t = self.tiling
        if t.overlap < 0 or t.tile_size <= 2 * t.overlap:
            raise ConfigError("tiling.tile_size must exceed twice tiling.overlap")
        if self.morphology.min_area < 0:
            raise ConfigError("morphology.min_area must be non-negative")
        if self.morphology.closing_size < 1 or self.morphology.closing_size % 2 == 0:
            raise ConfigError("morphology.closing_size must be a positive odd integer")
        if self.vectorize.epsilon < 0:
            raise ConfigError("vectorize.epsilon must be non-negative")
        g = self.grid
        if g.spacing <= 0 or g.buffer < 0 or g.net_tolerance < 0:
            raise ConfigError("grid spacing must be positive and tolerances non-negative")
        p = self.probability
        if p.source not in ("baseline", "oracle", "files"):
            raise ConfigError("probability.source must be 'baseline', 'oracle' or 'files'")
        if p.source == "files" and not p.ensemble:
            raise ConfigError("probability.source = 'files' needs a non-empty probability.ensemble list")
        if p.source == "oracle" and not self.synthetic.enabled:
            raise ConfigError("probability.source = 'oracle' only works in synthetic mode")
        if p.temperature <= 0:
            raise ConfigError("probability.temperature must be positive")
        if p.pool_radius < 0 or p.sigma < 0 or p.window < 0 or (p.window and p.window % 2 == 0):
            raise ConfigError("probability.pool_radius/sigma must be >= 0 and window 0 (auto) or odd")
        if not 0 <= p.label_noise <= 1:
            raise ConfigError("probability.label_noise must be in [0, 1]")
        if p.region_width < 1:
            raise ConfigError("probability.region_width must be at least 1 pixel")
        if self.evaluation.line_buffer <= 0:
            raise ConfigError("evaluation.line_buffer must be positive")
        s = self.synthetic
        if s.enabled:
            if s.width < 1 or s.height < 1 or s.pixel_size <= 0:
                raise ConfigError("synthetic sheet dimensions and pixel size must be positive")
            if not 0 < s.min_length <= s.max_length:
                raise ConfigError("synthetic.min_length must be positive and <= max_length")
            if s.n_segments < 1:
                raise ConfigError("synthetic.n_segments must be positive")
        else:
            if not self.io.map or not self.io.segmentation:
                raise ConfigError("non-synthetic runs need io.map and io.segmentation")
        for name in ("delta", "min_length", "beta"):
            vals = getattr(self.sweep, name)
            if not vals or any(v <= 0 for v in vals):
                raise ConfigError(f"sweep.{name} must be a non-empty list of positive values")


def _build(klass, body: dict, where: str):
    names = {f.name for f in fields(klass)}
    unknown = sorted(set(body) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(unknown)}")
    defaults = klass()
    kw = {}
    for f in fields(klass):
        if f.name not in body:
            continue
        kw[f.name] = _coerce(body[f.name], getattr(defaults, f.name), f"{where}.{f.name}")
    return klass(**kw)


def _coerce(value, default, where: str):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be true or false")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string")
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{where} must be a list")
        if default and not isinstance(default[0], (dict, SymbolConfig)):
            return [_coerce(v, default[0], f"{where}[{i}]") for i, v in enumerate(value)]
        return list(value)
    return value


def load_config(path) -> PipelineConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return PipelineConfig.from_dict(doc)


def default_config_text() -> str:
    return PipelineConfig().to_toml()
