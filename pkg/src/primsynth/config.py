"""Generator configuration.

Every tunable of the pipeline lives in :class:`GenConfig`. The defaults
mirror the published parameter tables for the scene floor plan, object
geometry, materials, lighting and cameras; the few values the tables leave
open are exposed here as ordinary fields.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import yaml


class ConfigError(ValueError):
    """Raised for invalid or unparsable generator configuration."""


@dataclass(frozen=True)
class Range:
    """Closed interval ``[lo, hi]``."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ConfigError(f"non-finite range {self}")
        if self.lo > self.hi:
            raise ConfigError(f"range lower bound {self.lo} exceeds upper bound {self.hi}")

    def contains(self, x: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= x <= self.hi + tol

    def to_json(self) -> list[float]:
        return [self.lo, self.hi]

    @classmethod
    def parse(cls, value: Any) -> Range:
        if isinstance(value, Range):
            return value
        if isinstance(value, dict):
            return cls(value["lo"], value["hi"])
        if isinstance(value, (list, tuple)) and len(value) == 2:
            return cls(value[0], value[1])
        raise ConfigError(f"cannot parse range from {value!r}")


# sum(probs) must be this close to 1 before renormalisation
PROB_SUM_TOLERANCE = 1e-6


@dataclass(frozen=True)
class Categorical:
    """Discrete distribution over ``items`` with weights ``probs``.

    Probabilities that sum to within ``PROB_SUM_TOLERANCE`` of one are
    renormalised on construction; anything further off is rejected.
    """

    items: tuple
    probs: tuple

    def __post_init__(self) -> None:
        items = tuple(self.items)
        probs = tuple(float(p) for p in self.probs)
        if len(items) != len(probs):
            raise ConfigError(f"categorical has {len(items)} items but {len(probs)} probabilities")
        if not items:
            raise ConfigError("categorical needs at least one item")
        if any(p < 0 or not math.isfinite(p) for p in probs):
            raise ConfigError(f"categorical probabilities must be finite and nonnegative: {probs}")
        total = math.fsum(probs)
        if abs(total - 1.0) > PROB_SUM_TOLERANCE:
            raise ConfigError(f"categorical probabilities sum to {total}, expected 1")
        object.__setattr__(self, "items", items)
        if total != 1.0:
            probs = tuple(p / total for p in probs)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def uniform(cls, items: Sequence) -> Categorical:
        n = len(items)
        return cls(tuple(items), tuple(1.0 / n for _ in items))

    def to_json(self) -> dict:
        return {"items": list(self.items), "probs": list(self.probs)}

    @classmethod
    def parse(cls, value: Any) -> Categorical:
        if isinstance(value, Categorical):
            return value
        if isinstance(value, dict) and "items" in value and "probs" in value:
            return cls(tuple(value["items"]), tuple(value["probs"]))
        raise ConfigError(f"cannot parse categorical from {value!r}")


def _check_prob(name: str, p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"{name} must be a probability, got {p}")


@dataclass(frozen=True)
class FloorPlanConfig:
    scene_size: Range = Range(17.0, 30.0)
    scene_height: Range = Range(10.0, 15.0)
    wall_thickness: float = 0.1

    large_size: Range = Range(4.0, 8.0)
    large_height: Range = Range(4.0, 8.0)
    large_count: Range = Range(2, 5)

    small_size: Range = Range(2.0, 4.0)
    small_count: Range = Range(4, 8)
    small_on_ground_prob: float = 0.5
    small_ground_height: Range = Range(2.0, 6.0)
    small_atop_height: Range = Range(2.0, 4.0)

    roof_size: Range = Range(2.0, 5.0)
    roof_count: Range = Range(2, 4)
    roof_thin_prob: float = 0.5
    roof_thin_height: Range = Range(0.5, 1.5)
    roof_thick_height: Range = Range(2.0, 4.0)

    # for on-wall boxes "height" is the protrusion away from the wall
    wall_size: Range = Range(2.0, 5.0)
    wall_count: Range = Range(3, 6)
    wall_thin_prob: float = 0.5
    wall_thin_height: Range = Range(0.5, 1.5)
    wall_thick_height: Range = Range(2.0, 4.0)

    wireframe_size: Range = Range(3.0, 6.0)
    wireframe_height: Range = Range(3.0, 6.0)
    wireframe_count: Range = Range(1, 3)
    wireframe_prob: float = 0.8

    stick_length: Range = Range(3.4, 18.0)
    stick_wall_prob: float = 1.0
    stick_wall_size: Range = Range(0.1, 0.6)
    stick_wall_count: Range = Range(5, 16)
    stick_space_prob: float = 0.5
    stick_space_size: Range = Range(0.8, 1.8)
    stick_space_count: Range = Range(2, 6)

    axis_size: Range = Range(2.0, 5.0)
    axis_height: Range = Range(0.2, 1.0)
    axis_count: Range = Range(1, 2)
    axis_prob: float = 0.7

    large_attempts: int = 100
    other_attempts: int = 20

    def validate(self) -> None:
        if self.wall_thickness <= 0:
            raise ConfigError("wall_thickness must be positive")
        for name in ("small_on_ground_prob", "roof_thin_prob", "wall_thin_prob", "wireframe_prob",
                     "stick_wall_prob", "stick_space_prob", "axis_prob"):
            _check_prob(name, getattr(self, name))
        for f in dataclasses.fields(self):
            if f.name.endswith("_count"):
                r = getattr(self, f.name)
                if r.lo < 0 or r.lo != int(r.lo) or r.hi != int(r.hi):
                    raise ConfigError(f"{f.name} must be a nonnegative integer range")
        if self.scene_size.lo <= 0 or self.scene_height.lo <= 0:
            raise ConfigError("scene dimensions must be positive")


PRIMITIVES_DEFAULT = Categorical.uniform(("cube", "sphere", "cylinder", "cone"))
SMALL_COUNTS = Categorical((2, 3, 4, 5), (0.25, 0.375, 0.25, 0.125))


@dataclass(frozen=True)
class GeometryConfig:
    primitive_kinds: Categorical = PRIMITIVES_DEFAULT
    large_count: Categorical = Categorical((4, 5, 6, 7, 8), (0.147, 0.206, 0.294, 0.206, 0.147))
    small_count: Categorical = SMALL_COUNTS
    wall_count: Categorical = SMALL_COUNTS
    roof_count: Categorical = SMALL_COUNTS
    wireframe_count: Categorical = Categorical((1, 2, 3), (0.5, 0.25, 0.25))
    wireframe_kinds: Categorical = Categorical.uniform(("torus", "cube", "sphere"))
    # tube thickness as a fraction of the member's mean scale
    wireframe_thickness: Range = Range(1.0 / 30.0, 1.0 / 20.0)
    sphere_wire_segments: int = 8
    sphere_wire_rings: int = 8
    cube_wire_subdivision: Categorical = Categorical.uniform((1, 2, 3))
    torus_minor_radius: float = 0.3
    torus_major_segments: int = 8
    torus_minor_segments: int = 8
    intersecting_prob: float = 0.5
    stick_kinds: Categorical = Categorical.uniform(("cube", "cylinder"))

    heightfield_amplitude: Range = Range(0.03, 0.15)
    heightfield_frequency: Range = Range(1.0, 3.0)
    heightfield_octaves: int = 2

    member_scale: Range = Range(0.4, 1.0)
    cohesion_inflation: float = 0.25
    wire_member_scale: Range = Range(0.5, 1.0)
    intersecting_scale: Range = Range(0.3, 0.7)

    sphere_segments: int = 32
    sphere_rings: int = 16
    cylinder_segments: int = 32
    # subdivisions used on displaced cube/cylinder/cone so flat faces can deform
    displaced_subdivision: int = 8

    def validate(self) -> None:
        _check_prob("intersecting_prob", self.intersecting_prob)
        if self.heightfield_amplitude.lo < 0:
            raise ConfigError("height-field amplitude must be nonnegative")
        if self.heightfield_octaves < 1:
            raise ConfigError("height-field octaves must be >= 1")
        for name in ("sphere_wire_segments", "sphere_wire_rings", "torus_major_segments",
                     "torus_minor_segments", "sphere_segments", "sphere_rings",
                     "cylinder_segments", "displaced_subdivision"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if set(self.primitive_kinds.items) - {"cube", "sphere", "cylinder", "cone"}:
            raise ConfigError("solid primitives are limited to cube/sphere/cylinder/cone")
        if set(self.wireframe_kinds.items) - {"torus", "cube", "sphere"}:
            raise ConfigError("wireframe primitives are limited to torus/cube/sphere")


@dataclass(frozen=True)
class MaterialConfig:
    modify_prob: float = 0.5
    modify_slot_prob: float = 0.4
    specular_prob: float = 0.2
    roughness: Range = Range(0.001, 0.2)
    metallic: Range = Range(0.001, 1.0)
    specular_roughness: Range = Range(0.0, 0.05)
    specular_metallic: Range = Range(0.6, 1.0)
    glass_ior: Range = Range(1.4, 1.6)
    glass_roughness: Range = Range(0.001, 0.1)
    axis_aligned_glass_prob: float = 0.8
    texture_kinds: Categorical = Categorical.uniform(("solid", "checker", "stripes", "value_noise"))
    texture_scale: Range = Range(2.0, 16.0)
    bump_amplitude: Range = Range(0.0, 0.2)

    def validate(self) -> None:
        for name in ("modify_prob", "modify_slot_prob", "specular_prob", "axis_aligned_glass_prob"):
            _check_prob(name, getattr(self, name))
        if self.texture_scale.lo <= 0:
            raise ConfigError("texture_scale must be positive")


@dataclass(frozen=True)
class LightingConfig:
    ambient_strength: float = 1.0
    light_saturation: Range = Range(0.0, 0.4)

    sun_prob: float = 0.6
    sun_strength: Range = Range(0.2, 2.0)
    sun_elevation_deg: Range = Range(20.0, 70.0)
    window_count: Range = Range(1, 3)
    window_size_frac: Range = Range(0.15, 0.45)
    window_glass_prob: float = 0.5
    window_bar_prob: float = 0.5
    bar_divisions: Range = Range(2, 4)
    bar_thickness: float = 0.06
    window_attempts: int = 20

    luminous_prob: float = 0.7
    luminous_slot_prob: float = 0.2
    strength_range_1: Range = Range(0.2, 2.0)
    strength_range_2: Range = Range(5.0, 8.0)
    strength_range_2_prob: float = 0.1

    bulb_count: Range = Range(2, 5)
    bulb_radius: float = 0.15
    bulb_attempts: int = 50

    def validate(self) -> None:
        for name in ("sun_prob", "window_glass_prob", "window_bar_prob", "luminous_prob",
                     "luminous_slot_prob", "strength_range_2_prob"):
            _check_prob(name, getattr(self, name))
        if self.ambient_strength < 0:
            raise ConfigError("ambient_strength must be nonnegative")
        if self.bulb_radius <= 0:
            raise ConfigError("bulb_radius must be positive")


@dataclass(frozen=True)
class CameraConfig:
    outer_count: int = 36
    inner_count: int = 12
    fov_deg: Range = Range(45.0, 70.0)
    width: int = 128
    height: int = 128
    d_min: float = 0.8
    inner_fraction: float = 0.45
    pitch_deg: Range = Range(-35.0, 35.0)
    distance_bins: int = 4
    height_frac: Range = Range(0.5, 0.9)
    normalization_scale: Range = Range(1.1, 1.6)
    max_attempts: int = 200
    relax_factor: float = 0.8

    def validate(self) -> None:
        if self.outer_count < 0 or self.inner_count < 0:
            raise ConfigError("camera counts must be nonnegative")
        if self.width < 1 or self.height < 1:
            raise ConfigError("resolution must be positive")
        if not (0 < self.fov_deg.lo and self.fov_deg.hi < 180):
            raise ConfigError("fov must lie in (0, 180)")
        if self.d_min <= 0:
            raise ConfigError("d_min must be positive")
        if not 0 < self.inner_fraction < 1:
            raise ConfigError("inner_fraction must lie in (0, 1)")
        if self.distance_bins < 1:
            raise ConfigError("distance_bins must be >= 1")


@dataclass(frozen=True)
class RenderConfig:
    max_depth: int = 4
    gamma: float = 2.2
    glass_shadow_transmittance: float = 0.8
    # point lights fall off as 1 / (1 + (d / falloff_distance)^2)
    falloff_distance: float = 5.0

    def validate(self) -> None:
        if self.max_depth < 1:
            raise ConfigError("max_depth must be >= 1")
        if self.gamma <= 0:
            raise ConfigError("gamma must be positive")


@dataclass(frozen=True)
class GroundTruthConfig:
    depth_threshold: float = 100.0
    smooth_l1_beta: float = 1.0

    def validate(self) -> None:
        if self.depth_threshold <= 0:
            raise ConfigError("depth_threshold must be positive")
        if self.smooth_l1_beta <= 0:
            raise ConfigError("smooth_l1_beta must be positive")


@dataclass(frozen=True)
class GenConfig:
    floorplan: FloorPlanConfig = field(default_factory=FloorPlanConfig)
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    materials: MaterialConfig = field(default_factory=MaterialConfig)
    lighting: LightingConfig = field(default_factory=LightingConfig)
    cameras: CameraConfig = field(default_factory=CameraConfig)
    render: RenderConfig = field(default_factory=RenderConfig)
    ground_truth: GroundTruthConfig = field(default_factory=GroundTruthConfig)

    def validate(self) -> GenConfig:
        for f in dataclasses.fields(self):
            getattr(self, f.name).validate()
        return self

    def to_dict(self) -> dict:
        return {f.name: _section_to_dict(getattr(self, f.name)) for f in dataclasses.fields(self)}

    @classmethod
    def from_dict(cls, data: dict | None) -> GenConfig:
        data = dict(data or {})
        sections = {}
        for f in dataclasses.fields(cls):
            section_cls = type(getattr(_DEFAULT, f.name))
            sections[f.name] = _section_from_dict(section_cls, data.pop(f.name, None) or {})
        if data:
            raise ConfigError(f"unknown config sections: {sorted(data)}")
        return cls(**sections).validate()

    def with_overrides(self, **sections: dict) -> GenConfig:
        """Return a copy with selected fields of selected sections replaced."""
        updated = {}
        for name, changes in sections.items():
            updated[name] = dataclasses.replace(getattr(self, name), **changes)
        return dataclasses.replace(self, **updated).validate()

    def hash(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


def _section_to_dict(section) -> dict:
    out = {}
    for f in dataclasses.fields(section):
        value = getattr(section, f.name)
        out[f.name] = value.to_json() if isinstance(value, (Range, Categorical)) else value
    return out


def _section_from_dict(section_cls, data: dict):
    defaults = section_cls()
    kwargs = {}
    known = {f.name for f in dataclasses.fields(section_cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown fields in {section_cls.__name__}: {sorted(unknown)}")
    for name, value in data.items():
        default = getattr(defaults, name)
        try:
            if isinstance(default, Range):
                kwargs[name] = Range.parse(value)
            elif isinstance(default, Categorical):
                kwargs[name] = Categorical.parse(value)
            elif isinstance(default, bool):
                kwargs[name] = bool(value)
            elif isinstance(default, int):
                if float(value) != int(value):
                    raise ConfigError(f"{name} must be an integer")
                kwargs[name] = int(value)
            else:
                kwargs[name] = float(value)
        except (TypeError, KeyError) as exc:
            raise ConfigError(f"bad value for {section_cls.__name__}.{name}: {value!r}") from exc
    return section_cls(**kwargs)


_DEFAULT = GenConfig()


def default_config() -> GenConfig:
    return _DEFAULT


def load_config(path: str | Path) -> GenConfig:
    """Load a YAML or JSON config file; absent fields keep their defaults."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"config root must be a mapping, got {type(data).__name__}")
    return GenConfig.from_dict(data)


def dump_config(cfg: GenConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False, default_flow_style=None)
