"""Procedural textures and per-slot material parameters."""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass

import numba
import numpy as np

from .config import GenConfig
from .noise import fbm3
from .rng import Stream


class TextureKind(enum.IntEnum):
    SOLID = 0
    CHECKER = 1
    STRIPES = 2
    VALUE_NOISE = 3


_KIND_NAMES = {"solid": TextureKind.SOLID, "checker": TextureKind.CHECKER,
               "stripes": TextureKind.STRIPES, "value_noise": TextureKind.VALUE_NOISE}


@dataclass(frozen=True)
class Texture:
    kind: TextureKind
    color_a: tuple
    color_b: tuple = (0.0, 0.0, 0.0)
    scale: float = 1.0
    seed: int = 0
    axis: int = 0          # stripes run across u (0) or v (1)

    def __post_init__(self) -> None:
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise ValueError("texture scale must be finite and positive")
        if not (np.all(np.isfinite(self.color_a)) and np.all(np.isfinite(self.color_b))):
            raise ValueError("texture colors must be finite")

    def to_json(self) -> dict:
        return {"kind": self.kind.name.lower(), "color_a": list(self.color_a),
                "color_b": list(self.color_b), "scale": self.scale, "seed": self.seed,
                "axis": self.axis}

    @classmethod
    def from_json(cls, d: dict) -> Texture:
        return cls(_KIND_NAMES[d["kind"]], tuple(d["color_a"]), tuple(d["color_b"]),
                   d["scale"], int(d["seed"]), int(d["axis"]))


@dataclass(frozen=True)
class Material:
    texture: Texture
    roughness: float
    metallic: float
    ior: float = 1.5
    transmissive: bool = False
    bump_amplitude: float = 0.0
    emissive_strength: float = 0.0
    emissive_color: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self) -> None:
        if not 0.0 <= self.roughness <= 1.0 or not 0.0 <= self.metallic <= 1.0:
            raise ValueError("roughness and metallic must lie in [0, 1]")
        if self.emissive_strength < 0:
            raise ValueError("emissive strength must be nonnegative")
        if self.transmissive and (self.emissive_strength > 0 or self.metallic > 0):
            raise ValueError("glass cannot be emissive or metallic")

    @property
    def is_emissive(self) -> bool:
        return self.emissive_strength > 0

    def to_json(self) -> dict:
        return {"texture": self.texture.to_json(), "roughness": self.roughness,
                "metallic": self.metallic, "ior": self.ior, "transmissive": self.transmissive,
                "normal_bump_amplitude": self.bump_amplitude,
                "emissive_strength": self.emissive_strength,
                "emissive_color": list(self.emissive_color)}

    @classmethod
    def from_json(cls, d: dict) -> Material:
        return cls(Texture.from_json(d["texture"]), d["roughness"], d["metallic"], d["ior"],
                   bool(d["transmissive"]), d["normal_bump_amplitude"], d["emissive_strength"],
                   tuple(d["emissive_color"]))


@numba.njit(cache=True)
def texture_color(kind, color_a, color_b, scale, seed, axis, u, v):
    """RGB of a procedural texture at ``(u, v)``; pure and thread-safe."""
    out = np.empty(3)
    t = 0.0
    if kind == 1:
        t = (np.floor(u * scale) + np.floor(v * scale)) % 2.0
    elif kind == 2:
        t = np.floor((u if axis == 0 else v) * scale) % 2.0
    elif kind == 3:
        t = 0.5 * (fbm3(u * scale, v * scale, 0.0, seed, 3) + 1.0)
    for c in range(3):
        out[c] = min(max(color_a[c] + t * (color_b[c] - color_a[c]), 0.0), 1.0)
    return out


def evaluate_texture(t: Texture, uv) -> np.ndarray:
    u, v = float(uv[0]), float(uv[1])
    if not (np.isfinite(u) and np.isfinite(v)):
        raise ValueError("uv must be finite")
    return texture_color(int(t.kind), np.asarray(t.color_a, dtype=float),
                         np.asarray(t.color_b, dtype=float), float(t.scale), np.int64(t.seed),
                         int(t.axis), u, v)


def _random_color(stream: Stream) -> tuple:
    return (stream.random(), stream.random(), stream.random())


def sample_texture(stream: Stream, cfg: GenConfig) -> Texture:
    kind = _KIND_NAMES[stream.categorical(cfg.materials.texture_kinds)]
    return Texture(kind, _random_color(stream), _random_color(stream),
                   stream.uniform(cfg.materials.texture_scale), stream.uint32(),
                   int(stream.random() < 0.5))


def sample_base_material(stream: Stream, cfg: GenConfig) -> Material:
    mc = cfg.materials
    texture = sample_texture(stream, cfg)
    return Material(texture, stream.uniform(mc.roughness), stream.uniform(mc.metallic),
                    bump_amplitude=stream.uniform(mc.bump_amplitude))


def make_glass(stream: Stream, cfg: GenConfig) -> Material:
    mc = cfg.materials
    tint = tuple(0.9 + 0.1 * stream.random() for _ in range(3))
    return Material(Texture(TextureKind.SOLID, tint), stream.uniform(mc.glass_roughness), 0.0,
                    ior=stream.uniform(mc.glass_ior), transmissive=True)


def make_emissive(material: Material, strength: float, color: tuple) -> Material:
    if material.transmissive:
        raise ValueError("glass cannot be emissive")
    return dataclasses.replace(material, emissive_strength=strength, emissive_color=tuple(color))


@dataclass(frozen=True)
class MaterialPass:
    """Record of the scene-level material randomization."""

    modified: bool = False
    specular: bool = False
    modified_slots: tuple = ()

    def to_json(self) -> dict:
        return {"modified": self.modified, "specular": self.specular,
                "modified_slots": list(self.modified_slots)}

    @classmethod
    def from_json(cls, d: dict) -> MaterialPass:
        return cls(bool(d["modified"]), bool(d["specular"]), tuple(d["modified_slots"]))


def randomize_scene_materials(stream: Stream, spec, cfg: GenConfig):
    """Scene-level re-roll of slot materials.

    With ``modify_prob`` the scene enters the pass and each non-glass slot is
    re-rolled with ``modify_slot_prob``. The specular flag is drawn for every
    scene; in a specular scene re-rolled slots get mirror-like roughness and
    metallic values. Only ``materials`` and ``material_pass`` change.
    """
    mc = cfg.materials
    modified = stream.bernoulli(mc.modify_prob)
    specular = stream.bernoulli(mc.specular_prob)
    materials = list(spec.materials)
    slots = []
    if modified:
        for slot, mat in enumerate(materials):
            if mat.transmissive or mat.is_emissive:
                continue
            if not stream.bernoulli(mc.modify_slot_prob):
                continue
            new = sample_base_material(stream, cfg)
            if specular:
                new = dataclasses.replace(new, roughness=stream.uniform(mc.specular_roughness),
                                          metallic=stream.uniform(mc.specular_metallic))
            materials[slot] = new
            slots.append(slot)
    return dataclasses.replace(spec, materials=materials,
                               material_pass=MaterialPass(modified, specular, tuple(slots)))
