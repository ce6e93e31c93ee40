"""Scene description: everything needed to rebuild and render one scene.

A :class:`SceneSpec` is a pure function of ``(Seed, GenConfig)``. It holds
sampled parameters only; meshes are rebuilt on demand by
:func:`instantiate_scene_meshes`, which is deterministic given the spec.

Material slot layout: 0 floor, 1 ceiling, 2-5 walls (by wall id), then the
object members in box order, then window glass and bars, then bulbs.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np

from .cameras import CameraSet, rescale, normalize_poses, sample_cameras
from .config import GenConfig
from .floorplan import BoxCategory, ObjectBox, SceneBox, sample_object_boxes, sample_scene_box
from .geometry import ObjectGeometry, PrimitiveInstance, build_object, sample_members
from .lighting import LightingRig, bulb_meshes, sample_lighting, shell_meshes, window_meshes
from .materials import (Material, MaterialPass, make_emissive, make_glass,
                        randomize_scene_materials, sample_base_material)
from .mesh import TriMesh
from .rng import Seed, derive_stream

GENERATOR_VERSION = "0.1.0"
SHELL_SLOTS = 6
SHELL_NAMES = ("floor", "ceiling", "wall+x", "wall-x", "wall+y", "wall-y")


@dataclass(frozen=True)
class ObjectSpec:
    box: ObjectBox
    members: tuple[PrimitiveInstance, ...]

    @property
    def slots(self) -> list[int]:
        return [m.material_slot for m in self.members]

    def to_json(self) -> dict:
        return {"box": self.box.to_json(), "members": [m.to_json() for m in self.members]}

    @classmethod
    def from_json(cls, d: dict) -> ObjectSpec:
        return cls(ObjectBox.from_json(d["box"]),
                   tuple(PrimitiveInstance.from_json(m) for m in d["members"]))


@dataclass
class SceneSpec:
    seed: Seed
    config_hash: str
    scene_box: SceneBox
    objects: list[ObjectSpec] = field(default_factory=list)
    materials: list[Material] = field(default_factory=list)
    material_pass: MaterialPass = MaterialPass()
    glass_slabs: tuple = ()             # slots of axis-aligned slabs turned to glass
    lighting: LightingRig | None = None
    cameras: CameraSet | None = None    # scene units; scale recorded for export
    generator_version: str = GENERATOR_VERSION

    @property
    def object_boxes(self) -> list[ObjectBox]:
        return [o.box for o in self.objects]

    @property
    def normalization_scale(self) -> float:
        return self.cameras.normalization_scale if self.cameras else 1.0

    def exported_cameras(self) -> CameraSet:
        """Cameras in the normalized export frame."""
        return rescale(self.cameras, self.cameras.normalization_scale)

    def to_json(self) -> dict:
        return {"generator_version": self.generator_version,
                "seed": self.seed.to_json(), "config_hash": self.config_hash,
                "scene_box": self.scene_box.to_json(),
                "objects": [o.to_json() for o in self.objects],
                "materials": [m.to_json() for m in self.materials],
                "material_pass": self.material_pass.to_json(),
                "glass_slabs": list(self.glass_slabs),
                "lighting": self.lighting.to_json() if self.lighting else None,
                "cameras": self.cameras.to_json() if self.cameras else None}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, d: dict) -> SceneSpec:
        return cls(Seed.from_json(d["seed"]), d["config_hash"], SceneBox.from_json(d["scene_box"]),
                   [ObjectSpec.from_json(o) for o in d["objects"]],
                   [Material.from_json(m) for m in d["materials"]],
                   MaterialPass.from_json(d["material_pass"]), tuple(d["glass_slabs"]),
                   LightingRig.from_json(d["lighting"]) if d["lighting"] else None,
                   CameraSet.from_json(d["cameras"]) if d["cameras"] else None,
                   d["generator_version"])

    @classmethod
    def loads(cls, text: str) -> SceneSpec:
        return cls.from_json(json.loads(text))


def sample_objects(stream, boxes: list[ObjectBox], cfg: GenConfig,
                   first_slot: int = SHELL_SLOTS) -> list[ObjectSpec]:
    objects = []
    slot = first_slot
    for i, box in enumerate(boxes):
        members = sample_members(stream.child(f"object{i}"), box.category, box, cfg.geometry,
                                 first_slot=slot)
        slot = max(m.material_slot for m in members) + 1
        objects.append(ObjectSpec(box, tuple(members)))
    return objects


def assign_materials(stream, spec: SceneSpec, cfg: GenConfig) -> SceneSpec:
    """Base materials per slot, the scene-level pass, then glass slabs."""
    n_slots = SHELL_SLOTS + sum(len(o.members) for o in spec.objects)
    base = [sample_base_material(stream.child(f"slot{k}"), cfg) for k in range(n_slots)]
    spec = dataclasses.replace(spec, materials=base)
    spec = randomize_scene_materials(stream.child("pass"), spec, cfg)
    glass_stream = stream.child("glass")
    materials = list(spec.materials)
    glass = []
    for obj in spec.objects:
        if obj.box.category is not BoxCategory.AXIS_ALIGNED:
            continue
        if glass_stream.bernoulli(cfg.materials.axis_aligned_glass_prob):
            for slot in obj.slots:
                materials[slot] = make_glass(glass_stream, cfg)
                glass.append(slot)
    return dataclasses.replace(spec, materials=materials, glass_slabs=tuple(glass))


def apply_lighting(spec: SceneSpec, rig: LightingRig) -> SceneSpec:
    materials = list(spec.materials)
    for slot in sorted(rig.added_materials):
        if slot != len(materials):
            raise ValueError("lighting slots must follow the existing slots")
        materials.append(rig.added_materials[slot])
    for lum in rig.luminous:
        materials[lum.slot] = make_emissive(materials[lum.slot], lum.strength, lum.color)
    return dataclasses.replace(spec, materials=materials, lighting=rig)


def generate_scene_spec(seed: Seed, cfg: GenConfig) -> SceneSpec:
    """Floor plan, members, materials, lighting and cameras for one scene."""
    fp = derive_stream(seed, "floorplan")
    scene_box = sample_scene_box(fp, cfg)
    boxes = sample_object_boxes(fp.child("boxes"), scene_box, cfg)
    objects = sample_objects(derive_stream(seed, "geometry"), boxes, cfg)
    spec = SceneSpec(seed, cfg.hash(), scene_box, objects)
    spec = assign_materials(derive_stream(seed, "materials"), spec, cfg)
    rig = sample_lighting(derive_stream(seed, "lighting"), spec, cfg)
    spec = apply_lighting(spec, rig)
    cam_stream = derive_stream(seed, "cameras")
    cams = sample_cameras(cam_stream, scene_box, boxes, rig.bulbs, cfg)
    cams.normalization_scale = normalize_poses(cam_stream.child("normalize"), cams,
                                               cfg).normalization_scale
    return dataclasses.replace(spec, cameras=cams)


def instantiate_objects(spec: SceneSpec, cfg: GenConfig) -> list[ObjectGeometry]:
    return [build_object(o.box, list(o.members), cfg.geometry) for o in spec.objects]


def instantiate_scene_meshes(spec: SceneSpec, cfg: GenConfig,
                             objects: list[ObjectGeometry] | None = None) -> list[TriMesh]:
    """Every triangle mesh of the scene, slot-tagged, in slot-layout order."""
    rig = spec.lighting
    windows = rig.windows if rig else []
    meshes = shell_meshes(spec.scene_box, windows)
    if objects is None:
        objects = instantiate_objects(spec, cfg)
    for obj in objects:
        meshes.extend(obj.meshes)
    if rig:
        meshes.extend(window_meshes(spec.scene_box, windows, cfg.lighting.bar_thickness))
        meshes.extend(bulb_meshes(rig.bulbs))
    return meshes


def scene_slot_categories(spec: SceneSpec) -> dict[int, str]:
    """Slot -> owner label, for checks and statistics."""
    out = {i: SHELL_NAMES[i] for i in range(SHELL_SLOTS)}
    for obj in spec.objects:
        for s in obj.slots:
            out[s] = obj.box.category.value
    if spec.lighting:
        for w in spec.lighting.windows:
            if w.glass_slot is not None:
                out[w.glass_slot] = "window_glass"
            if w.bar_slot is not None:
                out[w.bar_slot] = "window_bars"
        for b in spec.lighting.bulbs:
            out[b.material_slot] = "bulb"
    return out


def scene_center(spec: SceneSpec) -> np.ndarray:
    return spec.scene_box.center
