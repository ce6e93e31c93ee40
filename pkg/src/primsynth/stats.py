"""Parameter-range conformance and dataset statistics."""

from __future__ import annotations

from collections import Counter

import numpy as np

from .cameras import Region
from .config import Categorical, GenConfig, Range
from .floorplan import STICK_CATEGORIES, WALLS, BoxCategory
from .scene import SceneSpec

_TOL = 1e-9


def _in(v: float, r: Range) -> bool:
    return r.lo - _TOL <= v <= r.hi + _TOL


def _in_cat(v, c: Categorical) -> bool:
    return v in c.items


def _box_ranges(cat: BoxCategory, cfg: GenConfig) -> tuple[Range, Range, Range] | None:
    fp = cfg.floorplan
    return {
        BoxCategory.LARGE_OBJECT: (fp.large_size, fp.large_size, fp.large_height),
        BoxCategory.SMALL_ON_GROUND: (fp.small_size, fp.small_size,
                                      Range(min(fp.small_ground_height.lo, fp.small_atop_height.lo),
                                            max(fp.small_ground_height.hi,
                                                fp.small_atop_height.hi))),
        BoxCategory.SMALL_ATOP_LARGE: (fp.small_size, fp.small_size, fp.small_atop_height),
        BoxCategory.ON_ROOF_THIN: (fp.roof_size, fp.roof_size, fp.roof_thin_height),
        BoxCategory.ON_ROOF_THICK: (fp.roof_size, fp.roof_size, fp.roof_thick_height),
        BoxCategory.WIREFRAME: (fp.wireframe_size, fp.wireframe_size, fp.wireframe_height),
        BoxCategory.AXIS_ALIGNED: (fp.axis_size, fp.axis_size, fp.axis_height),
    }.get(cat)


def scene_violations(spec: SceneSpec, cfg: GenConfig) -> list[str]:
    """Every sampled scalar of ``spec`` that falls outside its configured range."""
    fp, gc, mc, lc, cc = cfg.floorplan, cfg.geometry, cfg.materials, cfg.lighting, cfg.cameras
    out = []

    def need(ok: bool, what: str) -> None:
        if not ok:
            out.append(what)

    sb = spec.scene_box
    need(_in(sb.size_x, fp.scene_size), f"scene size x {sb.size_x}")
    need(_in(sb.size_y, fp.scene_size), f"scene size y {sb.size_y}")
    need(_in(sb.height, fp.scene_height), f"scene height {sb.height}")
    span = (sb.size_x, sb.size_y, sb.height)

    for i, obj in enumerate(spec.objects):
        box, cat = obj.box, obj.box.category
        size = box.size
        ranges = _box_ranges(cat, cfg)
        if ranges is not None:
            for a in range(3):
                need(_in(size[a], ranges[a]), f"object {i} {cat.value} extent {a} = {size[a]}")
        elif cat in (BoxCategory.ON_WALL_THIN, BoxCategory.ON_WALL_THICK):
            axis = WALLS[box.wall_id][0]
            along, depth, vertical = size[1 - axis], size[axis], size[2]
            prot = fp.wall_thin_height if cat is BoxCategory.ON_WALL_THIN else fp.wall_thick_height
            need(_in(along, fp.wall_size), f"object {i} wall along {along}")
            need(_in(depth, prot), f"object {i} wall protrusion {depth}")
            need(_in(vertical, fp.wall_size), f"object {i} wall vertical {vertical}")
        elif cat in STICK_CATEGORIES:
            cross = fp.stick_wall_size if cat is BoxCategory.THIN_STICK_ON_WALL else \
                fp.stick_space_size
            s = np.sort(size)
            need(_in(s[0], cross) and _in(s[1], cross), f"object {i} stick cross-section")
            # long sticks are clamped to the room span
            need(_in(s[2], fp.stick_length) or s[2] < fp.stick_length.lo and s[2] in span,
                 f"object {i} stick length {s[2]}")

        roles = [m.role for m in obj.members]
        if cat in STICK_CATEGORIES:
            need(len(obj.members) == 1 and obj.members[0].kind in gc.stick_kinds.items,
                 f"object {i} stick member")
        elif cat is BoxCategory.WIREFRAME:
            need(_in_cat(roles.count("wire"), gc.wireframe_count), f"object {i} wire count")
            for m in obj.members:
                if m.role == "wire":
                    need(m.kind in gc.wireframe_kinds.items, f"object {i} wire kind {m.kind}")
                    t = m.wire.thickness / float(np.mean(m.scale))
                    need(_in(t, gc.wireframe_thickness), f"object {i} wire thickness {t}")
        elif cat is not BoxCategory.AXIS_ALIGNED:
            counts = {BoxCategory.LARGE_OBJECT: gc.large_count,
                      BoxCategory.ON_WALL_THIN: gc.wall_count,
                      BoxCategory.ON_WALL_THICK: gc.wall_count,
                      BoxCategory.ON_ROOF_THIN: gc.roof_count,
                      BoxCategory.ON_ROOF_THICK: gc.roof_count}
            need(_in_cat(len(obj.members), counts.get(cat, gc.small_count)),
                 f"object {i} member count {len(obj.members)}")
        for m in obj.members:
            if m.heightfield is not None:
                need(_in(m.heightfield.amplitude, gc.heightfield_amplitude), f"object {i} hf amp")
                need(_in(m.heightfield.frequency, gc.heightfield_frequency), f"object {i} hf freq")
            if m.role == "solid":
                need(m.kind in gc.primitive_kinds.items, f"object {i} kind {m.kind}")

    rig = spec.lighting
    luminous = {lum.slot for lum in rig.luminous} if rig else set()
    bulb_slots = {b.material_slot for b in rig.bulbs} if rig else set()
    modified = set(spec.material_pass.modified_slots)
    for k, m in enumerate(spec.materials):
        need(_in(m.texture.scale, mc.texture_scale) or k in bulb_slots or m.transmissive,
             f"slot {k} texture scale")
        if m.transmissive:
            need(_in(m.ior, mc.glass_ior), f"slot {k} ior {m.ior}")
            need(_in(m.roughness, mc.glass_roughness), f"slot {k} glass roughness")
            need(m.metallic == 0.0 and not m.is_emissive, f"slot {k} glass channels")
            continue
        if k in bulb_slots:
            continue
        need(_in(m.bump_amplitude, mc.bump_amplitude), f"slot {k} bump")
        if k in modified and spec.material_pass.specular:
            need(_in(m.roughness, mc.specular_roughness), f"slot {k} specular roughness")
            need(_in(m.metallic, mc.specular_metallic), f"slot {k} specular metallic")
        else:
            need(_in(m.roughness, mc.roughness), f"slot {k} roughness {m.roughness}")
            need(_in(m.metallic, mc.metallic), f"slot {k} metallic {m.metallic}")
        if m.is_emissive:
            need(k in luminous, f"slot {k} emissive without luminous record")

    if rig is not None:
        need(rig.ambient_strength == lc.ambient_strength, "ambient strength")
        if rig.sun is not None:
            d = np.asarray(rig.sun.direction)
            need(_in(rig.sun.strength, lc.sun_strength), "sun strength")
            elev = np.degrees(np.arcsin(-d[2]))
            need(_in(elev, lc.sun_elevation_deg), f"sun elevation {elev}")
            need(_in(len(rig.windows), lc.window_count), "window count")
            for w in rig.windows:
                a0, a1, z0, z1 = w.rect
                face = 2.0 * sb.half_extent(1 - WALLS[w.wall_id][0])
                need(_in((a1 - a0) / face, lc.window_size_frac), "window width")
                need(_in((z1 - z0) / sb.height, lc.window_size_frac), "window height")
        else:
            need(not rig.windows, "windows without sun")
        for s in rig.strengths():
            need(_in(s, lc.strength_range_1) or _in(s, lc.strength_range_2), f"strength {s}")
        need(len(rig.bulbs) <= lc.bulb_count.hi, "bulb count")

    if spec.cameras is not None:
        cams = spec.cameras.cameras
        need(_in(spec.cameras.normalization_scale, cc.normalization_scale), "normalization scale")
        for j, c in enumerate(cams):
            need(_in(c.fov_y, cc.fov_deg), f"camera {j} fov {c.fov_y}")
            if c.region is Region.INNER:
                pitch = np.degrees(np.arcsin(np.clip(c.forward[2], -1, 1)))
                need(_in(pitch, cc.pitch_deg), f"camera {j} pitch {pitch}")
    return out


def scene_flags(spec: SceneSpec) -> dict:
    """Per-scene indicators whose frequencies estimate configured probabilities."""
    cats = Counter(o.box.category for o in spec.objects)
    aa = [o for o in spec.objects if o.box.category is BoxCategory.AXIS_ALIGNED]
    glass = set(spec.glass_slabs)
    rig = spec.lighting
    return {
        "sun": rig is not None and rig.sun is not None,
        "specular": spec.material_pass.specular,
        "modified": spec.material_pass.modified,
        "any_modified_slot": bool(spec.material_pass.modified_slots),
        "wireframe": cats[BoxCategory.WIREFRAME] > 0,
        "axis_aligned": len(aa) > 0,
        "axis_aligned_glass": [all(s in glass for s in o.slots) for o in aa],
        "window_glass": [w.has_glass for w in rig.windows] if rig else [],
        "strengths": rig.strengths() if rig else [],
        "box_counts": {c.value: n for c, n in cats.items()},
    }


def _hist(values, bins=10) -> dict:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return {"count": 0}
    counts, edges = np.histogram(values, bins=bins)
    return {"count": int(values.size), "min": float(values.min()), "max": float(values.max()),
            "mean": float(values.mean()), "counts": counts.tolist(), "edges": edges.tolist()}


def summarize_specs(specs: list[SceneSpec], cfg: GenConfig) -> dict:
    """Empirical probabilities, histograms and range violations over ``specs``."""
    n = len(specs)
    if n == 0:
        return {"scenes": 0, "probabilities": {}, "histograms": {}, "violations": 0}
    flags = [scene_flags(s) for s in specs]
    lc = cfg.lighting

    def frac(key):
        return float(np.mean([f[key] for f in flags]))

    aa = [g for f in flags for g in f["axis_aligned_glass"]]
    wg = [g for f in flags for g in f["window_glass"]]
    strengths = [s for f in flags for s in f["strengths"]]
    probs = {
        "sunlight": frac("sun"),
        "specular_scene": frac("specular"),
        "material_modify": frac("modified"),
        "any_modified_slot": frac("any_modified_slot"),
        "wireframe_presence": frac("wireframe"),
        "axis_aligned_presence": frac("axis_aligned"),
        "axis_aligned_glass": float(np.mean(aa)) if aa else float("nan"),
        "window_glass": float(np.mean(wg)) if wg else float("nan"),
        "strength_range_2": float(np.mean([s >= lc.strength_range_2.lo for s in strengths]))
        if strengths else float("nan"),
    }
    violations = {}
    for s in specs:
        v = scene_violations(s, cfg)
        if v:
            violations[int(s.seed.scene_index)] = v
    cams = [c for s in specs for c in s.cameras.cameras] if specs[0].cameras else []
    center = specs[0].scene_box.center
    hist = {
        "scene_size_x": _hist([s.scene_box.size_x for s in specs]),
        "scene_size_y": _hist([s.scene_box.size_y for s in specs]),
        "scene_height": _hist([s.scene_box.height for s in specs]),
        "boxes_per_scene": _hist([len(s.objects) for s in specs]),
        "fov": _hist([c.fov_y for c in cams]),
        "camera_distance": _hist([float(np.linalg.norm(c.center - center)) for c in cams]),
        "outer_distance_bin": dict(Counter(c.distance_bin for c in cams
                                           if c.region is Region.OUTER)),
        "bulbs_per_scene": _hist([len(s.lighting.bulbs) for s in specs if s.lighting]),
    }
    box_counts = Counter()
    for f in flags:
        box_counts.update(f["box_counts"])
    return {"scenes": n, "probabilities": probs, "histograms": hist,
            "box_counts_total": dict(box_counts),
            "violations": sum(len(v) for v in violations.values()),
            "violating_scenes": violations}
