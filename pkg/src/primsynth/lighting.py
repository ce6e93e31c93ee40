"""Lighting rig: ambient, sun with carved windows, luminous sticks and bulbs."""

from __future__ import annotations

import colorsys
from dataclasses import dataclass, field

import numpy as np

from .config import GenConfig
from .floorplan import STICK_CATEGORIES, WALLS, ObjectBox, SceneBox
from .materials import Material, make_glass, sample_base_material, Texture, TextureKind
from .mesh import TriMesh, box_mesh, tubes
from .rng import Stream

# glass panes and bars sit inside the wall slab, as fractions of its thickness
GLASS_OFFSET = 0.8
GLASS_THICKNESS = 0.2
BAR_OFFSET = 0.3
BAR_MAX_FRACTION = 0.5


@dataclass(frozen=True)
class Sun:
    direction: tuple        # unit vector of travel; z < 0
    color: tuple
    strength: float

    def to_json(self) -> dict:
        return {"direction": list(self.direction), "color": list(self.color),
                "strength": self.strength}

    @classmethod
    def from_json(cls, d: dict | None) -> Sun | None:
        if d is None:
            return None
        return cls(tuple(d["direction"]), tuple(d["color"]), d["strength"])


@dataclass(frozen=True)
class WindowCutout:
    """Rectangular hole in a wall; ``rect`` is (a0, a1, z0, z1) in wall coordinates,
    ``a`` running along the wall's in-plane horizontal axis."""

    wall_id: int
    rect: tuple
    has_glass: bool
    has_bars: bool
    glass_slot: int | None = None
    bar_slot: int | None = None
    bar_divisions: tuple = (0, 0)

    def __post_init__(self) -> None:
        a0, a1, z0, z1 = self.rect
        if not (a1 > a0 and z1 > z0):
            raise ValueError("window rectangle must have positive area")

    def to_json(self) -> dict:
        return {"wall_id": self.wall_id, "rect": list(self.rect), "has_glass": self.has_glass,
                "has_bars": self.has_bars, "glass_slot": self.glass_slot,
                "bar_slot": self.bar_slot, "bar_divisions": list(self.bar_divisions)}

    @classmethod
    def from_json(cls, d: dict) -> WindowCutout:
        return cls(int(d["wall_id"]), tuple(d["rect"]), bool(d["has_glass"]),
                   bool(d["has_bars"]), d["glass_slot"], d["bar_slot"],
                   tuple(d["bar_divisions"]))


@dataclass(frozen=True)
class Bulb:
    position: tuple
    color: tuple
    strength: float
    radius: float
    material_slot: int

    def to_json(self) -> dict:
        return {"position": list(self.position), "color": list(self.color),
                "strength": self.strength, "radius": self.radius,
                "material_slot": self.material_slot}

    @classmethod
    def from_json(cls, d: dict) -> Bulb:
        return cls(tuple(d["position"]), tuple(d["color"]), d["strength"], d["radius"],
                   int(d["material_slot"]))


@dataclass(frozen=True)
class Luminous:
    slot: int
    color: tuple
    strength: float

    def to_json(self) -> dict:
        return {"slot": self.slot, "color": list(self.color), "strength": self.strength}

    @classmethod
    def from_json(cls, d: dict) -> Luminous:
        return cls(int(d["slot"]), tuple(d["color"]), d["strength"])


@dataclass
class LightingRig:
    ambient_color: tuple
    ambient_strength: float
    sun: Sun | None = None
    windows: list[WindowCutout] = field(default_factory=list)
    bulbs: list[Bulb] = field(default_factory=list)
    luminous: list[Luminous] = field(default_factory=list)
    # materials for slots appended by the rig (window glass, bars, bulbs), keyed by slot
    added_materials: dict[int, Material] = field(default_factory=dict)

    @property
    def emissive_slots(self) -> list[int]:
        return [lum.slot for lum in self.luminous]

    def strengths(self) -> list[float]:
        """Every emissive and bulb strength drawn for this rig."""
        return [lum.strength for lum in self.luminous] + [b.strength for b in self.bulbs]

    def to_json(self) -> dict:
        return {"ambient": {"color": list(self.ambient_color), "strength": self.ambient_strength},
                "sun": self.sun.to_json() if self.sun else None,
                "windows": [w.to_json() for w in self.windows],
                "bulbs": [b.to_json() for b in self.bulbs],
                "luminous": [lum.to_json() for lum in self.luminous],
                "added_materials": {str(k): m.to_json() for k, m in
                                    sorted(self.added_materials.items())}}

    @classmethod
    def from_json(cls, d: dict) -> LightingRig:
        return cls(tuple(d["ambient"]["color"]), d["ambient"]["strength"],
                   Sun.from_json(d["sun"]), [WindowCutout.from_json(w) for w in d["windows"]],
                   [Bulb.from_json(b) for b in d["bulbs"]],
                   [Luminous.from_json(x) for x in d["luminous"]],
                   {int(k): Material.from_json(m) for k, m in d["added_materials"].items()})


def light_color(stream: Stream, cfg: GenConfig) -> tuple:
    """Hue uniform, limited saturation, full value."""
    h = stream.random()
    s = stream.uniform(cfg.lighting.light_saturation)
    return colorsys.hsv_to_rgb(h, s, 1.0)


def sample_strength(stream: Stream, cfg: GenConfig) -> float:
    lc = cfg.lighting
    if stream.bernoulli(lc.strength_range_2_prob):
        return stream.uniform(lc.strength_range_2)
    return stream.uniform(lc.strength_range_1)


def sample_sun(stream: Stream, cfg: GenConfig) -> Sun:
    lc = cfg.lighting
    azimuth = 2.0 * np.pi * stream.random()
    elevation = np.radians(stream.uniform(lc.sun_elevation_deg))
    toward = np.array([np.cos(elevation) * np.cos(azimuth),
                       np.cos(elevation) * np.sin(azimuth), np.sin(elevation)])
    color = light_color(stream, cfg)
    return Sun(tuple(-toward), color, stream.uniform(lc.sun_strength))


def wall_normal(wall_id: int) -> np.ndarray:
    axis, sign = WALLS[wall_id]
    n = np.zeros(3)
    n[axis] = sign
    return n


def sunlit_walls(sun_direction) -> list[int]:
    """Walls whose outward normal faces the sun."""
    d = np.asarray(sun_direction, dtype=float)
    return [w for w in range(4) if float(wall_normal(w) @ -d) > 0.0]


def _wall_extent(scene: SceneBox, wall_id: int) -> tuple[float, float]:
    axis, _ = WALLS[wall_id]
    h = scene.half_extent(1 - axis)
    return -h, h


def carve_windows(stream: Stream, scene: SceneBox, sun_direction, cfg: GenConfig,
                  first_slot: int) -> tuple[list[WindowCutout], dict[int, Material]]:
    """Place 1-3 non-overlapping windows on sun-facing walls.

    Returns the cutouts and the materials of any glass panes and bars, which
    occupy consecutive slots starting at ``first_slot``.
    """
    lc = cfg.lighting
    walls = sunlit_walls(sun_direction) or [min(int(4 * stream.random()), 3)]
    count = stream.integer(lc.window_count)
    windows: list[WindowCutout] = []
    materials: dict[int, Material] = {}
    slot = first_slot
    for _ in range(count):
        wall = walls[int(stream.random() * len(walls)) % len(walls)]
        a_lo, a_hi = _wall_extent(scene, wall)
        wa = (a_hi - a_lo) * stream.uniform(lc.window_size_frac)
        wz = scene.height * stream.uniform(lc.window_size_frac)
        rect = None
        for _ in range(lc.window_attempts):
            a0 = a_lo + stream.random() * (a_hi - a_lo - wa)
            z0 = stream.random() * (scene.height - wz)
            cand = (a0, a0 + wa, z0, z0 + wz)
            if not any(w.wall_id == wall and _rects_overlap(w.rect, cand) for w in windows):
                rect = cand
                break
        if rect is None:
            continue
        has_glass = stream.bernoulli(lc.window_glass_prob)
        has_bars = stream.bernoulli(lc.window_bar_prob)
        glass_slot = bar_slot = None
        divisions = (0, 0)
        if has_glass:
            glass_slot = slot
            materials[slot] = make_glass(stream, cfg)
            slot += 1
        if has_bars:
            bar_slot = slot
            materials[slot] = sample_base_material(stream, cfg)
            slot += 1
            divisions = (stream.integer(lc.bar_divisions), stream.integer(lc.bar_divisions))
        windows.append(WindowCutout(wall, rect, has_glass, has_bars, glass_slot, bar_slot,
                                    divisions))
    return windows, materials


def _rects_overlap(a, b) -> bool:
    return a[0] < b[1] and b[0] < a[1] and a[2] < b[3] and b[2] < a[3]


def point_box_distance(p: np.ndarray, lo, hi) -> float:
    d = np.maximum(np.maximum(np.asarray(lo) - p, 0.0), p - np.asarray(hi))
    return float(np.linalg.norm(d))


def boxes_distance(p: np.ndarray, boxes: list[ObjectBox]) -> float:
    """Distance from ``p`` to the nearest object box (0 inside one)."""
    if not boxes:
        return np.inf
    lo = np.array([b.min_corner for b in boxes])
    hi = np.array([b.max_corner for b in boxes])
    d = np.maximum(np.maximum(lo - p, 0.0), p - hi)
    return float(np.sqrt((d * d).sum(axis=1)).min())


def shell_distance(p: np.ndarray, scene: SceneBox) -> float:
    """Distance from an interior point to the room's inner faces."""
    return float(min(scene.half_extent_x - abs(p[0]), scene.half_extent_y - abs(p[1]),
                     p[2], scene.height - p[2]))


def place_bulbs(stream: Stream, scene: SceneBox, boxes: list[ObjectBox], cfg: GenConfig,
                first_slot: int) -> tuple[list[Bulb], dict[int, Material]]:
    """Bulbs kept a radius clear of every object box, the shell and each other.

    Object boxes bound their geometry, so clearing the boxes clears the
    geometry. A bulb that finds no spot within the attempt budget is dropped.
    """
    lc = cfg.lighting
    r = lc.bulb_radius
    count = stream.integer(lc.bulb_count)
    bulbs: list[Bulb] = []
    materials: dict[int, Material] = {}
    margin = 2.0 * r
    lo = scene.interior_min + margin
    hi = scene.interior_max - margin
    for _ in range(count):
        pos = None
        for _ in range(lc.bulb_attempts):
            p = lo + np.array([stream.random() for _ in range(3)]) * (hi - lo)
            if boxes_distance(p, boxes) <= margin:
                continue
            if any(np.linalg.norm(p - np.asarray(b.position)) <= 2 * margin for b in bulbs):
                continue
            pos = p
            break
        if pos is None:
            continue
        color = light_color(stream, cfg)
        strength = sample_strength(stream, cfg)
        slot = first_slot + len(bulbs)
        materials[slot] = Material(Texture(TextureKind.SOLID, tuple(color)), 0.5, 0.0,
                                   emissive_strength=strength, emissive_color=tuple(color))
        bulbs.append(Bulb(tuple(pos), tuple(color), strength, r, slot))
    return bulbs, materials


def sample_luminous(stream: Stream, objects, cfg: GenConfig) -> list[Luminous]:
    """Scene-level gate, then an independent per-slot draw over thin-stick slots."""
    lc = cfg.lighting
    if not stream.bernoulli(lc.luminous_prob):
        return []
    out = []
    for obj in objects:
        if obj.box.category not in STICK_CATEGORIES:
            continue
        for m in obj.members:
            if stream.bernoulli(lc.luminous_slot_prob):
                out.append(Luminous(m.material_slot, light_color(stream, cfg),
                                    sample_strength(stream, cfg)))
    return out


def sample_lighting(stream: Stream, spec, cfg: GenConfig) -> LightingRig:
    """Build the rig for ``spec``; new slots are numbered after its current materials."""
    lc = cfg.lighting
    ambient = light_color(stream.child("ambient"), cfg)
    rig = LightingRig(tuple(ambient), lc.ambient_strength)
    next_slot = len(spec.materials)
    sun_stream = stream.child("sun")
    if sun_stream.bernoulli(lc.sun_prob):
        rig.sun = sample_sun(sun_stream, cfg)
        rig.windows, mats = carve_windows(sun_stream.child("windows"), spec.scene_box,
                                          rig.sun.direction, cfg, next_slot)
        rig.added_materials.update(mats)
        next_slot += len(mats)
    rig.luminous = sample_luminous(stream.child("luminous"), spec.objects, cfg)
    rig.bulbs, mats = place_bulbs(stream.child("bulbs"), spec.scene_box,
                                  [o.box for o in spec.objects], cfg, next_slot)
    rig.added_materials.update(mats)
    return rig


# ---------------------------------------------------------------------------
# meshes


def _wall_box(scene: SceneBox, wall_id: int, a0: float, a1: float, z0: float, z1: float,
              d0: float, d1: float) -> tuple[np.ndarray, np.ndarray]:
    """World AABB of a wall-local block: along ``[a0, a1]``, height ``[z0, z1]``,
    depth ``[d0, d1]`` measured outward from the interior face."""
    axis, sign = WALLS[wall_id]
    face = scene.half_extent(axis)
    lo = np.empty(3)
    hi = np.empty(3)
    lo[1 - axis], hi[1 - axis] = a0, a1
    lo[2], hi[2] = z0, z1
    p0, p1 = sign * (face + d0), sign * (face + d1)
    lo[axis], hi[axis] = min(p0, p1), max(p0, p1)
    return lo, hi


def wall_blocks(scene: SceneBox, wall_id: int, holes: list[tuple]) -> list[tuple]:
    """Split the wall face into rectangles that avoid ``holes``.

    Columns are cut at every hole edge along the wall; within a column the
    holes spanning it are subtracted in z. Returns (a0, a1, z0, z1) tuples.
    """
    axis, _ = WALLS[wall_id]
    t = scene.wall_thickness
    a_lo, a_hi = _wall_extent(scene, wall_id)
    if axis == 0:                       # x walls also cover the y walls' end caps
        a_lo, a_hi = a_lo - t, a_hi + t
    cuts = sorted({a_lo, a_hi, *(h[0] for h in holes), *(h[1] for h in holes)})
    blocks = []
    for c0, c1 in zip(cuts[:-1], cuts[1:]):
        if c1 <= c0:
            continue
        spans = sorted((h[2], h[3]) for h in holes if h[0] <= c0 and h[1] >= c1)
        z = 0.0
        for z0, z1 in spans:
            if z0 > z:
                blocks.append((c0, c1, z, z0))
            z = max(z, z1)
        if z < scene.height:
            blocks.append((c0, c1, z, scene.height))
    return blocks


def shell_meshes(scene: SceneBox, windows: list[WindowCutout]) -> list[TriMesh]:
    """Floor (slot 0), ceiling (1) and walls (2 + wall id) with window holes."""
    t = scene.wall_thickness
    hx, hy, H = scene.half_extent_x, scene.half_extent_y, scene.height
    meshes = [box_mesh((-hx - t, -hy - t, -t), (hx + t, hy + t, 0.0)).with_slot(0),
              box_mesh((-hx - t, -hy - t, H), (hx + t, hy + t, H + t)).with_slot(1)]
    for w in range(4):
        holes = [win.rect for win in windows if win.wall_id == w]
        for a0, a1, z0, z1 in wall_blocks(scene, w, holes):
            lo, hi = _wall_box(scene, w, a0, a1, z0, z1, 0.0, t)
            meshes.append(box_mesh(lo, hi).with_slot(2 + w))
    return meshes


def window_meshes(scene: SceneBox, windows: list[WindowCutout], bar_thickness: float
                  ) -> list[TriMesh]:
    t = scene.wall_thickness
    out = []
    for win in windows:
        a0, a1, z0, z1 = win.rect
        if win.has_glass:
            half = 0.5 * GLASS_THICKNESS * t
            lo, hi = _wall_box(scene, win.wall_id, a0, a1, z0, z1,
                               GLASS_OFFSET * t - half, GLASS_OFFSET * t + half)
            out.append(box_mesh(lo, hi).with_slot(win.glass_slot))
        if win.has_bars:
            out.append(bar_mesh(scene, win, bar_thickness).with_slot(win.bar_slot))
    return out


def bar_mesh(scene: SceneBox, win: WindowCutout, thickness: float) -> TriMesh:
    """Grid of tubes spanning the window opening in the wall plane."""
    a0, a1, z0, z1 = win.rect
    na, nz = win.bar_divisions
    # keep the bars inside the wall slab so they never reach into the room
    thickness = min(thickness, BAR_MAX_FRACTION * scene.wall_thickness)
    axis, sign = WALLS[win.wall_id]
    depth = sign * (scene.half_extent(axis) + BAR_OFFSET * scene.wall_thickness)
    inset = 0.5 * thickness

    def point(a, z):
        p = np.empty(3)
        p[axis] = depth
        p[1 - axis] = a
        p[2] = z
        return p

    starts, ends = [], []
    for i in range(1, na):
        a = a0 + (a1 - a0) * i / na
        starts.append(point(a, z0 + inset))
        ends.append(point(a, z1 - inset))
    for j in range(1, nz):
        z = z0 + (z1 - z0) * j / nz
        starts.append(point(a0 + inset, z))
        ends.append(point(a1 - inset, z))
    return tubes(np.array(starts), np.array(ends), thickness)


def bulb_meshes(bulbs: list[Bulb], segments: int = 16, rings: int = 8) -> list[TriMesh]:
    from .mesh import sphere
    out = []
    for b in bulbs:
        out.append(sphere(segments, rings).scaled_translated(np.full(3, 2.0 * b.radius),
                                                              b.position).with_slot(b.material_slot))
    return out
