"""Scene box and category-tagged object boxes.

The interior of a scene is ``[-hx, hx] x [-hy, hy] x [0, height]``. Floor,
ceiling and walls are slabs of ``wall_thickness`` lying just outside it, so
floor contact means ``min_z == 0``, ceiling contact ``max_z == height`` and
wall contact ``max_x == hx`` (and so on for the other three walls).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .config import FloorPlanConfig, GenConfig, Range
from .rng import Stream


class BoxCategory(str, enum.Enum):
    LARGE_OBJECT = "LargeObject"
    SMALL_ON_GROUND = "SmallOnGround"
    SMALL_ATOP_LARGE = "SmallAtopLarge"
    ON_ROOF_THIN = "OnRoofThin"
    ON_ROOF_THICK = "OnRoofThick"
    ON_WALL_THIN = "OnWallThin"
    ON_WALL_THICK = "OnWallThick"
    WIREFRAME = "Wireframe"
    THIN_STICK_ON_WALL = "ThinStickOnWall"
    THIN_STICK_IN_SPACE = "ThinStickInSpace"
    AXIS_ALIGNED = "AxisAligned"


SOLID_CATEGORIES = frozenset({
    BoxCategory.LARGE_OBJECT, BoxCategory.SMALL_ON_GROUND, BoxCategory.SMALL_ATOP_LARGE,
    BoxCategory.ON_ROOF_THIN, BoxCategory.ON_ROOF_THICK,
    BoxCategory.ON_WALL_THIN, BoxCategory.ON_WALL_THICK,
})
STICK_CATEGORIES = frozenset({BoxCategory.THIN_STICK_ON_WALL, BoxCategory.THIN_STICK_IN_SPACE})
WALL_CATEGORIES = frozenset({BoxCategory.ON_WALL_THIN, BoxCategory.ON_WALL_THICK,
                             BoxCategory.THIN_STICK_ON_WALL})
ROOF_CATEGORIES = frozenset({BoxCategory.ON_ROOF_THIN, BoxCategory.ON_ROOF_THICK})
FLOOR_CATEGORIES = frozenset({BoxCategory.LARGE_OBJECT, BoxCategory.SMALL_ON_GROUND})

# wall id -> (axis, sign); outward normal is sign * e_axis
WALLS = ((0, 1.0), (0, -1.0), (1, 1.0), (1, -1.0))


@dataclass(frozen=True)
class SceneBox:
    half_extent_x: float
    half_extent_y: float
    height: float
    wall_thickness: float

    @property
    def size_x(self) -> float:
        return 2.0 * self.half_extent_x

    @property
    def size_y(self) -> float:
        return 2.0 * self.half_extent_y

    @property
    def interior_min(self) -> np.ndarray:
        return np.array([-self.half_extent_x, -self.half_extent_y, 0.0])

    @property
    def interior_max(self) -> np.ndarray:
        return np.array([self.half_extent_x, self.half_extent_y, self.height])

    @property
    def center(self) -> np.ndarray:
        return np.array([0.0, 0.0, 0.5 * self.height])

    def half_extent(self, axis: int) -> float:
        return (self.half_extent_x, self.half_extent_y)[axis]

    def to_json(self) -> dict:
        return {"half_extent_x": self.half_extent_x, "half_extent_y": self.half_extent_y,
                "height": self.height, "wall_thickness": self.wall_thickness}

    @classmethod
    def from_json(cls, d: dict) -> SceneBox:
        return cls(d["half_extent_x"], d["half_extent_y"], d["height"], d["wall_thickness"])


@dataclass(frozen=True)
class ObjectBox:
    category: BoxCategory
    min_corner: tuple[float, float, float]
    max_corner: tuple[float, float, float]
    parent: int | None = None
    wall_id: int | None = None

    @property
    def size(self) -> np.ndarray:
        return np.subtract(self.max_corner, self.min_corner)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.min_corner) + np.asarray(self.max_corner))

    def to_json(self) -> dict:
        return {"category": self.category.value, "min": list(self.min_corner),
                "max": list(self.max_corner), "parent": self.parent, "wall_id": self.wall_id}

    @classmethod
    def from_json(cls, d: dict) -> ObjectBox:
        return cls(BoxCategory(d["category"]), tuple(d["min"]), tuple(d["max"]),
                   d.get("parent"), d.get("wall_id"))


def boxes_overlap(a: ObjectBox, b: ObjectBox) -> bool:
    """Open-interior intersection test; touching faces do not overlap."""
    return all(a.min_corner[i] < b.max_corner[i] and b.min_corner[i] < a.max_corner[i]
               for i in range(3))


def footprints_overlap(a: ObjectBox, b: ObjectBox) -> bool:
    return all(a.min_corner[i] < b.max_corner[i] and b.min_corner[i] < a.max_corner[i]
               for i in range(2))


def sample_scene_box(stream: Stream, cfg: GenConfig) -> SceneBox:
    fp = cfg.floorplan
    size_x = stream.uniform(fp.scene_size)
    size_y = stream.uniform(fp.scene_size)
    height = stream.uniform(fp.scene_height)
    return SceneBox(0.5 * size_x, 0.5 * size_y, height, fp.wall_thickness)


def _make_box(category, lo, hi, parent=None, wall_id=None) -> ObjectBox:
    return ObjectBox(category, tuple(float(v) for v in lo), tuple(float(v) for v in hi),
                     parent, wall_id)


def _wall_box(scene: SceneBox, wall_id: int, along: float, depth: float, vertical: float,
              t_along: float, t_up: float, category) -> ObjectBox:
    """Box flush against ``wall_id``; ``t_*`` are unit fractions of the free span."""
    axis, sign = WALLS[wall_id]
    other = 1 - axis
    h_wall = scene.half_extent(axis)
    h_other = scene.half_extent(other)
    lo = np.zeros(3)
    hi = np.zeros(3)
    a0 = -h_other + t_along * (2.0 * h_other - along)
    lo[other], hi[other] = a0, a0 + along
    z0 = t_up * (scene.height - vertical)
    lo[2], hi[2] = z0, z0 + vertical
    if sign > 0:
        hi[axis] = h_wall
        lo[axis] = h_wall - depth
    else:
        lo[axis] = -h_wall
        hi[axis] = -h_wall + depth
    return _make_box(category, lo, hi, wall_id=wall_id)


def _free_box(scene: SceneBox, size: np.ndarray, u: np.ndarray, category,
              z_floor: bool = False, z_ceiling: bool = False) -> ObjectBox:
    lo = np.zeros(3)
    hi = np.zeros(3)
    for axis in range(2):
        h = scene.half_extent(axis)
        lo[axis] = -h + u[axis] * (2.0 * h - size[axis])
        hi[axis] = lo[axis] + size[axis]
    if z_floor:
        lo[2], hi[2] = 0.0, size[2]
    elif z_ceiling:
        lo[2], hi[2] = scene.height - size[2], scene.height
    else:
        lo[2] = u[2] * (scene.height - size[2])
        hi[2] = lo[2] + size[2]
    return _make_box(category, lo, hi)


def clamp_size(category: BoxCategory, size, scene: SceneBox) -> np.ndarray:
    """Clamp box extents to the span available to ``category``.

    For wall categories ``size`` is (along-wall, protrusion, vertical); the
    along-wall limit uses the shorter wall so every wall can host the box.
    """
    size = np.array(size, dtype=float)
    if category in WALL_CATEGORIES:
        limits = np.array([min(scene.size_x, scene.size_y), min(scene.size_x, scene.size_y),
                           scene.height])
    else:
        limits = np.array([scene.size_x, scene.size_y, scene.height])
    return np.minimum(size, limits)


def place_box(stream: Stream, category: BoxCategory, size, scene: SceneBox,
              existing: list[ObjectBox], cfg: FloorPlanConfig | None = None) -> ObjectBox | None:
    """Place one box of ``category``; ``None`` when placement is rejected.

    Large boxes must not overlap other large boxes in XY and are rejected once
    ``large_attempts`` poses fail. Every other category tries
    ``other_attempts`` poses for a collision-free spot and then keeps the last
    pose even if it overlaps.
    """
    cfg = cfg or FloorPlanConfig()
    size = clamp_size(category, size, scene)

    if category is BoxCategory.LARGE_OBJECT:
        larges = [b for b in existing if b.category is BoxCategory.LARGE_OBJECT]
        for _ in range(cfg.large_attempts):
            u = np.array([stream.random(), stream.random(), 0.0])
            box = _free_box(scene, size, u, category, z_floor=True)
            if not any(footprints_overlap(box, b) for b in larges):
                return box
        return None

    if category is BoxCategory.SMALL_ATOP_LARGE:
        parents = [i for i, b in enumerate(existing)
                   if b.category is BoxCategory.LARGE_OBJECT
                   and b.size[0] >= size[0] and b.size[1] >= size[1]
                   and b.max_corner[2] + size[2] <= scene.height]
        if not parents:
            return place_box(stream, BoxCategory.SMALL_ON_GROUND, size, scene, existing, cfg)

    box = None
    for _ in range(cfg.other_attempts):
        box = _propose(stream, category, size, scene, existing,
                       parents if category is BoxCategory.SMALL_ATOP_LARGE else None)
        others = [b for i, b in enumerate(existing) if i != box.parent]
        if not any(boxes_overlap(box, b) for b in others):
            return box
    return box


def _propose(stream: Stream, category: BoxCategory, size: np.ndarray, scene: SceneBox,
             existing: list[ObjectBox], parents: list[int] | None) -> ObjectBox:
    if category is BoxCategory.SMALL_ON_GROUND:
        u = np.array([stream.random(), stream.random(), 0.0])
        return _free_box(scene, size, u, category, z_floor=True)

    if category is BoxCategory.SMALL_ATOP_LARGE:
        pi = parents[min(int(stream.random() * len(parents)), len(parents) - 1)]
        p = existing[pi]
        lo = np.zeros(3)
        hi = np.zeros(3)
        for axis in range(2):
            lo[axis] = p.min_corner[axis] + stream.random() * (p.size[axis] - size[axis])
            hi[axis] = lo[axis] + size[axis]
        lo[2] = p.max_corner[2]
        hi[2] = lo[2] + size[2]
        return _make_box(category, lo, hi, parent=pi)

    if category in ROOF_CATEGORIES:
        u = np.array([stream.random(), stream.random(), 0.0])
        return _free_box(scene, size, u, category, z_ceiling=True)

    if category in WALL_CATEGORIES:
        wall_id = min(int(stream.random() * 4), 3)
        along, depth, vertical = size
        axis = WALLS[wall_id][0]
        # the clamp above used the shorter wall; re-clamp to this wall's span
        along = min(along, 2.0 * scene.half_extent(1 - axis))
        depth = min(depth, 2.0 * scene.half_extent(axis))
        return _wall_box(scene, wall_id, along, depth, vertical,
                         stream.random(), stream.random(), category)

    u = np.array([stream.random(), stream.random(), stream.random()])
    return _free_box(scene, size, u, category)


def _stick_size(stream: Stream, category: BoxCategory, scene: SceneBox, fp: FloorPlanConfig):
    length = stream.uniform(fp.stick_length)
    if category is BoxCategory.THIN_STICK_ON_WALL:
        c = stream.uniform(fp.stick_wall_size)
        if stream.bernoulli(0.5):
            return np.array([c, c, length])      # vertical along the wall
        return np.array([length, c, c])          # horizontal along the wall
    c = stream.uniform(fp.stick_space_size)
    axis = min(int(stream.random() * 3), 2)
    size = np.array([c, c, c])
    size[axis] = length
    return size


def sample_object_boxes(stream: Stream, scene: SceneBox, cfg: GenConfig) -> list[ObjectBox]:
    """Populate ``scene`` with object boxes for every category.

    Category order is fixed (large boxes first so small boxes can sit on
    them). Rejected large boxes are dropped; no other category is rejected.
    """
    fp = cfg.floorplan
    boxes: list[ObjectBox] = []

    def add(category, size):
        box = place_box(stream, category, size, scene, boxes, fp)
        if box is not None:
            boxes.append(box)

    for _ in range(stream.integer(fp.large_count)):
        size = np.array([stream.uniform(fp.large_size), stream.uniform(fp.large_size),
                         stream.uniform(fp.large_height)])
        add(BoxCategory.LARGE_OBJECT, size)

    for _ in range(stream.integer(fp.small_count)):
        on_ground = stream.bernoulli(fp.small_on_ground_prob)
        h = stream.uniform(fp.small_ground_height if on_ground else fp.small_atop_height)
        size = np.array([stream.uniform(fp.small_size), stream.uniform(fp.small_size), h])
        add(BoxCategory.SMALL_ON_GROUND if on_ground else BoxCategory.SMALL_ATOP_LARGE, size)

    for _ in range(stream.integer(fp.roof_count)):
        thin = stream.bernoulli(fp.roof_thin_prob)
        h = stream.uniform(fp.roof_thin_height if thin else fp.roof_thick_height)
        size = np.array([stream.uniform(fp.roof_size), stream.uniform(fp.roof_size), h])
        add(BoxCategory.ON_ROOF_THIN if thin else BoxCategory.ON_ROOF_THICK, size)

    for _ in range(stream.integer(fp.wall_count)):
        thin = stream.bernoulli(fp.wall_thin_prob)
        depth = stream.uniform(fp.wall_thin_height if thin else fp.wall_thick_height)
        size = np.array([stream.uniform(fp.wall_size), depth, stream.uniform(fp.wall_size)])
        add(BoxCategory.ON_WALL_THIN if thin else BoxCategory.ON_WALL_THICK, size)

    if stream.bernoulli(fp.wireframe_prob):
        for _ in range(stream.integer(fp.wireframe_count)):
            size = np.array([stream.uniform(fp.wireframe_size), stream.uniform(fp.wireframe_size),
                             stream.uniform(fp.wireframe_height)])
            add(BoxCategory.WIREFRAME, size)

    if stream.bernoulli(fp.stick_wall_prob):
        for _ in range(stream.integer(fp.stick_wall_count)):
            add(BoxCategory.THIN_STICK_ON_WALL,
                _stick_size(stream, BoxCategory.THIN_STICK_ON_WALL, scene, fp))

    if stream.bernoulli(fp.stick_space_prob):
        for _ in range(stream.integer(fp.stick_space_count)):
            add(BoxCategory.THIN_STICK_IN_SPACE,
                _stick_size(stream, BoxCategory.THIN_STICK_IN_SPACE, scene, fp))

    if stream.bernoulli(fp.axis_prob):
        for _ in range(stream.integer(fp.axis_count)):
            size = np.array([stream.uniform(fp.axis_size), stream.uniform(fp.axis_size),
                             stream.uniform(fp.axis_height)])
            add(BoxCategory.AXIS_ALIGNED, size)

    return boxes


def check_box(box: ObjectBox, scene: SceneBox, boxes: list[ObjectBox] | None = None,
              tol: float = 1e-9) -> list[str]:
    """Containment and contact violations for one box (empty list when valid)."""
    problems = []
    lo, hi = np.asarray(box.min_corner), np.asarray(box.max_corner)
    if np.any(lo >= hi):
        problems.append("degenerate box")
    if np.any(lo < scene.interior_min - tol) or np.any(hi > scene.interior_max + tol):
        problems.append("box outside scene interior")
    cat = box.category
    if cat in FLOOR_CATEGORIES and abs(lo[2]) > tol:
        problems.append("floor contact")
    if cat in ROOF_CATEGORIES and abs(hi[2] - scene.height) > tol:
        problems.append("ceiling contact")
    if cat in WALL_CATEGORIES:
        if box.wall_id is None:
            problems.append("wall box without wall id")
        else:
            axis, sign = WALLS[box.wall_id]
            face = hi[axis] if sign > 0 else -lo[axis]
            if abs(face - scene.half_extent(axis)) > tol:
                problems.append("wall contact")
    if cat is BoxCategory.SMALL_ATOP_LARGE:
        if box.parent is None or boxes is None:
            problems.append("atop box without parent")
        else:
            p = boxes[box.parent]
            if abs(lo[2] - p.max_corner[2]) > tol:
                problems.append("atop contact")
            if np.any(lo[:2] < np.asarray(p.min_corner[:2]) - tol) or \
                    np.any(hi[:2] > np.asarray(p.max_corner[:2]) + tol):
                problems.append("atop footprint outside parent")
    return problems


def large_overlaps(boxes: list[ObjectBox]) -> int:
    larges = [b for b in boxes if b.category is BoxCategory.LARGE_OBJECT]
    return sum(footprints_overlap(a, b) for i, a in enumerate(larges) for b in larges[i + 1:])
