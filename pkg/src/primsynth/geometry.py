"""Object geometry: composed primitives, height fields, wireframes, sticks and slabs.

Every object is first described by a list of :class:`PrimitiveInstance`
records (kind, canonical pose, height-field and wire parameters). Meshes are
a pure function of those records, so a serialized scene can be re-meshed
without replaying any random draws.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import GenConfig, GeometryConfig
from .floorplan import BoxCategory, ObjectBox, SOLID_CATEGORIES, STICK_CATEGORIES
from .mesh import PrimitiveKind, TriMesh, instantiate_primitive, tubes, vertex_normals
from .noise import fbm3_points
from .rng import Stream


@dataclass(frozen=True)
class HeightFieldParams:
    amplitude: float      # fraction of the mesh mean scale
    frequency: float      # noise cycles per mean scale
    octaves: int
    key: int

    def __post_init__(self) -> None:
        if self.amplitude < 0:
            raise ValueError("height-field amplitude must be nonnegative")

    def to_json(self) -> dict:
        return {"amplitude": self.amplitude, "frequency": self.frequency,
                "octaves": self.octaves, "key": self.key}

    @classmethod
    def from_json(cls, d: dict | None) -> HeightFieldParams | None:
        if d is None:
            return None
        return cls(d["amplitude"], d["frequency"], int(d["octaves"]), int(d["key"]))


@dataclass(frozen=True)
class WireParams:
    thickness: float
    subdivision: int = 1          # cube only
    segments: int = 8             # sphere meridians / torus major segments
    rings: int = 8                # sphere parallels / torus minor segments
    minor_radius: float = 0.0     # torus only

    def to_json(self) -> dict:
        return {"thickness": self.thickness, "subdivision": self.subdivision,
                "segments": self.segments, "rings": self.rings,
                "minor_radius": self.minor_radius}

    @classmethod
    def from_json(cls, d: dict | None) -> WireParams | None:
        if d is None:
            return None
        return cls(d["thickness"], int(d["subdivision"]), int(d["segments"]), int(d["rings"]),
                   d["minor_radius"])


@dataclass(frozen=True)
class PrimitiveInstance:
    """One member primitive in its object's canonical space.

    ``role`` is ``solid``, ``wire``, ``stick`` or ``slab``. Solids map the
    canonical unit primitive through ``rotation @ diag(scale)`` and then
    ``center``; wires are built directly at size ``scale`` and then rotated
    and translated the same way.
    """

    kind: str
    role: str
    scale: tuple
    rotation: tuple        # row-major 3x3
    center: tuple
    material_slot: int
    heightfield: HeightFieldParams | None = None
    wire: WireParams | None = None

    def to_json(self) -> dict:
        return {"kind": self.kind, "role": self.role, "scale": list(self.scale),
                "rotation": list(self.rotation), "center": list(self.center),
                "material_slot": self.material_slot,
                "heightfield": self.heightfield.to_json() if self.heightfield else None,
                "wire": self.wire.to_json() if self.wire else None}

    @classmethod
    def from_json(cls, d: dict) -> PrimitiveInstance:
        return cls(d["kind"], d["role"], tuple(d["scale"]), tuple(d["rotation"]),
                   tuple(d["center"]), int(d["material_slot"]),
                   HeightFieldParams.from_json(d.get("heightfield")),
                   WireParams.from_json(d.get("wire")))


@dataclass
class ObjectGeometry:
    box: ObjectBox
    members: list[PrimitiveInstance]
    scale: np.ndarray           # canonical -> world: world = scale * canonical + translation
    translation: np.ndarray
    meshes: list[TriMesh] = field(default_factory=list)

    def world_aabb(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.min([m.vertices.min(axis=0) for m in self.meshes], axis=0)
        hi = np.max([m.vertices.max(axis=0) for m in self.meshes], axis=0)
        return lo, hi

    def to_json(self) -> dict:
        return {"members": [m.to_json() for m in self.members],
                "canonical_to_world": {"scale": self.scale.tolist(),
                                       "translation": self.translation.tolist()}}


# ---------------------------------------------------------------------------
# height field


def sample_heightfield(stream: Stream, cfg: GeometryConfig) -> HeightFieldParams:
    return HeightFieldParams(stream.uniform(cfg.heightfield_amplitude),
                             stream.uniform(cfg.heightfield_frequency),
                             cfg.heightfield_octaves, stream.uint32())


def heightfield_offsets(mesh: TriMesh, p: HeightFieldParams) -> np.ndarray:
    """Signed per-vertex displacement, bounded by ``amplitude * mean_scale``."""
    ms = mesh.mean_scale()
    if p.amplitude == 0.0 or ms == 0.0:
        return np.zeros(mesh.n_vertices)
    noise = fbm3_points(np.ascontiguousarray(mesh.vertices), p.frequency / ms,
                        np.int64(p.key), p.octaves)
    return p.amplitude * ms * np.clip(noise, -1.0, 1.0)


def apply_height_field(mesh: TriMesh, p: HeightFieldParams) -> TriMesh:
    """Displace every vertex along its normal; connectivity is untouched."""
    if p.amplitude == 0.0:
        return mesh
    d = heightfield_offsets(mesh, p)
    vertices = mesh.vertices + mesh.normals * d[:, None]
    return TriMesh(vertices, mesh.triangles, mesh.uvs,
                   vertex_normals(vertices, mesh.triangles), mesh.material_slot, mesh.smooth)


# ---------------------------------------------------------------------------
# wireframes


def _cube_wire_segments(size: np.ndarray, level: int):
    h = 0.5 * size
    a_list, b_list = [], []
    for axis in range(3):
        o1, o2 = (axis + 1) % 3, (axis + 2) % 3
        g1 = np.linspace(-h[o1], h[o1], level + 1)
        g2 = np.linspace(-h[o2], h[o2], level + 1)
        ga = np.linspace(-h[axis], h[axis], level + 1)
        for i1, c1 in enumerate(g1):
            for i2, c2 in enumerate(g2):
                if i1 not in (0, level) and i2 not in (0, level):
                    continue                     # interior line, not on the surface
                for k in range(level):
                    a = np.zeros(3)
                    b = np.zeros(3)
                    a[o1] = b[o1] = c1
                    a[o2] = b[o2] = c2
                    a[axis], b[axis] = ga[k], ga[k + 1]
                    a_list.append(a)
                    b_list.append(b)
    return np.array(a_list), np.array(b_list)


def _sphere_wire_segments(size: np.ndarray, meridians: int, parallels: int):
    # parallels sit at evenly spaced latitudes strictly between the poles
    lat = np.pi * np.arange(1, parallels + 1) / (parallels + 1) - 0.5 * np.pi
    lon = 2.0 * np.pi * np.arange(meridians) / meridians
    h = 0.5 * size

    def point(la, lo):
        return np.stack([h[0] * np.cos(la) * np.cos(lo), h[1] * np.cos(la) * np.sin(lo),
                         h[2] * np.sin(la) * np.ones_like(lo)], -1)

    a_list, b_list = [], []
    for la in lat:                                  # parallels
        p = point(la, lon)
        a_list.append(p)
        b_list.append(np.roll(p, -1, axis=0))
    full_lat = np.concatenate([[-0.5 * np.pi], lat, [0.5 * np.pi]])
    for lo in lon:                                  # meridians, pole to pole
        p = point(full_lat, np.full_like(full_lat, lo))
        a_list.append(p[:-1])
        b_list.append(p[1:])
    return np.concatenate(a_list), np.concatenate(b_list)


def _torus_wire_segments(size: np.ndarray, minor: float, major_segments: int,
                         minor_segments: int):
    major = max(0.25 * (size[0] + size[1]) - minor, 1.2 * minor)
    theta = 2.0 * np.pi * np.arange(major_segments) / major_segments
    phi = 2.0 * np.pi * np.arange(minor_segments) / minor_segments
    T, P = np.meshgrid(theta, phi, indexing="ij")
    rr = major + minor * np.cos(P)
    pts = np.stack([rr * np.cos(T), rr * np.sin(T), minor * np.sin(P)], -1)
    a = np.concatenate([pts.reshape(-1, 3), pts.reshape(-1, 3)])
    b = np.concatenate([np.roll(pts, -1, axis=0).reshape(-1, 3),
                        np.roll(pts, -1, axis=1).reshape(-1, 3)])
    return a, b


def wire_segments(kind: str, size, wire: WireParams):
    """Segment endpoints of the wire graph of ``kind`` at bounding size ``size``.

    Endpoints are inset by half the tube thickness, so thickened cube and
    sphere wires overshoot ``size`` by less than one thickness. A torus with
    the configured minor radius can overshoot further. Fitting the object to
    its box absorbs either.
    """
    size = np.asarray(size, dtype=float)
    inner = np.maximum(size - wire.thickness, 1e-6)
    kind = PrimitiveKind(kind)
    if kind is PrimitiveKind.CUBE:
        return _cube_wire_segments(inner, wire.subdivision)
    if kind is PrimitiveKind.SPHERE:
        return _sphere_wire_segments(inner, wire.segments, wire.rings)
    if kind is PrimitiveKind.TORUS:
        return _torus_wire_segments(inner, wire.minor_radius, wire.segments, wire.rings)
    raise ValueError(f"no wireframe for primitive kind {kind.value}")


def sample_wire_params(stream: Stream, kind: str, size, cfg: GeometryConfig) -> WireParams:
    ms = float(np.mean(size))
    thickness = ms * stream.uniform(cfg.wireframe_thickness)
    if kind == PrimitiveKind.CUBE.value:
        return WireParams(thickness, subdivision=int(stream.categorical(cfg.cube_wire_subdivision)))
    if kind == PrimitiveKind.SPHERE.value:
        return WireParams(thickness, segments=cfg.sphere_wire_segments, rings=cfg.sphere_wire_rings)
    if kind == PrimitiveKind.TORUS.value:
        return WireParams(thickness, segments=cfg.torus_major_segments,
                          rings=cfg.torus_minor_segments,
                          minor_radius=cfg.torus_minor_radius * ms)
    raise ValueError(f"no wireframe for primitive kind {kind}")


def build_wireframe(stream: Stream, kind: str, size, cfg: GenConfig | GeometryConfig) -> TriMesh:
    """Thickened wire graph of ``kind`` centred at the origin with bounding size ``size``."""
    gcfg = cfg.geometry if isinstance(cfg, GenConfig) else cfg
    return wire_mesh(kind, size, sample_wire_params(stream, kind, size, gcfg))


def wire_mesh(kind: str, size, wire: WireParams) -> TriMesh:
    a, b = wire_segments(kind, size, wire)
    return tubes(a, b, wire.thickness)


# ---------------------------------------------------------------------------
# composition


def _yaw(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _random_rotation(stream: Stream) -> np.ndarray:
    q = stream.normal(4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def _oriented_bounds(rotation: np.ndarray, scale: np.ndarray, center: np.ndarray):
    half = 0.5 * np.abs(rotation) @ scale
    return center - half, center + half


# long axis -> rotation taking canonical +z onto that axis
_AXIS_ROT = {
    0: np.array([[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]]),
    1: np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]]),
    2: np.eye(3),
}


def _count_for(category: BoxCategory, cfg: GeometryConfig):
    if category is BoxCategory.LARGE_OBJECT:
        return cfg.large_count
    if category in (BoxCategory.ON_WALL_THIN, BoxCategory.ON_WALL_THICK):
        return cfg.wall_count
    if category in (BoxCategory.ON_ROOF_THIN, BoxCategory.ON_ROOF_THICK):
        return cfg.roof_count
    if category is BoxCategory.WIREFRAME:
        return cfg.wireframe_count
    return cfg.small_count


def _cohesive_center(stream: Stream, bounds: list[tuple[np.ndarray, np.ndarray]],
                     inflation: float) -> np.ndarray:
    if not bounds:
        return np.zeros(3)
    lo = np.min([b[0] for b in bounds], axis=0)
    hi = np.max([b[1] for b in bounds], axis=0)
    pad = 0.5 * inflation * (hi - lo)
    lo, hi = lo - pad, hi + pad
    return np.array([lo[i] + stream.random() * (hi[i] - lo[i]) for i in range(3)])


def _solid_member(stream: Stream, cfg: GeometryConfig, slot: int, scale: np.ndarray,
                  center: np.ndarray) -> PrimitiveInstance:
    kind = stream.categorical(cfg.primitive_kinds)
    rot = _random_rotation(stream) if kind == "sphere" else _yaw(2.0 * np.pi * stream.random())
    hf = sample_heightfield(stream, cfg)
    return PrimitiveInstance(kind, "solid", tuple(scale), tuple(rot.ravel()), tuple(center),
                             slot, heightfield=hf)


def sample_members(stream: Stream, category: BoxCategory, box: ObjectBox, cfg: GeometryConfig,
                   first_slot: int = 0) -> list[PrimitiveInstance]:
    """Member primitive records for one object box (no meshing)."""
    size = box.size
    if category in STICK_CATEGORIES:
        kind = stream.categorical(cfg.stick_kinds)
        axis = int(np.argmax(size))
        rot = _AXIS_ROT[axis]
        scale = np.abs(rot.T) @ size            # canonical extents before rotation
        return [PrimitiveInstance(kind, "stick", tuple(scale), tuple(rot.ravel()),
                                  (0.0, 0.0, 0.0), first_slot)]
    if category is BoxCategory.AXIS_ALIGNED:
        return [PrimitiveInstance("cube", "slab", tuple(size), tuple(np.eye(3).ravel()),
                                  (0.0, 0.0, 0.0), first_slot)]

    members: list[PrimitiveInstance] = []
    bounds: list[tuple[np.ndarray, np.ndarray]] = []
    count = int(stream.categorical(_count_for(category, cfg)))
    slot = first_slot

    if category is BoxCategory.WIREFRAME:
        for _ in range(count):
            kind = stream.categorical(cfg.wireframe_kinds)
            msize = size * np.array([stream.uniform(cfg.wire_member_scale) for _ in range(3)])
            rot = _yaw(2.0 * np.pi * stream.random())
            center = _cohesive_center(stream, bounds, cfg.cohesion_inflation)
            wire = sample_wire_params(stream, kind, msize, cfg)
            members.append(PrimitiveInstance(kind, "wire", tuple(msize), tuple(rot.ravel()),
                                             tuple(center), slot, wire=wire))
            bounds.append(_oriented_bounds(rot, msize, center))
            slot += 1
        if stream.bernoulli(cfg.intersecting_prob):
            lo = np.min([b[0] for b in bounds], axis=0)
            hi = np.max([b[1] for b in bounds], axis=0)
            scale = (hi - lo) * np.array([stream.uniform(cfg.intersecting_scale) for _ in range(3)])
            center = np.array([lo[i] + stream.random() * (hi[i] - lo[i]) for i in range(3)])
            members.append(_solid_member(stream, cfg, slot, scale, center))
        return members

    if category not in SOLID_CATEGORIES:
        raise ValueError(f"unknown category {category}")
    for _ in range(count):
        scale = np.array([stream.uniform(cfg.member_scale) for _ in range(3)])
        center = _cohesive_center(stream, bounds, cfg.cohesion_inflation)
        m = _solid_member(stream, cfg, slot, scale, center)
        members.append(m)
        bounds.append(_oriented_bounds(np.reshape(m.rotation, (3, 3)), scale, center))
        slot += 1
    return members


def member_mesh(m: PrimitiveInstance, cfg: GeometryConfig) -> TriMesh:
    """Mesh of one member in its object's canonical space."""
    rot = np.reshape(m.rotation, (3, 3))
    scale = np.asarray(m.scale)
    if m.role == "wire":
        mesh = wire_mesh(m.kind, scale, m.wire).transformed(rot, m.center)
    else:
        displaced = m.heightfield is not None and m.kind != "sphere"
        base = instantiate_primitive(m.kind, segments=cfg.cylinder_segments
                                     if m.kind in ("cylinder", "cone") else cfg.sphere_segments,
                                     rings=cfg.sphere_rings,
                                     subdivisions=cfg.displaced_subdivision if displaced else 1)
        mesh = base.transformed(rot @ np.diag(scale), m.center)
        if m.heightfield is not None:
            mesh = apply_height_field(mesh, m.heightfield)
    return mesh.with_slot(m.material_slot)


def fit_transform(meshes: list[TriMesh], box: ObjectBox) -> tuple[np.ndarray, np.ndarray]:
    lo = np.min([m.vertices.min(axis=0) for m in meshes], axis=0)
    hi = np.max([m.vertices.max(axis=0) for m in meshes], axis=0)
    scale = box.size / (hi - lo)
    translation = np.asarray(box.min_corner) - scale * lo
    return scale, translation


def build_object(box: ObjectBox, members: list[PrimitiveInstance], cfg: GeometryConfig,
                 transform: tuple[np.ndarray, np.ndarray] | None = None) -> ObjectGeometry:
    """Mesh ``members`` and fit them to ``box``.

    ``transform`` replays a stored canonical-to-world mapping; without it the
    mapping is computed so the union AABB equals the box.
    """
    canonical = [member_mesh(m, cfg) for m in members]
    scale, translation = transform if transform is not None else fit_transform(canonical, box)
    meshes = [m.scaled_translated(scale, translation) for m in canonical]
    return ObjectGeometry(box, list(members), np.asarray(scale), np.asarray(translation), meshes)


def compose_object(stream: Stream, category: BoxCategory, box: ObjectBox, cfg: GenConfig,
                   first_slot: int = 0) -> ObjectGeometry:
    members = sample_members(stream, category, box, cfg.geometry, first_slot)
    return build_object(box, members, cfg.geometry)
