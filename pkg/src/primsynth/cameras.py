"""Camera placement: outer look-at ring, free inner cameras, pose normalization.

Camera axes follow +x right, +y down, +z forward; ``rotation`` maps camera
coordinates to world coordinates (its columns are the camera axes).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .config import GenConfig
from .floorplan import ObjectBox, SceneBox
from .lighting import Bulb, boxes_distance, shell_distance
from .rng import Stream

WORLD_UP = np.array([0.0, 0.0, 1.0])


class Region(str, enum.Enum):
    INNER = "inner"
    OUTER = "outer"


class CameraSamplingError(RuntimeError):
    pass


@dataclass(frozen=True)
class CameraSample:
    position: tuple
    rotation: tuple            # row-major 3x3, world_from_camera
    fov_y: float               # degrees
    width: int
    height: int
    region: Region
    distance_bin: int | None = None
    d_min: float = 0.0         # clearance actually enforced for this camera

    @property
    def R(self) -> np.ndarray:
        return np.reshape(np.asarray(self.rotation, dtype=float), (3, 3))

    @property
    def center(self) -> np.ndarray:
        return np.asarray(self.position, dtype=float)

    @property
    def forward(self) -> np.ndarray:
        return self.R[:, 2]

    @property
    def focal(self) -> float:
        """Focal length in pixels from the vertical field of view."""
        return 0.5 * self.height / np.tan(0.5 * np.radians(self.fov_y))

    @property
    def principal_point(self) -> tuple[float, float]:
        return 0.5 * self.width, 0.5 * self.height

    def intrinsics(self) -> np.ndarray:
        f = self.focal
        cx, cy = self.principal_point
        return np.array([[f, 0.0, cx], [0.0, f, cy], [0.0, 0.0, 1.0]])

    def with_resolution(self, width: int, height: int) -> CameraSample:
        return replace(self, width=int(width), height=int(height))

    def to_json(self) -> dict:
        return {"position": list(self.position), "rotation": list(self.rotation),
                "fov_y": self.fov_y, "width": self.width, "height": self.height,
                "region": self.region.value, "distance_bin": self.distance_bin,
                "d_min": self.d_min}

    @classmethod
    def from_json(cls, d: dict) -> CameraSample:
        return cls(tuple(d["position"]), tuple(d["rotation"]), d["fov_y"], int(d["width"]),
                   int(d["height"]), Region(d["region"]), d.get("distance_bin"),
                   d.get("d_min", 0.0))


@dataclass
class CameraSet:
    cameras: list[CameraSample] = field(default_factory=list)
    normalization_scale: float = 1.0
    center: tuple = (0.0, 0.0, 0.0)

    def to_json(self) -> dict:
        return {"cameras": [c.to_json() for c in self.cameras],
                "normalization_scale": self.normalization_scale, "center": list(self.center)}

    @classmethod
    def from_json(cls, d: dict) -> CameraSet:
        return cls([CameraSample.from_json(c) for c in d["cameras"]], d["normalization_scale"],
                   tuple(d["center"]))


def look_at(position, target, up=WORLD_UP) -> np.ndarray:
    """world_from_camera rotation whose +z axis points at ``target``."""
    position = np.asarray(position, dtype=float)
    f = np.asarray(target, dtype=float) - position
    norm = np.linalg.norm(f)
    if norm == 0:
        raise ValueError("position and target coincide")
    f = f / norm
    up = np.asarray(up, dtype=float)
    right = np.cross(f, up)
    if np.linalg.norm(right) < 1e-9 * max(np.linalg.norm(up), 1.0):
        alt = np.array([0.0, 1.0, 0.0]) if abs(f[1]) < 0.9 else np.array([1.0, 0.0, 0.0])
        right = np.cross(f, alt)
    right /= np.linalg.norm(right)
    down = np.cross(f, right)
    return np.stack([right, down, f], axis=1)


def project(cam: CameraSample, points) -> tuple[np.ndarray, np.ndarray]:
    """Pixel coordinates (continuous, pixel centres at +0.5) and z-depth."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    c = (p - cam.center) @ cam.R
    f = cam.focal
    cx, cy = cam.principal_point
    z = c[:, 2]
    uv = np.stack([f * c[:, 0] / z + cx, f * c[:, 1] / z + cy], axis=1)
    return uv, z


def scene_clearance(p: np.ndarray, scene: SceneBox, boxes: list[ObjectBox],
                    bulbs: list[Bulb]) -> float:
    """Lower bound on the distance from ``p`` to any scene surface.

    Object geometry lies inside its box, window glass and bars lie inside the
    wall slabs and bulbs are spheres, so the bound is exact for the shell and
    conservative for objects.
    """
    d = min(shell_distance(p, scene), boxes_distance(p, boxes))
    for b in bulbs:
        d = min(d, float(np.linalg.norm(p - np.asarray(b.position))) - b.radius)
    return d


def _outer_position(stream: Stream, scene: SceneBox, cfg: GenConfig, d_min: float,
                    height_cap: float):
    cc = cfg.cameras
    R = max(scene.half_extent_x, scene.half_extent_y)
    r_in = cc.inner_fraction * R
    phi = 2.0 * np.pi * stream.random()
    c, s = np.cos(phi), np.sin(phi)
    with np.errstate(divide="ignore"):
        r_shell = min(scene.half_extent_x / abs(c) if c else np.inf,
                      scene.half_extent_y / abs(s) if s else np.inf)
    r_out = r_shell - d_min
    b = min(int(stream.random() * cc.distance_bins), cc.distance_bins - 1)
    u = (b + stream.random()) / cc.distance_bins
    r = r_in + u * max(r_out - r_in, 0.0)
    z = d_min + stream.random() * max(height_cap - d_min, 0.0)
    return np.array([r * c, r * s, z]), b


def _inner_position(stream: Stream, scene: SceneBox, cfg: GenConfig, d_min: float,
                    height_cap: float):
    R = max(scene.half_extent_x, scene.half_extent_y)
    r = cfg.cameras.inner_fraction * R * np.sqrt(stream.random())
    phi = 2.0 * np.pi * stream.random()
    z = d_min + stream.random() * max(height_cap - d_min, 0.0)
    return np.array([r * np.cos(phi), r * np.sin(phi), z])


def _sample_one(stream: Stream, region: Region, scene: SceneBox, boxes, bulbs,
                cfg: GenConfig) -> CameraSample:
    cc = cfg.cameras
    target = scene.center
    for d_min in (cc.d_min, cc.d_min * cc.relax_factor):
        for _ in range(cc.max_attempts):
            height_cap = stream.uniform(cc.height_frac) * scene.height
            if region is Region.OUTER:
                pos, b = _outer_position(stream, scene, cfg, d_min, height_cap)
            else:
                pos, b = _inner_position(stream, scene, cfg, d_min, height_cap), None
            if scene_clearance(pos, scene, boxes, bulbs) < d_min:
                continue
            if region is Region.OUTER:
                if np.linalg.norm(target - pos) < 1e-9:
                    continue
                rot = look_at(pos, target)
            else:
                yaw = 2.0 * np.pi * stream.random()
                pitch = np.radians(stream.uniform(cc.pitch_deg))
                fwd = np.array([np.cos(pitch) * np.cos(yaw), np.cos(pitch) * np.sin(yaw),
                                np.sin(pitch)])
                rot = look_at(pos, pos + fwd)
            fov = stream.uniform(cc.fov_deg)
            return CameraSample(tuple(pos), tuple(rot.ravel()), fov, cc.width, cc.height,
                                region, b, d_min)
    raise CameraSamplingError(f"no {region.value} camera position clears d_min")


def sample_cameras(stream: Stream, scene: SceneBox, boxes: list[ObjectBox],
                   bulbs: list[Bulb], cfg: GenConfig) -> CameraSet:
    """Outer cameras first, then inner ones, each on its own child stream."""
    cc = cfg.cameras
    cams = []
    for i in range(cc.outer_count):
        cams.append(_sample_one(stream.child(f"outer{i}"), Region.OUTER, scene, boxes, bulbs,
                                cfg))
    for i in range(cc.inner_count):
        cams.append(_sample_one(stream.child(f"inner{i}"), Region.INNER, scene, boxes, bulbs,
                                cfg))
    return CameraSet(cams, 1.0, tuple(scene.center))


def normalize_poses(stream: Stream, cams: CameraSet, cfg: GenConfig) -> CameraSet:
    """Scale positions about the scene centre by ``s`` drawn from the configured
    range; rotations are unchanged and ``s`` is recorded on the returned set."""
    if not cams.cameras:
        raise ValueError("cannot normalize an empty camera set")
    s = stream.uniform(cfg.cameras.normalization_scale)
    return rescale(cams, s)


def rescale(cams: CameraSet, s: float) -> CameraSet:
    return CameraSet([normalized_camera(c, s, cams.center) for c in cams.cameras], s,
                     cams.center)


def to_normalized(points, scale: float, center) -> np.ndarray:
    c = np.asarray(center, dtype=float)
    return c + scale * (np.asarray(points, dtype=float) - c)


def from_normalized(points, scale: float, center) -> np.ndarray:
    c = np.asarray(center, dtype=float)
    return c + (np.asarray(points, dtype=float) - c) / scale


def normalized_camera(cam: CameraSample, scale: float, center) -> CameraSample:
    return replace(cam, position=tuple(to_normalized(cam.position, scale, center)))
