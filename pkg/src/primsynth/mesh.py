"""Indexed triangle meshes and the canonical shape primitives.

Canonical primitives are unit sized and centred at the origin: the cube spans
``[-0.5, 0.5]^3``, the sphere, cylinder and cone have radius 0.5 and unit
height along z. Solids are closed, outward-oriented and vertex-welded so that
displacing vertices along their normals keeps them closed.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


class PrimitiveKind(str, enum.Enum):
    CUBE = "cube"
    SPHERE = "sphere"
    CYLINDER = "cylinder"
    CONE = "cone"
    TORUS = "torus"


@dataclass
class TriMesh:
    vertices: np.ndarray        # (n, 3) float64
    triangles: np.ndarray       # (m, 3) int64
    uvs: np.ndarray             # (n, 2)
    normals: np.ndarray         # (n, 3), unit
    material_slot: np.ndarray   # (m,) int32
    smooth: np.ndarray          # (m,) bool; flat triangles shade with the face normal

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def aabb(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def mean_scale(self) -> float:
        lo, hi = self.aabb()
        return float(np.mean(hi - lo))

    def with_slot(self, slot: int) -> TriMesh:
        return TriMesh(self.vertices, self.triangles, self.uvs, self.normals,
                       np.full(self.n_triangles, slot, dtype=np.int32), self.smooth)

    def transformed(self, linear: np.ndarray, translation) -> TriMesh:
        """Apply ``v -> linear @ v + translation``; normals use the inverse transpose."""
        linear = np.asarray(linear, dtype=float)
        vertices = self.vertices @ linear.T + np.asarray(translation, dtype=float)
        normals = self.normals @ np.linalg.inv(linear)
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        triangles = self.triangles
        if np.linalg.det(linear) < 0:
            triangles = triangles[:, ::-1].copy()
        return TriMesh(vertices, triangles, self.uvs, normals, self.material_slot, self.smooth)

    def scaled_translated(self, scale, translation) -> TriMesh:
        return self.transformed(np.diag(np.asarray(scale, dtype=float)), translation)

    def face_normals(self) -> np.ndarray:
        v = self.vertices
        t = self.triangles
        n = np.cross(v[t[:, 1]] - v[t[:, 0]], v[t[:, 2]] - v[t[:, 0]])
        return n

    def triangle_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self.face_normals(), axis=1)

    def with_recomputed_normals(self) -> TriMesh:
        return TriMesh(self.vertices, self.triangles, self.uvs,
                       vertex_normals(self.vertices, self.triangles),
                       self.material_slot, self.smooth)

    @staticmethod
    def concat(meshes: list[TriMesh]) -> TriMesh:
        if not meshes:
            return empty_mesh()
        offsets = np.cumsum([0] + [m.n_vertices for m in meshes[:-1]])
        return TriMesh(
            np.concatenate([m.vertices for m in meshes]),
            np.concatenate([m.triangles + o for m, o in zip(meshes, offsets)]),
            np.concatenate([m.uvs for m in meshes]),
            np.concatenate([m.normals for m in meshes]),
            np.concatenate([m.material_slot for m in meshes]),
            np.concatenate([m.smooth for m in meshes]),
        )


def empty_mesh() -> TriMesh:
    return TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64), np.zeros((0, 2)),
                   np.zeros((0, 3)), np.zeros(0, dtype=np.int32), np.zeros(0, dtype=bool))


def vertex_normals(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Area-weighted vertex normals."""
    fn = np.cross(vertices[triangles[:, 1]] - vertices[triangles[:, 0]],
                  vertices[triangles[:, 2]] - vertices[triangles[:, 0]])
    idx = triangles.ravel()
    w = np.repeat(fn, 3, axis=0)
    nv = len(vertices)
    n = np.stack([np.bincount(idx, weights=w[:, c], minlength=nv) for c in range(3)], axis=1)
    norm = np.linalg.norm(n, axis=1, keepdims=True)
    norm[norm == 0] = 1.0
    return n / norm


def _finish(vertices, triangles, uvs, smooth) -> TriMesh:
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    smooth = np.broadcast_to(np.asarray(smooth, dtype=bool), (len(triangles),)).copy()
    mesh = TriMesh(vertices, triangles, np.asarray(uvs, dtype=float),
                   vertex_normals(vertices, triangles),
                   np.zeros(len(triangles), dtype=np.int32), smooth)
    for a in (mesh.vertices, mesh.triangles, mesh.uvs, mesh.normals, mesh.material_slot,
              mesh.smooth):
        a.setflags(write=False)
    return mesh


# ---------------------------------------------------------------------------
# primitives


def _quad_grid_triangles(rows: int, cols: int, index) -> np.ndarray:
    """Triangles of a ``rows x cols`` quad grid; ``index(r, c)`` maps grid points."""
    r, c = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    p00, p10 = index(r, c), index(r, c + 1)
    p11, p01 = index(r + 1, c + 1), index(r + 1, c)
    tris = np.stack([np.stack([p00, p10, p11], -1), np.stack([p00, p11, p01], -1)], axis=2)
    return tris.reshape(-1, 3)


@lru_cache(maxsize=None)
def cube(subdivisions: int = 1) -> TriMesh:
    """Cube with an ``n x n`` quad grid per face (welded along edges)."""
    n = subdivisions
    g = np.linspace(-0.5, 0.5, n + 1)
    verts, uvs, tris = [], [], []
    base = 0
    for axis in range(3):
        for sign in (1.0, -1.0):
            u_ax, v_ax = (axis + 1) % 3, (axis + 2) % 3
            if sign < 0:
                u_ax, v_ax = v_ax, u_ax
            a, b = np.meshgrid(g, g, indexing="ij")   # a along u_ax, b along v_ax
            p = np.zeros((n + 1, n + 1, 3))
            p[..., axis] = 0.5 * sign
            p[..., u_ax] = a
            p[..., v_ax] = b
            verts.append(p.reshape(-1, 3))
            uvs.append(np.stack([a + 0.5, b + 0.5], -1).reshape(-1, 2))
            # grid rows follow b (v axis), columns follow a (u axis)
            tris.append(base + _quad_grid_triangles(n, n, lambda r, c: c * (n + 1) + r))
            base += (n + 1) ** 2
    verts = np.concatenate(verts)
    uvs = np.concatenate(uvs)
    tris = np.concatenate(tris)
    key = np.round(verts * (1 << 20)).astype(np.int64)
    _, first, inverse = np.unique(key, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.reshape(-1)
    return _finish(verts[first], inverse[tris], uvs[first], False)


def _ring(radius, z, segments):
    theta = 2.0 * np.pi * np.arange(segments) / segments
    return np.stack([radius * np.cos(theta), radius * np.sin(theta),
                     np.full(segments, z)], -1)


def _cap(rim_index: np.ndarray, z: float, cap_rings: int, segments: int, start: int,
         top: bool):
    """Concentric cap rings inside an existing rim plus a centre vertex."""
    verts = []
    rings = [rim_index]
    idx = start
    for q in range(1, cap_rings):
        verts.append(_ring(0.5 * (1.0 - q / cap_rings), z, segments))
        rings.append(np.arange(idx, idx + segments))
        idx += segments
    verts.append(np.array([[0.0, 0.0, z]]))
    center = idx
    tris = []
    i = np.arange(segments)
    j = (i + 1) % segments
    for outer, inner in zip(rings[:-1], rings[1:]):
        tris.append(np.stack([outer[i], outer[j], inner[j]], -1))
        tris.append(np.stack([outer[i], inner[j], inner[i]], -1))
    inner = rings[-1]
    tris.append(np.stack([np.full(segments, center), inner[i], inner[j]], -1))
    tris = np.concatenate(tris)
    if not top:
        tris = tris[:, ::-1]
    return np.concatenate(verts), tris


@lru_cache(maxsize=None)
def cylinder(segments: int = 32, rings: int = 1, cap_rings: int = 1) -> TriMesh:
    s = segments
    side = np.concatenate([_ring(0.5, -0.5 + j / rings, s) for j in range(rings + 1)])
    i = np.arange(s)
    uv_side = np.stack([np.tile(i / s, rings + 1), np.repeat(np.arange(rings + 1) / rings, s)], -1)
    side_tris = _quad_grid_triangles(rings, s, lambda r, c: r * s + c % s)
    n_side = len(side)
    bot_v, bot_t = _cap(np.arange(s), -0.5, cap_rings, s, n_side, top=False)
    top_v, top_t = _cap(np.arange(rings * s, (rings + 1) * s), 0.5, cap_rings, s,
                        n_side + len(bot_v), top=True)
    verts = np.concatenate([side, bot_v, top_v])
    cap_uv = verts[n_side:, :2] + 0.5
    uvs = np.concatenate([uv_side, cap_uv])
    tris = np.concatenate([side_tris, bot_t, top_t])
    smooth = np.concatenate([np.ones(len(side_tris), bool), np.zeros(len(bot_t) + len(top_t), bool)])
    return _finish(verts, tris, uvs, smooth)


@lru_cache(maxsize=None)
def cone(segments: int = 32, rings: int = 1, cap_rings: int = 1) -> TriMesh:
    """Cone with base disk at z=-0.5 and apex at the +z pole."""
    s = segments
    side = np.concatenate([_ring(0.5 * (1.0 - j / rings), -0.5 + j / rings, s)
                           for j in range(rings)])
    apex = rings * s
    side = np.concatenate([side, [[0.0, 0.0, 0.5]]])
    i = np.arange(s)
    uv_side = np.concatenate([np.stack([np.tile(i / s, rings),
                                        np.repeat(np.arange(rings) / rings, s)], -1), [[0.5, 1.0]]])
    tris = []
    if rings > 1:
        tris.append(_quad_grid_triangles(rings - 1, s, lambda r, c: r * s + c % s))
    last = (rings - 1) * s
    tris.append(np.stack([last + i, last + (i + 1) % s, np.full(s, apex)], -1))
    side_tris = np.concatenate(tris)
    n_side = len(side)
    bot_v, bot_t = _cap(np.arange(s), -0.5, cap_rings, s, n_side, top=False)
    verts = np.concatenate([side, bot_v])
    uvs = np.concatenate([uv_side, bot_v[:, :2] + 0.5])
    smooth = np.concatenate([np.ones(len(side_tris), bool), np.zeros(len(bot_t), bool)])
    return _finish(verts, np.concatenate([side_tris, bot_t]), uvs, smooth)


@lru_cache(maxsize=None)
def sphere(segments: int = 32, rings: int = 16) -> TriMesh:
    s, r = segments, rings
    phi = np.pi * np.arange(1, r) / r
    ring_v = np.concatenate([_ring(0.5 * np.sin(p), 0.5 * np.cos(p), s) for p in phi])
    verts = np.concatenate([[[0.0, 0.0, 0.5]], ring_v, [[0.0, 0.0, -0.5]]])
    south = len(verts) - 1
    i = np.arange(s)
    j = (i + 1) % s
    tris = [np.stack([np.zeros(s, np.int64), 1 + i, 1 + j], -1)]
    for q in range(r - 2):
        upper = 1 + q * s
        lower = upper + s
        tris.append(np.stack([lower + i, lower + j, upper + j], -1))
        tris.append(np.stack([lower + i, upper + j, upper + i], -1))
    last = 1 + (r - 2) * s
    tris.append(np.stack([np.full(s, south), last + j, last + i], -1))
    uvs = np.concatenate([[[0.5, 0.0]],
                          np.stack([np.tile(i / s, r - 1), np.repeat(np.arange(1, r) / r, s)], -1),
                          [[0.5, 1.0]]])
    return _finish(verts, np.concatenate(tris), uvs, True)


@lru_cache(maxsize=None)
def torus(major_segments: int = 32, minor_segments: int = 16, major_radius: float = 0.35,
          minor_radius: float = 0.15) -> TriMesh:
    M, N = major_segments, minor_segments
    theta = 2.0 * np.pi * np.arange(M) / M
    phi = 2.0 * np.pi * np.arange(N) / N
    T, P = np.meshgrid(theta, phi, indexing="ij")
    rr = major_radius + minor_radius * np.cos(P)
    verts = np.stack([rr * np.cos(T), rr * np.sin(T), minor_radius * np.sin(P)], -1).reshape(-1, 3)
    uvs = np.stack([T / (2 * np.pi), P / (2 * np.pi)], -1).reshape(-1, 2)
    # rows walk the minor circle, columns the major one: theta x phi points outward
    tris = _quad_grid_triangles(N, M, lambda r, c: (c % M) * N + r % N)
    return _finish(verts, tris, uvs, True)


def instantiate_primitive(kind: PrimitiveKind | str, segments: int = 32, rings: int = 16,
                          subdivisions: int = 1) -> TriMesh:
    """Canonical unit-scale mesh for ``kind``.

    ``subdivisions`` refines flat faces: the cube gets an ``n x n`` grid per
    face, cylinders and cones get ``n`` side rings and ``max(1, n // 2)`` cap
    rings. ``rings`` only affects the sphere and the torus minor circle.
    """
    kind = PrimitiveKind(kind)
    if min(segments, rings, subdivisions) < 1:
        raise ValueError("resolution parameters must be positive")
    if kind is PrimitiveKind.CUBE:
        return cube(subdivisions)
    if kind is PrimitiveKind.SPHERE:
        return sphere(segments, max(rings, 2))
    if kind is PrimitiveKind.CYLINDER:
        return cylinder(segments, subdivisions, max(1, subdivisions // 2))
    if kind is PrimitiveKind.CONE:
        return cone(segments, subdivisions, max(1, subdivisions // 2))
    return torus(segments, rings)


def box_mesh(lo, hi) -> TriMesh:
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    return cube(1).scaled_translated(hi - lo, 0.5 * (lo + hi))


def tubes(a: np.ndarray, b: np.ndarray, thickness: float) -> TriMesh:
    """Square-section tubes along segments ``a[i] -> b[i]``, extended by half
    the thickness at both ends so adjoining tubes close their joints."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    k = len(a)
    if k == 0:
        return empty_mesh()
    d = b - a
    length = np.linalg.norm(d, axis=1)
    d = d / length[:, None]
    ref = np.where(np.abs(d[:, 2:3]) < 0.9, [[0.0, 0.0, 1.0]], [[1.0, 0.0, 0.0]])
    u = np.cross(d, ref)
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    v = np.cross(d, u)
    tmpl = cube(1)
    c = 0.5 * (a + b)
    ext = (length + thickness)[:, None, None]
    tv = tmpl.vertices[None]
    verts = (c[:, None, :] + tv[..., 0:1] * ext * d[:, None, :]
             + tv[..., 1:2] * thickness * u[:, None, :] + tv[..., 2:3] * thickness * v[:, None, :])
    nv = len(tmpl.vertices)
    tris = tmpl.triangles[None] + (np.arange(k) * nv)[:, None, None]
    verts = verts.reshape(-1, 3)
    tris = tris.reshape(-1, 3)
    return TriMesh(verts, tris, np.tile(tmpl.uvs, (k, 1)), vertex_normals(verts, tris),
                   np.zeros(len(tris), np.int32), np.zeros(len(tris), bool))


# ---------------------------------------------------------------------------
# checks


def edge_incidence(mesh: TriMesh) -> Counter:
    t = mesh.triangles
    edges = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    edges.sort(axis=1)
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    return Counter(dict(zip(map(tuple, uniq.tolist()), counts.tolist())))


def is_closed_manifold(mesh: TriMesh) -> bool:
    """Every edge is shared by exactly two triangles."""
    t = mesh.triangles
    if len(t) == 0 or t.min() < 0 or t.max() >= mesh.n_vertices:
        return False
    edges = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    edges.sort(axis=1)
    _, counts = np.unique(edges, axis=0, return_counts=True)
    return bool(np.all(counts == 2))


def euler_characteristic(mesh: TriMesh) -> int:
    used = np.unique(mesh.triangles)
    return len(used) - len(edge_incidence(mesh)) + mesh.n_triangles


def signed_volume(mesh: TriMesh) -> float:
    v = mesh.vertices
    t = mesh.triangles
    return float(np.einsum("ij,ij->i", v[t[:, 0]], np.cross(v[t[:, 1]], v[t[:, 2]])).sum() / 6.0)
