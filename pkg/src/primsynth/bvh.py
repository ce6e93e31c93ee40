"""Bounding volume hierarchy over a triangle soup.

Built with a binned surface-area heuristic and stored as flat arrays so the
numba kernels (nearest hit, any-hit, closest point) can traverse it without
Python objects. Triangles are stored in BVH order as ``(v0, e1, e2)``;
``tri_id`` maps back to the index in the concatenated source mesh.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .mesh import TriMesh

LEAF_SIZE = 4
_BINS = 16
_STACK = 64
_INF = np.inf


@dataclass
class Hit:
    t: float
    triangle: int
    barycentric: tuple[float, float]
    normal: np.ndarray
    uv: np.ndarray
    material_slot: int


class EmptySceneError(ValueError):
    pass


@numba.njit(cache=True)
def _surface_area(lo, hi):
    d0 = hi[0] - lo[0]
    d1 = hi[1] - lo[1]
    d2 = hi[2] - lo[2]
    if d0 < 0.0 or d1 < 0.0 or d2 < 0.0:
        return 0.0
    return 2.0 * (d0 * d1 + d1 * d2 + d2 * d0)


@numba.njit(cache=True)
def _build(tlo, thi, cent, leaf_size):
    m = tlo.shape[0]
    order = np.arange(m)
    cap = 2 * m + 1
    nlo = np.empty((cap, 3))
    nhi = np.empty((cap, 3))
    nleft = np.full(cap, -1, np.int32)
    nright = np.full(cap, -1, np.int32)
    nstart = np.zeros(cap, np.int32)
    ncount = np.zeros(cap, np.int32)
    ncount[0] = m
    n_nodes = 1
    stack = np.empty(cap, np.int32)
    stack[0] = 0
    sp = 1
    bin_lo = np.empty((_BINS, 3))
    bin_hi = np.empty((_BINS, 3))
    bin_n = np.empty(_BINS, np.int64)
    right_area = np.empty(_BINS)
    right_n = np.empty(_BINS, np.int64)
    while sp > 0:
        sp -= 1
        ni = stack[sp]
        start = nstart[ni]
        count = ncount[ni]
        lo = np.full(3, _INF)
        hi = np.full(3, -_INF)
        clo = np.full(3, _INF)
        chi = np.full(3, -_INF)
        for k in range(start, start + count):
            t = order[k]
            for a in range(3):
                lo[a] = min(lo[a], tlo[t, a])
                hi[a] = max(hi[a], thi[t, a])
                clo[a] = min(clo[a], cent[t, a])
                chi[a] = max(chi[a], cent[t, a])
        nlo[ni] = lo
        nhi[ni] = hi
        if count <= leaf_size:
            continue
        best_cost = _INF
        best_axis = -1
        best_split = -1
        for a in range(3):
            ext = chi[a] - clo[a]
            if ext <= 0.0:
                continue
            for b in range(_BINS):
                bin_n[b] = 0
                for c in range(3):
                    bin_lo[b, c] = _INF
                    bin_hi[b, c] = -_INF
            scale = _BINS / ext
            for k in range(start, start + count):
                t = order[k]
                b = min(int((cent[t, a] - clo[a]) * scale), _BINS - 1)
                bin_n[b] += 1
                for c in range(3):
                    bin_lo[b, c] = min(bin_lo[b, c], tlo[t, c])
                    bin_hi[b, c] = max(bin_hi[b, c], thi[t, c])
            acc_lo = np.full(3, _INF)
            acc_hi = np.full(3, -_INF)
            acc_n = 0
            for b in range(_BINS - 1, 0, -1):
                acc_n += bin_n[b]
                for c in range(3):
                    acc_lo[c] = min(acc_lo[c], bin_lo[b, c])
                    acc_hi[c] = max(acc_hi[c], bin_hi[b, c])
                right_area[b] = _surface_area(acc_lo, acc_hi)
                right_n[b] = acc_n
            acc_lo[:] = _INF
            acc_hi[:] = -_INF
            acc_n = 0
            for b in range(_BINS - 1):
                acc_n += bin_n[b]
                for c in range(3):
                    acc_lo[c] = min(acc_lo[c], bin_lo[b, c])
                    acc_hi[c] = max(acc_hi[c], bin_hi[b, c])
                if acc_n == 0 or right_n[b + 1] == 0:
                    continue
                cost = acc_n * _surface_area(acc_lo, acc_hi) + right_n[b + 1] * right_area[b + 1]
                if cost < best_cost:
                    best_cost = cost
                    best_axis = a
                    best_split = b
        mid = start
        if best_axis >= 0:
            ext = chi[best_axis] - clo[best_axis]
            scale = _BINS / ext
            i = start
            j = start + count - 1
            while i <= j:
                t = order[i]
                b = min(int((cent[t, best_axis] - clo[best_axis]) * scale), _BINS - 1)
                if b <= best_split:
                    i += 1
                else:
                    order[i] = order[j]
                    order[j] = t
                    j -= 1
            mid = i
        if mid == start or mid == start + count:
            if count <= 4 * leaf_size:
                continue
            mid = start + count // 2       # coincident centroids: split by index
        left = n_nodes
        right = n_nodes + 1
        n_nodes += 2
        nstart[left] = start
        ncount[left] = mid - start
        nstart[right] = mid
        ncount[right] = start + count - mid
        nleft[ni] = left
        nright[ni] = right
        ncount[ni] = 0
        stack[sp] = left
        stack[sp + 1] = right
        sp += 2
    return (nlo[:n_nodes].copy(), nhi[:n_nodes].copy(), nleft[:n_nodes].copy(),
            nright[:n_nodes].copy(), nstart[:n_nodes].copy(), ncount[:n_nodes].copy(), order)


@numba.njit(cache=True, inline="always")
def _slab(lo, hi, ox, oy, oz, ix, iy, iz, tmin, tmax):
    t0 = (lo[0] - ox) * ix
    t1 = (hi[0] - ox) * ix
    if t0 > t1:
        t0, t1 = t1, t0
    near = max(tmin, t0)
    far = min(tmax, t1)
    t0 = (lo[1] - oy) * iy
    t1 = (hi[1] - oy) * iy
    if t0 > t1:
        t0, t1 = t1, t0
    near = max(near, t0)
    far = min(far, t1)
    t0 = (lo[2] - oz) * iz
    t1 = (hi[2] - oz) * iz
    if t0 > t1:
        t0, t1 = t1, t0
    near = max(near, t0)
    far = min(far, t1)
    # far scaled up by 1 + 4 ulp-ish so grazing hits are not culled
    if near <= far * 1.0000000000001:
        return near
    return _INF


@numba.njit(cache=True, inline="always")
def _tri_hit(v0, e1, e2, k, ox, oy, oz, dx, dy, dz):
    """Moller-Trumbore; returns (t, u, v) with t = inf on miss."""
    px = dy * e2[k, 2] - dz * e2[k, 1]
    py = dz * e2[k, 0] - dx * e2[k, 2]
    pz = dx * e2[k, 1] - dy * e2[k, 0]
    det = e1[k, 0] * px + e1[k, 1] * py + e1[k, 2] * pz
    if det == 0.0:
        return _INF, 0.0, 0.0
    inv = 1.0 / det
    sx = ox - v0[k, 0]
    sy = oy - v0[k, 1]
    sz = oz - v0[k, 2]
    u = (sx * px + sy * py + sz * pz) * inv
    if u < 0.0 or u > 1.0:
        return _INF, 0.0, 0.0
    qx = sy * e1[k, 2] - sz * e1[k, 1]
    qy = sz * e1[k, 0] - sx * e1[k, 2]
    qz = sx * e1[k, 1] - sy * e1[k, 0]
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < 0.0 or u + v > 1.0:
        return _INF, 0.0, 0.0
    t = (e2[k, 0] * qx + e2[k, 1] * qy + e2[k, 2] * qz) * inv
    return t, u, v


@numba.njit(cache=True, inline="always")
def _inv(d):
    if d == 0.0:
        return 1e300
    return 1.0 / d


@numba.njit(cache=True)
def trace_nearest(B, ox, oy, oz, dx, dy, dz, tmin, tmax):
    """Nearest hit with ``tmin < t < tmax``: (slot in BVH order or -1, t, u, v)."""
    nlo, nhi, nleft, nright, nstart, ncount, v0, e1, e2 = B
    ix = _inv(dx)
    iy = _inv(dy)
    iz = _inv(dz)
    stack = np.empty(_STACK, np.int32)
    sp = 0
    best = -1
    best_t = tmax
    best_u = 0.0
    best_v = 0.0
    if _slab(nlo[0], nhi[0], ox, oy, oz, ix, iy, iz, tmin, best_t) < _INF:
        stack[0] = 0
        sp = 1
    while sp > 0:
        sp -= 1
        ni = stack[sp]
        if ncount[ni] > 0:
            s = nstart[ni]
            for k in range(s, s + ncount[ni]):
                t, u, v = _tri_hit(v0, e1, e2, k, ox, oy, oz, dx, dy, dz)
                if t > tmin and t < best_t:
                    best_t = t
                    best = k
                    best_u = u
                    best_v = v
            continue
        a = nleft[ni]
        b = nright[ni]
        ta = _slab(nlo[a], nhi[a], ox, oy, oz, ix, iy, iz, tmin, best_t)
        tb = _slab(nlo[b], nhi[b], ox, oy, oz, ix, iy, iz, tmin, best_t)
        if ta < _INF and tb < _INF:
            if ta <= tb:
                stack[sp] = b
                stack[sp + 1] = a
            else:
                stack[sp] = a
                stack[sp + 1] = b
            sp += 2
        elif ta < _INF:
            stack[sp] = a
            sp += 1
        elif tb < _INF:
            stack[sp] = b
            sp += 1
    return best, best_t, best_u, best_v


@numba.njit(cache=True, inline="always")
def _point_aabb_dist2(lo, hi, px, py, pz):
    d = 0.0
    if px < lo[0]:
        d += (lo[0] - px) ** 2
    elif px > hi[0]:
        d += (px - hi[0]) ** 2
    if py < lo[1]:
        d += (lo[1] - py) ** 2
    elif py > hi[1]:
        d += (py - hi[1]) ** 2
    if pz < lo[2]:
        d += (lo[2] - pz) ** 2
    elif pz > hi[2]:
        d += (pz - hi[2]) ** 2
    return d


@numba.njit(cache=True)
def point_triangle_dist2(px, py, pz, ax, ay, az, bx, by, bz, cx, cy, cz):
    """Squared distance from a point to a triangle (Voronoi-region walk)."""
    abx, aby, abz = bx - ax, by - ay, bz - az
    acx, acy, acz = cx - ax, cy - ay, cz - az
    apx, apy, apz = px - ax, py - ay, pz - az
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        return apx * apx + apy * apy + apz * apz
    bpx, bpy, bpz = px - bx, py - by, pz - bz
    d3 = abx * bpx + aby * bpy + abz * bpz
    d4 = acx * bpx + acy * bpy + acz * bpz
    if d3 >= 0.0 and d4 <= d3:
        return bpx * bpx + bpy * bpy + bpz * bpz
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        v = d1 / (d1 - d3)
        qx, qy, qz = ax + v * abx - px, ay + v * aby - py, az + v * abz - pz
        return qx * qx + qy * qy + qz * qz
    cpx, cpy, cpz = px - cx, py - cy, pz - cz
    d5 = abx * cpx + aby * cpy + abz * cpz
    d6 = acx * cpx + acy * cpy + acz * cpz
    if d6 >= 0.0 and d5 <= d6:
        return cpx * cpx + cpy * cpy + cpz * cpz
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        w = d2 / (d2 - d6)
        qx, qy, qz = ax + w * acx - px, ay + w * acy - py, az + w * acz - pz
        return qx * qx + qy * qy + qz * qz
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        qx = bx + w * (cx - bx) - px
        qy = by + w * (cy - by) - py
        qz = bz + w * (cz - bz) - pz
        return qx * qx + qy * qy + qz * qz
    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    qx = ax + abx * v + acx * w - px
    qy = ay + aby * v + acy * w - py
    qz = az + abz * v + acz * w - pz
    return qx * qx + qy * qy + qz * qz


@numba.njit(cache=True)
def closest_dist2(B, px, py, pz, max_dist2):
    """Squared distance to the nearest triangle, capped at ``max_dist2``."""
    nlo, nhi, nleft, nright, nstart, ncount, v0, e1, e2 = B
    stack = np.empty(_STACK, np.int32)
    stack[0] = 0
    sp = 1
    best = max_dist2
    while sp > 0:
        sp -= 1
        ni = stack[sp]
        if _point_aabb_dist2(nlo[ni], nhi[ni], px, py, pz) >= best:
            continue
        if ncount[ni] > 0:
            s = nstart[ni]
            for k in range(s, s + ncount[ni]):
                ax, ay, az = v0[k, 0], v0[k, 1], v0[k, 2]
                d = point_triangle_dist2(px, py, pz, ax, ay, az,
                                         ax + e1[k, 0], ay + e1[k, 1], az + e1[k, 2],
                                         ax + e2[k, 0], ay + e2[k, 1], az + e2[k, 2])
                if d < best:
                    best = d
            continue
        a = nleft[ni]
        b = nright[ni]
        da = _point_aabb_dist2(nlo[a], nhi[a], px, py, pz)
        db = _point_aabb_dist2(nlo[b], nhi[b], px, py, pz)
        if da <= db:
            stack[sp] = b
            stack[sp + 1] = a
        else:
            stack[sp] = a
            stack[sp + 1] = b
        sp += 2
    return best


@numba.njit(cache=True)
def _trace_many(B, origins, dirs, tmin, tmax):
    n = origins.shape[0]
    idx = np.empty(n, np.int64)
    ts = np.empty(n)
    uv = np.empty((n, 2))
    for i in range(n):
        k, t, u, v = trace_nearest(B, origins[i, 0], origins[i, 1], origins[i, 2],
                                   dirs[i, 0], dirs[i, 1], dirs[i, 2], tmin, tmax)
        idx[i] = k
        ts[i] = t
        uv[i, 0] = u
        uv[i, 1] = v
    return idx, ts, uv


@numba.njit(cache=True)
def _closest_many(B, points, max_dist2):
    out = np.empty(points.shape[0])
    for i in range(points.shape[0]):
        out[i] = closest_dist2(B, points[i, 0], points[i, 1], points[i, 2], max_dist2)
    return out


class BVH:
    """BVH plus the source mesh it indexes."""

    def __init__(self, mesh: TriMesh, leaf_size: int = LEAF_SIZE):
        if mesh.n_triangles == 0:
            raise EmptySceneError("cannot build a BVH over an empty scene")
        self.mesh = mesh
        v = mesh.vertices
        t = mesh.triangles
        a, b, c = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
        tlo = np.minimum(np.minimum(a, b), c)
        thi = np.maximum(np.maximum(a, b), c)
        cent = 0.5 * (tlo + thi)
        (self.node_lo, self.node_hi, self.node_left, self.node_right, self.node_start,
         self.node_count, order) = _build(tlo, thi, cent, leaf_size)
        self.tri_id = order
        self.v0 = np.ascontiguousarray(a[order])
        self.e1 = np.ascontiguousarray(b[order] - a[order])
        self.e2 = np.ascontiguousarray(c[order] - a[order])

    @property
    def arrays(self):
        return (self.node_lo, self.node_hi, self.node_left, self.node_right, self.node_start,
                self.node_count, self.v0, self.e1, self.e2)

    @property
    def n_nodes(self) -> int:
        return len(self.node_lo)

    def trace_many(self, origins, dirs, t_min=1e-9, t_max=np.inf):
        """Vectorised nearest hit; returns (triangle id or -1, t, barycentrics)."""
        origins = np.ascontiguousarray(np.atleast_2d(origins), dtype=float)
        dirs = np.ascontiguousarray(np.atleast_2d(dirs), dtype=float)
        k, t, uv = _trace_many(self.arrays, origins, dirs, float(t_min), float(t_max))
        tri = np.where(k >= 0, self.tri_id[np.maximum(k, 0)], -1)
        t = np.where(k >= 0, t, np.inf)
        return tri, t, uv

    def closest_distance(self, points, max_distance=np.inf) -> np.ndarray:
        points = np.ascontiguousarray(np.atleast_2d(points), dtype=float)
        d2 = _closest_many(self.arrays, points, float(max_distance) ** 2)
        return np.sqrt(d2)


def build_bvh(meshes: list[TriMesh] | TriMesh) -> BVH:
    mesh = meshes if isinstance(meshes, TriMesh) else TriMesh.concat(list(meshes))
    return BVH(mesh)


def trace(bvh: BVH, origin, direction, t_min: float = 1e-9, t_max: float = np.inf) -> Hit | None:
    o = np.asarray(origin, dtype=float)
    d = np.asarray(direction, dtype=float)
    k, t, u, v = trace_nearest(bvh.arrays, o[0], o[1], o[2], d[0], d[1], d[2],
                               float(t_min), float(t_max))
    if k < 0:
        return None
    tri = int(bvh.tri_id[k])
    m = bvh.mesh
    idx = m.triangles[tri]
    w = np.array([1.0 - u - v, u, v])
    if m.smooth[tri]:
        n = w @ m.normals[idx]
    else:
        n = np.cross(bvh.e1[k], bvh.e2[k])
    n = n / np.linalg.norm(n)
    return Hit(float(t), tri, (float(u), float(v)), n, w @ m.uvs[idx], int(m.material_slot[tri]))


def clearance(position, bvh: BVH, d_min: float) -> bool:
    """True iff the nearest surface is at least ``d_min`` away."""
    return bool(bvh.closest_distance(position, max_distance=d_min)[0] >= d_min)
