"""Deterministic Whitted-style CPU ray tracer.

Per pixel: one primary ray through the pixel centre, ambient plus direct
lighting with hard shadows from the sun and bulbs, and at most one mirror or
two glass (reflect + refract) secondary rays per bounce up to ``max_depth``.
Every pixel is a pure function of the scene, so rasters are bit-identical
for any thread count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .bvh import BVH, trace_nearest
from .cameras import CameraSample
from .config import GenConfig
from .materials import Material, texture_color
from .mesh import TriMesh
from .noise import value_noise3

EPS = 1e-4
MIRROR_ROUGHNESS = 0.05
MIRROR_METALLIC = 0.6
_STACK = 64
_MAX_GLASS_CROSSINGS = 16
_BUMP_FREQUENCY = 2.0


@dataclass
class RenderOutput:
    rgb: np.ndarray         # (H, W, 3) gamma encoded, in [0, 1]
    depth: np.ndarray       # (H, W) z-depth, +inf on miss
    hit_mask: np.ndarray    # (H, W) bool
    linear: np.ndarray | None = None

    def rgb8(self) -> np.ndarray:
        return np.round(self.rgb * 255.0).astype(np.uint8)


@dataclass
class RenderScene:
    """Flat arrays consumed by the kernels."""

    bvh: BVH
    tris: tuple
    mats: tuple
    lights: tuple
    params: tuple

    @property
    def mesh(self) -> TriMesh:
        return self.bvh.mesh


def material_arrays(materials: list[Material]) -> tuple:
    k = len(materials)
    kind = np.zeros(k, np.int64)
    ca = np.zeros((k, 3))
    cb = np.zeros((k, 3))
    scale = np.ones(k)
    seed = np.zeros(k, np.int64)
    axis = np.zeros(k, np.int64)
    rough = np.zeros(k)
    metal = np.zeros(k)
    ior = np.ones(k)
    trans = np.zeros(k, np.bool_)
    bump = np.zeros(k)
    emit = np.zeros((k, 3))
    for i, m in enumerate(materials):
        t = m.texture
        kind[i] = int(t.kind)
        ca[i] = t.color_a
        cb[i] = t.color_b
        scale[i] = t.scale
        seed[i] = t.seed
        axis[i] = t.axis
        rough[i] = m.roughness
        metal[i] = m.metallic
        ior[i] = m.ior
        trans[i] = m.transmissive
        bump[i] = m.bump_amplitude
        emit[i] = m.emissive_strength * np.asarray(m.emissive_color, dtype=float)
    return kind, ca, cb, scale, seed, axis, rough, metal, ior, trans, bump, emit


def light_arrays(ambient=(0.0, 0.0, 0.0), sun_direction=None, sun_radiance=(0.0, 0.0, 0.0),
                 bulb_positions=(), bulb_radiance=(), bulb_radii=()) -> tuple:
    sun_dir = np.zeros(3) if sun_direction is None else np.asarray(sun_direction, dtype=float)
    if sun_direction is not None:
        sun_dir = sun_dir / np.linalg.norm(sun_dir)
    sun_rad = np.asarray(sun_radiance, dtype=float) if sun_direction is not None else np.zeros(3)
    return (np.asarray(ambient, dtype=float), sun_dir, sun_rad,
            np.asarray(bulb_positions, dtype=float).reshape(-1, 3),
            np.asarray(bulb_radiance, dtype=float).reshape(-1, 3),
            np.asarray(bulb_radii, dtype=float).reshape(-1))


def build_render_scene(meshes: list[TriMesh] | TriMesh, materials: list[Material], lights: tuple,
                       cfg: GenConfig) -> RenderScene:
    bvh = BVH(meshes if isinstance(meshes, TriMesh) else TriMesh.concat(list(meshes)))
    m = bvh.mesh
    order = bvh.tri_id
    idx = m.triangles[order]
    slot = m.material_slot[order].astype(np.int64)
    if slot.size and (slot.min() < 0 or slot.max() >= len(materials)):
        raise ValueError("triangle references a missing material slot")
    tris = (slot, m.smooth[order].copy(), np.ascontiguousarray(m.normals[idx]),
            np.ascontiguousarray(m.uvs[idx]))
    rc = cfg.render
    params = (int(rc.max_depth), float(rc.glass_shadow_transmittance),
              float(rc.falloff_distance))
    return RenderScene(bvh, tris, material_arrays(materials), lights, params)


def scene_lights(spec) -> tuple:
    rig = spec.lighting
    if rig is None:
        return light_arrays()
    ambient = rig.ambient_strength * np.asarray(rig.ambient_color, dtype=float)
    sun_dir = rig.sun.direction if rig.sun else None
    sun_rad = rig.sun.strength * np.asarray(rig.sun.color) if rig.sun else (0.0, 0.0, 0.0)
    return light_arrays(ambient, sun_dir, sun_rad,
                        [b.position for b in rig.bulbs],
                        [b.strength * np.asarray(b.color) for b in rig.bulbs],
                        [b.radius for b in rig.bulbs])


# ---------------------------------------------------------------------------
# kernels


@numba.njit(cache=True, inline="always")
def _dot(a0, a1, a2, b0, b1, b2):
    return a0 * b0 + a1 * b1 + a2 * b2


@numba.njit(cache=True)
def _normalize(v):
    n = np.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
    if n > 0.0:
        v /= n
    return v


@numba.njit(cache=True)
def shadow_transmittance(B, T, M, px, py, pz, lx, ly, lz, tmax, glass_t):
    """Fraction of light reaching ``p`` along unit direction ``l`` within ``tmax``.

    Opaque occluders block fully; each glass object entered multiplies by
    ``glass_t`` (exiting faces are free, so a closed pane counts once).
    """
    e1 = B[7]
    e2 = B[8]
    tslot = T[0]
    trans = M[9]
    vis = 1.0
    ox, oy, oz = px, py, pz
    remaining = tmax
    for _ in range(_MAX_GLASS_CROSSINGS):
        if remaining <= 0.0:
            return vis
        k, t, u, v = trace_nearest(B, ox, oy, oz, lx, ly, lz, 0.0, remaining)
        if k < 0:
            return vis
        if not trans[tslot[k]]:
            return 0.0
        nx = e1[k, 1] * e2[k, 2] - e1[k, 2] * e2[k, 1]
        ny = e1[k, 2] * e2[k, 0] - e1[k, 0] * e2[k, 2]
        nz = e1[k, 0] * e2[k, 1] - e1[k, 1] * e2[k, 0]
        if _dot(nx, ny, nz, lx, ly, lz) < 0.0:
            vis *= glass_t
        ox += (t + EPS) * lx
        oy += (t + EPS) * ly
        oz += (t + EPS) * lz
        remaining -= t + EPS
    return 0.0


@numba.njit(cache=True)
def _surface(B, T, M, k, u, v, dx, dy, dz):
    """Geometric normal, shading normal (both facing the ray), uv and whether
    the ray hit the front face."""
    e1 = B[7]
    e2 = B[8]
    tsmooth = T[1]
    tn = T[2]
    tuv = T[3]
    ng = np.empty(3)
    ng[0] = e1[k, 1] * e2[k, 2] - e1[k, 2] * e2[k, 1]
    ng[1] = e1[k, 2] * e2[k, 0] - e1[k, 0] * e2[k, 2]
    ng[2] = e1[k, 0] * e2[k, 1] - e1[k, 1] * e2[k, 0]
    _normalize(ng)
    w = 1.0 - u - v
    ns = np.empty(3)
    if tsmooth[k]:
        for c in range(3):
            ns[c] = w * tn[k, 0, c] + u * tn[k, 1, c] + v * tn[k, 2, c]
        _normalize(ns)
    else:
        ns[:] = ng
    front = _dot(ng[0], ng[1], ng[2], dx, dy, dz) < 0.0
    if not front:
        ng *= -1.0
        ns *= -1.0
    if _dot(ns[0], ns[1], ns[2], dx, dy, dz) >= 0.0:
        ns[:] = ng
    uu = w * tuv[k, 0, 0] + u * tuv[k, 1, 0] + v * tuv[k, 2, 0]
    vv = w * tuv[k, 0, 1] + u * tuv[k, 1, 1] + v * tuv[k, 2, 1]
    return ng, ns, uu, vv, front


@numba.njit(cache=True)
def _bump(ns, ng, px, py, pz, amp, seed, dx, dy, dz):
    s = _BUMP_FREQUENCY
    g0 = value_noise3(px * s, py * s, pz * s, seed + 11)
    g1 = value_noise3(px * s, py * s, pz * s, seed + 12)
    g2 = value_noise3(px * s, py * s, pz * s, seed + 13)
    d = _dot(g0, g1, g2, ns[0], ns[1], ns[2])
    out = np.empty(3)
    out[0] = ns[0] + amp * (g0 - d * ns[0])
    out[1] = ns[1] + amp * (g1 - d * ns[1])
    out[2] = ns[2] + amp * (g2 - d * ns[2])
    _normalize(out)
    if _dot(out[0], out[1], out[2], dx, dy, dz) >= 0.0:
        return ns
    return out


@numba.njit(cache=True)
def radiance(B, T, M, L, P, ox, oy, oz, dx, dy, dz, k0, t0, u0, v0):
    """Linear RGB arriving along unit direction ``d`` at ``o``.

    ``k0 >= -1`` supplies the first hit (already traced); pass ``k0 = -2``
    to trace it here.
    """
    kind, ca, cb, tscale, tseed, taxis, rough, metal, ior, trans, bump, emit = M
    ambient, sun_dir, sun_rad, bpos, brad, br = L
    max_depth, glass_t, falloff = P
    tslot = T[0]
    so = np.empty((_STACK, 3))
    sd = np.empty((_STACK, 3))
    sw = np.empty((_STACK, 3))
    sdepth = np.empty(_STACK, np.int64)
    so[0, 0], so[0, 1], so[0, 2] = ox, oy, oz
    sd[0, 0], sd[0, 1], sd[0, 2] = dx, dy, dz
    sw[0, :] = 1.0
    sdepth[0] = 0
    sp = 1
    first = k0 >= -1
    total = np.zeros(3)
    has_sun = sun_rad[0] > 0.0 or sun_rad[1] > 0.0 or sun_rad[2] > 0.0
    while sp > 0:
        sp -= 1
        rox, roy, roz = so[sp, 0], so[sp, 1], so[sp, 2]
        rdx, rdy, rdz = sd[sp, 0], sd[sp, 1], sd[sp, 2]
        w0, w1, w2 = sw[sp, 0], sw[sp, 1], sw[sp, 2]
        depth = sdepth[sp]
        if first:
            k, t, u, v = k0, t0, u0, v0
            first = False
        else:
            k, t, u, v = trace_nearest(B, rox, roy, roz, rdx, rdy, rdz, 0.0, np.inf)
        if k < 0:
            total[0] += w0 * ambient[0]
            total[1] += w1 * ambient[1]
            total[2] += w2 * ambient[2]
            continue
        px = rox + t * rdx
        py = roy + t * rdy
        pz = roz + t * rdz
        s = tslot[k]
        ng, ns, uu, vv, front = _surface(B, T, M, k, u, v, rdx, rdy, rdz)
        albedo = texture_color(kind[s], ca[s], cb[s], tscale[s], tseed[s], taxis[s], uu, vv)
        total[0] += w0 * emit[s, 0]
        total[1] += w1 * emit[s, 1]
        total[2] += w2 * emit[s, 2]
        if bump[s] > 0.0:
            ns = _bump(ns, ng, px, py, pz, bump[s], tseed[s], rdx, rdy, rdz)
        cosi = -_dot(ns[0], ns[1], ns[2], rdx, rdy, rdz)

        if trans[s]:
            eta = 1.0 / ior[s] if front else ior[s]
            sin2t = eta * eta * (1.0 - cosi * cosi)
            r0 = ((ior[s] - 1.0) / (ior[s] + 1.0)) ** 2
            if sin2t >= 1.0:
                fr = 1.0
                cost = 0.0
            else:
                cost = np.sqrt(1.0 - sin2t)
                c = cosi if front else cost
                fr = r0 + (1.0 - r0) * (1.0 - c) ** 5
            if depth < max_depth and sp + 2 <= _STACK:
                # reflection
                so[sp, 0] = px + EPS * ng[0]
                so[sp, 1] = py + EPS * ng[1]
                so[sp, 2] = pz + EPS * ng[2]
                sd[sp, 0] = rdx + 2.0 * cosi * ns[0]
                sd[sp, 1] = rdy + 2.0 * cosi * ns[1]
                sd[sp, 2] = rdz + 2.0 * cosi * ns[2]
                sw[sp, 0] = w0 * fr * albedo[0]
                sw[sp, 1] = w1 * fr * albedo[1]
                sw[sp, 2] = w2 * fr * albedo[2]
                sdepth[sp] = depth + 1
                sp += 1
                if fr < 1.0:
                    so[sp, 0] = px - EPS * ng[0]
                    so[sp, 1] = py - EPS * ng[1]
                    so[sp, 2] = pz - EPS * ng[2]
                    a = eta * cosi - cost
                    tx = eta * rdx + a * ns[0]
                    ty = eta * rdy + a * ns[1]
                    tz = eta * rdz + a * ns[2]
                    n = np.sqrt(tx * tx + ty * ty + tz * tz)
                    sd[sp, 0] = tx / n
                    sd[sp, 1] = ty / n
                    sd[sp, 2] = tz / n
                    sw[sp, 0] = w0 * (1.0 - fr) * albedo[0]
                    sw[sp, 1] = w1 * (1.0 - fr) * albedo[1]
                    sw[sp, 2] = w2 * (1.0 - fr) * albedo[2]
                    sdepth[sp] = depth + 1
                    sp += 1
            continue

        mirror = rough[s] < MIRROR_ROUGHNESS and metal[s] >= MIRROR_METALLIC
        kd = 1.0 - metal[s]
        amb_w = kd if mirror else 1.0
        total[0] += w0 * ambient[0] * albedo[0] * amb_w
        total[1] += w1 * ambient[1] * albedo[1] * amb_w
        total[2] += w2 * ambient[2] * albedo[2] * amb_w

        r = max(rough[s], 1e-3)
        expo = min(max(2.0 / (r * r) - 2.0, 1.0), 1e4)
        norm = (expo + 8.0) / (8.0 * np.pi)
        qx = px + EPS * ng[0]
        qy = py + EPS * ng[1]
        qz = pz + EPS * ng[2]
        n_lights = bpos.shape[0] + (1 if has_sun else 0)
        for li in range(n_lights):
            if li < bpos.shape[0]:
                lx = bpos[li, 0] - px
                ly = bpos[li, 1] - py
                lz = bpos[li, 2] - pz
                dist = np.sqrt(lx * lx + ly * ly + lz * lz)
                if dist <= br[li]:
                    continue
                lx /= dist
                ly /= dist
                lz /= dist
                fall = 1.0 / (1.0 + (dist / falloff) ** 2)
                e0, e1_, e2_ = brad[li, 0] * fall, brad[li, 1] * fall, brad[li, 2] * fall
                tmax = dist - br[li] - EPS
            else:
                lx, ly, lz = -sun_dir[0], -sun_dir[1], -sun_dir[2]
                e0, e1_, e2_ = sun_rad[0], sun_rad[1], sun_rad[2]
                tmax = np.inf
            ndl = _dot(ns[0], ns[1], ns[2], lx, ly, lz)
            if ndl <= 0.0 or _dot(ng[0], ng[1], ng[2], lx, ly, lz) <= 0.0:
                continue
            vis = shadow_transmittance(B, T, M, qx, qy, qz, lx, ly, lz, tmax, glass_t)
            if vis == 0.0:
                continue
            hx = lx - rdx
            hy = ly - rdy
            hz = lz - rdz
            hn = np.sqrt(hx * hx + hy * hy + hz * hz)
            nh = max(_dot(ns[0], ns[1], ns[2], hx, hy, hz) / hn, 0.0) if hn > 0 else 0.0
            spec = norm * nh ** expo * ndl
            for c in range(3):
                f0 = 0.04 * kd + albedo[c] * metal[s]
                val = (kd * albedo[c] * ndl + f0 * spec) * vis
                if c == 0:
                    total[0] += w0 * e0 * val
                elif c == 1:
                    total[1] += w1 * e1_ * val
                else:
                    total[2] += w2 * e2_ * val

        if mirror and depth < max_depth and sp < _STACK:
            so[sp, 0] = qx
            so[sp, 1] = qy
            so[sp, 2] = qz
            sd[sp, 0] = rdx + 2.0 * cosi * ns[0]
            sd[sp, 1] = rdy + 2.0 * cosi * ns[1]
            sd[sp, 2] = rdz + 2.0 * cosi * ns[2]
            sw[sp, 0] = w0 * albedo[0] * metal[s]
            sw[sp, 1] = w1 * albedo[1] * metal[s]
            sw[sp, 2] = w2 * albedo[2] * metal[s]
            sdepth[sp] = depth + 1
            sp += 1
    for c in range(3):
        if not np.isfinite(total[c]):
            total[c] = 0.0
    return total


@numba.njit(cache=True, parallel=True)
def _render_kernel(B, T, M, L, P, R, cam, f, cx, cy, width, height):
    rgb = np.zeros((height, width, 3))
    depth = np.full((height, width), np.inf)
    hit = np.zeros((height, width), np.bool_)
    for row in numba.prange(height):
        for col in range(width):
            x = (col + 0.5 - cx) / f
            y = (row + 0.5 - cy) / f
            dx = R[0, 0] * x + R[0, 1] * y + R[0, 2]
            dy = R[1, 0] * x + R[1, 1] * y + R[1, 2]
            dz = R[2, 0] * x + R[2, 1] * y + R[2, 2]
            # direction has unit forward component, so t is the z-depth
            k, t, u, v = trace_nearest(B, cam[0], cam[1], cam[2], dx, dy, dz, 0.0, np.inf)
            n = np.sqrt(dx * dx + dy * dy + dz * dz)
            if k >= 0:
                depth[row, col] = t
                hit[row, col] = True
            rad = radiance(B, T, M, L, P, cam[0], cam[1], cam[2], dx / n, dy / n, dz / n,
                           k, t * n, u, v)
            rgb[row, col, 0] = rad[0]
            rgb[row, col, 1] = rad[1]
            rgb[row, col, 2] = rad[2]
    return rgb, depth, hit


def encode_gamma(linear: np.ndarray, gamma: float) -> np.ndarray:
    return np.clip(linear, 0.0, 1.0) ** (1.0 / gamma)


def render_camera(scene: RenderScene, cam: CameraSample, gamma: float = 2.2,
                  keep_linear: bool = False) -> RenderOutput:
    R = np.ascontiguousarray(cam.R)
    cx, cy = cam.principal_point
    lin, depth, hit = _render_kernel(scene.bvh.arrays, scene.tris, scene.mats, scene.lights,
                                     scene.params, R, cam.center, float(cam.focal), float(cx),
                                     float(cy), int(cam.width), int(cam.height))
    return RenderOutput(encode_gamma(lin, gamma), depth, hit, lin if keep_linear else None)


def trace_radiance(scene: RenderScene, origin, direction) -> np.ndarray:
    """Linear radiance along one ray (direction is normalized here)."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    o = np.asarray(origin, dtype=float)
    return radiance(scene.bvh.arrays, scene.tris, scene.mats, scene.lights, scene.params,
                    o[0], o[1], o[2], d[0], d[1], d[2], -2, 0.0, 0.0, 0.0)


def prepare_scene(spec, cfg: GenConfig, meshes: list[TriMesh] | None = None) -> RenderScene:
    from .scene import instantiate_scene_meshes
    if meshes is None:
        meshes = instantiate_scene_meshes(spec, cfg)
    return build_render_scene(meshes, spec.materials, scene_lights(spec), cfg)


def render_view(spec, cam: CameraSample, cfg: GenConfig,
                scene: RenderScene | None = None) -> RenderOutput:
    """Render one camera in scene units; depth is the camera-forward distance."""
    if scene is None:
        scene = prepare_scene(spec, cfg)
    return render_camera(scene, cam, cfg.render.gamma)
