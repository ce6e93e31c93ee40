import numpy as np
import pytest

from primsynth.bvh import BVH, EmptySceneError, trace
from primsynth.cameras import CameraSample, Region, look_at
from primsynth.config import default_config
from primsynth.floorplan import SceneBox
from primsynth.lighting import shell_meshes
from primsynth.materials import Material, Texture, TextureKind
from primsynth.mesh import TriMesh, cube, instantiate_primitive
from primsynth.render import (build_render_scene, light_arrays, render_camera,
                              trace_radiance)

from oracles import mesh_corners, ray_triangles


def _tri(a, b, c):
    v = np.array([a, b, c], dtype=float)
    return TriMesh(v, np.array([[0, 1, 2]]), np.zeros((3, 3)) + [0, 0, 1], np.zeros((3, 2)),
                   np.zeros(1, np.int32), np.zeros(1, bool))


def _matte(color=(1.0, 1.0, 1.0), **kw):
    return Material(Texture(TextureKind.SOLID, color), 1.0, 0.0, **kw)


def _camera(pos, target, fov=60.0, w=16, h=16):
    return CameraSample(tuple(pos), tuple(look_at(pos, target).ravel()), fov, w, h, Region.OUTER)


@pytest.fixture(scope="module")
def clutter():
    rng = np.random.default_rng(7)
    parts = []
    for i in range(20):
        kind = ("cube", "sphere", "cylinder", "cone", "torus")[i % 5]
        m = instantiate_primitive(kind, subdivisions=1)
        parts.append(m.scaled_translated(rng.uniform(0.5, 3.0, 3), rng.uniform(-8, 8, 3)))
    mesh = TriMesh.concat(parts)
    assert mesh.n_triangles <= 10_000
    return mesh


def test_single_triangle_hit():
    bvh = BVH(_tri((0, 0, 0), (1, 0, 0), (0, 1, 0)))
    hit = trace(bvh, (0.2, 0.2, 1.0), (0, 0, -1))
    assert hit is not None and hit.t == pytest.approx(1.0)
    assert hit.triangle == 0
    assert np.allclose(hit.barycentric, (0.2, 0.2))
    assert trace(bvh, (0.8, 0.8, 1.0), (0, 0, -1)) is None


def test_trace_matches_brute_force(clutter):
    bvh = BVH(clutter)
    rng = np.random.default_rng(11)
    origins = rng.uniform(-10, 10, (1000, 3))
    # half the rays aim near mesh vertices so that most of them hit something
    aim = clutter.vertices[rng.integers(0, clutter.n_vertices, 500)] + rng.normal(0, 0.2, (500, 3))
    dirs = np.concatenate([aim - origins[:500], rng.normal(size=(500, 3))])
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    ids, t, _ = bvh.trace_many(origins, dirs)
    v0, v1, v2 = mesh_corners(clutter)
    hits = 0
    for o, d, k, tk in zip(origins, dirs, ids, t):
        ko, to = ray_triangles(o, d, v0, v1, v2)
        if ko < 0:
            assert k == -1
            continue
        hits += 1
        assert abs(tk - to) < 1e-9
        # ties between triangles sharing an edge may pick either one
        assert k == ko or abs(ray_triangles(o, d, v0[[k]], v1[[k]], v2[[k]])[1] - to) < 1e-9
    assert hits >= 400


def test_ray_misses_everything(clutter):
    bvh = BVH(clutter)
    assert trace(bvh, (0, 0, 100), (0, 0, 1)) is None


def test_cube_hit_distance():
    bvh = BVH(cube(1))
    hit = trace(bvh, (0, 0, 5), (0, 0, -1))
    assert hit.t == pytest.approx(4.5, abs=1e-12)
    assert np.allclose(hit.normal, (0, 0, 1))
    inside = trace(bvh, (0, 0, 0), (1, 0, 0))
    assert inside.t == pytest.approx(0.5, abs=1e-12)
    assert trace(bvh, (0, 0, 5), (0, 0, -1), t_max=4.4) is None


def test_empty_scene_rejected():
    with pytest.raises(EmptySceneError):
        BVH(TriMesh.concat([]))


def test_bvh_structure(clutter):
    bvh = BVH(clutter)
    lo, hi, left, right, start, count = (bvh.node_lo, bvh.node_hi, bvh.node_left,
                                         bvh.node_right, bvh.node_start, bvh.node_count)
    seen = []
    for n in range(bvh.n_nodes):
        if left[n] < 0:
            seen.extend(range(start[n], start[n] + count[n]))
            v = bvh.v0[start[n]:start[n] + count[n]]
            assert np.all(v >= lo[n] - 1e-12) and np.all(v <= hi[n] + 1e-12)
        else:
            for c in (left[n], right[n]):
                assert np.all(lo[c] >= lo[n] - 1e-12) and np.all(hi[c] <= hi[n] + 1e-12)
    assert sorted(seen) == list(range(clutter.n_triangles))
    assert sorted(bvh.tri_id.tolist()) == list(range(clutter.n_triangles))


def _room(materials, lights, extra=()):
    scene = SceneBox(10.0, 10.0, 10.0, 0.1)
    meshes = shell_meshes(scene, []) + list(extra)
    return scene, build_render_scene(meshes, materials, lights, default_config())


def test_emissive_surface_radiance():
    mats = [_matte()] * 6 + [_matte((0.5, 0.5, 0.5), emissive_strength=3.0,
                                    emissive_color=(1.0, 0.5, 0.25))]
    panel = cube(1).scaled_translated((2, 2, 2), (0, 0, 5)).with_slot(6)
    _, rs = _room(mats, light_arrays(), [panel])
    rad = trace_radiance(rs, (0, 0, 1), (0, 0, 1))
    assert np.allclose(rad, (3.0, 1.5, 0.75))


def test_ambient_only_white_floor():
    _, rs = _room([_matte()] * 6, light_arrays(ambient=(1.0, 1.0, 1.0)))
    assert np.allclose(trace_radiance(rs, (0, 0, 5), (0, 0, -1)), 1.0)
    _, rs = _room([_matte((0.3, 0.6, 0.9))] + [_matte()] * 5, light_arrays(ambient=(0.5, 0.5, 0.5)))
    assert np.allclose(trace_radiance(rs, (0, 0, 5), (0, 0, -1)), (0.15, 0.3, 0.45))


def test_occluded_sun_adds_nothing():
    # the closed room blocks the sun entirely
    lights = light_arrays((0.2, 0.2, 0.2), (0.3, 0.2, -1.0), (5.0, 5.0, 5.0))
    _, rs = _room([_matte()] * 6, lights)
    assert np.allclose(trace_radiance(rs, (0, 0, 5), (0, 0, -1)), 0.2)


def test_unoccluded_sun_lambert():
    floor = cube(1).scaled_translated((20, 20, 1), (0, 0, -0.5))
    lights = light_arrays((0.0, 0.0, 0.0), (0.0, 0.0, -1.0), (1.0, 1.0, 1.0))
    rs = build_render_scene([floor], [_matte((0.5, 0.5, 0.5))], lights, default_config())
    rad = trace_radiance(rs, (0, 0, 5), (0.3, 0, -1))
    # diffuse term plus a small glossy lobe for the rough dielectric
    assert np.all(rad >= 0.5 - 1e-12) and np.all(rad < 0.6)


def test_no_lights_is_black():
    _, rs = _room([_matte()] * 6, light_arrays())
    out = render_camera(rs, _camera((0, 0, 5), (3, 2, 1)), keep_linear=True)
    assert np.all(out.linear == 0.0)


def test_energy_bounded_under_white_ambient():
    mats = [_matte((0.9, 0.8, 0.7))] * 6 + [Material(Texture(TextureKind.SOLID, (1, 1, 1)), 0.01,
                                                      1.0)]
    mirror = instantiate_primitive("sphere", subdivisions=3).scaled_translated((3, 3, 3),
                                                                               (0, 0, 3))
    _, rs = _room(mats, light_arrays(ambient=(1.0, 1.0, 1.0)), [mirror.with_slot(6)])
    out = render_camera(rs, _camera((4, 4, 6), (0, 0, 3), w=32, h=32), keep_linear=True)
    assert out.linear.max() <= 1.0 + 1e-9


def test_perpendicular_wall_depth():
    wall = cube(1).scaled_translated((40, 40, 1), (0, 0, -0.5))
    rs = build_render_scene([wall], [_matte()], light_arrays(), default_config())
    out = render_camera(rs, _camera((0, 0, 5), (0, 0, 0), fov=60.0, w=32, h=32))
    assert out.hit_mask.all()
    assert np.abs(out.depth - 5.0).max() < 1e-6


def test_oblique_pixel_depth_is_z_depth():
    # a 2x1 image at 90 degrees puts both pixel centres 45 degrees off axis
    wall = cube(1).scaled_translated((1, 100, 100), (5.5, 0, 0))
    rs = build_render_scene([wall], [_matte()], light_arrays(), default_config())
    cam = _camera((0, 0, 0), (1, 0, 0), fov=90.0, w=2, h=1)
    out = render_camera(rs, cam)
    assert np.allclose(out.depth, 5.0, atol=1e-6)
    bvh = BVH(wall)
    for col in (0, 1):
        x = (col + 0.5 - 1.0) / cam.focal
        d = cam.R @ np.array([x, 0.0, 1.0])
        ray = trace(bvh, cam.center, d / np.linalg.norm(d))
        assert ray.t == pytest.approx(5.0 * np.sqrt(2), abs=1e-9)


def test_render_deterministic():
    lights = light_arrays((0.3, 0.3, 0.3), None, (0, 0, 0), [(2, 2, 8)], [(3, 3, 3)], [0.2])
    obj = instantiate_primitive("torus", subdivisions=3).scaled_translated((4, 4, 2), (0, 0, 3))
    mats = [_matte()] * 6 + [_matte((0.2, 0.7, 0.3))]
    _, rs = _room(mats, lights, [obj.with_slot(6)])
    cam = _camera((4, -3, 7), (0, 0, 3), w=24, h=24)
    a = render_camera(rs, cam)
    b = render_camera(rs, cam)
    assert np.array_equal(a.rgb, b.rgb) and np.array_equal(a.depth, b.depth)
