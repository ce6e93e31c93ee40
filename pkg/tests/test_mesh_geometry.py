from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from primsynth.floorplan import BoxCategory, ObjectBox
from primsynth.geometry import (HeightFieldParams, WireParams, apply_height_field,
                                build_wireframe, compose_object, heightfield_offsets,
                                sample_members, wire_segments)
from primsynth.mesh import (TriMesh, cube, euler_characteristic, instantiate_primitive,
                            is_closed_manifold, signed_volume, sphere, tubes)
from primsynth.rng import Seed, derive_stream


def test_cube_topology():
    c = cube(1)
    assert (c.n_vertices, c.n_triangles) == (8, 12)
    assert euler_characteristic(c) == 2
    assert is_closed_manifold(c)
    assert signed_volume(c) == pytest.approx(1.0)


@pytest.mark.parametrize("n", [1, 2, 8])
def test_subdivided_cube_closed(n):
    c = cube(n)
    assert is_closed_manifold(c) and euler_characteristic(c) == 2
    assert signed_volume(c) == pytest.approx(1.0)


def test_sphere_volume():
    s = sphere(64, 64)
    assert abs(signed_volume(s) / (4 / 3 * np.pi * 0.5 ** 3) - 1.0) < 0.01
    assert is_closed_manifold(s)


def test_cone_apex_and_manifold():
    c = instantiate_primitive("cone", segments=32)
    top = c.vertices[:, 2].max()
    apex = c.vertices[c.vertices[:, 2] == top]
    assert np.allclose(apex[:, :2], 0.0)
    assert is_closed_manifold(c) and euler_characteristic(c) == 2
    assert signed_volume(c) > 0


@pytest.mark.parametrize("kind", ["cube", "sphere", "cylinder", "cone", "torus"])
@pytest.mark.parametrize("sub", [1, 3])
def test_primitives_closed_and_unit(kind, sub):
    m = instantiate_primitive(kind, subdivisions=sub)
    assert is_closed_manifold(m)
    assert signed_volume(m) > 0
    lo, hi = m.aabb()
    assert np.all(hi - lo <= 1.0 + 1e-12)
    assert np.all(np.isfinite(m.uvs)) and m.uvs.shape == (m.n_vertices, 2)
    assert np.allclose(np.linalg.norm(m.normals, axis=1), 1.0)


def test_primitive_rejects_bad_resolution():
    with pytest.raises(ValueError):
        instantiate_primitive("sphere", segments=0)


def test_heightfield_zero_identity():
    m = cube(4)
    out = apply_height_field(m, HeightFieldParams(0.0, 2.0, 2, 5))
    assert np.array_equal(out.vertices, m.vertices)


def test_heightfield_bound_and_signs():
    m = cube(8)
    p = HeightFieldParams(0.1, 2.0, 2, 17)
    out = apply_height_field(m, p)
    disp = np.linalg.norm(out.vertices - m.vertices, axis=1)
    assert disp.max() <= 0.1 * m.mean_scale() + 1e-12
    d = heightfield_offsets(m, p)
    assert (d > 0).any() and (d < 0).any()
    assert np.array_equal(out.triangles, m.triangles)
    again = apply_height_field(m, p)
    assert np.array_equal(again.vertices, out.vertices)


@settings(max_examples=40, deadline=None)
@given(amp=st.floats(0.0, 0.3), freq=st.floats(0.5, 4.0), key=st.integers(0, 2**32 - 1))
def test_heightfield_bound_property(amp, freq, key):
    m = instantiate_primitive("cylinder", subdivisions=4)
    d = heightfield_offsets(m, HeightFieldParams(amp, freq, 2, key))
    assert np.abs(d).max() <= amp * m.mean_scale() + 1e-12


def test_cube_wire_twelve_edges():
    a, b = wire_segments("cube", (2.0, 2.0, 2.0), WireParams(0.1, subdivision=1))
    assert len(a) == 12
    lengths = np.linalg.norm(b - a, axis=1)
    assert np.allclose(lengths, 1.9)


def test_wire_thickness_range(cfg):
    s = derive_stream(Seed(0, 0), "wire")
    for _ in range(200):
        m = build_wireframe(s, "cube", (3.0, 3.0, 3.0), cfg)
        # each tube is a square-section box; its two shortest extents are the thickness
        tube = m.vertices[:8]
        d = np.sort(np.linalg.norm(tube[1:] - tube[0], axis=1))
        assert 0.1 - 1e-12 <= d[0] <= 0.15 + 1e-12


def test_sphere_wire_counts():
    a, b = wire_segments("sphere", (2.0, 2.0, 2.0), WireParams(0.05, segments=8, rings=8))
    z_flat = np.isclose(a[:, 2], b[:, 2])
    parallels = {round(z, 9) for z in a[z_flat, 2]}
    assert len(parallels) == 8
    mer = a[~z_flat]
    lon = {round(float(np.arctan2(y, x)) % (2 * np.pi), 6)
           for x, y in mer[:, :2] if np.hypot(x, y) > 1e-9}
    assert len(lon) == 8


def test_wire_mesh_near_size(cfg):
    s = derive_stream(Seed(1, 0), "wire")
    size = np.array([3.0, 4.0, 5.0])
    t_max = size.mean() / 20
    # a torus with the tabulated minor radius cannot fit small sizes; only the box fit bounds it
    for kind in ("cube", "sphere"):
        lo, hi = build_wireframe(s, kind, size, cfg).aabb()
        assert np.all(lo >= -0.5 * size - t_max) and np.all(hi <= 0.5 * size + t_max)


def test_tubes_closed():
    t = tubes(np.zeros((1, 3)), np.array([[1.0, 2.0, 3.0]]), 0.1)
    assert is_closed_manifold(t)
    assert signed_volume(t) == pytest.approx(0.01 * (np.sqrt(14) + 0.1))


def _box(cat, size=(4.0, 3.0, 5.0)):
    return ObjectBox(cat, (1.0, 2.0, 0.0), tuple(np.add((1.0, 2.0, 0.0), size)))


def test_small_count_frequencies(cfg):
    s = derive_stream(Seed(0, 0), "counts")
    box = _box(BoxCategory.SMALL_ON_GROUND)
    counts = Counter(len(sample_members(s, box.category, box, cfg.geometry))
                     for _ in range(100_000))
    for k, p in {2: 0.25, 3: 0.375, 4: 0.25, 5: 0.125}.items():
        assert abs(counts[k] / 1e5 - p) < 0.01


def test_axis_aligned_single_cube(cfg):
    obj = compose_object(derive_stream(Seed(0, 0), "aa"), BoxCategory.AXIS_ALIGNED,
                         _box(BoxCategory.AXIS_ALIGNED, (3.0, 2.0, 0.5)), cfg)
    assert len(obj.members) == 1 and obj.members[0].kind == "cube"
    assert obj.meshes[0].n_triangles == 12


@pytest.mark.parametrize("cat", [c for c in BoxCategory])
def test_fit_to_box(cfg, cat):
    box = _box(cat)
    for i in range(5):
        obj = compose_object(derive_stream(Seed(i, 0), cat.value), cat, box, cfg)
        lo, hi = obj.world_aabb()
        assert np.allclose(lo, box.min_corner, atol=1e-6)
        assert np.allclose(hi, box.max_corner, atol=1e-6)


def test_member_counts_by_category(cfg):
    s = derive_stream(Seed(0, 1), "members")
    for _ in range(200):
        for cat, allowed in ((BoxCategory.LARGE_OBJECT, {4, 5, 6, 7, 8}),
                             (BoxCategory.ON_WALL_THIN, {2, 3, 4, 5}),
                             (BoxCategory.THIN_STICK_IN_SPACE, {1})):
            members = sample_members(s, cat, _box(cat), cfg.geometry)
            assert len(members) in allowed
        wf = sample_members(s, BoxCategory.WIREFRAME, _box(BoxCategory.WIREFRAME), cfg.geometry)
        wires = [m for m in wf if m.role == "wire"]
        assert len(wires) in {1, 2, 3} and len(wf) - len(wires) in {0, 1}


def test_intersecting_solid_rate(cfg):
    s = derive_stream(Seed(0, 2), "inter")
    box = _box(BoxCategory.WIREFRAME)
    rate = np.mean([any(m.role == "solid" for m in
                        sample_members(s, BoxCategory.WIREFRAME, box, cfg.geometry))
                    for _ in range(4000)])
    assert abs(rate - 0.5) < 0.03


def test_stick_members(cfg):
    s = derive_stream(Seed(0, 3), "stick")
    box = ObjectBox(BoxCategory.THIN_STICK_ON_WALL, (0, 0, 0), (0.3, 0.3, 8.0))
    kinds = Counter()
    for _ in range(400):
        (m,) = sample_members(s, box.category, box, cfg.geometry)
        kinds[m.kind] += 1
    assert set(kinds) == {"cube", "cylinder"}


def test_compose_deterministic(cfg):
    box = _box(BoxCategory.LARGE_OBJECT)
    a = compose_object(derive_stream(Seed(4, 4), "o"), box.category, box, cfg)
    b = compose_object(derive_stream(Seed(4, 4), "o"), box.category, box, cfg)
    assert a.members == b.members
    assert all(np.array_equal(x.vertices, y.vertices) for x, y in zip(a.meshes, b.meshes))


def test_members_connected(cfg):
    # each member's centre lies inside the inflated bounds of earlier members
    s = derive_stream(Seed(0, 5), "conn")
    box = _box(BoxCategory.LARGE_OBJECT)
    for _ in range(100):
        members = sample_members(s, box.category, box, cfg.geometry)
        for k in range(1, len(members)):
            prev = members[:k]
            lo = np.min([np.subtract(m.center, np.abs(np.reshape(m.rotation, (3, 3))) @ m.scale / 2)
                         for m in prev], axis=0)
            hi = np.max([np.add(m.center, np.abs(np.reshape(m.rotation, (3, 3))) @ m.scale / 2)
                         for m in prev], axis=0)
            pad = 0.125 * (hi - lo)
            c = np.asarray(members[k].center)
            assert np.all(c >= lo - pad - 1e-9) and np.all(c <= hi + pad + 1e-9)


def test_mesh_concat_offsets():
    a, b = cube(1), cube(1).scaled_translated((1, 1, 1), (3, 0, 0))
    m = TriMesh.concat([a.with_slot(2), b.with_slot(5)])
    assert m.n_triangles == 24 and m.triangles.max() == 15
    assert set(m.material_slot.tolist()) == {2, 5}
