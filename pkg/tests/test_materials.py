import dataclasses

import numpy as np
import pytest

from primsynth.config import Categorical
from primsynth.floorplan import BoxCategory
from primsynth.materials import (Material, Texture, TextureKind, evaluate_texture, make_emissive,
                                 make_glass, randomize_scene_materials, sample_base_material)
from primsynth.rng import Seed, derive_stream
from primsynth.scene import SceneSpec


def test_base_material_ranges(cfg):
    s = derive_stream(Seed(0, 0), "mat")
    mats = [sample_base_material(s, cfg) for _ in range(10_000)]
    r = np.array([m.roughness for m in mats])
    m = np.array([m.metallic for m in mats])
    assert r.min() >= 0.001 and r.max() <= 0.2
    assert m.min() >= 0.001 and m.max() <= 1.0
    assert m.max() - m.min() > 0.9 * (1.0 - 0.001)
    assert not any(x.transmissive or x.is_emissive for x in mats)
    b = np.array([x.bump_amplitude for x in mats])
    assert b.min() >= 0.0 and b.max() <= 0.2
    kinds = {x.texture.kind for x in mats}
    assert kinds == set(TextureKind)


def test_forced_solid_texture(cfg):
    c = cfg.with_overrides(materials={"texture_kinds": Categorical(("solid",), (1.0,))})
    m = sample_base_material(derive_stream(Seed(0, 1), "mat"), c)
    t = dataclasses.replace(m.texture, color_a=(1.0, 0.0, 0.0))
    for uv in [(0, 0), (0.3, 0.9), (12.5, -3.0)]:
        assert np.array_equal(evaluate_texture(t, uv), [1.0, 0.0, 0.0])


def test_glass(cfg):
    s = derive_stream(Seed(0, 2), "glass")
    gl = [make_glass(s, cfg) for _ in range(10_000)]
    assert all(1.4 <= g.ior <= 1.6 and 0.001 <= g.roughness <= 0.1 for g in gl)
    assert all(g.transmissive and g.metallic == 0.0 and not g.is_emissive for g in gl)


def test_glass_and_emission_exclusive(cfg):
    g = make_glass(derive_stream(Seed(0, 3), "g"), cfg)
    with pytest.raises(ValueError):
        make_emissive(g, 1.0, (1, 1, 1))
    with pytest.raises(ValueError):
        Material(Texture(TextureKind.SOLID, (1, 1, 1)), 0.1, 0.5, transmissive=True)


def test_randomize_rates(cfg, mat_specs):
    spec = mat_specs[0]
    passes = [randomize_scene_materials(derive_stream(Seed(1, i), "pass"), spec, cfg)
              .material_pass for i in range(1000)]
    assert abs(np.mean([p.modified for p in passes]) - 0.5) < 0.05
    assert abs(np.mean([bool(p.modified_slots) for p in passes]) - 0.5) < 0.05
    assert abs(np.mean([p.specular for p in passes]) - 0.2) < 0.04


def test_specular_slots(cfg, mat_specs):
    for i, spec in enumerate(mat_specs[:200]):
        mp = spec.material_pass
        if not mp.specular:
            continue
        for k in mp.modified_slots:
            m = spec.materials[k]
            if not m.transmissive:
                assert 0.0 <= m.roughness <= 0.05 and 0.6 <= m.metallic <= 1.0


def test_slot_reroll_rate(cfg, mat_specs):
    picked = total = 0
    for spec in mat_specs:
        if spec.material_pass.modified:
            picked += len(spec.material_pass.modified_slots)
            total += len(spec.materials)
    assert abs(picked / total - 0.4) < 0.03


def test_zero_slots_unchanged(cfg, mat_specs):
    empty = dataclasses.replace(mat_specs[0], materials=[])
    out = randomize_scene_materials(derive_stream(Seed(0, 0), "pass"), empty, cfg)
    assert out.materials == [] and out.material_pass.modified_slots == ()


def test_randomize_changes_only_materials(cfg, mat_specs):
    spec = mat_specs[3]
    out = randomize_scene_materials(derive_stream(Seed(9, 9), "pass"), spec, cfg)
    for f in dataclasses.fields(SceneSpec):
        if f.name not in ("materials", "material_pass"):
            assert getattr(out, f.name) == getattr(spec, f.name)


def test_axis_aligned_glass_rate(mat_specs):
    flags = []
    for spec in mat_specs:
        glass = set(spec.glass_slabs)
        for o in spec.objects:
            if o.box.category is BoxCategory.AXIS_ALIGNED:
                flags.append(all(s in glass for s in o.slots))
    assert abs(np.mean(flags) - 0.8) < 0.05


def test_checker_parity():
    t = Texture(TextureKind.CHECKER, (0.0, 0.0, 0.0), (1.0, 1.0, 1.0), 4.0)
    a = evaluate_texture(t, (0.1, 0.1))
    b = evaluate_texture(t, (0.35, 0.1))
    assert np.array_equal(a, 1.0 - b)


def test_stripes_follow_axis():
    t = Texture(TextureKind.STRIPES, (0.0, 0.0, 0.0), (1.0, 1.0, 1.0), 2.0, axis=1)
    assert np.array_equal(evaluate_texture(t, (0.1, 0.1)), evaluate_texture(t, (0.9, 0.1)))
    assert not np.array_equal(evaluate_texture(t, (0.1, 0.1)), evaluate_texture(t, (0.1, 0.6)))


def test_value_noise_deterministic_and_bounded():
    t = Texture(TextureKind.VALUE_NOISE, (0.2, 0.3, 0.4), (0.9, 0.1, 0.5), 7.0, seed=99)
    rng = np.random.default_rng(0)
    for uv in rng.uniform(-5, 5, (200, 2)):
        c = evaluate_texture(t, uv)
        assert np.array_equal(c, evaluate_texture(t, uv))
        assert np.all(c >= 0) and np.all(c <= 1)


def test_texture_rejects_bad_params():
    with pytest.raises(ValueError):
        Texture(TextureKind.SOLID, (1, 1, 1), scale=0.0)
    with pytest.raises(ValueError):
        evaluate_texture(Texture(TextureKind.SOLID, (1, 1, 1)), (np.nan, 0.0))


def test_material_json_round_trip(cfg):
    s = derive_stream(Seed(0, 4), "json")
    for m in [sample_base_material(s, cfg), make_glass(s, cfg)]:
        assert Material.from_json(m.to_json()) == m
