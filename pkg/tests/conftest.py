import numpy as np
import pytest

from primsynth.config import default_config
from primsynth.floorplan import sample_object_boxes, sample_scene_box
from primsynth.rng import Seed, derive_stream
from primsynth.scene import SceneSpec, assign_materials, generate_scene_spec, sample_objects


def material_spec(seed, cfg):
    """Floor plan, members and materials only; skips lighting and cameras."""
    fp = derive_stream(seed, "floorplan")
    scene = sample_scene_box(fp, cfg)
    boxes = sample_object_boxes(fp.child("boxes"), scene, cfg)
    objects = sample_objects(derive_stream(seed, "geometry"), boxes, cfg)
    spec = SceneSpec(seed, cfg.hash(), scene, objects)
    return assign_materials(derive_stream(seed, "materials"), spec, cfg)


@pytest.fixture(scope="session")
def cfg():
    return default_config()


@pytest.fixture(scope="session")
def mat_specs(cfg):
    return [material_spec(Seed(21, i), cfg) for i in range(1000)]


@pytest.fixture(scope="session")
def specs_100(cfg):
    """One hundred complete default scene specs."""
    return [generate_scene_spec(Seed(11, i), cfg) for i in range(100)]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
