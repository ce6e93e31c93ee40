"""Scene packages on disk, batch generation, validation and statistics.

Layout under the output directory::

    dataset.json               config hash, totals, throughput
    config.yaml                the configuration used
    manifest.jsonl             one record per scene index
    scenes/<id>/scene.json     SceneSpec (scene units, normalization scale recorded)
    scenes/<id>/package.json   exported cameras, view paths, stage timings
    scenes/<id>/views/<k>.png|.depth|.pts|.mask

Exported cameras, depth and point maps live in the normalized frame
``c + s * (p - c)`` with ``c`` the scene centre and ``s`` the recorded scale.
A scene directory appears only once complete: it is written to a staging
directory and renamed into place.
"""

from __future__ import annotations

import json
import logging
import multiprocessing
import os
import shutil
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .bvh import BVH
from .cameras import CameraSample, CameraSamplingError, normalized_camera
from .config import GenConfig, dump_config, load_config
from .floorplan import check_box, large_overlaps
from .gt import depth_to_points, reprojection_error, validity_mask
from .mesh import TriMesh
from .render import build_render_scene, render_camera, scene_lights
from .rng import Seed
from .scene import GENERATOR_VERSION, SceneSpec, generate_scene_spec, instantiate_scene_meshes
from .stats import summarize_specs

log = logging.getLogger(__name__)

WORKERS_ENV = "PRIMSYNTH_WORKERS"
FAILURE_BUDGET = 0.98
ROUNDTRIP_TOL_PX = 1e-4
CONTACT_TOL = 1e-9


class SceneFailure(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


@dataclass
class ScenePackage:
    scene_id: str
    path: Path
    spec: SceneSpec
    views: list[dict] = field(default_factory=list)
    timing_ms: dict = field(default_factory=dict)


@dataclass
class Report:
    checks: dict = field(default_factory=dict)   # name -> list of failure messages

    def add(self, name: str, failures: list[str]) -> None:
        self.checks.setdefault(name, []).extend(failures)

    @property
    def ok(self) -> bool:
        return all(not v for v in self.checks.values())

    def failed(self) -> list[str]:
        return [k for k, v in self.checks.items() if v]

    def to_json(self) -> dict:
        return {"ok": self.ok, "checks": {k: {"ok": not v, "failures": v[:20]}
                                          for k, v in self.checks.items()}}


def scene_id(index: int) -> str:
    return f"{index:08d}"


def _ms(t0: float) -> float:
    return round(1000.0 * (time.perf_counter() - t0), 3)


def generate_scene(seed: Seed, cfg: GenConfig, out_dir: str | Path,
                   spec_only: bool = False, save_mesh: bool = False) -> ScenePackage:
    """Generate, render and write one scene package.

    Raises :class:`SceneFailure` (leaving nothing behind) when a stage fails.
    """
    out_dir = Path(out_dir)
    sid = scene_id(seed.scene_index)
    scenes = out_dir / "scenes"
    scenes.mkdir(parents=True, exist_ok=True)
    final = scenes / sid
    staging = scenes / f".staging-{sid}-{os.getpid()}"
    if staging.exists():
        shutil.rmtree(staging)
    timing = {}
    try:
        t0 = time.perf_counter()
        try:
            spec = generate_scene_spec(seed, cfg)
        except CameraSamplingError as exc:
            raise SceneFailure("cameras", str(exc)) from exc
        timing["spec"] = _ms(t0)
        staging.mkdir()
        io.atomic_write_text(staging / "scene.json", spec.dumps())
        views = []
        if not spec_only:
            views = _render_views(spec, cfg, staging, timing, save_mesh)
        package = {"scene_id": sid, "seed": seed.to_json(),
                   "generator_version": GENERATOR_VERSION, "config_hash": cfg.hash(),
                   "normalization_scale": spec.normalization_scale,
                   "views": views, "timing_ms": timing}
        io.atomic_write_text(staging / "package.json", json.dumps(package, indent=1))
        if final.exists():
            shutil.rmtree(final)
        os.replace(staging, final)
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    return ScenePackage(sid, final, spec, views, timing)


def _render_views(spec: SceneSpec, cfg: GenConfig, staging: Path, timing: dict,
                  save_mesh: bool) -> list[dict]:
    t0 = time.perf_counter()
    meshes = instantiate_scene_meshes(spec, cfg)
    timing["geometry"] = _ms(t0)
    t0 = time.perf_counter()
    rscene = build_render_scene(meshes, spec.materials, scene_lights(spec), cfg)
    timing["bvh"] = _ms(t0)
    if save_mesh:
        io.write_mesh(staging / "scene.mesh", rscene.mesh)
    (staging / "views").mkdir()
    s = spec.normalization_scale
    center = spec.cameras.center
    threshold = cfg.ground_truth.depth_threshold
    views = []
    t_render = t_gt = t_write = 0.0
    for k, cam in enumerate(spec.cameras.cameras):
        t0 = time.perf_counter()
        out = render_camera(rscene, cam, cfg.render.gamma)
        t_render += time.perf_counter() - t0
        t0 = time.perf_counter()
        cam_n = normalized_camera(cam, s, center)
        depth = out.depth * s
        mask = validity_mask(depth, threshold).mask
        points = depth_to_points(depth, cam_n, threshold).points
        t_gt += time.perf_counter() - t0
        t0 = time.perf_counter()
        stem = staging / "views" / f"{k:03d}"
        io.write_png(stem.with_suffix(".png"), out.rgb8())
        io.write_depth(stem.with_suffix(".depth"), depth)
        io.write_points(stem.with_suffix(".pts"), points)
        io.write_mask(stem.with_suffix(".mask"), mask)
        t_write += time.perf_counter() - t0
        rel = f"views/{k:03d}"
        views.append({"index": k, "camera": cam_n.to_json(), "rgb": rel + ".png",
                      "depth": rel + ".depth", "points": rel + ".pts", "mask": rel + ".mask"})
    timing["render"] = round(1000 * t_render, 3)
    timing["ground_truth"] = round(1000 * t_gt, 3)
    timing["write"] = round(1000 * t_write, 3)
    return views


# ---------------------------------------------------------------------------
# validation


def validate_scene(scene_dir: str | Path, cfg: GenConfig, check_clearance: bool = True) -> Report:
    """Containment, contact, overlap, clearance, FoV, depth round-trip and file checks."""
    scene_dir = Path(scene_dir)
    rep = Report()
    try:
        spec = SceneSpec.loads((scene_dir / "scene.json").read_text())
        package = json.loads((scene_dir / "package.json").read_text())
    except (OSError, ValueError, KeyError) as exc:
        rep.add("file_integrity", [f"{scene_dir}: {exc}"])
        return rep

    sb = spec.scene_box
    boxes = spec.object_boxes
    contain, contact = [], []
    for i, b in enumerate(boxes):
        for p in check_box(b, sb, boxes, CONTACT_TOL):
            (contain if "outside" in p or "degenerate" in p else contact).append(f"box {i}: {p}")
    rep.add("containment", contain)
    rep.add("contact", contact)
    n = large_overlaps(boxes)
    rep.add("large_overlap", [f"{n} overlapping large pairs"] if n else [])

    cams = spec.cameras.cameras if spec.cameras else []
    cc = cfg.cameras
    rep.add("camera_count", [] if len(cams) == cc.outer_count + cc.inner_count else
            [f"{len(cams)} cameras"])
    rep.add("fov", [f"camera {j}: {c.fov_y}" for j, c in enumerate(cams)
                    if not cc.fov_deg.lo <= c.fov_y <= cc.fov_deg.hi])
    if check_clearance and cams:
        rep.add("clearance", clearance_failures(spec, cfg))

    views = package.get("views", [])
    files, roundtrip, masks = [], [], []
    if views and len(views) != len(cams):
        files.append(f"{len(views)} views for {len(cams)} cameras")
    s = spec.normalization_scale
    for v in views:
        cam = CameraSample.from_json(v["camera"])
        expected_cam = normalized_camera(cams[v["index"]], s, spec.cameras.center)
        try:
            io.read_png(scene_dir / v["rgb"])
            depth = io.read_depth(scene_dir / v["depth"]).astype(float)
            pts = io.read_points(scene_dir / v["points"])
            mask = io.read_mask(scene_dir / v["mask"])
        except (OSError, ValueError) as exc:
            files.append(str(exc))
            continue
        shape = (cam.height, cam.width)
        if depth.shape != shape or mask.shape != shape or pts.shape != shape + (3,):
            files.append(f"{v['depth']}: raster shape mismatch")
            continue
        if not np.allclose(cam.center, expected_cam.center, rtol=0, atol=1e-9):
            files.append(f"view {v['index']}: exported camera does not match scene.json")
        err = reprojection_error(depth, cam)
        if err > ROUNDTRIP_TOL_PX:
            roundtrip.append(f"view {v['index']}: {err:.3g} px")
        want = validity_mask(depth, cfg.ground_truth.depth_threshold).mask
        if not np.array_equal(mask, want):
            masks.append(f"view {v['index']}: mask differs from depth threshold rule")
        if not np.array_equal(np.isfinite(pts).all(axis=-1), mask):
            masks.append(f"view {v['index']}: point map validity differs from mask")
    rep.add("file_integrity", files)
    rep.add("depth_roundtrip", roundtrip)
    rep.add("mask_rule", masks)
    return rep


def clearance_failures(spec: SceneSpec, cfg: GenConfig,
                       meshes: list[TriMesh] | None = None) -> list[str]:
    """Cameras closer than their enforced clearance to any triangle."""
    if meshes is None:
        meshes = instantiate_scene_meshes(spec, cfg)
    bvh = BVH(TriMesh.concat(meshes))
    cams = spec.cameras.cameras
    pos = np.array([c.position for c in cams])
    d = bvh.closest_distance(pos)
    return [f"camera {j}: distance {d[j]:.4f} < {c.d_min}" for j, c in enumerate(cams)
            if d[j] < c.d_min]


# ---------------------------------------------------------------------------
# batches


def _init_worker(threads: int) -> None:
    try:
        import numba
        numba.set_num_threads(threads)
    except (ImportError, ValueError):
        pass


def _scene_job(args) -> dict:
    global_seed, index, cfg_dict, out_dir, spec_only, do_validate = args
    cfg = GenConfig.from_dict(cfg_dict)
    seed = Seed(global_seed, index)
    sid = scene_id(index)
    entry = {"scene_id": sid, "seed": seed.to_json(), "path": f"scenes/{sid}"}
    t0 = time.perf_counter()
    try:
        pkg = generate_scene(seed, cfg, out_dir, spec_only=spec_only)
    except SceneFailure as exc:
        log.warning("scene %s failed at %s: %s", sid, exc.stage, exc)
        entry.update(status="failed", stage=exc.stage, error=str(exc))
        entry["timing_ms"] = {"total": _ms(t0)}
        return entry
    entry["timing_ms"] = dict(pkg.timing_ms, total=_ms(t0))
    if do_validate:
        rep = validate_scene(pkg.path, cfg)
        entry["status"] = "valid" if rep.ok else "invalid"
        entry["failed_checks"] = rep.failed()
    else:
        entry["status"] = "generated"
    return entry


def resolve_workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    return max(1, int(workers))


def generate_dataset(global_seed: int, count: int, workers: int | None, out_dir: str | Path,
                     cfg: GenConfig, spec_only: bool = False, validate: bool = True) -> dict:
    """Generate ``count`` scenes keyed by scene index and write the manifest.

    Outputs do not depend on ``workers``; per-scene failures are recorded in
    the manifest and never abort the batch.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    workers = resolve_workers(workers)
    (out_dir / "config.yaml").write_text(dump_config(cfg))
    jobs = [(int(global_seed), i, cfg.to_dict(), str(out_dir), spec_only, validate)
            for i in range(count)]
    t0 = time.perf_counter()
    if workers == 1 or count <= 1:
        entries = [_scene_job(j) for j in jobs]
    else:
        # spawn, not fork: forking after the OpenMP runtime has started aborts the child
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx, initializer=_init_worker,
                                 initargs=(1,)) as pool:
            entries = list(pool.map(_scene_job, jobs))
    wall = time.perf_counter() - t0
    entries.sort(key=lambda e: e["scene_id"])
    with open(out_dir / "manifest.jsonl", "w") as fh:
        for e in entries:
            fh.write(json.dumps(e, sort_keys=True) + "\n")
    ok = sum(e["status"] in ("valid", "generated") for e in entries)
    summary = {"generator_version": GENERATOR_VERSION, "config_hash": cfg.hash(),
               "global_seed": int(global_seed), "count": count, "succeeded": ok,
               "failed": count - ok, "workers": workers, "spec_only": spec_only,
               "wall_seconds": round(wall, 3),
               "scenes_per_second": round(count / wall, 4) if wall > 0 and count else 0.0}
    (out_dir / "dataset.json").write_text(json.dumps(summary, indent=1, sort_keys=True))
    return {"entries": entries, **summary}


def read_manifest(out_dir: str | Path) -> list[dict]:
    path = Path(out_dir) / "manifest.jsonl"
    if not path.exists():
        return []
    return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]


def within_budget(entries: list[dict]) -> bool:
    if not entries:
        return True
    good = sum(e["status"] in ("valid", "generated") for e in entries)
    return good >= FAILURE_BUDGET * len(entries)


def load_dataset_config(out_dir: str | Path) -> GenConfig:
    path = Path(out_dir) / "config.yaml"
    return load_config(path) if path.exists() else GenConfig()


def compute_stats(out_dir: str | Path, cfg: GenConfig | None = None) -> dict:
    """Distributions over validated scenes plus throughput and failures by stage."""
    out_dir = Path(out_dir)
    entries = read_manifest(out_dir)
    cfg = cfg or load_dataset_config(out_dir)
    good = [e for e in entries if e["status"] in ("valid", "generated")]
    specs = [SceneSpec.loads((out_dir / e["path"] / "scene.json").read_text()) for e in good]
    report = summarize_specs(specs, cfg)
    failures: dict[str, int] = {}
    for e in entries:
        if e["status"] == "failed":
            failures[e.get("stage", "unknown")] = failures.get(e.get("stage", "unknown"), 0) + 1
        elif e["status"] == "invalid":
            for c in e.get("failed_checks", []):
                failures[f"validate:{c}"] = failures.get(f"validate:{c}", 0) + 1
    report["failures"] = failures
    report["throughput"] = throughput(entries, out_dir)
    return report


def throughput(entries: list[dict], out_dir: str | Path | None = None) -> dict:
    if not entries:
        return {"scenes_per_second": 0.0}
    timing = [e.get("timing_ms", {}) for e in entries]

    def mean(key):
        vals = [t[key] for t in timing if key in t]
        return round(float(np.mean(vals)), 3) if vals else None

    out = {"spec_ms_per_scene": mean("spec"), "geometry_ms_per_scene": mean("geometry"),
           "render_ms_per_scene": mean("render"), "total_ms_per_scene": mean("total")}
    if out_dir is not None and (Path(out_dir) / "dataset.json").exists():
        d = json.loads((Path(out_dir) / "dataset.json").read_text())
        out["scenes_per_second"] = d.get("scenes_per_second", 0.0)
        out["workers"] = d.get("workers")
    return out
