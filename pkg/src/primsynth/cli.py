"""Command line entry point: ``primsynth {gen,validate,stats,dump-default-config,preview}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, GenConfig, default_config, dump_config, load_config

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_VALIDATION = 2


def _load(args) -> GenConfig:
    cfg = load_config(args.config) if args.config else default_config()
    if getattr(args, "resolution", None):
        r = args.resolution
        cfg = cfg.with_overrides(cameras={"width": r, "height": r})
    return cfg


def cmd_gen(args) -> int:
    from .dataset import generate_dataset, within_budget
    cfg = _load(args)
    if args.count < 0:
        raise ConfigError("--count must be nonnegative")
    result = generate_dataset(args.seed, args.count, args.workers, args.out, cfg,
                              spec_only=args.spec_only, validate=not args.no_validate)
    print(f"generated {result['succeeded']}/{result['count']} scenes into {args.out} "
          f"({result['scenes_per_second']} scenes/s, {result['workers']} workers)")
    return EXIT_OK if within_budget(result["entries"]) else EXIT_VALIDATION


def cmd_validate(args) -> int:
    from .dataset import load_dataset_config, read_manifest, validate_scene, within_budget
    out = Path(args.out)
    cfg = load_config(args.config) if args.config else load_dataset_config(out)
    entries = read_manifest(out)
    if args.scene is not None:
        entries = [e for e in entries if e["scene_id"] == f"{args.scene:08d}"]
    results = []
    for e in entries:
        if e["status"] == "failed":
            results.append({"scene_id": e["scene_id"], "status": "failed"})
            continue
        rep = validate_scene(out / e["path"], cfg)
        e = dict(e, status="valid" if rep.ok else "invalid")
        results.append({"scene_id": e["scene_id"], "status": e["status"], **rep.to_json()})
        if not rep.ok:
            print(f"{e['scene_id']}: failed {', '.join(rep.failed())}")
    good = sum(r["status"] == "valid" for r in results)
    print(f"{good}/{len(results)} scenes valid")
    if args.json:
        Path(args.json).write_text(json.dumps(results, indent=1))
    return EXIT_OK if within_budget(results) else EXIT_VALIDATION


def cmd_stats(args) -> int:
    from .dataset import compute_stats
    cfg = load_config(args.config) if args.config else None
    report = compute_stats(args.out, cfg)
    text = json.dumps(report, indent=1, sort_keys=True, default=float)
    if args.json:
        Path(args.json).write_text(text)
    else:
        print(text)
    return EXIT_OK


def cmd_dump(args) -> int:
    text = dump_config(default_config())
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_preview(args) -> int:
    from .io import write_png
    from .render import prepare_scene, render_camera
    from .rng import Seed
    from .scene import generate_scene_spec
    cfg = _load(args)
    spec = generate_scene_spec(Seed(args.seed, args.index), cfg)
    scene = prepare_scene(spec, cfg)
    cams = spec.cameras.cameras[:args.views]
    tiles = [render_camera(scene, c, cfg.render.gamma).rgb8() for c in cams]
    cols = min(8, len(tiles))
    rows = -(-len(tiles) // cols)
    h, w = tiles[0].shape[:2]
    sheet = np.zeros((rows * h, cols * w, 3), np.uint8)
    for k, t in enumerate(tiles):
        r, c = divmod(k, cols)
        sheet[r * h:(r + 1) * h, c * w:(c + 1) * w] = t
    write_png(args.out, sheet)
    print(f"wrote {len(tiles)} views to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="primsynth", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a dataset")
    g.add_argument("--seed", type=int, default=0, help="global seed")
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--out", required=True)
    g.add_argument("--config", help="YAML or JSON config file")
    g.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: $PRIMSYNTH_WORKERS or 1)")
    g.add_argument("--resolution", type=int, help="square image size override")
    g.add_argument("--spec-only", action="store_true", help="skip rendering")
    g.add_argument("--no-validate", action="store_true")
    g.set_defaults(func=cmd_gen)

    v = sub.add_parser("validate", help="re-run scene checks on a dataset")
    v.add_argument("--out", required=True)
    v.add_argument("--config")
    v.add_argument("--scene", type=int, help="only this scene index")
    v.add_argument("--json", help="write per-scene reports here")
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("stats", help="dataset statistics and throughput")
    s.add_argument("--out", required=True)
    s.add_argument("--config")
    s.add_argument("--json", help="write the report here instead of stdout")
    s.set_defaults(func=cmd_stats)

    d = sub.add_parser("dump-default-config", help="print the default config")
    d.add_argument("--out")
    d.set_defaults(func=cmd_dump)

    pv = sub.add_parser("preview", help="render one scene's views into a contact sheet")
    pv.add_argument("--seed", type=int, default=0)
    pv.add_argument("--index", type=int, default=0)
    pv.add_argument("--out", required=True)
    pv.add_argument("--config")
    pv.add_argument("--resolution", type=int)
    pv.add_argument("--views", type=int, default=16)
    pv.set_defaults(func=cmd_preview)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
