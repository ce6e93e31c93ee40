"""On-disk raster and mesh formats.

Raster files (``.depth``, ``.pts``, ``.mask``) share a 16-byte little-endian
header::

    bytes 0-7   magic (b"PSDEPTH\\0", b"PSPOINT\\0" or b"PSMASK\\0\\0")
    bytes 8-11  width  (uint32)
    bytes 12-15 height (uint32)

followed by row-major pixels: one float32 per pixel for depth (+inf on
miss), three float32 per pixel for point maps (NaN where invalid) and one
uint8 per pixel (0/1) for masks. RGB views are 8-bit PNG.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .mesh import TriMesh

DEPTH_MAGIC = b"PSDEPTH\0"
POINT_MAGIC = b"PSPOINT\0"
MASK_MAGIC = b"PSMASK\0\0"
MESH_MAGIC = b"PSMESH\0\0"
HEADER = struct.Struct("<8sII")

_LAYOUT = {DEPTH_MAGIC: ("<f4", 1), POINT_MAGIC: ("<f4", 3), MASK_MAGIC: ("u1", 1)}


class FormatError(ValueError):
    pass


def _write_raster(path: str | Path, magic: bytes, data: np.ndarray) -> None:
    dtype, channels = _LAYOUT[magic]
    h, w = data.shape[:2]
    arr = np.ascontiguousarray(data, dtype=dtype).reshape(h, w * channels)
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(magic, w, h))
        fh.write(arr.tobytes())


def _read_raster(path: str | Path, magic: bytes) -> np.ndarray:
    dtype, channels = _LAYOUT[magic]
    raw = Path(path).read_bytes()
    if len(raw) < HEADER.size:
        raise FormatError(f"{path}: truncated header")
    got, w, h = HEADER.unpack_from(raw)
    if got != magic:
        raise FormatError(f"{path}: bad magic {got!r}")
    expected = HEADER.size + w * h * channels * np.dtype(dtype).itemsize
    if len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
    arr = np.frombuffer(raw, dtype=dtype, offset=HEADER.size)
    shape = (h, w, channels) if channels > 1 else (h, w)
    return arr.reshape(shape)


def write_depth(path, depth: np.ndarray) -> None:
    _write_raster(path, DEPTH_MAGIC, depth)


def read_depth(path) -> np.ndarray:
    return _read_raster(path, DEPTH_MAGIC)


def write_points(path, points: np.ndarray) -> None:
    _write_raster(path, POINT_MAGIC, points)


def read_points(path) -> np.ndarray:
    return _read_raster(path, POINT_MAGIC)


def write_mask(path, mask: np.ndarray) -> None:
    _write_raster(path, MASK_MAGIC, np.asarray(mask, dtype=np.uint8))


def read_mask(path) -> np.ndarray:
    return _read_raster(path, MASK_MAGIC).astype(bool)


def write_png(path, rgb8: np.ndarray) -> None:
    # fixed encoder settings keep files byte-stable across runs
    Image.fromarray(np.ascontiguousarray(rgb8, dtype=np.uint8), "RGB").save(
        path, format="PNG", optimize=False, compress_level=6)


def read_png(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def write_mesh(path, mesh: TriMesh) -> None:
    """Binary scene mesh: magic, uint64 vertex and triangle counts, then
    float32 vertices, normals, uvs, uint32 triangles, int32 slots and uint8
    smooth flags."""
    with open(path, "wb") as fh:
        fh.write(MESH_MAGIC)
        fh.write(struct.pack("<QQ", mesh.n_vertices, mesh.n_triangles))
        for arr, dt in ((mesh.vertices, "<f4"), (mesh.normals, "<f4"), (mesh.uvs, "<f4"),
                        (mesh.triangles, "<u4"), (mesh.material_slot, "<i4"),
                        (mesh.smooth, "u1")):
            fh.write(np.ascontiguousarray(arr, dtype=dt).tobytes())


def read_mesh(path) -> TriMesh:
    raw = Path(path).read_bytes()
    if raw[:8] != MESH_MAGIC:
        raise FormatError(f"{path}: bad magic")
    nv, nt = struct.unpack_from("<QQ", raw, 8)
    off = 24
    out = []
    for shape, dt in (((nv, 3), "<f4"), ((nv, 3), "<f4"), ((nv, 2), "<f4"), ((nt, 3), "<u4"),
                      ((nt,), "<i4"), ((nt,), "u1")):
        size = int(np.prod(shape)) * np.dtype(dt).itemsize
        if off + size > len(raw):
            raise FormatError(f"{path}: truncated")
        out.append(np.frombuffer(raw, dtype=dt, count=int(np.prod(shape)), offset=off)
                   .reshape(shape))
        off += size
    v, n, uv, t, slot, smooth = out
    return TriMesh(v.astype(float), t.astype(np.int64), uv.astype(float), n.astype(float),
                   slot.astype(np.int32), smooth.astype(bool))


def write_obj(path, mesh: TriMesh) -> None:
    """Wavefront OBJ with one group per material slot, for inspection."""
    with open(path, "w") as fh:
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.6f} {v[1]:.6f} {v[2]:.6f}\n")
        for slot in np.unique(mesh.material_slot):
            fh.write(f"g slot{slot}\n")
            for t in mesh.triangles[mesh.material_slot == slot] + 1:
                fh.write(f"f {t[0]} {t[1]} {t[2]}\n")


def atomic_write_text(path: str | Path, text: str) -> None:
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)
