"""Hash-based value noise shared by the height field, textures and bump mapping."""

from __future__ import annotations

import numba
import numpy as np

_M1 = np.uint64(0x9E3779B97F4A7C15)
_M2 = np.uint64(0xBF58476D1CE4E5B9)
_M3 = np.uint64(0x94D049BB133111EB)
_M4 = np.uint64(0xD6E8FEB86659FD93)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


@numba.njit(cache=True)
def lattice_value(ix, iy, iz, seed):
    """Pseudo-random value in ``[0, 1)`` for an integer lattice point."""
    h = np.uint64(seed) * _M1
    h ^= np.uint64(ix) * _M2
    h ^= np.uint64(iy) * _M3
    h ^= np.uint64(iz) * _M4
    h ^= h >> _S30
    h *= _M2
    h ^= h >> _S27
    h *= _M3
    h ^= h >> _S31
    return float(h >> _S11) * _INV53


@numba.njit(cache=True)
def _fade(t):
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)


@numba.njit(cache=True)
def value_noise3(x, y, z, seed):
    """Smooth value noise in ``[-1, 1]``."""
    fx = np.floor(x)
    fy = np.floor(y)
    fz = np.floor(z)
    ix = np.int64(fx)
    iy = np.int64(fy)
    iz = np.int64(fz)
    tx = _fade(x - fx)
    ty = _fade(y - fy)
    tz = _fade(z - fz)
    c000 = lattice_value(ix, iy, iz, seed)
    c100 = lattice_value(ix + 1, iy, iz, seed)
    c010 = lattice_value(ix, iy + 1, iz, seed)
    c110 = lattice_value(ix + 1, iy + 1, iz, seed)
    c001 = lattice_value(ix, iy, iz + 1, seed)
    c101 = lattice_value(ix + 1, iy, iz + 1, seed)
    c011 = lattice_value(ix, iy + 1, iz + 1, seed)
    c111 = lattice_value(ix + 1, iy + 1, iz + 1, seed)
    x00 = c000 + tx * (c100 - c000)
    x10 = c010 + tx * (c110 - c010)
    x01 = c001 + tx * (c101 - c001)
    x11 = c011 + tx * (c111 - c011)
    y0 = x00 + ty * (x10 - x00)
    y1 = x01 + ty * (x11 - x01)
    return 2.0 * (y0 + tz * (y1 - y0)) - 1.0


@numba.njit(cache=True)
def fbm3(x, y, z, seed, octaves):
    """Octave sum of value noise, normalised back into ``[-1, 1]``."""
    total = 0.0
    norm = 0.0
    amp = 1.0
    freq = 1.0
    for o in range(octaves):
        total += amp * value_noise3(x * freq, y * freq, z * freq, seed + o)
        norm += amp
        amp *= 0.5
        freq *= 2.0
    return total / norm


@numba.njit(cache=True)
def fbm3_points(points, scale, seed, octaves):
    out = np.empty(points.shape[0])
    for i in range(points.shape[0]):
        out[i] = fbm3(points[i, 0] * scale, points[i, 1] * scale, points[i, 2] * scale,
                      seed, octaves)
    return out
