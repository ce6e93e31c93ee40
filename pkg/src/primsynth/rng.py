"""Label-keyed random streams.

A stream is a counter-based Philox generator whose 128-bit key is a hash of
``(global_seed, scene_index, label)``. Each pipeline stage draws from its own
label, so no stage can shift another's draws and scenes can be generated in
any order on any worker.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from .config import Categorical, ConfigError, Range

_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class Seed:
    global_seed: int
    scene_index: int

    def __post_init__(self) -> None:
        for name in ("global_seed", "scene_index"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not 0 <= int(v) <= _U64:
                raise ConfigError(f"{name} must be a 64-bit unsigned integer, got {v!r}")

    def to_json(self) -> dict:
        return {"global_seed": int(self.global_seed), "scene_index": int(self.scene_index)}

    @classmethod
    def from_json(cls, d: dict) -> Seed:
        return cls(int(d["global_seed"]), int(d["scene_index"]))


def _key(material: bytes) -> np.ndarray:
    digest = hashlib.blake2b(material, digest_size=16).digest()
    return np.frombuffer(digest, dtype="<u8").copy()


class Stream:
    """Deterministic random stream with the sampling primitives the pipeline needs."""

    __slots__ = ("_key", "_gen")

    def __init__(self, key: np.ndarray):
        self._key = key
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def child(self, label: str) -> Stream:
        """Independent sub-stream; consumes no draws from ``self``."""
        return Stream(_key(self._key.tobytes() + b"/" + label.encode()))

    def random(self) -> float:
        """Uniform in ``[0, 1)``."""
        return float(self._gen.random())

    def uniform(self, r: Range) -> float:
        if not isinstance(r, Range):
            raise ConfigError(f"expected a Range, got {r!r}")
        if r.lo == r.hi:
            return float(r.lo)
        return float(r.lo + (r.hi - r.lo) * self._gen.random())

    def uniform_in(self, lo: float, hi: float) -> float:
        return self.uniform(Range(lo, hi))

    def integer(self, r: Range) -> int:
        """Uniform integer in ``[lo, hi]`` (both inclusive)."""
        lo, hi = int(r.lo), int(r.hi)
        if lo == hi:
            return lo
        return int(self._gen.integers(lo, hi, endpoint=True))

    def categorical(self, c: Categorical):
        if not isinstance(c, Categorical):
            raise ConfigError(f"expected a Categorical, got {c!r}")
        u = self._gen.random()
        acc = 0.0
        for item, p in zip(c.items, c.probs):
            acc += p
            if u < acc:
                return item
        # rounding left u above the final cumulative sum
        for item, p in zip(reversed(c.items), reversed(c.probs)):
            if p > 0:
                return item
        raise ConfigError("categorical has no positive probability")

    def bernoulli(self, p: float) -> bool:
        if not 0.0 <= p <= 1.0:
            raise ConfigError(f"bernoulli probability must lie in [0, 1], got {p}")
        return bool(self._gen.random() < p)

    def normal(self, size=None):
        return self._gen.standard_normal(size)

    def uint32(self) -> int:
        return int(self._gen.integers(0, 1 << 32))


def derive_stream(seed: Seed, label: str) -> Stream:
    """The stream for one pipeline stage of one scene."""
    material = struct.pack("<QQ", int(seed.global_seed), int(seed.scene_index)) + label.encode()
    return Stream(_key(material))
