"""Seeded random streams keyed by (seed, stream_id).

Every stochastic routine in the package draws from an explicit RngStream,
so results are a pure function of the stream key and the inputs. Distinct
stream ids give statistically independent sequences regardless of creation
order or thread layout, which is what makes worker-parallel runs bitwise
reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# stream_id packing: purpose | iteration | index
_ITER_BITS = 32
_INDEX_BITS = 16

PURPOSE_INIT = 1
PURPOSE_PERTURB = 2
PURPOSE_ROLLOUT = 3
PURPOSE_GAMMA = 4
PURPOSE_EVAL = 5
PURPOSE_VARLAB = 6


@dataclass
class RngStream:
    """Deterministic random stream.

    Same (seed, stream_id, subkey) replays the same draws. The optional
    subkey tuple supports hierarchical derivation (e.g. per-block streams
    inside the variance oracle) without burning through stream ids.
    """

    seed: int
    stream_id: int = 0
    subkey: tuple = ()
    _gen: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed out of range: {self.seed}")
        if not 0 <= self.stream_id < 2**64:
            raise ValueError(f"stream_id out of range: {self.stream_id}")
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, *self.subkey))
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def child(self, *keys: int) -> "RngStream":
        """Derive an independent stream keyed below this one."""
        return RngStream(self.seed, self.stream_id, self.subkey + tuple(keys))

    def standard_normal(self, shape=None) -> np.ndarray:
        return self._gen.standard_normal(shape)

    def uniform(self, shape=None) -> np.ndarray:
        return self._gen.random(shape)

    def chi_squared(self, df: float, shape=None) -> np.ndarray:
        return self._gen.chisquare(df, shape)


def pack_stream_id(purpose: int, iteration: int = 0, index: int = 0) -> int:
    """Pack (purpose, iteration, index) into a single collision-free id."""
    if not 0 <= iteration < 2**_ITER_BITS:
        raise ValueError(f"iteration out of range: {iteration}")
    if not 0 <= index < 2**_INDEX_BITS:
        raise ValueError(f"index out of range: {index}")
    if not 0 <= purpose < 2**15:
        raise ValueError(f"purpose out of range: {purpose}")
    return (purpose << (_ITER_BITS + _INDEX_BITS)) | (iteration << _INDEX_BITS) | index


def derive_stream(seed: int, purpose: int, iteration: int = 0, index: int = 0) -> RngStream:
    return RngStream(seed, pack_stream_id(purpose, iteration, index))


def gaussian_draw(stream: RngStream, n: int) -> np.ndarray:
    """n i.i.d. standard normal draws from the stream."""
    if n < 1:
        raise ValueError("n must be positive")
    return stream.standard_normal(n)
