"""Reproducible random streams keyed by ``(seed, stream_id)``.

Each stream is a Philox (counter-based) generator whose key is derived from
``SeedSequence(seed, spawn_key=(stream_id,))``. Streams with the same pair
replay the same sequence; different ``stream_id`` values give independent
streams, which is what the per-replication chains rely on.
"""

from __future__ import annotations

import numpy as np

_U52 = 2.0 ** -52

STREAM_POLICY = "philox/seedsequence(seed, spawn_key=(stream_id,))"


class RngStream:
    """A single-owner random stream.

    Parameters
    ----------
    seed : int
        Experiment seed (0 <= seed < 2**64).
    stream_id : int
        Replication or purpose index (0 <= stream_id < 2**64).
    """

    __slots__ = ("seed", "stream_id", "gen")

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        if not (0 <= self.seed < 2**64 and 0 <= self.stream_id < 2**64):
            raise ValueError("seed and stream_id must be 64-bit unsigned integers")
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        self.gen = np.random.Generator(np.random.Philox(ss))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    def standard_normal(self, size=None):
        """iid N(0, 1) variates (ziggurat)."""
        return self.gen.standard_normal(size)

    def uniform(self, size=None):
        """Uniform variates strictly inside (0, 1) on the grid ``(k + 1/2) 2^-52``.

        Every grid point is exactly representable; the largest is ``1 - 2^-53``.
        """
        k = self.gen.integers(0, 1 << 52, size=size, dtype=np.uint64)
        if size is None:
            return (float(k) + 0.5) * _U52
        return (k.astype(np.float64) + 0.5) * _U52

    def child(self, stream_id: int) -> "RngStream":
        """Independent stream sharing this seed."""
        return RngStream(self.seed, stream_id)


def standard_normal_vec(stream: RngStream, k: int) -> np.ndarray:
    if k < 1:
        raise ValueError("k must be positive")
    return stream.standard_normal(int(k))


def uniform(stream: RngStream) -> float:
    return stream.uniform()


# Reserved stream ids for auxiliary draws so they never collide with the
# replication streams 0..R-1.
AUX_BASE = 1 << 62
MC_STREAM = AUX_BASE + 1
CURVE_STREAM = AUX_BASE + 2
PROBE_STREAM = AUX_BASE + 3
VARIANCE_STREAM = AUX_BASE + 4
