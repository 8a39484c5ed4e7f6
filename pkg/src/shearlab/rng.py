"""Counter-based random streams for reproducible Monte Carlo.

Every Gaussian increment is a pure function of ``(seed, stream_id, counter)``,
so ensembles can be advanced in any partition order (or re-run on another
platform) and produce bit-identical trajectories.  The generator is a
splitmix64-style integer mix: the 64-bit state for draw ``n`` of a stream is
``key + n * GOLDEN`` where ``key`` fuses seed and stream id, and two rounds of
xor-shift/multiply whiten it.  Uniforms are mapped to normals by Box-Muller,
yielding one 2-vector of independent N(0,1) per counter value (one per
position component).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_STREAM_SALT = np.uint64(0x8FB2C2C1DE72B5FF)

_TWO64 = float(2**64)


def _mix64(x: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer: full-avalanche 64-bit hash."""
    x = x.astype(np.uint64, copy=True)
    x ^= x >> np.uint64(30)
    x *= _MIX1
    x ^= x >> np.uint64(27)
    x *= _MIX2
    x ^= x >> np.uint64(31)
    return x


def _stream_key(seed: int, stream_id: np.ndarray) -> np.ndarray:
    s = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    return _mix64(stream_id.astype(np.uint64) * _STREAM_SALT + s)


def _uniforms(key: np.ndarray, counter: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Two open-interval uniforms per (key, counter), vectorized."""
    with np.errstate(over="ignore"):
        base = key + counter.astype(np.uint64) * _GOLDEN
        w1 = _mix64(base)
        w2 = _mix64(base ^ _GOLDEN)
    # 53-bit mantissa; +0.5 keeps u strictly inside (0, 1)
    u1 = ((w1 >> np.uint64(11)).astype(np.float64) + 0.5) / 2**53
    u2 = ((w2 >> np.uint64(11)).astype(np.float64) + 0.5) / 2**53
    return u1, u2


def gaussian_pair(seed: int, stream_id, counter) -> np.ndarray:
    """Return independent N(0,1) pairs, shape ``broadcast(stream_id, counter) + (2,)``.

    Pure function of its arguments: identical inputs give identical outputs
    on any platform (IEEE-754 double arithmetic on exactly-reproducible
    64-bit integers).
    """
    stream_id = np.asarray(stream_id, dtype=np.uint64)
    counter = np.asarray(counter, dtype=np.uint64)
    stream_id, counter = np.broadcast_arrays(stream_id, counter)
    key = _stream_key(seed, stream_id)
    u1, u2 = _uniforms(key, counter)
    r = np.sqrt(-2.0 * np.log(u1))
    phi = 2.0 * np.pi * u2
    out = np.empty(stream_id.shape + (2,))
    out[..., 0] = r * np.cos(phi)
    out[..., 1] = r * np.sin(phi)
    return out


def uniform_points(seed: int, stream_id, counter) -> np.ndarray:
    """Uniform points on [0,1)^2, same reproducibility contract as gaussian_pair."""
    stream_id = np.asarray(stream_id, dtype=np.uint64)
    counter = np.asarray(counter, dtype=np.uint64)
    stream_id, counter = np.broadcast_arrays(stream_id, counter)
    key = _stream_key(seed, stream_id)
    u1, u2 = _uniforms(key, counter)
    return np.stack([u1, u2], axis=-1)


@dataclass
class RandomStream:
    """Per-particle Gaussian stream with an explicit counter.

    The stream never stores state beyond the counter; ``next_gaussians`` for a
    block of particles is a pure lookup into the (seed, stream_id, counter)
    lattice.
    """

    seed: int
    stream_ids: np.ndarray
    counter: int = 0

    @classmethod
    def for_particles(cls, seed: int, n: int) -> "RandomStream":
        return cls(seed=seed, stream_ids=np.arange(n, dtype=np.uint64), counter=0)

    def next_gaussians(self) -> np.ndarray:
        """One N(0,1)^2 draw per particle; advances the shared counter."""
        g = gaussian_pair(self.seed, self.stream_ids, np.uint64(self.counter))
        self.counter += 1
        return g

    def peek(self, counter: int) -> np.ndarray:
        return gaussian_pair(self.seed, self.stream_ids, np.uint64(counter))


def brownian_sup_probability_bound(c: float, kappa: float, T: float) -> float:
    """Lower bound on P(sup_{[0,T]} sqrt(2k)|W_t| <= c) for scalar Brownian W.

    Reflection-principle tail: P >= 1 - 2 exp(-c^2 / (2 kappa T)).
    """
    if T <= 0 or kappa <= 0:
        return 1.0
    return 1.0 - 2.0 * np.exp(-(c * c) / (2.0 * kappa * T))
