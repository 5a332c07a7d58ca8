"""Counter-based random streams for reproducible parallel Monte Carlo.

Each path owns a Philox stream keyed by (seed, path_index); the values it
produces are a pure function of (seed, path_index, counter), independent of
how many other paths run or in which order.  The counter is measured in raw
64-bit words; Gaussians come from Box-Muller so every pair of normals
consumes exactly two words, which makes mid-path restarts exact.
"""

from __future__ import annotations

import numpy as np

_INV_2_64 = 1.0 / 2.0**64


def _philox_at(seed: int, path_index: int, counter: int) -> np.random.Philox:
    key = ((int(seed) & 0xFFFFFFFFFFFFFFFF) << 64) | (int(path_index) & 0xFFFFFFFFFFFFFFFF)
    bg = np.random.Philox(key=key)
    blocks, rem = divmod(int(counter), 4)  # Philox.advance steps 4 raw words
    if blocks:
        bg.advance(blocks)
    if rem:
        bg.random_raw(rem)
    return bg


def _box_muller(raw: np.ndarray) -> np.ndarray:
    """Pairs of raw 64-bit words -> standard normals, two per pair."""
    u = (raw.astype(np.float64) + 1.0) * _INV_2_64  # in (0, 1]
    u1, u2 = u[0::2], u[1::2]
    r = np.sqrt(-2.0 * np.log(u1))
    th = 2.0 * np.pi * u2
    out = np.empty(raw.size)
    out[0::2] = r * np.cos(th)
    out[1::2] = r * np.sin(th)
    return out


class RngStream:
    """A per-path normal stream with an explicit restartable counter."""

    def __init__(self, seed: int, path_index: int = 0, counter: int = 0):
        self.seed = int(seed)
        self.path_index = int(path_index)
        self.counter = int(counter)
        self._bg = _philox_at(seed, path_index, counter)

    def normals(self, n: int) -> np.ndarray:
        """Draw n standard normals (n must be even), consuming n raw words."""
        if n % 2:
            raise ValueError("normals are drawn in pairs; n must be even")
        raw = np.asarray(self._bg.random_raw(n), dtype=np.uint64)
        self.counter += n
        return _box_muller(raw)

    def at(self, counter: int) -> "RngStream":
        """A fresh stream over the same key, positioned at ``counter``."""
        return RngStream(self.seed, self.path_index, counter)


class ZeroStream:
    """Stub stream returning zero 'Gaussians'; for deterministic step tests."""

    def __init__(self):
        self.counter = 0

    def normals(self, n: int) -> np.ndarray:
        self.counter += n
        return np.zeros(n)


def batch_normals(seed: int, path_indices, counter: int, n_steps: int) -> np.ndarray:
    """Normals for many lockstep paths: shape (n_paths, n_steps, 2).

    Path i's slice equals what RngStream(seed, path_indices[i]) positioned at
    ``counter`` would produce, so batch composition never changes values.
    """
    out = np.empty((len(path_indices), n_steps, 2))
    for row, pi in enumerate(path_indices):
        bg = _philox_at(seed, pi, counter)
        raw = np.asarray(bg.random_raw(2 * n_steps), dtype=np.uint64)
        out[row] = _box_muller(raw).reshape(n_steps, 2)
    return out
