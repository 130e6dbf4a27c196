"""Counter-based random streams keyed by (seed, purpose, step, walker).

Every walker owns a disjoint range of Philox counters inside a key that
depends only on the master seed, the purpose and the step index.  Any
contiguous slice of walkers can therefore be generated independently and
the result does not depend on how walkers are split across workers.
"""
from __future__ import annotations

import numpy as np

PURPOSE_STEP = 0
PURPOSE_INIT = 1

_WORDS_PER_BLOCK = 4  # Philox4x64 emits four 64-bit words per counter value


def step_key(seed: int, step: int, purpose: int = PURPOSE_STEP) -> np.ndarray:
    if seed < 0 or step < 0:
        raise ValueError("seed and step must be non-negative")
    return np.random.SeedSequence([int(seed), int(purpose), int(step)]).generate_state(2, np.uint64)


def _blocks_per_walker(words: int) -> int:
    return -(-words // _WORDS_PER_BLOCK)


def _raw_words(seed: int, step: int, start: int, stop: int, words: int, purpose: int) -> np.ndarray:
    if not 0 <= start <= stop:
        raise ValueError("need 0 <= start <= stop")
    blocks = _blocks_per_walker(words)
    gen = np.random.Philox(key=step_key(seed, step, purpose), counter=start * blocks)
    raw = gen.random_raw((stop - start) * blocks * _WORDS_PER_BLOCK)
    return raw.reshape(stop - start, blocks * _WORDS_PER_BLOCK)[:, :words]


def _to_unit(raw: np.ndarray) -> np.ndarray:
    """53-bit uniforms in [0, 1)."""
    return (raw >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def walker_uniforms(seed: int, step: int, start: int, stop: int, dim: int,
                    purpose: int = PURPOSE_INIT) -> np.ndarray:
    return _to_unit(_raw_words(seed, step, start, stop, dim, purpose))


def walker_normals(seed: int, step: int, start: int, stop: int, dim: int,
                   purpose: int = PURPOSE_STEP) -> np.ndarray:
    """Standard normals of shape (stop - start, dim) by the Box-Muller transform."""
    pairs = (dim + 1) // 2
    u = _to_unit(_raw_words(seed, step, start, stop, 2 * pairs, purpose))
    radius = np.sqrt(-2.0 * np.log1p(-u[:, 0::2]))
    angle = 2.0 * np.pi * u[:, 1::2]
    z = np.empty((stop - start, dim))
    z[:, 0::2] = radius * np.cos(angle)
    # the sine partner of the last pair is not needed when dim is odd
    z[:, 1::2] = radius[:, :dim // 2] * np.sin(angle[:, :dim // 2])
    return z


class WalkerStream:
    """The stream owned by one walker; ``at(step)`` draws that step's normals."""

    def __init__(self, seed: int, walker_id: int, step: int = 0):
        self.seed = int(seed)
        self.walker_id = int(walker_id)
        self.step = int(step)

    def at(self, step: int) -> "WalkerStream":
        return WalkerStream(self.seed, self.walker_id, step)

    def standard_normal(self, size) -> np.ndarray:
        dim = int(np.prod(size))
        z = walker_normals(self.seed, self.step, self.walker_id, self.walker_id + 1, dim)[0]
        return z.reshape(size)
