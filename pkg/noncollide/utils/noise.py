"""Counter-based Brownian increment streams.

Each path owns a Philox generator keyed by (base seed, path index), so any
path of an ensemble can be regenerated alone and the streams of different
paths never overlap. A second key, (base seed, path index, 1), feeds the
Brownian-bridge refinement used by adaptive substeps.
"""

import logging
import math
from typing import Sequence, Tuple

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

from noncollide.config import NOISE_BLOCK_STEPS

logger = logging.getLogger(__name__)

REFINEMENT_KEY = 1


class NoisePath:
    """Standard normal increment vectors of one path.

    Draws are buffered in blocks of NOISE_BLOCK_STEPS rows, so the sequence
    a path sees never depends on how many rows each call asks for.

    Args:
        seed: Base seed (64-bit integer)
        p: Number of driving Brownian motions
        stream: Sub-stream key, e.g. (path_index,)
        coarsen: Sum this many consecutive fine rows into one, scaled to unit
            variance; the path then follows the same Brownian motion at a
            time step ``coarsen`` times larger
    """

    def __init__(self, seed: int, p: int, stream: Sequence[int] = (), coarsen: int = 1):
        if coarsen < 1:
            raise ValueError("coarsen must be >= 1")
        self.seed = int(seed)
        self.p = int(p)
        self.stream = tuple(int(s) for s in stream)
        self.coarsen = int(coarsen)
        self._generator = Generator(Philox(SeedSequence(self.seed, spawn_key=self.stream)))
        self._refinement = None
        self._buffer = np.empty((0, self.p))

    @classmethod
    def for_path(cls, base_seed: int, path_index: int, p: int, coarsen: int = 1) -> "NoisePath":
        """The sub-stream of path ``path_index`` in an ensemble."""
        return cls(base_seed, p, (path_index,), coarsen)

    def _take(self, rows: int) -> np.ndarray:
        while self._buffer.shape[0] < rows:
            block = self._generator.standard_normal((NOISE_BLOCK_STEPS, self.p))
            self._buffer = np.concatenate([self._buffer, block])
        out, self._buffer = self._buffer[:rows], self._buffer[rows:]
        return out

    def normals(self, n_steps: int) -> np.ndarray:
        """Next n_steps standard normal vectors, shape (n_steps, p)."""
        fine = self._take(n_steps * self.coarsen)
        if self.coarsen == 1:
            return fine
        return fine.reshape(n_steps, self.coarsen, self.p).sum(axis=1) / math.sqrt(self.coarsen)

    @property
    def refinement(self) -> Generator:
        """Generator for Brownian-bridge substeps of this path."""
        if self._refinement is None:
            key = self.stream + (REFINEMENT_KEY,)
            self._refinement = Generator(Philox(SeedSequence(self.seed, spawn_key=key)))
        return self._refinement

    def __repr__(self) -> str:
        return f"NoisePath(seed={self.seed}, stream={self.stream}, coarsen={self.coarsen})"


def draw_batch(paths: Sequence[NoisePath], n_steps: int) -> np.ndarray:
    """Stack the next n_steps rows of every path: shape (n_steps, B, p)."""
    return np.stack([path.normals(n_steps) for path in paths], axis=1)


def bridge_increments(total: np.ndarray, dt: float, n_sub: int, rng: Generator) -> np.ndarray:
    """Split a Brownian increment over dt into n_sub conditional increments.

    The pieces are i.i.d. N(0, dt / n_sub) conditioned on summing to total.

    Args:
        total: Increment over the whole step, shape (p,)
        dt: Step length
        n_sub: Number of equal substeps
        rng: Refinement generator

    Returns:
        Array of shape (n_sub, p) whose rows sum to total
    """
    xi = rng.standard_normal((n_sub, total.shape[-1]))
    return total / n_sub + math.sqrt(dt / n_sub) * (xi - xi.mean(axis=0))


def shared_noise(seed: int, p: int, stream: Tuple[int, ...], factors: Sequence[int]) -> Tuple[NoisePath, ...]:
    """Paths that follow one Brownian motion at several step multiples."""
    return tuple(NoisePath(seed, p, stream, coarsen=f) for f in factors)
