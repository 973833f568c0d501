"""Reproducible random streams for the experiments.

Every stream is a Philox-4x64 counter-based generator whose 128-bit key is
the first 16 bytes of ``SHA-256("<seed>/<trial>/<label>")``; the counter
starts at zero. Only the generator's uniform doubles are consumed
(``random()``: the top 53 bits of one 64-bit output, scaled by ``2**-53``),
and everything else is derived here, so a draw depends on nothing but the
key.

* standard normals: Box-Muller, ``sqrt(-2 ln(1 - u1)) * cos(2 pi u2)``, one
  normal per pair of uniforms;
* chi-square with one degree of freedom: the square of such a normal;
* sampling without replacement: a partial Fisher-Yates shuffle of
  ``0..N-1`` where step ``i`` swaps in position ``i + floor(u * (N - i))``.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream_key(seed: int, trial: int, label: str) -> int:
    digest = hashlib.sha256(f"{int(seed)}/{int(trial)}/{label}".encode()).digest()
    return int.from_bytes(digest[:16], "little")


class Stream:
    """Uniform, normal and permutation draws from one keyed Philox stream."""

    def __init__(self, seed: int, trial: int, label: str):
        self.key = stream_key(seed, trial, label)
        self._gen = np.random.Generator(np.random.Philox(key=self.key))

    def uniform(self, size: int | None = None):
        return self._gen.random(size)

    def normal(self, size: int) -> np.ndarray:
        u = self.uniform(2 * size).reshape(size, 2)
        return np.sqrt(-2.0 * np.log1p(-u[:, 0])) * np.cos(2.0 * np.pi * u[:, 1])

    def chi2_1(self, size: int) -> np.ndarray:
        return self.normal(size) ** 2

    def choose(self, population: int, k: int) -> np.ndarray:
        """``k`` distinct integers from ``range(population)``, in draw order."""
        if not 0 <= k <= population:
            raise ValueError(f"cannot draw {k} of {population} without replacement")
        perm = np.arange(population)
        for i, u in enumerate(self.uniform(k)):
            j = i + int(u * (population - i))
            perm[i], perm[j] = perm[j], perm[i]
        return perm[:k].copy()
