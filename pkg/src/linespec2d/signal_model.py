"""2-D exponential atoms, signal synthesis and the uniform sampling operator.

Data are flattened with the first frequency axis outermost: the sample at
index ``(k1, k2)`` of the ``n x n`` grid sits at position ``k1 * n + k2``, so
that ``atom2d(f) = kron(atom1d(f1), atom1d(f2))`` and the flattened vector is
the row-major stacking of the data matrix.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np


@dataclass(frozen=True, order=True)
class Frequency2D:
    """Point on the unit torus; coordinates are reduced modulo 1."""

    f1: float
    f2: float

    def __post_init__(self):
        object.__setattr__(self, "f1", _wrap(self.f1))
        object.__setattr__(self, "f2", _wrap(self.f2))

    def as_array(self) -> np.ndarray:
        return np.array([self.f1, self.f2])

    def distance(self, other: "Frequency2D") -> float:
        return torus_distance(self, other)


def _wrap(f: float) -> float:
    f = float(f) % 1.0
    # float rounding can give exactly 1.0 for tiny negative inputs
    return 0.0 if f >= 1.0 else f


def torus_distance(a: Frequency2D, b: Frequency2D) -> float:
    """Euclidean distance on the unit torus."""
    d = np.abs(a.as_array() - b.as_array())
    d = np.minimum(d, 1.0 - d)
    return float(np.hypot(d[0], d[1]))


@dataclass(frozen=True)
class SpectralSignal:
    """Sparse mixture of 2-D complex exponentials on an ``n x n`` grid."""

    n: int
    components: tuple[tuple[Frequency2D, complex], ...]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("grid dimension n must be positive")
        comps = tuple((f if isinstance(f, Frequency2D) else Frequency2D(*f), complex(d))
                      for f, d in self.components)
        if not 1 <= len(comps) <= self.n ** 2:
            raise ValueError(f"component count must be in [1, n^2], got {len(comps)}")
        if any(d == 0 for _, d in comps):
            raise ValueError("amplitudes must be nonzero")
        object.__setattr__(self, "components", comps)

    @property
    def r(self) -> int:
        return len(self.components)

    @property
    def frequencies(self) -> list[Frequency2D]:
        return [f for f, _ in self.components]

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([d for _, d in self.components])

    def conjugate(self) -> "SpectralSignal":
        return SpectralSignal(self.n, tuple((Frequency2D(-f.f1, -f.f2), np.conj(d))
                                            for f, d in self.components))

    def to_json(self) -> dict:
        return {"n": self.n, "components": [
            {"f1": f.f1, "f2": f.f2, "re": d.real, "im": d.imag} for f, d in self.components]}

    @classmethod
    def from_json(cls, obj: Mapping) -> "SpectralSignal":
        comps = tuple((Frequency2D(c["f1"], c["f2"]), complex(c["re"], c["im"]))
                      for c in obj["components"])
        return cls(int(obj["n"]), comps)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


@dataclass(frozen=True)
class SampleSet:
    """Observed 2-D indices ``(k1, k2)`` of the ``n x n`` grid."""

    n: int
    indices: tuple[tuple[int, int], ...]

    def __post_init__(self):
        idx = tuple((int(a), int(b)) for a, b in self.indices)
        if not idx:
            raise ValueError("sample set must be nonempty")
        if len(set(idx)) != len(idx):
            raise ValueError("sample indices must be unique")
        for a, b in idx:
            if not (0 <= a < self.n and 0 <= b < self.n):
                raise ValueError(f"index {(a, b)} outside the {self.n}x{self.n} grid")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def full(cls, n: int) -> "SampleSet":
        return cls(n, tuple((a, b) for a in range(n) for b in range(n)))

    @classmethod
    def from_flat(cls, n: int, flat: Iterable[int]) -> "SampleSet":
        return cls(n, tuple(divmod(int(i), n) for i in flat))

    @property
    def flat(self) -> np.ndarray:
        return np.array([a * self.n + b for a, b in self.indices], dtype=np.int64)

    @property
    def mask(self) -> np.ndarray:
        m = np.zeros(self.n ** 2, dtype=bool)
        m[self.flat] = True
        return m

    def __len__(self) -> int:
        return len(self.indices)


def atom1d(f: float, n: int) -> np.ndarray:
    """Unit-norm 1-D atom ``exp(2j*pi*f*m) / sqrt(n)``, ``m = 0..n-1``."""
    if n < 1:
        raise ValueError("n must be positive")
    return np.exp(2j * np.pi * f * np.arange(n)) / np.sqrt(n)


def atom2d(f: Frequency2D | tuple[float, float], n: int) -> np.ndarray:
    f1, f2 = (f.f1, f.f2) if isinstance(f, Frequency2D) else f
    return np.kron(atom1d(f1, n), atom1d(f2, n))


def atom_matrix(freqs, n: int) -> np.ndarray:
    """Columns are ``atom2d(f, n)`` for each frequency in ``freqs``."""
    F = np.asarray([(f.f1, f.f2) if isinstance(f, Frequency2D) else f for f in freqs],
                   dtype=float).reshape(-1, 2)
    m = np.arange(n)
    a1 = np.exp(2j * np.pi * np.outer(m, F[:, 0]))
    a2 = np.exp(2j * np.pi * np.outer(m, F[:, 1]))
    return (a1[:, None, :] * a2[None, :, :]).reshape(n * n, -1) / n


def synthesize(signal: SpectralSignal) -> np.ndarray:
    """Flattened samples ``sum_i d_i c(f_i)`` of length ``n^2``."""
    return atom_matrix(signal.frequencies, signal.n) @ signal.amplitudes


def synthesize_matrix(signal: SpectralSignal) -> np.ndarray:
    """Data matrix ``Y D Z^T``; its row-major flattening equals :func:`synthesize`."""
    n = signal.n
    Y = np.stack([atom1d(f.f1, n) for f in signal.frequencies], axis=1)
    Z = np.stack([atom1d(f.f2, n) for f in signal.frequencies], axis=1)
    return Y @ np.diag(signal.amplitudes) @ Z.T


def sample(x: np.ndarray, samples: SampleSet) -> dict[tuple[int, int], complex]:
    """Observed entries of the flattened signal ``x`` keyed by 2-D index."""
    x = np.asarray(x)
    if x.shape != (samples.n ** 2,):
        raise ValueError(f"signal length {x.shape} does not match n^2 = {samples.n ** 2}")
    return {k: complex(x[i]) for k, i in zip(samples.indices, samples.flat)}


def scatter(observed: Mapping[tuple[int, int], complex], n: int) -> np.ndarray:
    """Inverse of :func:`sample`: unobserved entries become zero."""
    x = np.zeros(n * n, dtype=complex)
    for (a, b), v in observed.items():
        if not (0 <= a < n and 0 <= b < n):
            raise ValueError(f"index {(a, b)} outside the grid")
        x[a * n + b] = v
    return x
