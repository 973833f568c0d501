"""Toeplitz selectors, halfspace enumeration, subband folding and the Gram
functionals that certify a bound on a 2-D trigonometric polynomial over a
frequency box.

Lattice indices ``k = (k1, k2)`` live on ``{1-n..n-1}^2``; ``k1`` shifts the
first frequency axis, which is the outer Kronecker factor of the flattened
data (see :mod:`linespec2d.signal_model`).

A box ``[fL1, fH1] x [fL2, fH2]`` with all bounds in ``[0, 0.5]`` is described
by four nonnegative multipliers::

    cos w1 - cos wH1 >= 0      cos wL1 - cos w1 >= 0
    cos w2 - cos wH2 >= 0      cos wL2 - cos w2 >= 0

Each multiplier ``center + shift * (z + 1/z)`` has ``center = -+cos`` and
``shift = +-1/2``. Because only cosines enter, a box constrains all four
mirror images ``(+-f1, +-f2)`` at once.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


class FoldingWarning(UserWarning):
    """The folded band does not cover the cosine image of the raw band."""


@dataclass(frozen=True)
class RawSubband:
    """Rectangle ``[fl1, fh1] x [fl2, fh2]`` of the unit square."""

    fl1: float
    fh1: float
    fl2: float
    fh2: float

    def __post_init__(self):
        for lo, hi in ((self.fl1, self.fh1), (self.fl2, self.fh2)):
            if not (0.0 <= lo <= 1.0 and 0.0 <= hi <= 1.0):
                raise ValueError(f"raw band bounds must lie in [0, 1], got [{lo}, {hi}]")
            if lo > hi:
                raise ValueError(f"inverted band [{lo}, {hi}]")

    def contains(self, f1, f2, tol: float = 1e-12):
        """Vectorized membership test for frequencies already reduced mod 1."""
        f1 = np.asarray(f1)
        f2 = np.asarray(f2)
        return ((f1 >= self.fl1 - tol) & (f1 <= self.fh1 + tol)
                & (f2 >= self.fl2 - tol) & (f2 <= self.fh2 + tol))

    @property
    def area(self) -> float:
        return (self.fh1 - self.fl1) * (self.fh2 - self.fl2)


@dataclass(frozen=True)
class FoldedSubband:
    """Box of folded frequencies, every bound in ``[0, 0.5]``."""

    fl1: float
    fh1: float
    fl2: float
    fh2: float

    def __post_init__(self):
        for lo, hi in ((self.fl1, self.fh1), (self.fl2, self.fh2)):
            if not (0.0 <= lo <= 0.5 and 0.0 <= hi <= 0.5):
                raise ValueError(f"folded bounds must lie in [0, 0.5], got [{lo}, {hi}]")
            if lo > hi:
                raise ValueError(f"inverted band [{lo}, {hi}]")

    def multipliers(self) -> list[tuple[int, float, float]]:
        """``(axis, center, shift)`` of the four box multipliers, G1..G4 order."""
        cH1, cL1 = math.cos(2 * math.pi * self.fh1), math.cos(2 * math.pi * self.fl1)
        cH2, cL2 = math.cos(2 * math.pi * self.fh2), math.cos(2 * math.pi * self.fl2)
        return [(1, -cH1, 0.5), (1, cL1, -0.5), (2, -cH2, 0.5), (2, cL2, -0.5)]

    def active_multipliers(self) -> list[int]:
        """Slots (1..4) whose multiplier is not nonnegative on the whole circle.

        A bound at 0 or at 0.5 gives ``1 - cos w`` or ``cos w + 1``, which is
        itself a sum of squares and so adds nothing to the Gram certificate.
        """
        trivial = (self.fh1 == 0.5, self.fl1 == 0.0, self.fh2 == 0.5, self.fl2 == 0.0)
        return [slot for slot, t in enumerate(trivial, start=1) if not t]

    def contains_cosine(self, f1, f2, tol: float = 1e-12):
        """Membership of ``(f1, f2)`` in the region the box actually constrains."""
        c1 = np.cos(2 * np.pi * np.asarray(f1))
        c2 = np.cos(2 * np.pi * np.asarray(f2))
        return ((c1 >= math.cos(2 * math.pi * self.fh1) - tol)
                & (c1 <= math.cos(2 * math.pi * self.fl1) + tol)
                & (c2 >= math.cos(2 * math.pi * self.fh2) - tol)
                & (c2 <= math.cos(2 * math.pi * self.fl2) + tol))


def fold_interval(lo: float, hi: float, covering: bool = False) -> tuple[float, float]:
    """Map a raw interval of ``[0, 1]`` onto ``[0, 0.5]``.

    Intervals inside ``[0, 0.5]`` are kept, intervals inside ``(0.5, 1]`` are
    mirrored to ``[1-hi, 1-lo]``. An interval straddling 0.5 becomes
    ``[1-hi, 0.5]``; with ``covering=True`` the lower end is
    ``min(lo, 1-hi)`` so the whole cosine image is kept.
    """
    if lo > hi:
        raise ValueError(f"inverted band [{lo}, {hi}]")
    if hi <= 0.5:
        return lo, hi
    if lo > 0.5:
        return 1.0 - hi, 1.0 - lo
    new_lo = 1.0 - hi
    if lo < new_lo:
        if covering:
            new_lo = lo
        else:
            warnings.warn(f"folding [{lo}, {hi}] to [{new_lo}, 0.5] drops [{lo}, {new_lo})",
                          FoldingWarning, stacklevel=3)
    return new_lo, 0.5


def fold_subband(raw: RawSubband, covering: bool = False) -> FoldedSubband:
    lo1, hi1 = fold_interval(raw.fl1, raw.fh1, covering)
    lo2, hi2 = fold_interval(raw.fl2, raw.fh2, covering)
    return FoldedSubband(lo1, hi1, lo2, hi2)


def complement_boxes(band: FoldedSubband) -> list[FoldedSubband]:
    """Boxes covering the folded square ``[0, 0.5]^2`` outside ``band``.

    Pieces of zero width are skipped; their points belong to the band's
    closure.
    """
    boxes = []
    for lo, hi in ((0.0, band.fl1), (band.fh1, 0.5)):
        if hi > lo:
            boxes.append(FoldedSubband(lo, hi, 0.0, 0.5))
    if band.fh1 > band.fl1:
        for lo, hi in ((0.0, band.fl2), (band.fh2, 0.5)):
            if hi > lo:
                boxes.append(FoldedSubband(band.fl1, band.fh1, lo, hi))
    return boxes


# ---------------------------------------------------------------------------
# Toeplitz selectors


def theta1d(k: int, n: int) -> np.ndarray:
    """``n x n`` matrix with ones where ``col - row == k``."""
    if abs(k) >= n:
        raise ValueError(f"shift {k} out of range for n={n}")
    return np.eye(n, k=k)


def theta2d(k: tuple[int, int], n: int) -> np.ndarray:
    """``theta1d(k1) kron theta1d(k2)``; ``k1`` acts on the outer (first) axis."""
    k1, k2 = k
    return np.kron(theta1d(k1, n), theta1d(k2, n))


@lru_cache(maxsize=None)
def halfspace(n: int) -> tuple[tuple[int, int], ...]:
    """One representative of each pair ``{k, -k}`` of ``{1-n..n-1}^2``.

    ``{(k1, k2): k2 > 0} | {(k1, 0): k1 >= 0}``, ordered by ``k2`` then ``k1``.
    """
    if n < 1:
        raise ValueError("n must be positive")
    out = [(k1, 0) for k1 in range(n)]
    out += [(k1, k2) for k2 in range(1, n) for k1 in range(1 - n, n)]
    return tuple(out)


@lru_cache(maxsize=None)
def selector_entries(a: int, b: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Positions read by ``G -> tr[(theta1d(a) kron theta1d(b)) G]`` on ``m^2``-side G.

    Returns ``(rows, cols)`` so that the trace equals ``G[rows, cols].sum()``;
    empty when either shift is out of range.
    """
    if abs(a) >= m or abs(b) >= m:
        z = np.zeros(0, dtype=np.int64)
        return z, z
    i1 = np.arange(max(0, -a), min(m, m - a))
    i2 = np.arange(max(0, -b), min(m, m - b))
    I1, I2 = np.meshgrid(i1, i2, indexing="ij")
    cols = (I1 * m + I2).ravel()
    rows = ((I1 + a) * m + (I2 + b)).ravel()
    rows.flags.writeable = False
    cols.flags.writeable = False
    return rows, cols


def trace_shift(G: np.ndarray, a: int, b: int, m: int) -> complex:
    rows, cols = selector_entries(a, b, m)
    return complex(G[rows, cols].sum()) if len(rows) else 0j


def _check_gram(G: np.ndarray, n: int) -> None:
    side = (n - 1) ** 2
    if G.shape != (side, side):
        raise ValueError(f"expected a {side}x{side} matrix for n={n}, got {G.shape}")


def op_T(k: tuple[int, int], d0: float, d1: float, G: np.ndarray, n: int) -> complex:
    """``tr[(d1 T(k1-1) + d0 T(k1) + d1 T(k1+1)) kron T(k2) G]`` on ``(n-1)``-size selectors."""
    G = np.asarray(G)
    _check_gram(G, n)
    k1, k2 = k
    m = n - 1
    return (d1 * trace_shift(G, k1 - 1, k2, m) + d0 * trace_shift(G, k1, k2, m)
            + d1 * trace_shift(G, k1 + 1, k2, m))


def op_L(k: tuple[int, int], r0: float, r1: float, G: np.ndarray, n: int) -> complex:
    """As :func:`op_T` with the +-1 shifts on the second axis."""
    G = np.asarray(G)
    _check_gram(G, n)
    k1, k2 = k
    m = n - 1
    return (r1 * trace_shift(G, k1, k2 - 1, m) + r0 * trace_shift(G, k1, k2, m)
            + r1 * trace_shift(G, k1, k2 + 1, m))


def gram_constraint(k: tuple[int, int], band: FoldedSubband, G0, G1, G2, G3, G4,
                    n: int) -> complex:
    """Coefficient ``k`` of ``|psi|^2_G0 + sum_l multiplier_l * |psi'|^2_Gl``."""
    G0 = np.asarray(G0)
    if G0.shape != (n * n, n * n):
        raise ValueError(f"G0 must be {n * n}x{n * n}")
    total = trace_shift(G0, k[0], k[1], n)
    for (axis, center, shift), G in zip(band.multipliers(), (G1, G2, G3, G4)):
        op = op_T if axis == 1 else op_L
        total += op(k, center, shift, np.asarray(G), n)
    return total


def gram_functional_terms(k: tuple[int, int], band: FoldedSubband | None, n: int):
    """Sparse form of :func:`gram_constraint` at lattice index ``k``.

    Returns a list with one ``(slot, rows, cols, weights)`` entry per matrix
    (slot 0 is G0, slots 1..4 the multiplier Grams); the functional equals
    ``sum_slot sum(weights * G_slot[rows, cols])``. With ``band=None`` only
    the G0 part is produced.
    """
    k1, k2 = k
    r, c = selector_entries(k1, k2, n)
    out = [(0, r, c, np.ones(len(r)))]
    if band is None:
        return out
    m = n - 1
    for slot, (axis, center, shift) in enumerate(band.multipliers(), start=1):
        parts_r, parts_c, parts_w = [], [], []
        for delta, w in ((-1, shift), (0, center), (1, shift)):
            if w == 0.0:
                continue
            a, b = (k1 + delta, k2) if axis == 1 else (k1, k2 + delta)
            rr, cc = selector_entries(a, b, m)
            parts_r.append(rr)
            parts_c.append(cc)
            parts_w.append(np.full(len(rr), w))
        if parts_r:
            out.append((slot, np.concatenate(parts_r), np.concatenate(parts_c),
                        np.concatenate(parts_w)))
    return out
