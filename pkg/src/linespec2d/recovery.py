"""Dual polynomial evaluation, peak localization, amplitude fitting and scoring.

The dual polynomial of a certificate ``q`` is ``Q(f) = <q, c(f)>``, i.e.
``(1/n) sum_k q_k exp(-2j pi f.k)``; on a uniform ``R x R`` grid this is one
zero-padded 2-D FFT.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .certificate import DualCertificate, Family
from .signal_model import Frequency2D, SampleSet, SpectralSignal, atom_matrix, scatter
from .signal_model import torus_distance

DEFAULT_RESOLUTION = 256
DEFAULT_EPS = 1e-3
DEFAULT_RADIUS = 1e-2
COND_LIMIT = 1e12
REFINE_ROUNDS = 4


class RankDeficientError(ValueError):
    def __init__(self, condition: float):
        super().__init__(f"atom matrix is rank deficient (condition number {condition:.3e})")
        self.condition = condition


@dataclass(frozen=True)
class DualPolynomialGrid:
    """``values[a, b] = Q(a / R, b / R)`` together with the coefficients ``q``."""

    resolution: int
    values: np.ndarray
    q: np.ndarray
    n: int

    @property
    def axis(self) -> np.ndarray:
        return np.arange(self.resolution) / self.resolution

    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)

    def at(self, f1, f2) -> np.ndarray:
        """Direct (non-FFT) evaluation at arbitrary frequencies."""
        return dual_poly_direct(self.q, self.n, f1, f2)

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["f1", "f2", "re", "im", "abs"])
        ax = self.axis
        for a in range(self.resolution):
            for b in range(self.resolution):
                v = self.values[a, b]
                w.writerow([repr(float(ax[a])), repr(float(ax[b])), repr(float(v.real)),
                             repr(float(v.imag)), repr(float(abs(v)))])

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def _coefficients(cert) -> tuple[np.ndarray, int]:
    if isinstance(cert, DualCertificate):
        return np.asarray(cert.q, dtype=complex), cert.n
    q = np.asarray(cert, dtype=complex)
    n = int(round(np.sqrt(q.size)))
    if n * n != q.size:
        raise ValueError("coefficient vector length must be a perfect square")
    return q.ravel(), n


def dual_poly_direct(q, n: int, f1, f2) -> np.ndarray:
    """``<q, c(f)>`` by explicit summation; ``f1`` and ``f2`` broadcast together."""
    f1, f2 = np.broadcast_arrays(np.asarray(f1, dtype=float), np.asarray(f2, dtype=float))
    A = atom_matrix(np.stack([f1.ravel(), f2.ravel()], axis=1), n)
    return (A.conj().T @ np.asarray(q, dtype=complex)).reshape(f1.shape)


def eval_dual_poly(cert, resolution: int = DEFAULT_RESOLUTION) -> DualPolynomialGrid:
    """Sample ``Q`` on the uniform ``resolution x resolution`` grid of the torus.

    ``cert`` is a :class:`DualCertificate` or a flat length ``n^2`` vector.
    """
    q, n = _coefficients(cert)
    if resolution < 4 * n:
        raise ValueError(f"resolution {resolution} below 4n = {4 * n}")
    values = np.fft.fft2(q.reshape(n, n), s=(resolution, resolution)) / n
    return DualPolynomialGrid(resolution, values, q, n)


# ---------------------------------------------------------------------------
# Peaks


def level_at(f1, f2, families: Sequence[Family] | None = None) -> np.ndarray:
    """Modulus level certified at ``f``: the smallest weight whose box covers it.

    Points outside every box get ``inf``; with no families the level is 1.
    """
    f1, f2 = np.broadcast_arrays(np.asarray(f1, dtype=float), np.asarray(f2, dtype=float))
    if families is None:
        return np.ones(f1.shape)
    out = np.full(f1.shape, np.inf)
    for fam in families:
        inside = (np.ones(f1.shape, dtype=bool) if fam.box is None
                  else fam.box.contains_cosine(f1, f2))
        out = np.where(inside, np.minimum(out, fam.weight), out)
    return out


def _parabola_step(grid, f1, f2, h):
    def L(u, v):
        with np.errstate(divide="ignore"):
            return np.log(np.abs(grid.at(u % 1.0, v % 1.0)))

    l0 = L(f1, f2)
    off1 = _parabola_offset(L(f1 - h, f2), l0, L(f1 + h, f2))
    off2 = _parabola_offset(L(f1, f2 - h), l0, L(f1, f2 + h))
    return (f1 + off1 * h) % 1.0, (f2 + off2 * h) % 1.0


def _parabola_offset(lm: np.ndarray, l0: np.ndarray, lp: np.ndarray) -> np.ndarray:
    den = lm - 2.0 * l0 + lp
    with np.errstate(divide="ignore", invalid="ignore"):
        off = np.where(den < 0, 0.5 * (lm - lp) / den, 0.0)
    return np.clip(np.nan_to_num(off), -0.5, 0.5)


def find_peaks(grid: DualPolynomialGrid, families: Sequence[Family] | None = None,
               eps: float = DEFAULT_EPS) -> list[Frequency2D]:
    """Frequencies where ``|Q| / level`` is a local maximum reaching ``1 - eps``.

    Grid maxima are refined by separable parabola fits through the
    log-magnitude at ``f`` and ``f +- h`` along each axis, repeated with the
    stencil ``h`` shrinking from one cell by a factor 4 per round. Each move
    is re-evaluated directly and kept only if it does not lower the ratio.
    Peaks within one cell of a larger one are dropped.
    """
    R = grid.resolution
    ax = grid.axis
    F1, F2 = np.meshgrid(ax, ax, indexing="ij")
    mag = grid.magnitude()
    ratio = mag / level_at(F1, F2, families)

    is_max = ratio > 0
    for d1 in (-1, 0, 1):
        for d2 in (-1, 0, 1):
            if d1 or d2:
                nb = np.roll(ratio, (d1, d2), axis=(0, 1))
                # strict on one half of the neighbourhood so plateaus yield one point
                is_max &= (ratio > nb) if (d1, d2) > (0, 0) else (ratio >= nb)
    # grid points sit up to half a cell from the true peak, so prefilter loosely
    cand = np.argwhere(is_max & (ratio >= 1.0 - 10.0 * eps))
    if not len(cand):
        return []

    a, b = cand[:, 0], cand[:, 1]
    f1, f2 = ax[a], ax[b]
    score = ratio[a, b]
    h = 1.0 / R
    for _ in range(REFINE_ROUNDS):
        r1, r2 = _parabola_step(grid, f1, f2, h)
        refined = np.abs(grid.at(r1, r2)) / level_at(r1, r2, families)
        better = refined >= score
        f1 = np.where(better, r1, f1)
        f2 = np.where(better, r2, f2)
        score = np.where(better, refined, score)
        h /= 4.0

    keep = score >= 1.0 - eps
    f1, f2, score = f1[keep], f2[keep], score[keep]
    order = np.argsort(-score, kind="stable")
    peaks: list[Frequency2D] = []
    for i in order:
        p = Frequency2D(f1[i], f2[i])
        if all(_cell_distance(p, o) >= 1.0 / R for o in peaks):
            peaks.append(p)
    return peaks


def _cell_distance(a: Frequency2D, b: Frequency2D) -> float:
    d = np.abs(a.as_array() - b.as_array())
    return float(np.minimum(d, 1.0 - d).max())


# ---------------------------------------------------------------------------
# Amplitudes and scoring


@dataclass(frozen=True)
class AmplitudeFit:
    amplitudes: np.ndarray
    residual: float
    condition: float


def recover_amplitudes(freqs: Sequence[Frequency2D], x_observed, samples: SampleSet,
                       strict: bool = True) -> AmplitudeFit:
    """Least-squares amplitudes of atoms at ``freqs`` fitted on the sample set.

    ``residual`` is the 2-norm misfit on the observed entries. With
    ``strict``, more frequencies than samples or a condition number above
    ``COND_LIMIT`` is an error; otherwise the minimum-norm fit is returned.
    """
    n = samples.n
    if strict and len(freqs) > len(samples):
        raise ValueError(f"{len(freqs)} frequencies but only {len(samples)} samples")
    x = scatter(x_observed, n) if isinstance(x_observed, dict) else np.asarray(x_observed)
    if x.shape != (n * n,):
        raise ValueError(f"expected {n * n} samples")
    obs = x[samples.flat]
    if not len(freqs):
        return AmplitudeFit(np.zeros(0, dtype=complex), float(np.linalg.norm(obs)), 1.0)
    A = atom_matrix(freqs, n)[samples.flat]
    sv = np.linalg.svd(A, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if len(freqs) <= len(samples) and sv[-1] > 0 else np.inf
    if strict and cond > COND_LIMIT:
        raise RankDeficientError(cond)
    d, *_ = np.linalg.lstsq(A, obs, rcond=None)
    return AmplitudeFit(d, float(np.linalg.norm(A @ d - obs)), cond)


@dataclass(frozen=True)
class RecoveryResult:
    """``errors[i]`` is the distance from true component ``i`` to its match (inf if none)."""

    estimated: SpectralSignal | None
    errors: tuple[float, ...]
    matched: tuple[bool, ...]
    success: bool


def match(true_freqs: Sequence[Frequency2D], est_freqs: Sequence[Frequency2D],
          radius: float) -> list[int | None]:
    """Greedy one-to-one assignment by increasing torus distance within ``radius``."""
    pairs = sorted((torus_distance(t, e), i, j)
                   for i, t in enumerate(true_freqs) for j, e in enumerate(est_freqs))
    out: list[int | None] = [None] * len(true_freqs)
    used = set()
    for dist, i, j in pairs:
        if dist > radius:
            break
        if out[i] is None and j not in used:
            out[i] = j
            used.add(j)
    return out


def score(true: SpectralSignal, estimated: SpectralSignal | None,
          radius: float = DEFAULT_RADIUS) -> RecoveryResult:
    est = estimated.frequencies if estimated is not None else []
    return replace(score_frequencies(true, est, radius), estimated=estimated)


def score_frequencies(true: SpectralSignal, est: Sequence[Frequency2D],
                      radius: float = DEFAULT_RADIUS) -> RecoveryResult:
    """Frequency-only scoring, usable when there are too many peaks to fit amplitudes."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    assign = match(true.frequencies, est, radius)
    errors = tuple(torus_distance(t, est[j]) if j is not None else np.inf
                   for t, j in zip(true.frequencies, assign))
    matched = tuple(j is not None for j in assign)
    return RecoveryResult(None, errors, matched, all(matched) and len(est) == true.r)


def recover(cert: DualCertificate, x_observed, samples: SampleSet,
            families: Sequence[Family] | None = None, resolution: int = DEFAULT_RESOLUTION,
            eps: float = DEFAULT_EPS) -> SpectralSignal | None:
    """Peaks of the certificate plus least-squares amplitudes; None if no peak.

    More peaks than observed samples cannot be fitted and raise ValueError.
    """
    peaks = find_peaks(eval_dual_poly(cert, resolution), families, eps)
    if not peaks:
        return None
    if len(peaks) > len(samples):
        raise ValueError(f"{len(peaks)} peaks exceed the {len(samples)} observed samples")
    fit = recover_amplitudes(peaks, x_observed, samples, strict=False)
    comps = tuple((f, d if d != 0 else 1e-300) for f, d in zip(peaks, fit.amplitudes))
    return SpectralSignal(samples.n, comps)
