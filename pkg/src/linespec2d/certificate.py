"""Dual atomic-norm programs and their certificates.

The unweighted program maximizes ``Re <x, q>`` over certificates ``q``
(zero off the sample set) whose dual polynomial ``<q, c(f)>`` has modulus at
most one everywhere. The weighted program replaces that bound with a weight
``w_i`` on each prior subband and certifies it with one Gram family per box.

Every family ``i`` owns a PSD block ``[[G0, q/(n w_i)], [q^H/(n w_i), 1]]``
of side ``n^2 + 1``; the factor ``1/n`` accounts for the unit-norm atoms, so
the optimal value equals the (weighted) atomic norm of the observed data.
The shared certificate lives in the border of family 0's block and the other
borders are tied to it by linear equalities.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import sdp
from .signal_model import SampleSet, scatter
from .trig import (FoldedSubband, RawSubband, complement_boxes, fold_subband,
                   gram_functional_terms, halfspace)


@dataclass(frozen=True)
class SubbandPrior:
    """Frequency rectangle with a relative probability of holding components.

    ``complement=True`` turns the prior into "everywhere outside ``raw``".
    """

    raw: RawSubband
    probability: float
    complement: bool = False

    def __post_init__(self):
        if not self.probability > 0:
            raise ValueError("prior probability must be positive")

    @classmethod
    def from_weight(cls, raw: RawSubband, weight: float, complement: bool = False):
        if not weight > 0:
            raise ValueError("weight must be positive")
        return cls(raw, 1.0 / weight, complement)

    @property
    def weight(self) -> float:
        return 1.0 / self.probability

    def boxes(self, covering: bool = False) -> list[FoldedSubband]:
        band = fold_subband(self.raw, covering)
        if not self.complement:
            return [band]
        boxes = complement_boxes(band)
        if not boxes:
            raise ValueError("complement of a band covering the whole torus is empty")
        return boxes

    def contains(self, f1, f2):
        inside = self.raw.contains(f1, f2)
        return ~inside if self.complement else inside


def prior_complement(priors: Sequence[SubbandPrior], weight: float) -> list[SubbandPrior]:
    """Append the complement of a single rectangular prior with its own weight."""
    if len(priors) != 1 or priors[0].complement:
        raise ValueError("complement needs exactly one rectangular prior")
    (band,) = priors
    comp = SubbandPrior.from_weight(band.raw, weight, complement=True)
    comp.boxes()
    return [band, comp]


@dataclass(frozen=True)
class Family:
    """One Gram family: a bound ``weight`` certified on ``box`` (None: everywhere)."""

    weight: float
    box: FoldedSubband | None


@dataclass(frozen=True)
class CertificateProgram:
    """An assembled dual program plus what is needed to read ``q`` back."""

    problem: sdp.SdpProblem
    n: int
    samples: SampleSet
    x: np.ndarray
    families: tuple[Family, ...]


@dataclass(frozen=True)
class DualCertificate:
    n: int
    q: np.ndarray
    objective: float
    residuals: sdp.Residuals | None = None
    iterations: int = 0
    status: str = "optimal"

    def to_json(self) -> dict:
        return {"n": self.n, "q": [{"re": v.real, "im": v.imag} for v in self.q],
                "objective": self.objective}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    @classmethod
    def from_json(cls, obj: Mapping) -> "DualCertificate":
        q = np.array([complex(v["re"], v["im"]) for v in obj["q"]])
        return cls(int(obj["n"]), q, float(obj["objective"]))


class CertificateError(RuntimeError):
    pass


def observed_vector(x_observed, samples: SampleSet) -> np.ndarray:
    n = samples.n
    if isinstance(x_observed, Mapping):
        if set(x_observed) != set(samples.indices):
            raise ValueError("observations must be given exactly on the sample set")
        x = scatter(x_observed, n)
    else:
        x = np.asarray(x_observed, dtype=complex)
        if x.shape != (n * n,):
            raise ValueError(f"expected {n * n} samples, got {x.shape}")
    out = np.zeros(n * n, dtype=complex)
    out[samples.flat] = x[samples.flat]
    return out


def _gram_rows(n: int, box: FoldedSubband | None,
               blocks: dict[int, int]) -> tuple[sdp.Terms, np.ndarray]:
    """Real equality rows ``G_k = delta_k`` for ``k`` in the halfspace.

    ``blocks`` maps functional slots to problem blocks; slots without a
    block are left out.
    """
    idx, blk, row, col, coeff, rhs = [], [], [], [], [], []
    r = 0
    for k in halfspace(n):
        parts = gram_functional_terms(k, box, n)
        kinds = [(1.0, 1.0 if k == (0, 0) else 0.0)]
        if k != (0, 0):
            kinds.append((1j, 0.0))
        for unit, value in kinds:
            for slot, rr, cc, ww in parts:
                if slot not in blocks:
                    continue
                idx.append(np.full(len(rr), r))
                blk.append(np.full(len(rr), blocks[slot]))
                row.append(rr)
                col.append(cc)
                coeff.append(unit * ww)
            rhs.append(value)
            r += 1
    cat = np.concatenate
    return sdp.Terms(cat(idx), cat(blk), cat(row), cat(col), cat(coeff).astype(complex)), np.array(rhs)


def build_program(x_observed, samples: SampleSet, families: Sequence[Family]) -> CertificateProgram:
    """Assemble the dual program for an arbitrary list of Gram families."""
    if not families:
        raise ValueError("at least one family is required")
    n = samples.n
    x = observed_vector(x_observed, samples)
    N = n * n
    mask = samples.mask
    b = sdp.ProblemBuilder()
    big = []
    for i, fam in enumerate(families):
        big_i = b.add_block(f"B{i}", N + 1)
        blocks = {0: big_i}
        if fam.box is not None and n > 1:
            for l in fam.box.active_multipliers():
                blocks[l] = b.add_block(f"G{i}_{l}", (n - 1) ** 2)
        terms, rhs = _gram_rows(n, fam.box, blocks)
        b.add_equalities(terms, rhs)
        b.fix(big_i, N, N, 1.0)
        for t in np.flatnonzero(~mask):
            b.fix(big_i, t, N, 0.0)
        big.append(big_i)

    w0 = families[0].weight
    for i in range(1, len(families)):
        wi = families[i].weight
        for t in samples.flat:
            for unit in (1.0, 1j):
                b.add_equality([big[i], big[0]], [t, t], [N, N], [unit * wi, -unit * w0], 0.0)

    obs = samples.flat
    b.add_objective(big[0], obs, np.full(len(obs), N), n * w0 * x[obs])
    return CertificateProgram(b.build(), n, samples, x, tuple(families))


def build_unweighted(x_observed, samples: SampleSet) -> CertificateProgram:
    if len(samples) == 0:
        raise ValueError("empty observation set")
    return build_program(x_observed, samples, [Family(1.0, None)])


def families_from_priors(priors: Sequence[SubbandPrior], covering: bool = False) -> list[Family]:
    if not priors:
        raise ValueError("at least one prior is required")
    out = []
    for p in priors:
        out += [Family(p.weight, box) for box in p.boxes(covering)]
    return out


def build_weighted(x_observed, samples: SampleSet, priors: Sequence[SubbandPrior],
                   covering: bool = False) -> CertificateProgram:
    return build_program(x_observed, samples, families_from_priors(priors, covering))


def extract_certificate(program: CertificateProgram, solution: sdp.SdpSolution) -> DualCertificate:
    """Read ``q`` from the first family's border and revalidate the objective."""
    if not solution.optimal:
        raise CertificateError(f"solver status is {solution.status.value}")
    n = program.n
    N = n * n
    fam0 = program.families[0]
    border = solution.blocks[0][:N, N]
    q = n * fam0.weight * border
    q = np.where(program.samples.mask, q, 0.0)
    objective = float(np.vdot(q, program.x).real)
    if abs(objective - solution.objective) > 1e-9 * max(1.0, abs(objective)):
        raise CertificateError(
            f"objective mismatch: solver {solution.objective!r} vs recomputed {objective!r}")
    return DualCertificate(n, q, objective, solution.residuals, solution.iterations,
                           solution.status.value)


def solve_certificate(program: CertificateProgram, tol: float = sdp.DEFAULT_TOL,
                      max_iter: int = sdp.DEFAULT_MAX_ITER) -> DualCertificate:
    return extract_certificate(program, sdp.solve(program.problem, tol, max_iter))
