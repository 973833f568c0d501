"""Off-grid two-dimensional line spectral estimation with subband priors.

Frequencies of a sparse 2-D sinusoid mixture are recovered from a random
subset of its ``n x n`` samples by solving a (weighted) atomic norm dual as
a semidefinite program, then reading the peaks of the dual polynomial.
"""

from .signal_model import (Frequency2D, SampleSet, SpectralSignal, atom2d, atom_matrix,
                           sample, synthesize, torus_distance)
from .trig import FoldedSubband, RawSubband, fold_subband
from .sdp import SdpProblem, SdpSolution, Status, solve
from .certificate import (CertificateError, CertificateProgram, DualCertificate, Family,
                          SubbandPrior, build_unweighted, build_weighted, prior_complement,
                          solve_certificate)
from .recovery import (DualPolynomialGrid, RecoveryResult, eval_dual_poly, find_peaks,
                       recover, recover_amplitudes, score)
from .grid_oracle import GridProblem, atomic_norm_bracket, solve_grid_l1

__version__ = "0.1.0"

__all__ = [
    "Frequency2D", "SampleSet", "SpectralSignal", "atom2d", "atom_matrix", "sample",
    "synthesize", "torus_distance", "FoldedSubband", "RawSubband", "fold_subband",
    "SdpProblem", "SdpSolution", "Status", "solve", "CertificateError", "CertificateProgram",
    "DualCertificate", "Family", "SubbandPrior", "build_unweighted", "build_weighted",
    "prior_complement", "solve_certificate", "DualPolynomialGrid", "RecoveryResult",
    "eval_dual_poly", "find_peaks", "recover", "recover_amplitudes", "score", "GridProblem",
    "atomic_norm_bracket", "solve_grid_l1",
]
