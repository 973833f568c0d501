"""Discrete-grid l1 oracle for the atomic norm.

Restricting the atoms to the ``N x N`` grid ``(a/N, b/N)`` turns atomic norm
minimization into complex basis pursuit::

    minimize ||c||_1   subject to   Phi_T c = x_T

solved here by ADMM with an exact projection onto the affine set. Every
answer carries a certified bracket: the projected iterate is feasible, so
its l1 norm is an upper bound, and a rescaled multiplier gives a dual
feasible point whose objective is a lower bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .certificate import build_unweighted, solve_certificate, observed_vector
from .signal_model import SampleSet, atom_matrix

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 50_000
RELAXATION = 1.6


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True)
class GridProblem:
    """Basis pursuit over the ``N x N`` frequency grid, data observed on ``samples``."""

    n: int
    N: int
    samples: SampleSet
    x: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.N < self.n:
            raise ValueError(f"grid size {self.N} below n = {self.n}")
        if self.samples.n != self.n:
            raise ValueError("sample set dimension does not match n")
        object.__setattr__(self, "x", observed_vector(self.x, self.samples))

    @classmethod
    def create(cls, x_observed, samples: SampleSet, N: int) -> "GridProblem":
        return cls(samples.n, N, samples, x_observed)

    @cached_property
    def grid(self) -> np.ndarray:
        """Grid frequencies, one row ``(a/N, b/N)`` per dictionary column."""
        a, b = np.meshgrid(np.arange(self.N), np.arange(self.N), indexing="ij")
        return np.stack([a.ravel(), b.ravel()], axis=1) / self.N

    @cached_property
    def dictionary(self) -> np.ndarray:
        """Unit-norm atoms restricted to the sample set, ``|T| x N^2``."""
        return atom_matrix(self.grid, self.n)[self.samples.flat]

    @property
    def observed(self) -> np.ndarray:
        return self.x[self.samples.flat]


@dataclass(frozen=True)
class GridSolution:
    coefficients: np.ndarray
    objective: float
    lower_bound: float
    iterations: int

    @property
    def gap(self) -> float:
        return self.objective - self.lower_bound


def _soft(v: np.ndarray, t: float) -> np.ndarray:
    mag = np.abs(v)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(mag > t, 1.0 - t / mag, 0.0)
    return v * scale


def solve_grid_l1(problem: GridProblem, tol: float = DEFAULT_TOL,
                  max_iter: int = DEFAULT_MAX_ITER) -> GridSolution:
    """Certified basis pursuit solve.

    Stops once the upper and lower bounds agree to ``tol * max(1, objective)``.
    Raises :class:`OracleError` when that does not happen within ``max_iter``
    iterations.
    """
    Phi = problem.dictionary
    xT = problem.observed
    scale = np.linalg.norm(xT)
    if scale == 0:
        return GridSolution(np.zeros(Phi.shape[1], dtype=complex), 0.0, 0.0, 0)

    gram = sla.cho_factor(Phi @ Phi.conj().T, lower=True)

    def project(v):
        return v - Phi.conj().T @ sla.cho_solve(gram, Phi @ v - xT)

    def dual_bound(sub):
        # least-squares z with Phi^H z ~ sub, shrunk into the dual unit ball
        z = sla.cho_solve(gram, Phi @ sub)
        z = z / max(1.0, float(np.abs(Phi.conj().T @ z).max()))
        return float(np.vdot(z, xT).real)

    # rho ~ 1/|c|; the least-norm solution has size |x| / ||Phi||
    rho = np.linalg.norm(Phi, 2) / scale
    u = project(np.zeros(Phi.shape[1], dtype=complex))
    lam = np.zeros_like(u)
    best_lo, best_hi, best_c = -np.inf, np.inf, u
    for it in range(1, max_iter + 1):
        c = project(u - lam)
        relaxed = RELAXATION * c + (1.0 - RELAXATION) * u
        u_old = u
        u = _soft(relaxed + lam, 1.0 / rho)
        lam = lam + relaxed - u
        if it % 10 and it != max_iter:
            continue
        # residual balancing; lam is scaled by 1/rho so it rescales too
        r, s = np.linalg.norm(c - u), rho * np.linalg.norm(u - u_old)
        if r > 10.0 * s:
            rho, lam = 2.0 * rho, lam / 2.0
        elif s > 10.0 * r:
            rho, lam = rho / 2.0, 2.0 * lam
        hi = float(np.abs(c).sum())
        if hi < best_hi:
            best_hi, best_c = hi, c
        best_lo = max(best_lo, dual_bound(rho * lam))
        if best_hi - best_lo <= tol * max(1.0, best_hi):
            return GridSolution(best_c, best_hi, best_lo, it)
    raise OracleError(f"grid l1 gap {best_hi - best_lo:.3e} after {max_iter} iterations")


@dataclass(frozen=True)
class Bracket:
    lower: float
    upper: float
    grid_objectives: dict[int, float]


def atomic_norm_bracket(x_observed, samples: SampleSet, refinements: int = 3,
                        tol: float = DEFAULT_TOL) -> Bracket:
    """Lower bound from the certificate program, upper bounds from grids ``n * 2^j``."""
    if refinements < 1:
        raise ValueError("refinements must be at least 1")
    n = samples.n
    x = observed_vector(x_observed, samples)
    if not np.any(x):
        return Bracket(0.0, 0.0, {n * 2 ** j: 0.0 for j in range(refinements)})
    objectives = {}
    for j in range(refinements):
        N = n * 2 ** j
        objectives[N] = solve_grid_l1(GridProblem(n, N, samples, x), tol).objective
    lower = solve_certificate(build_unweighted(x, samples)).objective
    return Bracket(lower, min(objectives.values()), objectives)
