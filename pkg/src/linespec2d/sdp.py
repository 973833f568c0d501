"""Dense primal-dual interior-point solver for small complex Hermitian SDPs.

The problems handled here have the form::

    maximize    F(X_1, ..., X_p)
    subject to  a_i(X_1, ..., X_p) = b_i      i = 1..m
                X_j[r, c] = v                  (pinned entries)
                X_j Hermitian PSD

where ``F`` and every ``a_i`` are real-linear functionals of the block
entries. A term ``(block, row, col, coeff)`` of a functional contributes
``Re(conj(coeff) * X[row, col])``, i.e. ``coeff.real * Re X[row, col] +
coeff.imag * Im X[row, col]``.

Internally the problem is put in the standard primal form ``min <C, X>``
s.t. ``<A_i, X> = b_i`` with Hermitian data matrices and solved by a
path-following method with Nesterov-Todd scaling and Mehrotra's
predictor-corrector. The Schur complement is dense and factored by Cholesky.
"""

from __future__ import annotations

import enum
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.linalg import lapack

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 200
STEP_FRACTION = 0.9
REFINE_STEPS = 3


class SdpError(ValueError):
    """Raised for malformed problems or dimension mismatches."""


@dataclass(frozen=True)
class Terms:
    """Sparse real-linear functionals stored in coordinate form.

    ``index[t]`` names the functional that term ``t`` belongs to (always 0 for
    a single functional such as the objective).
    """

    index: np.ndarray
    block: np.ndarray
    row: np.ndarray
    col: np.ndarray
    coeff: np.ndarray

    @classmethod
    def empty(cls) -> "Terms":
        z = np.zeros(0, dtype=np.int64)
        return cls(z, z, z, z, np.zeros(0, dtype=complex))

    @classmethod
    def concat(cls, parts: list["Terms"]) -> "Terms":
        if not parts:
            return cls.empty()
        return cls(*(np.concatenate([getattr(p, f) for p in parts])
                     for f in ("index", "block", "row", "col", "coeff")))

    def __len__(self) -> int:
        return len(self.coeff)


class ProblemBuilder:
    """Incremental assembly of an :class:`SdpProblem`."""

    def __init__(self):
        self._blocks: list[tuple[str, int]] = []
        self._names: dict[str, int] = {}
        self._objective: list[Terms] = []
        self._eq_terms: list[Terms] = []
        self._rhs: list[float] = []
        self._fixed: list[tuple[int, int, int, complex]] = []

    def add_block(self, name: str, size: int) -> int:
        if name in self._names:
            raise SdpError(f"duplicate block name {name!r}")
        if size < 1:
            raise SdpError("block side must be positive")
        self._names[name] = len(self._blocks)
        self._blocks.append((name, int(size)))
        return self._names[name]

    @property
    def n_equalities(self) -> int:
        return len(self._rhs)

    def add_objective(self, block, row, col, coeff):
        row, col, coeff = _as_arrays(row, col, coeff)
        blk = np.full(len(row), block, dtype=np.int64)
        self._objective.append(Terms(np.zeros(len(row), dtype=np.int64), blk, row, col, coeff))

    def add_equality(self, block, row, col, coeff, rhs: float) -> int:
        """Add one equality; ``block`` may be a scalar or a per-term array."""
        row, col, coeff = _as_arrays(row, col, coeff)
        blk = np.broadcast_to(np.asarray(block, dtype=np.int64), row.shape).copy()
        idx = np.full(len(row), len(self._rhs), dtype=np.int64)
        self._eq_terms.append(Terms(idx, blk, row, col, coeff))
        self._rhs.append(float(rhs))
        return len(self._rhs) - 1

    def add_equalities(self, terms: Terms, rhs) -> None:
        """Add a batch of equalities; ``terms.index`` counts from zero."""
        rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
        shifted = Terms(terms.index + len(self._rhs), terms.block, terms.row,
                        terms.col, np.asarray(terms.coeff, dtype=complex))
        self._eq_terms.append(shifted)
        self._rhs.extend(rhs.tolist())

    def fix(self, block: int, row: int, col: int, value: complex) -> None:
        self._fixed.append((int(block), int(row), int(col), complex(value)))

    def build(self) -> "SdpProblem":
        return SdpProblem(
            blocks=tuple(self._blocks),
            objective=Terms.concat(self._objective),
            equalities=Terms.concat(self._eq_terms),
            rhs=np.asarray(self._rhs, dtype=float),
            fixed_entries=tuple(self._fixed),
        )


def _as_arrays(row, col, coeff):
    row = np.atleast_1d(np.asarray(row, dtype=np.int64))
    col = np.atleast_1d(np.asarray(col, dtype=np.int64))
    coeff = np.atleast_1d(np.asarray(coeff, dtype=complex))
    row, col, coeff = np.broadcast_arrays(row, col, coeff)
    return row.copy(), col.copy(), coeff.copy()


@dataclass(frozen=True)
class SdpProblem:
    """Block Hermitian-PSD program with real-linear equality constraints.

    Attributes:
        blocks: ``(name, side)`` per PSD block.
        objective: terms of the functional to maximize.
        equalities: terms of all equality functionals; ``index`` is the row.
        rhs: right-hand side per equality row.
        fixed_entries: ``(block, row, col, value)`` hard pins. Pinning
            ``(r, c)`` implicitly pins ``(c, r)`` to the conjugate.
    """

    blocks: tuple[tuple[str, int], ...]
    objective: Terms
    equalities: Terms
    rhs: np.ndarray
    fixed_entries: tuple[tuple[int, int, int, complex], ...] = ()

    def __post_init__(self):
        if not self.blocks:
            raise SdpError("problem needs at least one block")
        sizes = self.sizes
        for name, t in (("objective", self.objective), ("equalities", self.equalities)):
            if len(t) == 0:
                continue
            if t.block.min() < 0 or t.block.max() >= len(sizes):
                raise SdpError(f"{name} references an undeclared block")
            lim = sizes[t.block]
            if (t.row < 0).any() or (t.col < 0).any() or (t.row >= lim).any() or (t.col >= lim).any():
                raise SdpError(f"{name} references an out-of-range position")
        if len(self.equalities) and self.equalities.index.max() >= len(self.rhs):
            raise SdpError("equality term refers to a missing right-hand side")
        for b, r, c, _ in self.fixed_entries:
            if not (0 <= b < len(sizes) and 0 <= r < sizes[b] and 0 <= c < sizes[b]):
                raise SdpError("fixed entry out of range")

    @property
    def sizes(self) -> np.ndarray:
        return np.array([s for _, s in self.blocks], dtype=np.int64)

    @property
    def n_equalities(self) -> int:
        return len(self.rhs)

    def block_index(self, name: str) -> int:
        for i, (nm, _) in enumerate(self.blocks):
            if nm == name:
                return i
        raise KeyError(name)

    def evaluate(self, terms: Terms, values: list[np.ndarray], n_out: int) -> np.ndarray:
        """Evaluate every functional in ``terms`` at the given block values."""
        out = np.zeros(n_out)
        if len(terms) == 0:
            return out
        x = np.empty(len(terms), dtype=complex)
        for b in np.unique(terms.block):
            sel = terms.block == b
            x[sel] = values[b][terms.row[sel], terms.col[sel]]
        np.add.at(out, terms.index, (np.conj(terms.coeff) * x).real)
        return out

    def objective_value(self, values: list[np.ndarray]) -> float:
        return float(self.evaluate(self.objective, values, 1)[0])

    def dump(self) -> str:
        """Plain-text dump for cross-checking with external solvers.

        Header ``SDP blocks=<b> eqs=<m>``, one ``block <name> <side>`` line
        per block, one ``<eq> <block> <row> <col> <re> <im>`` line per term
        (objective terms use eq index ``obj``, pins use ``fix``), then one
        ``rhs <eq> <value>`` line per equality.
        """
        lines = [f"SDP blocks={len(self.blocks)} eqs={self.n_equalities}"]
        lines += [f"block {name} {side}" for name, side in self.blocks]
        t = self.objective
        for k in range(len(t)):
            lines.append(f"obj {t.block[k]} {t.row[k]} {t.col[k]} "
                         f"{t.coeff[k].real:.17g} {t.coeff[k].imag:.17g}")
        t = self.equalities
        for k in np.argsort(t.index, kind="stable"):
            lines.append(f"{t.index[k]} {t.block[k]} {t.row[k]} {t.col[k]} "
                         f"{t.coeff[k].real:.17g} {t.coeff[k].imag:.17g}")
        for b, r, c, v in self.fixed_entries:
            lines.append(f"fix {b} {r} {c} {v.real:.17g} {v.imag:.17g}")
        lines += [f"rhs {i} {v:.17g}" for i, v in enumerate(self.rhs)]
        return "\n".join(lines) + "\n"


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    MAX_ITERATIONS = "max-iterations"
    NUMERICAL_FAILURE = "numerical-failure"


@dataclass(frozen=True)
class Residuals:
    primal: float
    dual: float
    gap: float

    @property
    def worst(self) -> float:
        return max(self.primal, self.dual, self.gap)


@dataclass(frozen=True)
class SdpSolution:
    """Primal-dual result; residuals are recomputed from the returned values."""

    blocks: list[np.ndarray]
    objective: float
    residuals: Residuals
    status: Status
    iterations: int
    dual_objective: float = float("nan")
    multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    slacks: list[np.ndarray] = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


@dataclass(frozen=True)
class FeasibilityReport:
    equality: float
    fixed: float
    min_eigenvalue: float


def check_feasibility(problem: SdpProblem, blocks: list[np.ndarray]) -> FeasibilityReport:
    """Residuals of candidate block values against ``problem``."""
    sizes = problem.sizes
    if len(blocks) != len(sizes):
        raise SdpError(f"expected {len(sizes)} blocks, got {len(blocks)}")
    for X, s in zip(blocks, sizes):
        if np.shape(X) != (s, s):
            raise SdpError(f"block shape {np.shape(X)} does not match side {s}")
    values = [np.asarray(X, dtype=complex) for X in blocks]
    eq = problem.evaluate(problem.equalities, values, problem.n_equalities) - problem.rhs
    fixed = [abs(values[b][r, c] - v) for b, r, c, v in problem.fixed_entries]
    eig = min(np.linalg.eigvalsh(0.5 * (X + X.conj().T))[0] for X in values)
    return FeasibilityReport(
        equality=float(np.abs(eq).max(initial=0.0)),
        fixed=float(max(fixed, default=0.0)),
        min_eigenvalue=float(eig),
    )


# ---------------------------------------------------------------------------
# Standard-form data


class _StandardForm:
    """Hermitian data matrices per block as sparse rows over the flattened block.

    Row ``j`` of block ``b`` holds the entries of the Hermitian part of
    equality ``rows[b][j]``, so ``<A_j, X> = Re(conj(S_j) . vec X)``.
    """

    def __init__(self, problem: SdpProblem):
        sizes = problem.sizes
        self.sizes = sizes
        terms, rhs = _with_fixed_rows(problem)
        self.m = len(rhs)
        self.rhs = rhs

        self.rows: list[np.ndarray] = []
        self.S: list[sp.csr_matrix] = []
        for b, n in enumerate(sizes):
            sel = terms.block == b
            rows = np.unique(terms.index[sel])
            local = np.searchsorted(rows, terms.index[sel])
            half = 0.5 * terms.coeff[sel]
            r, c = terms.row[sel], terms.col[sel]
            S = sp.coo_matrix(
                (np.concatenate([half, np.conj(half)]),
                 (np.concatenate([local, local]), np.concatenate([r * n + c, c * n + r]))),
                shape=(len(rows), n * n)).tocsr()
            S.sum_duplicates()
            self.rows.append(rows)
            self.S.append(S)

        C = [np.zeros((n, n), dtype=complex) for n in sizes]
        t = problem.objective
        for k in range(len(t)):
            half = 0.5 * t.coeff[k]
            C[t.block[k]][t.row[k], t.col[k]] -= half
            C[t.block[k]][t.col[k], t.row[k]] -= np.conj(half)
        self.C = C

    def apply(self, X: list[np.ndarray]) -> np.ndarray:
        out = np.zeros(self.m)
        for rows, S, Xb in zip(self.rows, self.S, X):
            if len(rows):
                out[rows] += (S.conj() @ Xb.ravel()).real
        return out

    def adjoint(self, y: np.ndarray) -> list[np.ndarray]:
        return [(S.T @ y[rows].astype(complex)).reshape(n, n)
                for rows, S, n in zip(self.rows, self.S, self.sizes)]

    def gram(self) -> np.ndarray:
        G = np.zeros((self.m, self.m))
        for rows, S in zip(self.rows, self.S):
            if len(rows):
                G[np.ix_(rows, rows)] += (S.conj() @ S.T).real.toarray()
        return G

    def schur(self, W: list[np.ndarray]) -> np.ndarray:
        """``M_ij = sum_b tr(A_i W_b A_j W_b)``."""
        M = np.zeros((self.m, self.m))
        for rows, S, Wb in zip(self.rows, self.S, W):
            k = len(rows)
            if not k:
                continue
            n = Wb.shape[0]
            P = np.empty((n * n, k), dtype=complex)
            for j in range(k):
                lo, hi = S.indptr[j], S.indptr[j + 1]
                r, c = np.divmod(S.indices[lo:hi], n)
                # W A_j W as a sum of outer products over the nonzeros of A_j
                P[:, j] = ((Wb[:, r] * S.data[lo:hi]) @ Wb[c, :]).ravel()
            M[np.ix_(rows, rows)] += (S.conj() @ P).real
        return 0.5 * (M + M.T)

    def drop_rows(self, keep: np.ndarray) -> None:
        remap = -np.ones(self.m, dtype=np.int64)
        remap[keep] = np.arange(len(keep))
        for b in range(len(self.rows)):
            new = remap[self.rows[b]]
            ok = new >= 0
            self.rows[b] = new[ok]
            self.S[b] = self.S[b][np.flatnonzero(ok)]
        self.rhs = self.rhs[keep]
        self.m = len(keep)

    def scale_rows(self, d: np.ndarray) -> None:
        for b in range(len(self.rows)):
            self.S[b] = sp.csr_matrix(sp.diags(d[self.rows[b]]) @ self.S[b])
        self.rhs = self.rhs * d


def _with_fixed_rows(problem: SdpProblem) -> tuple[Terms, np.ndarray]:
    parts = [problem.equalities]
    rhs = list(problem.rhs)
    for b, r, c, v in problem.fixed_entries:
        if r == c:
            coeffs, vals = [1.0], [v.real]
        else:
            coeffs, vals = [1.0, 1.0j], [v.real, v.imag]
        for a, val in zip(coeffs, vals):
            parts.append(Terms(np.array([len(rhs)]), np.array([b]), np.array([r]),
                               np.array([c]), np.array([a], dtype=complex)))
            rhs.append(val)
    return Terms.concat(parts), np.asarray(rhs, dtype=float)


def _independent_rows(G: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    """Indices of a maximal independent row subset, via pivoted Cholesky."""
    m = G.shape[0]
    if m == 0:
        return np.arange(0)
    scale = max(np.abs(np.diag(G)).max(), 1.0)
    _, piv, rank, info = lapack.dpstrf(G / scale, tol=rtol, lower=1)
    if info < 0:
        raise SdpError("pivoted Cholesky of the constraint Gram matrix failed")
    return np.sort(piv[:rank] - 1)


# ---------------------------------------------------------------------------
# Interior-point iteration


def _inner(X: list[np.ndarray], Y: list[np.ndarray]) -> float:
    return float(sum(np.vdot(a, b).real for a, b in zip(X, Y)))


def _herm(X: np.ndarray) -> np.ndarray:
    return 0.5 * (X + X.conj().T)


def _chol(X: np.ndarray) -> np.ndarray:
    return np.linalg.cholesky(_herm(X))


def _nt_scaling(X: np.ndarray, S: np.ndarray):
    """Return ``G`` and diagonal ``d`` with ``G d G^H = X`` and ``G^H S G = d``."""
    Lx = _chol(X)
    Ls = _chol(S)
    U, d, Vh = np.linalg.svd(Ls.conj().T @ Lx)
    G = (Lx @ Vh.conj().T) / np.sqrt(d)
    Ginv = (np.sqrt(d)[:, None] * Vh) @ sla.solve_triangular(Lx, np.eye(len(d)), lower=True)
    return G, Ginv, d


def _max_step(X: np.ndarray, dX: np.ndarray) -> float:
    L = _chol(X)
    T = sla.solve_triangular(L, dX, lower=True)
    T = sla.solve_triangular(L, T.conj().T, lower=True)
    lam = np.linalg.eigvalsh(_herm(T))[0]
    return np.inf if lam >= 0 else -1.0 / lam


def solve(problem: SdpProblem, tol: float = DEFAULT_TOL,
          max_iter: int = DEFAULT_MAX_ITER) -> SdpSolution:
    """Solve ``problem`` by a Mehrotra predictor-corrector NT method.

    Args:
        problem: the program to maximize.
        tol: absolute target for primal infeasibility, dual infeasibility
            and duality gap.
        max_iter: iteration budget.

    Returns:
        SdpSolution with status ``optimal`` when all residuals are below
        ``tol``; otherwise the iterate with the smallest worst residual.
    """
    if tol <= 0:
        raise SdpError("tol must be positive")
    sf = _StandardForm(problem)
    keep = _independent_rows(sf.gram())
    if len(keep) < sf.m:
        warnings.warn(f"dropping {sf.m - len(keep)} linearly dependent equality rows",
                      RuntimeWarning, stacklevel=2)
        sf.drop_rows(keep)
    row_norm = np.sqrt(np.maximum(np.diag(sf.gram()), 1e-300))
    sf.scale_rows(1.0 / row_norm)
    row_factor = sla.cho_factor(sf.gram(), lower=True)

    sizes = sf.sizes
    N = int(sizes.sum())
    b = sf.rhs
    C = sf.C
    X = [(1.0 + np.abs(problem.rhs).max(initial=0.0)) * np.eye(n, dtype=complex) for n in sizes]
    S = [np.eye(n, dtype=complex) for n in sizes]
    y = np.zeros(sf.m)

    status = Status.MAX_ITERATIONS
    best = None
    it = 0
    for it in range(1, max_iter + 1):
        res = _residuals(problem, sf, X, y, S, row_norm)
        if best is None or max(res) < max(best[0]):
            best = (res, X, y, S, it - 1)
        if max(res) <= tol:
            status = Status.OPTIMAL
            break
        rp = b - sf.apply(X)
        Rd = [Cb - Sb - Ab for Cb, Sb, Ab in zip(C, S, sf.adjoint(y))]
        mu = _inner(X, S) / N
        try:
            scal = [_nt_scaling(Xb, Sb) for Xb, Sb in zip(X, S)]
        except np.linalg.LinAlgError:
            status = Status.NUMERICAL_FAILURE
            break
        W = [G @ G.conj().T for G, _, _ in scal]
        factor = _factor(sf.schur(W))
        if factor is None:
            status = Status.NUMERICAL_FAILURE
            break
        WRW = [Wb @ Rb @ Wb for Wb, Rb in zip(W, Rd)]

        def schur_apply(v):
            return sf.apply([Wb @ Ab @ Wb for Wb, Ab in zip(W, sf.adjoint(v))])

        def direction(Rs):
            """Newton direction for the scaled complementarity right-hand side ``Rs``."""
            Rc = [G @ R @ G.conj().T for (G, _, _), R in zip(scal, Rs)]
            rhs = rp - sf.apply([a - c for a, c in zip(Rc, WRW)])
            dy = sla.cho_solve(factor, rhs)
            for _ in range(REFINE_STEPS):
                r = rhs - schur_apply(dy)
                if np.linalg.norm(r) <= 1e-14 * np.linalg.norm(rhs):
                    break
                dy = dy + sla.cho_solve(factor, r)
            dS = [_herm(Rb - Ab) for Rb, Ab in zip(Rd, sf.adjoint(dy))]
            dX = [_herm(Rc_b - Wb @ dSb @ Wb) for Rc_b, Wb, dSb in zip(Rc, W, dS)]
            # the Schur system loses digits near the optimum while A A^T stays
            # well conditioned, so restore A dX = rp through the latter
            fix = sf.adjoint(sla.cho_solve(row_factor, rp - sf.apply(dX)))
            return [a + f for a, f in zip(dX, fix)], dy, dS

        def steps(dX, dS, frac):
            ap = min(_max_step(Xb, d) for Xb, d in zip(X, dX))
            ad = min(_max_step(Sb, d) for Sb, d in zip(S, dS))
            return min(1.0, frac * ap), min(1.0, frac * ad)

        try:
            # predictor
            dX, dy, dS = direction([np.diag(-d).astype(complex) for _, _, d in scal])
            ap, ad = steps(dX, dS, 1.0)
            mu_aff = _inner([Xb + ap * d for Xb, d in zip(X, dX)],
                            [Sb + ad * d for Sb, d in zip(S, dS)]) / N
            sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3

            # corrector
            corr = []
            for (G, Ginv, d), dXb, dSb in zip(scal, dX, dS):
                dXt = Ginv @ dXb @ Ginv.conj().T
                dSt = G.conj().T @ dSb @ G
                R = -0.5 * (dXt @ dSt + dSt @ dXt)
                R[np.diag_indices_from(R)] += sigma * mu - d ** 2
                corr.append(2.0 * R / (d[:, None] + d[None, :]))
            dX, dy, dS = direction(corr)
            ap, ad = steps(dX, dS, STEP_FRACTION)
        except np.linalg.LinAlgError:
            status = Status.NUMERICAL_FAILURE
            break
        X = [_herm(Xb + ap * d) for Xb, d in zip(X, dX)]
        y = y + ad * dy
        S = [_herm(Sb + ad * d) for Sb, d in zip(S, dS)]
        logger.debug("iter %d mu=%.3e ap=%.3f ad=%.3f res=%.2e %.2e %.2e",
                     it, mu, ap, ad, *res)
    else:
        res = _residuals(problem, sf, X, y, S, row_norm)
        if max(res) < max(best[0]):
            best = (res, X, y, S, max_iter)
        if max(res) <= tol:
            status = Status.OPTIMAL

    res, X, y, S, it = best
    return SdpSolution(
        blocks=X, objective=problem.objective_value(X), residuals=Residuals(*res),
        status=status, iterations=it, dual_objective=-float(b @ y),
        multipliers=y / row_norm, slacks=S,
    )


def _factor(M: np.ndarray):
    scale = max(np.abs(np.diag(M)).max(), 1e-300)
    for reg in (0.0, 1e-14, 1e-12, 1e-10):
        try:
            return sla.cho_factor(M + reg * scale * np.eye(len(M)), lower=True)
        except np.linalg.LinAlgError:
            continue
    return None


def _residuals(problem, sf, X, y, S, row_norm):
    """Absolute residuals in the problem's original scaling."""
    full = [np.asarray(Xb) for Xb in X]
    eq = problem.evaluate(problem.equalities, full, problem.n_equalities) - problem.rhs
    fx = [abs(full[b][r, c] - v) for b, r, c, v in problem.fixed_entries]
    primal = max(float(np.abs(eq).max(initial=0.0)), float(max(fx, default=0.0)))
    ATy = sf.adjoint(y)
    dual = max(float(np.abs(Cb - Sb - Ab).max()) for Cb, Sb, Ab in zip(sf.C, S, ATy))
    gap = abs(_inner(sf.C, X) - float(sf.rhs @ y))
    return primal, dual, gap
