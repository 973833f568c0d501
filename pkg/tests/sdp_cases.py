"""Random SDP instances with known optima, shared by unit and acceptance tests."""

import numpy as np

from linespec2d.sdp import ProblemBuilder


def herm(rng, d):
    A = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return (A + A.conj().T) / 2


def add_dense_objective(b, block, C):
    r, c = np.nonzero(np.ones(C.shape, dtype=bool))
    b.add_objective(block, r, c, C[r, c])


def add_dense_equality(b, block, A, rhs):
    r, c = np.nonzero(np.ones(A.shape, dtype=bool))
    return b.add_equality(block, r, c, A[r, c], rhs)


def inner(A, X):
    return float(np.trace(A @ X).real)


def planted(seed, sizes=(3, 4, 2), n_eq=None):
    """Maximization with a strictly complementary primal-dual pair built in.

    Returns ``(problem, X_star, optimum)``.
    """
    rng = np.random.default_rng(seed)
    X_star, S_star = [], []
    for d in sizes:
        Q, _ = np.linalg.qr(rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))
        rank = int(rng.integers(1, d)) if d > 1 else 1
        lx = np.r_[rng.uniform(0.5, 2.0, rank), np.zeros(d - rank)]
        ls = np.r_[np.zeros(rank), rng.uniform(0.5, 2.0, d - rank)]
        X_star.append((Q * lx) @ Q.conj().T)
        S_star.append((Q * ls) @ Q.conj().T)
    # enough rows to pin the optimum (rank^2 per block) yet keep dual freedom
    n_eq = n_eq or sum(int(np.linalg.matrix_rank(X)) ** 2 for X in X_star) + 2
    As = [[herm(rng, d) for d in sizes] for _ in range(n_eq)]
    y = rng.standard_normal(n_eq)
    b = ProblemBuilder()
    blocks = [b.add_block(f"X{i}", d) for i, d in enumerate(sizes)]
    for j, Aj in enumerate(As):
        rhs = sum(inner(A, X) for A, X in zip(Aj, X_star))
        rows, cols, blk, coeff = [], [], [], []
        for bi, A in zip(blocks, Aj):
            r, c = np.nonzero(np.ones(A.shape, dtype=bool))
            rows.append(r), cols.append(c), blk.append(np.full(len(r), bi)), coeff.append(A[r, c])
        b.add_equality(np.concatenate(blk), np.concatenate(rows), np.concatenate(cols),
                       np.concatenate(coeff), rhs)
    optimum = 0.0
    for i, bi in enumerate(blocks):
        C = sum(y[j] * As[j][i] for j in range(n_eq)) - S_star[i]
        add_dense_objective(b, bi, C)
        optimum += inner(C, X_star[i])
    return b.build(), X_star, optimum


def trace_min_2x2():
    b = ProblemBuilder()
    X = b.add_block("X", 2)
    b.add_objective(X, [0, 1], [0, 1], [-1.0, -1.0])
    b.add_equality(X, 0, 0, 1.0, 1.0)
    b.add_equality(X, 1, 1, 1.0, 1.0)
    b.add_equality(X, 0, 1, 1.0, 0.5)
    b.add_equality(X, 0, 1, 1j, 0.0)
    return b.build()


def offdiag_max_2x2():
    b = ProblemBuilder()
    X = b.add_block("X", 2)
    b.add_objective(X, [0, 1], [1, 0], [1.0, 1.0])
    b.add_equality(X, 0, 0, 1.0, 1.0)
    b.add_equality(X, 1, 1, 1.0, 1.0)
    return b.build()


def _hermitian_basis(d):
    basis = []
    for i in range(d):
        E = np.zeros((d, d), dtype=complex)
        E[i, i] = 1
        basis.append(E)
        for j in range(i + 1, d):
            E = np.zeros((d, d), dtype=complex)
            E[i, j] = E[j, i] = 1
            basis.append(E)
            E = np.zeros((d, d), dtype=complex)
            E[i, j], E[j, i] = 1j, -1j
            basis.append(E)
    return basis


def null_space_instance(seed, sizes=(2, 2, 2)):
    """Compact feasible set whose affine hull is two-dimensional.

    Returns ``(problem, X0, directions, objective_matrices)`` with ``X0`` a
    strictly feasible point and the feasible set ``{X0 + t1 D1 + t2 D2} ∩ PSD``.
    """
    rng = np.random.default_rng(seed)
    bases = [_hermitian_basis(d) for d in sizes]
    dim = sum(len(bs) for bs in bases)
    offsets = np.cumsum([0] + [len(bs) for bs in bases])

    def unpack(v):
        return [sum(v[offsets[i] + j] * E for j, E in enumerate(bs)) for i, bs in enumerate(bases)]

    X0 = []
    for d in sizes:
        M = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        X0.append(M @ M.conj().T + 0.5 * np.eye(d))
    # trace row keeps the set bounded; two more directions are left free
    rows = [[np.eye(d) for d in sizes]] + [[herm(rng, d) for d in sizes] for _ in range(dim - 3)]
    Amat = np.array([[inner(A_blk, E) for A_blk, bs in zip(row, bases) for E in bs] for row in rows])
    _, _, Vt = np.linalg.svd(Amat)
    D = [unpack(Vt[-1]), unpack(Vt[-2])]
    C = [herm(rng, d) for d in sizes]

    b = ProblemBuilder()
    blocks = [b.add_block(f"X{i}", d) for i, d in enumerate(sizes)]
    for row in rows:
        rhs = sum(inner(A, X) for A, X in zip(row, X0))
        rr, cc, bb, co = [], [], [], []
        for bi, A in zip(blocks, row):
            r, c = np.nonzero(np.ones(A.shape, dtype=bool))
            rr.append(r), cc.append(c), bb.append(np.full(len(r), bi)), co.append(A[r, c])
        b.add_equality(np.concatenate(bb), np.concatenate(rr), np.concatenate(cc),
                       np.concatenate(co), rhs)
    for bi, Cb in zip(blocks, C):
        add_dense_objective(b, bi, Cb)
    return b.build(), X0, D, C


def ray_oracle(X0, D, C, angles=4096):
    """Maximum of the linear objective over the 2-D slice by exact ray extents."""
    from scipy.optimize import minimize_scalar

    chol = [np.linalg.cholesky(X) for X in X0]
    base = sum(inner(Cb, X) for Cb, X in zip(C, X0))

    def value(theta):
        Dt = [np.cos(theta) * a + np.sin(theta) * b for a, b in zip(*D)]
        # largest rho with X0 + rho Dt PSD: 1 / max eig of -L^{-1} Dt L^{-H}
        worst = max(np.linalg.eigvalsh(-np.linalg.solve(L, np.linalg.solve(L, Db).conj().T))[-1]
                    for L, Db in zip(chol, Dt))
        rho = 1.0 / worst
        return base + rho * sum(inner(Cb, Db) for Cb, Db in zip(C, Dt))

    grid = np.linspace(0, 2 * np.pi, angles, endpoint=False)
    vals = np.array([value(t) for t in grid])
    i = int(vals.argmax())
    h = grid[1] - grid[0]
    res = minimize_scalar(lambda t: -value(t), bounds=(grid[i] - h, grid[i] + h),
                          method="bounded", options={"xatol": 1e-12})
    return max(vals[i], -res.fun)
