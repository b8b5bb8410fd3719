"""Sparse and small dense linear algebra.

Sparse matrices are ``scipy.sparse.csr_matrix`` objects normalised by
:func:`csr_from_triplets` (sorted column indices, duplicates summed, explicit
zeros dropped). Dense matrices are plain 2-D numpy arrays.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .errors import (
    IndefiniteMatrixError,
    RankDeficientError,
    SingularMatrixError,
    SolverError,
)

DEFAULT_TOL = 1e-10


def csr_from_triplets(rows, cols, values, shape) -> sps.csr_matrix:
    """Assemble a finalised CSR matrix, summing duplicate entries.

    Duplicates are merged by ``scipy`` in triplet order, which is fixed by the
    callers, so the result is bit-reproducible.
    """
    a = sps.coo_matrix(
        (np.asarray(values, dtype=float), (np.asarray(rows), np.asarray(cols))),
        shape=shape,
    ).tocsr()
    a.sum_duplicates()
    a.eliminate_zeros()
    a.sort_indices()
    return a


def identity(n: int) -> sps.csr_matrix:
    return sps.identity(n, format="csr", dtype=float)


def spmv(a: sps.spmatrix, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or a.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: matrix {a.shape}, vector {x.shape}")
    return a @ x


def _check_rhs(a, b):
    b = np.asarray(b, dtype=float)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix must be square, got {a.shape}")
    if b.shape != (a.shape[0],):
        raise ValueError(f"dimension mismatch: matrix {a.shape}, rhs {b.shape}")
    if not np.all(np.isfinite(b)):
        raise ValueError("right-hand side is not finite")
    return b


def solve_spd(a: sps.spmatrix, b, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Jacobi-preconditioned conjugate gradients.

    Stops when the true residual satisfies ``||A x - b|| <= tol * ||b||``.
    The iteration cap, shared across restarts, is ``10 * n``.

    Raises:
        ValueError: if ``a`` is not symmetric to 1e-12 relative.
        IndefiniteMatrixError: on a non-positive diagonal or curvature.
        SolverError: if the cap is reached first.
    """
    a = sps.csr_matrix(a)
    b = _check_rhs(a, b)
    scale = abs(a).max() if a.nnz else 0.0
    if a.nnz and abs(a - a.T).max() > 1e-12 * scale:
        raise ValueError("matrix is not symmetric")
    n = len(b)
    bnorm = np.linalg.norm(b)
    x = np.zeros(n)
    if bnorm == 0.0:
        return x
    diag = a.diagonal()
    if np.any(diag <= 0):
        raise IndefiniteMatrixError("non-positive diagonal entry")
    inv_diag = 1.0 / diag

    target = tol * bnorm
    budget = 10 * n
    # Restart from the true residual when the recursive one has drifted.
    for _ in range(4):
        r = b - a @ x
        residual = np.linalg.norm(r)
        if residual <= target or budget <= 0:
            break
        z = inv_diag * r
        p = z.copy()
        rz = r @ z
        while budget > 0:
            budget -= 1
            ap = a @ p
            curvature = p @ ap
            if curvature <= 0:
                raise IndefiniteMatrixError(
                    "non-positive curvature in conjugate gradients",
                    residual=float(np.linalg.norm(r) / bnorm),
                )
            step = rz / curvature
            x += step * p
            r -= step * ap
            if np.linalg.norm(r) <= 0.5 * target:
                break
            z = inv_diag * r
            rz_new = r @ z
            p = z + (rz_new / rz) * p
            rz = rz_new
    residual = np.linalg.norm(b - a @ x)
    if residual > target:
        raise SolverError(
            f"conjugate gradients did not converge: relative residual "
            f"{residual / bnorm:.3e} > {tol:.1e}",
            residual=float(residual / bnorm),
        )
    return x


def solve_general(a: sps.spmatrix, b, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Sparse LU with up to three steps of iterative refinement.

    Raises:
        SingularMatrixError: if the factorisation breaks down or the pivots
            show singularity to working precision.
        SolverError: if the residual stays above ``tol * ||b||``.
    """
    a = sps.csc_matrix(a)
    b = _check_rhs(a, b)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(len(b))
    try:
        lu = spla.splu(a)
    except RuntimeError as exc:
        raise SingularMatrixError(f"sparse LU failed: {exc}") from exc
    pivots = np.abs(lu.U.diagonal())
    if pivots.min() <= 1e3 * np.finfo(float).eps * pivots.max():
        raise SingularMatrixError(
            f"matrix is singular to working precision "
            f"(pivot ratio {pivots.min() / pivots.max():.3e})"
        )
    x = lu.solve(b)
    residual = np.linalg.norm(b - a @ x)
    for _ in range(3):
        if residual <= tol * bnorm:
            break
        x += lu.solve(b - a @ x)
        residual = np.linalg.norm(b - a @ x)
    if not np.all(np.isfinite(x)) or residual > tol * bnorm:
        raise SolverError(
            f"LU solve residual {residual / bnorm:.3e} exceeds {tol:.1e}",
            residual=float(residual / bnorm),
        )
    return x


def numerical_rank(a, rtol: float = 1e-10) -> int:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    s = np.linalg.svd(a, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def null_space(a, rtol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis of the numerical null space, as columns."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    _, s, vt = np.linalg.svd(a)
    rank = int(np.sum(s > rtol * s[0])) if s.size and s[0] > 0 else 0
    return vt[rank:].T


def least_squares_min_norm(a, b) -> np.ndarray:
    """Minimum-norm solution of an underdetermined full-row-rank system.

    Computes ``x = A^T (A A^T)^{-1} b`` through a QR factorisation of ``A^T``.

    Raises:
        RankDeficientError: if the rank (SVD, threshold ``1e-10 * ||A||``) is
            below the row count.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.asarray(b, dtype=float)
    m, n = a.shape
    if b.shape != (m,):
        raise ValueError(f"dimension mismatch: matrix {a.shape}, rhs {b.shape}")
    if m > n:
        raise ValueError(f"system is not underdetermined ({m} x {n})")
    rank = numerical_rank(a)
    if rank < m:
        raise RankDeficientError(rank, m)
    q, r = np.linalg.qr(a.T)  # A^T = Q R, so A = R^T Q^T
    y = np.linalg.solve(r.T, b)
    return q @ y
