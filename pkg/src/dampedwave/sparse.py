"""Symmetric CSR matrices, a Jacobi-preconditioned CG solver, and inverse
power iteration for the generalized eigenproblem K v = lambda M v."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class CgError(RuntimeError):
    """CG failed to reach the requested tolerance within the iteration cap."""

    def __init__(self, iterations: int, residual: float):
        super().__init__(
            f"CG did not converge in {iterations} iterations "
            f"(last relative residual {residual:.3e})"
        )
        self.iterations = iterations
        self.residual = residual


class EigError(RuntimeError):
    """Inverse power iteration failed to converge."""


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    final_residual: float  # relative 2-norm


@dataclass(frozen=True)
class SparseMatrix:
    """Compressed-row sparse matrix; assembled matrices here are symmetric."""

    row_ptr: np.ndarray
    col_idx: np.ndarray
    vals: np.ndarray
    dim: int

    def matvec(self, x: np.ndarray) -> np.ndarray:
        if x.shape[0] != self.dim:
            raise ValueError(f"dimension mismatch: {x.shape[0]} != {self.dim}")
        prod = self.vals * x[self.col_idx]
        # reduceat mishandles empty rows; assembled matrices always carry the
        # diagonal, so every row is nonempty.
        return np.add.reduceat(prod, self.row_ptr[:-1])

    __matmul__ = matvec

    def diagonal(self) -> np.ndarray:
        d = np.zeros(self.dim)
        for i in range(self.dim):
            lo, hi = self.row_ptr[i], self.row_ptr[i + 1]
            cols = self.col_idx[lo:hi]
            hit = np.searchsorted(cols, i)
            if hit < cols.size and cols[hit] == i:
                d[i] = self.vals[lo + hit]
        return d

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.dim, self.dim))
        for i in range(self.dim):
            lo, hi = self.row_ptr[i], self.row_ptr[i + 1]
            a[i, self.col_idx[lo:hi]] = self.vals[lo:hi]
        return a

    @property
    def nnz(self) -> int:
        return self.vals.size


def from_coo(rows: np.ndarray, cols: np.ndarray, vals: np.ndarray, dim: int,
             drop_tol: float = 0.0) -> SparseMatrix:
    """Build CSR from triplets, summing duplicates and dropping explicit zeros."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=np.float64)
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    if rows.size:
        new = np.empty(rows.size, dtype=bool)
        new[0] = True
        new[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
        idx = np.flatnonzero(new)
        vals = np.add.reduceat(vals, idx)
        rows, cols = rows[idx], cols[idx]
        keep = np.abs(vals) > drop_tol
        # always keep the diagonal so matvec/diagonal see full rows
        keep |= rows == cols
        rows, cols, vals = rows[keep], cols[keep], vals[keep]
    row_ptr = np.zeros(dim + 1, dtype=np.int64)
    np.add.at(row_ptr, rows + 1, 1)
    np.cumsum(row_ptr, out=row_ptr)
    return SparseMatrix(row_ptr, cols, vals, dim)


def from_diagonal(d: np.ndarray) -> SparseMatrix:
    d = np.asarray(d, dtype=np.float64)
    n = d.size
    idx = np.arange(n, dtype=np.int64)
    return SparseMatrix(np.arange(n + 1, dtype=np.int64), idx, d.copy(), n)


def identity(n: int) -> SparseMatrix:
    return from_diagonal(np.ones(n))


class OperatorSum:
    """Lazy linear combination sum_i c_i A_i, enough interface for CG."""

    def __init__(self, terms):
        self.terms = [(float(c), a) for c, a in terms if c != 0.0]
        self.dim = self.terms[0][1].dim

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.terms[0][0] * self.terms[0][1].matvec(x)
        for c, a in self.terms[1:]:
            y += c * a.matvec(x)
        return y

    __matmul__ = matvec

    def diagonal(self) -> np.ndarray:
        d = np.zeros(self.dim)
        for c, a in self.terms:
            d += c * a.diagonal()
        return d


def cg_solve(a, b: np.ndarray, rtol: float = 1e-10, max_iter: int = 10_000,
             x0: np.ndarray | None = None) -> tuple[np.ndarray, SolveReport]:
    """Jacobi-preconditioned conjugate gradients for SPD ``a``.

    ``a`` may be a SparseMatrix or any object with matvec/diagonal/dim.
    Raises CgError when the iteration cap is hit.
    """
    if rtol <= 0:
        raise ValueError("rtol must be positive")
    n = b.shape[0]
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), SolveReport(0, 0.0)
    inv_diag = 1.0 / a.diagonal()
    x = np.zeros(n) if x0 is None else x0.astype(np.float64, copy=True)
    r = b - a.matvec(x)
    res = np.linalg.norm(r) / bnorm
    if res <= rtol:
        return x, SolveReport(0, res)
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    for it in range(1, max_iter + 1):
        ap = a.matvec(p)
        alpha = rz / (p @ ap)
        x += alpha * p
        r -= alpha * ap
        res = np.linalg.norm(r) / bnorm
        if res <= rtol:
            return x, SolveReport(it, res)
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise CgError(max_iter, res)


def smallest_generalized_eigenpair(k: SparseMatrix, m, tol: float = 1e-10,
                                   max_iter: int = 500):
    """Inverse power iteration on the pencil (K, M) with M-normalization.

    Returns (lambda1, eigenvector, iterations); the eigenvector satisfies
    v' M v = 1.
    """
    n = k.dim
    v = np.ones(n)
    mv = m.matvec(v)
    v /= np.sqrt(v @ mv)
    lam = (v @ k.matvec(v)) / (v @ m.matvec(v))
    inner_rtol = min(1e-12, tol * 1e-2)
    for it in range(1, max_iter + 1):
        w, _ = cg_solve(k, m.matvec(v), rtol=inner_rtol, max_iter=50 * n, x0=v / lam)
        w /= np.sqrt(w @ m.matvec(w))
        lam_new = (w @ k.matvec(w)) / (w @ m.matvec(w))
        converged = abs(lam_new - lam) <= tol * abs(lam_new)
        v, lam = w, lam_new
        if converged:
            return lam, v, it
    raise EigError(f"inverse power iteration did not converge in {max_iter} steps")


def smallest_generalized_eigenvalue(k: SparseMatrix, m, tol: float = 1e-10) -> float:
    lam, _, _ = smallest_generalized_eigenpair(k, m, tol=tol)
    return lam
