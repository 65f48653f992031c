"""Dense small-matrix primitives: norms, inner products, and a reduced SVD.

Everything operates on two-dimensional float64 arrays and accumulates in
double precision with a fixed summation order, so repeated evaluation of the
same inputs is bit-stable.  The SVD is a one-sided Jacobi iteration written
in-repo: matrices in this package stay small (a few hundred per side at
most), where Jacobi is plenty fast, highly accurate, and fully deterministic.

All functions are pure and safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InputError, NumericalError

# Columns whose singular value falls below this fraction of the largest are
# numerically null: their left singular vectors are rebuilt from an
# orthonormal complement so that U keeps orthonormal columns.
_NULL_COLUMN_RTOL = 1e-13

# Off-diagonal threshold for Jacobi rotations, relative to column norms.
_JACOBI_TOL = 1e-15


def as_matrix(data, name: str = "matrix") -> np.ndarray:
    """Validate and return ``data`` as a finite 2-D float64 array.

    Raises DimensionError for non-2-D or empty inputs and InputError when any
    entry is NaN/Inf.
    """
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"{name} must have at least one row and one column")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite entries")
    return np.ascontiguousarray(arr)


def frobenius_norm(m) -> float:
    """Square root of the sum of squared entries."""
    a = as_matrix(m)
    return math.sqrt(float(np.sum(a * a)))


def column_norms(m) -> np.ndarray:
    """Euclidean norm of each column, as a 1-D array of length ``cols``."""
    a = as_matrix(m)
    return np.sqrt(np.sum(a * a, axis=0))


def inner_product(a, b) -> float:
    """Trace inner product sum_ij A_ij * B_ij = tr(A^T B)."""
    am = as_matrix(a, "first operand")
    bm = as_matrix(b, "second operand")
    if am.shape != bm.shape:
        raise DimensionError(f"inner_product shapes differ: {am.shape} vs {bm.shape}")
    return float(np.sum(am * bm))


@dataclass(frozen=True)
class SvdFactors:
    """Reduced SVD ``M = U diag(s) V^T`` with r = min(m, n) retained triples.

    U is m-by-r and V is n-by-r, both with orthonormal columns;
    ``singular_values`` is nonincreasing and nonnegative.
    """

    U: np.ndarray
    singular_values: np.ndarray
    V: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.singular_values) @ self.V.T


def reduced_svd(m, max_sweeps: int = 60) -> SvdFactors:
    """Reduced SVD via one-sided Jacobi with a deterministic sweep order.

    Columns of the working matrix are rotated pairwise (cyclic row order)
    until all pairs are orthogonal to relative tolerance ~1e-15; singular
    values are the resulting column norms.  The sign convention forces the
    largest-magnitude entry of each column of U to be nonnegative.

    Raises NumericalError if the sweep limit is exhausted before convergence.
    """
    a = as_matrix(m)
    rows, cols = a.shape
    transposed = rows < cols
    if transposed:
        a = np.ascontiguousarray(a.T)
        rows, cols = cols, rows

    b = np.asfortranarray(a)
    v = np.asfortranarray(np.eye(cols))

    converged = False
    for _ in range(max_sweeps):
        # Fresh Gram matrix each sweep; entries are patched incrementally as
        # rotations land so threshold checks stay O(1).
        g = b.T @ b
        rotated = False
        for p in range(cols - 1):
            for q in range(p + 1, cols):
                app = g[p, p]
                aqq = g[q, q]
                apq = g[p, q]
                if app <= 0.0 or aqq <= 0.0:
                    continue
                if abs(apq) <= _JACOBI_TOL * math.sqrt(app) * math.sqrt(aqq):
                    continue
                rotated = True
                tau = (aqq - app) / (2.0 * apq)
                t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t

                bp = b[:, p].copy()
                b[:, p] = c * bp - s * b[:, q]
                b[:, q] = s * bp + c * b[:, q]
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q]
                v[:, q] = s * vp + c * v[:, q]

                gp = g[:, p].copy()
                g[:, p] = c * gp - s * g[:, q]
                g[:, q] = s * gp + c * g[:, q]
                g[p, :] = g[:, p]
                g[q, :] = g[:, q]
                # Rotation is chosen to annihilate this pair exactly.
                g[p, p] = c * c * app - 2.0 * c * s * apq + s * s * aqq
                g[q, q] = s * s * app + 2.0 * c * s * apq + c * c * aqq
                g[p, q] = 0.0
                g[q, p] = 0.0
        if not rotated:
            converged = True
            break
    if not converged:
        raise NumericalError(f"Jacobi SVD did not converge within {max_sweeps} sweeps")

    sigma = np.sqrt(np.sum(b * b, axis=0))
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    b = b[:, order]
    v = v[:, order]

    u = np.zeros((rows, cols))
    smax = float(sigma[0])
    null_cut = smax * _NULL_COLUMN_RTOL
    filled = []
    for j in range(cols):
        if sigma[j] > null_cut:
            u[:, j] = b[:, j] / sigma[j]
            filled.append(j)
    for j in range(cols):
        if sigma[j] > null_cut:
            continue
        u[:, j] = _complement_column(u, filled)
        filled.append(j)

    u = np.ascontiguousarray(u)
    v = np.ascontiguousarray(v)
    if transposed:
        u, v = v, u

    # Deterministic sign: largest-magnitude entry of each returned U column
    # is nonnegative (flipping both factors keeps the product unchanged).
    for j in range(cols):
        i = int(np.argmax(np.abs(u[:, j])))
        if u[i, j] < 0.0:
            u[:, j] = -u[:, j]
            v[:, j] = -v[:, j]
    return SvdFactors(U=u, singular_values=np.ascontiguousarray(sigma), V=v)


def _complement_column(u: np.ndarray, filled: list[int]) -> np.ndarray:
    """Unit vector orthogonal to the already-filled columns of ``u``.

    Picks the standard basis vector with the largest residual after
    projection (ties broken by lowest index), then re-orthogonalizes once.
    """
    rows = u.shape[0]
    basis = np.eye(rows)
    if filled:
        uf = u[:, filled]
        resid = basis - uf @ (uf.T @ basis)
    else:
        uf = None
        resid = basis
    norms = np.sqrt(np.sum(resid * resid, axis=0))
    i = int(np.argmax(norms))
    vec = resid[:, i]
    if uf is not None:
        vec = vec - uf @ (uf.T @ vec)
    nrm = math.sqrt(float(np.sum(vec * vec)))
    if nrm == 0.0:
        raise NumericalError("failed to build an orthonormal complement column")
    return vec / nrm


def spectral_norm(m) -> float:
    """Largest singular value."""
    return float(reduced_svd(m).singular_values[0])


def nuclear_norm(m) -> float:
    """Sum of singular values."""
    return float(np.sum(reduced_svd(m).singular_values))
