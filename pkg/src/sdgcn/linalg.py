"""Dense symmetric eigendecomposition, elementary symmetric polynomials,
and LU determinants: the numerical substrate of the subset sampler."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import NumericError


class EigenDecomposition(NamedTuple):
    eigenvalues: np.ndarray   # descending
    eigenvectors: np.ndarray  # unit-norm columns, aligned with eigenvalues


def eigendecompose(m: np.ndarray, tol: float = 1e-10) -> EigenDecomposition:
    """Spectral decomposition of an exactly symmetric matrix.

    Eigenvalues come back descending with matching eigenvector columns.
    The residual ||M v - lambda v||_inf and the orthonormality defect are
    checked against tol * max(1, ||M||_inf); failure raises NumericError
    carrying the residual.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ValueError("expected a square matrix of order >= 1")
    if not np.array_equal(m, m.T):
        raise ValueError("matrix is not exactly symmetric")
    vals, vecs = np.linalg.eigh(m)
    order = np.argsort(vals)[::-1]
    vals = vals[order]
    vecs = vecs[:, order]

    scale = max(1.0, float(np.abs(m).max()) * m.shape[0])
    residual = float(np.abs(m @ vecs - vecs * vals).max())
    defect = float(np.abs(vecs.T @ vecs - np.eye(m.shape[0])).max())
    if residual > tol * scale or defect > tol * scale:
        raise NumericError(
            f"eigendecomposition failed: residual={residual:.3e}, "
            f"orthonormality defect={defect:.3e}, tol={tol:.1e}")
    return EigenDecomposition(vals, vecs)


def esp_table(eigenvalues: np.ndarray, k: int) -> np.ndarray:
    """Table e[l][v] of elementary symmetric polynomials of the first v
    eigenvalues, for l = 0..k and v = 0..m.

    Recurrence: e[l][v] = e[l][v-1] + lambda_v * e[l-1][v-1], with
    e[0][v] = 1 and e[l][v] = 0 for l > v.
    """
    lam = np.asarray(eigenvalues, dtype=np.float64)
    m = lam.size
    if k < 0:
        raise ValueError("k must be nonnegative")
    if k > m:
        raise ValueError(f"k={k} exceeds number of eigenvalues m={m}")
    e = np.zeros((k + 1, m + 1))
    e[0, :] = 1.0
    for l in range(1, k + 1):
        e[l, 1:] = np.cumsum(lam * e[l - 1, :-1])
    return e


def lu_det(m: np.ndarray) -> float:
    """Determinant via LU with partial pivoting; |det| < 1e-300 reports 0."""
    a = np.array(m, dtype=np.float64, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    n = a.shape[0]
    sign = 1.0
    for col in range(n):
        pivot = col + int(np.argmax(np.abs(a[col:, col])))
        if a[pivot, col] == 0.0:
            return 0.0
        if pivot != col:
            a[[col, pivot]] = a[[pivot, col]]
            sign = -sign
        a[col + 1:, col] /= a[col, col]
        a[col + 1:, col + 1:] -= np.outer(a[col + 1:, col], a[col, col + 1:])
    det = sign * float(np.prod(np.diagonal(a)))
    return 0.0 if abs(det) < 1e-300 else det
