"""Small dense/banded linear-algebra helpers used across modules."""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

# Above this size dense SVD/LU of every resolvent node gets slow; banded paths kick in.
DENSE_LIMIT = 400


def pt_defect(H, P) -> float:
    """Relative Frobenius defect ||P conj(H) P - H|| / ||H||."""
    H = np.asarray(H, dtype=complex)
    P = np.asarray(P)
    if H.shape != P.shape:
        raise ValueError(f"shape mismatch: H {H.shape} vs P {P.shape}")
    scale = np.linalg.norm(H)
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(P @ H.conj() @ P - H) / scale)


def bandwidth(A) -> int:
    """Largest |i-j| with a nonzero entry (0 for diagonal matrices)."""
    A = np.asarray(A)
    n = A.shape[0]
    rows, cols = np.nonzero(A)
    if rows.size == 0:
        return 0
    return int(np.max(np.abs(rows - cols))) if n else 0


def is_hermitian(A, rtol=1e-14) -> bool:
    A = np.asarray(A)
    scale = max(np.abs(A).max(initial=0.0), 1.0)
    return bool(np.abs(A - A.conj().T).max(initial=0.0) <= rtol * scale)


def to_banded(A, bw: int):
    """Pack a square matrix into LAPACK general band storage (l=u=bw)."""
    n = A.shape[0]
    ab = np.zeros((2 * bw + 1, n), dtype=A.dtype)
    for k in range(-bw, bw + 1):
        d = np.diagonal(A, k)
        if k >= 0:
            ab[bw - k, k:] = d
        else:
            ab[bw - k, : n + k] = d
    return ab


def hermitian_lower_banded(A, bw: int):
    """Lower band storage of a Hermitian matrix for eig_banded."""
    n = A.shape[0]
    ab = np.zeros((bw + 1, n), dtype=A.dtype)
    for k in range(bw + 1):
        ab[k, : n - k] = np.diagonal(A, -k)
    return ab


def tridiagonal_eigh(d, e, select="a", select_range=None):
    """Eigenpairs of the Hermitian tridiagonal matrix with diagonal d, subdiagonal e."""
    # unitary diagonal similarity makes the off-diagonal real and nonnegative
    d = np.asarray(d, dtype=float)
    mag = np.abs(e)
    ph = np.ones(len(d), dtype=complex)
    unit = np.where(mag > 0, e / np.where(mag > 0, mag, 1.0), 1.0)
    ph[1:] = np.cumprod(unit)
    w, v = sla.eigh_tridiagonal(d, mag, select=select, select_range=select_range)
    return w, ph[:, None] * v


def eigenvalues(A) -> np.ndarray:
    """All eigenvalues (complex array); Hermitian and Hermitian tridiagonal input take the faster paths."""
    if not is_hermitian(A):
        return np.linalg.eigvals(A)
    if A.shape[0] > 64 and bandwidth(A) == 1:
        w = sla.eigvalsh_tridiagonal(np.real(np.diagonal(A)), np.abs(np.diagonal(A, -1)))
    else:
        w = sla.eigvalsh(A)
    return w.astype(complex)


def tridiagonal_extreme(d, e, idx):
    """Eigenpair number idx of the Hermitian tridiagonal matrix with diagonal d, subdiagonal e."""
    w, v = tridiagonal_eigh(d, e, select="i", select_range=(idx, idx))
    return float(w[0]), v[:, 0]


def extreme_hermitian_eigpair(A, largest=True):
    """Extreme eigenpair of a Hermitian matrix, using band storage when narrow."""
    n = A.shape[0]
    bw = bandwidth(A)
    idx = n - 1 if largest else 0
    if n > 64 and bw == 1:
        return tridiagonal_extreme(np.real(np.diagonal(A)), np.diagonal(A, -1), idx)
    if n > DENSE_LIMIT and bw < n // 8:
        w, v = sla.eig_banded(hermitian_lower_banded(A, bw), lower=True,
                              select="i", select_range=(idx, idx))
    else:
        w, v = sla.eigh(A, subset_by_index=[idx, idx])
    return float(w[0]), v[:, 0]


def solve_shifted(H, z, rhs, bw=None):
    """Solve (z I - H) X = rhs, exploiting band structure of H."""
    n = H.shape[0]
    if bw is None:
        bw = bandwidth(H)
    A = -np.asarray(H, dtype=complex)
    A[np.diag_indices(n)] += z
    if n > DENSE_LIMIT and bw < n // 8:
        return sla.solve_banded((bw, bw), to_banded(A, bw), rhs)
    return sla.solve(A, rhs)


def min_singular_value(A) -> float:
    """Smallest singular value; sparse LU + Lanczos for large banded input."""
    A = np.asarray(A, dtype=complex)
    n = A.shape[0]
    if n <= DENSE_LIMIT or bandwidth(A) >= n // 8:
        return float(np.linalg.svd(A, compute_uv=False)[-1])
    As = sp.csc_matrix(A)
    lu = spla.splu(As)
    luh = spla.splu(sp.csc_matrix(A.conj().T))

    def matvec(x):
        return lu.solve(luh.solve(np.asarray(x, dtype=complex).ravel()))

    op = spla.LinearOperator((n, n), matvec=matvec, dtype=complex)
    mu = spla.eigsh(op, k=1, which="LM", return_eigenvectors=False, tol=1e-12)
    return float(1.0 / np.sqrt(np.abs(mu[0])))


def singular_values_top(A, k=None):
    """Singular values in descending order; all of them for small input."""
    A = np.asarray(A)
    n = min(A.shape)
    if n <= DENSE_LIMIT or k is None or k >= n - 1:
        return np.linalg.svd(A, compute_uv=False)
    s = spla.svds(A, k=k, return_singular_vectors=False)
    return np.sort(s)[::-1]


def spectral_norm(A) -> float:
    A = np.asarray(A)
    if min(A.shape) <= DENSE_LIMIT:
        return float(np.linalg.norm(A, 2))
    return float(singular_values_top(A, k=1)[0])
