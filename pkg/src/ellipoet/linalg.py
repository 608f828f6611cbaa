"""Dense symmetric matrix primitives.

Eigendecomposition, Cholesky inversion and the matrix norms used to
measure estimation error. Every function is pure and takes plain
``numpy.ndarray`` inputs.
"""

from typing import NamedTuple

import numpy as np
from scipy import linalg as sla
from scipy.linalg import lapack

from .errors import NotPositiveDefiniteError, SolverError

_ASYM_RTOL = 1e-12


class EigenPairs(NamedTuple):
    """Eigenvalues in descending order and matching orthonormal columns."""

    values: np.ndarray
    vectors: np.ndarray


def _check_finite(A):
    A = np.asarray(A, dtype=float)
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix contains non-finite entries")
    return A


def as_symmetric(M, strict=False):
    """Return ``(M + M.T) / 2`` as a float array.

    With ``strict=True`` an asymmetry larger than ``1e-12`` relative to
    ``max|M|`` is rejected instead of averaged away.
    """
    M = _check_finite(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if strict:
        scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
        if M.size and np.max(np.abs(M - M.T)) > _ASYM_RTOL * scale:
            raise ValueError("matrix is not symmetric")
    return (M + M.T) / 2.0


def apply_sign_convention(vectors):
    """Flip columns so that the largest-magnitude entry is non-negative.

    On exact ties in magnitude the first such entry decides.
    """
    vectors = np.array(vectors, dtype=float, copy=True)
    if vectors.size == 0:
        return vectors
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def sym_eigen(M, k="all"):
    """Leading eigenpairs of a symmetric matrix.

    Parameters
    ----------
    M : array_like, shape (p, p)
        Symmetric matrix; symmetrized by averaging with its transpose.
    k : int or "all"
        Number of leading eigenpairs to return.

    Returns
    -------
    EigenPairs
        ``values`` in descending order and ``vectors`` of shape ``(p, k)``
        with the sign convention of :func:`apply_sign_convention`.

    Raises
    ------
    SolverError
        If an eigenpair fails the residual check
        ``||M v - lambda v|| <= 1e-9 (1 + |lambda|)`` (scaled by ``||M||``).
    """
    M = as_symmetric(M)
    p = M.shape[0]
    if k == "all":
        k = p
    if not 1 <= k <= p:
        raise ValueError(f"k must lie in [1, {p}], got {k}")
    if k == p:
        values, vectors = np.linalg.eigh(M)
    else:
        values, vectors = sla.eigh(M, subset_by_index=[p - k, p - 1])
    values = values[::-1].copy()
    vectors = apply_sign_convention(vectors[:, ::-1])

    residual = np.linalg.norm(M @ vectors - vectors * values, axis=0)
    scale = max(1.0, float(np.max(np.abs(M))) * p * 1e-3)
    tol = 1e-9 * (1.0 + np.abs(values)) * scale
    if np.any(residual > tol):
        worst = float(np.max(residual))
        raise SolverError(f"eigensolver residual {worst:.3e} above tolerance", residual=worst)
    return EigenPairs(values, vectors)


def norm_max(A):
    A = _check_finite(A)
    return float(np.max(np.abs(A))) if A.size else 0.0


def norm_spectral(A):
    """Largest singular value, computed as ``lambda_max(A^T A) ** 0.5``."""
    A = _check_finite(A)
    if A.size == 0:
        return 0.0
    if A.ndim == 1:
        A = A[:, None]
    G = A.T @ A if A.shape[0] >= A.shape[1] else A @ A.T
    top = sym_eigen(G, 1).values[0]
    return float(np.sqrt(max(top, 0.0)))


def norm_fro(A):
    A = _check_finite(A)
    return float(np.sqrt(np.sum(A * A)))


def norm_inf_induced(A):
    """Maximum absolute row sum."""
    A = _check_finite(A)
    if A.size == 0:
        return 0.0
    return float(np.max(np.sum(np.abs(A), axis=1)))


def norm_l11(A):
    A = _check_finite(A)
    return float(np.sum(np.abs(A)))


def inv_sqrt(Sigma):
    """Symmetric inverse square root of a positive definite matrix."""
    Sigma = as_symmetric(Sigma)
    values, vectors = sym_eigen(Sigma)
    if values[-1] <= 1e-12 * values[0]:
        raise NotPositiveDefiniteError("Sigma is singular or indefinite")
    return (vectors / np.sqrt(values)) @ vectors.T


def norm_relative_fro(A, Sigma):
    """Relative Frobenius norm ``p**-0.5 * ||S A S||_F`` with ``S = Sigma**-0.5``.

    Normalized so that the norm of ``Sigma`` itself is one.
    """
    A = _check_finite(A)
    S = inv_sqrt(Sigma)
    p = S.shape[0]
    return norm_fro(S @ A @ S) / np.sqrt(p)


def chol_inverse(M):
    """Invert a positive definite matrix through its Cholesky factor.

    Raises
    ------
    NotPositiveDefiniteError
        Carrying the 0-based index of the first non-positive pivot.
    """
    M = as_symmetric(M)
    c, info = lapack.dpotrf(M, lower=1, clean=1)
    if info > 0:
        raise NotPositiveDefiniteError(
            f"matrix is not positive definite: Cholesky pivot {info - 1} is non-positive",
            pivot=info - 1,
        )
    if info < 0:
        raise ValueError(f"dpotrf rejected argument {-info}")
    inv, info = lapack.dpotri(c, lower=1)
    if info != 0:
        raise NotPositiveDefiniteError("Cholesky factor is singular", pivot=info - 1)
    inv = np.tril(inv) + np.tril(inv, -1).T
    return inv


def is_positive_definite(M):
    _, info = lapack.dpotrf(as_symmetric(M), lower=1)
    return info == 0


def clip_psd(M, floor=0.0):
    """Frobenius-nearest PSD matrix: floor eigenvalues at ``floor``."""
    values, vectors = sym_eigen(M)
    values = np.maximum(values, floor)
    return as_symmetric((vectors * values) @ vectors.T)
