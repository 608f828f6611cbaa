"""Rank-based scatter estimators: marginal and multivariate Kendall's tau.

The marginal statistic is tau-a with ``sgn(0) = 0``, i.e. concordant minus
discordant pairs over the fixed denominator ``n (n - 1) / 2``; ties
contribute nothing. Under ellipticity ``sin(pi/2 * tau)`` recovers the
Pearson correlation.

The multivariate statistic averages the rank-one kernel
``d d^T / ||d||^2`` over sample differences ``d = y_i - y_j``; it shares
its eigenvectors with the covariance of elliptical data.
"""

from typing import NamedTuple

import numpy as np

from .errors import EstimationError
from .linalg import as_symmetric

# Pair-tile size for the O(n^2) vectorized paths; bounds peak memory.
_PAIR_BLOCK = 1 << 16


def _count_inversions(seq):
    """Number of pairs ``i < j`` with ``seq[i] > seq[j]`` by merge sort."""
    seq = list(seq)
    n = len(seq)
    buf = [None] * n
    swaps = 0
    width = 1
    while width < n:
        for lo in range(0, n, 2 * width):
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            i, j, k = lo, mid, lo
            while i < mid and j < hi:
                if seq[j] < seq[i]:
                    buf[k] = seq[j]
                    swaps += mid - i
                    j += 1
                else:
                    buf[k] = seq[i]
                    i += 1
                k += 1
            buf[k:hi] = seq[i:mid] if i < mid else seq[j:hi]
        seq, buf = buf, seq
        width *= 2
    return swaps


def _tied_pairs(sorted_values):
    """Sum of ``t (t - 1) / 2`` over runs of equal values."""
    if len(sorted_values) == 0:
        return 0
    change = np.flatnonzero(np.diff(sorted_values) != 0)
    counts = np.diff(np.concatenate(([0], change + 1, [len(sorted_values)])))
    return int(np.sum(counts * (counts - 1) // 2))


def _concordance_fast(x, y):
    """Concordant minus discordant pair count in O(n log n)."""
    n = len(x)
    order = np.lexsort((y, x))
    xs, ys = x[order], y[order]
    n0 = n * (n - 1) // 2
    tx = _tied_pairs(xs)
    # joint ties: runs equal in both coordinates (adjacent after lexsort)
    same = (np.diff(xs) == 0) & (np.diff(ys) == 0)
    change = np.flatnonzero(~same)
    counts = np.diff(np.concatenate(([0], change + 1, [n])))
    txy = int(np.sum(counts * (counts - 1) // 2))
    # discordant pairs are exactly the strict inversions of y after sorting by (x, y)
    discordant = _count_inversions(ys.tolist())
    ty = _tied_pairs(np.sort(ys))
    concordant = n0 - tx - ty + txy - discordant
    return concordant - discordant


def kendall_tau_pair(x, y):
    """Kendall's tau-a of two equal-length samples (``sgn(0) = 0``)."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    n = x.size
    if n < 2:
        raise ValueError("need at least two observations")
    return _concordance_fast(x, y) / (n * (n - 1) / 2)


def kendall_tau_brute(x, y):
    """O(n^2) reference: direct sign sum over all pairs."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    n = x.size
    total = 0
    for i in range(n):
        for j in range(i + 1, n):
            total += np.sign((x[i] - x[j]) * (y[i] - y[j]))
    return total / (n * (n - 1) / 2)


def _pair_index_blocks(n):
    """Yield ``(i, j)`` index arrays covering all pairs ``i < j`` in fixed order."""
    rows, cols = np.triu_indices(n, k=1)
    for start in range(0, rows.size, _PAIR_BLOCK):
        yield rows[start:start + _PAIR_BLOCK], cols[start:start + _PAIR_BLOCK]


def kendall_tau_matrix(Y):
    """Matrix of pairwise Kendall's tau between the columns of ``Y``.

    Small problems use a tiled sign-matrix product (exact: integer sums in
    float64); large ``n`` falls back to the O(n log n) pairwise routine.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2:
        raise ValueError("Y must be 2-d")
    n, p = Y.shape
    if n < 2:
        raise ValueError("need at least two observations")
    npairs = n * (n - 1) // 2
    if npairs <= 4_000_000:
        counts = np.zeros((p, p))
        for i, j in _pair_index_blocks(n):
            S = np.sign(Y[i] - Y[j])
            counts += S.T @ S
        T = counts / npairs
    else:
        T = np.eye(p)
        for a in range(p):
            for b in range(a + 1, p):
                T[a, b] = T[b, a] = kendall_tau_pair(Y[:, a], Y[:, b])
    T = as_symmetric(T)
    np.fill_diagonal(T, 1.0)
    return np.clip(T, -1.0, 1.0)


def correlation_from_tau(T):
    """Entrywise ``sin(pi/2 * tau)`` with the diagonal kept at one."""
    R = np.sin(0.5 * np.pi * np.asarray(T, dtype=float))
    np.fill_diagonal(R, 1.0)
    return as_symmetric(np.clip(R, -1.0, 1.0))


def sigma1_estimator(Y, D_hat):
    """Rank-based covariance ``D R D`` from robust scales and sine-transformed tau."""
    D = np.asarray(D_hat, dtype=float)
    d = np.diag(D) if D.ndim == 2 else D
    if np.any(d <= 0):
        raise ValueError("D_hat must have a positive diagonal")
    R = correlation_from_tau(kendall_tau_matrix(Y))
    return as_symmetric(d[:, None] * R * d[None, :])


class MultiKendall(NamedTuple):
    matrix: np.ndarray
    pairs_used: int
    pairs_skipped: int

    @property
    def eigenvalues(self):
        return np.linalg.eigvalsh(self.matrix)[::-1]


def _accumulate_kernels(D):
    """Sum of ``d d^T / ||d||^2`` over rows of ``D``; zero rows dropped."""
    sq = np.einsum("ij,ij->i", D, D)
    keep = sq > 0
    U = D[keep] / np.sqrt(sq[keep])[:, None]
    return U.T @ U, int(keep.sum()), int((~keep).sum())


def multivariate_kendall(Y, mode="full", seed=None):
    """Multivariate Kendall's tau matrix of the rows of ``Y``.

    Parameters
    ----------
    Y : ndarray, shape (n, p)
    mode : {"full", "disjoint_pairs"}
        "full" averages over all ``n (n - 1) / 2`` pairs. "disjoint_pairs"
        averages over ``n // 2`` disjoint pairs of a seeded permutation.
    seed : int or numpy Generator, optional
        Only used by "disjoint_pairs".

    Pairs with identical rows are skipped and leave the denominator.
    Block sums are reduced in a fixed order, so the result is reproducible.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2 or Y.shape[0] < 2:
        raise ValueError("Y must be 2-d with at least two rows")
    n, p = Y.shape
    total = np.zeros((p, p))
    used = skipped = 0
    if mode == "full":
        for i, j in _pair_index_blocks(n):
            block, u, s = _accumulate_kernels(Y[i] - Y[j])
            total += block
            used += u
            skipped += s
    elif mode == "disjoint_pairs":
        rng = np.random.default_rng(seed)
        perm = rng.permutation(n)
        half = n // 2
        total, used, skipped = _accumulate_kernels(Y[perm[:half]] - Y[perm[half:2 * half]])
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if used == 0:
        raise EstimationError("all sample pairs are identical; multivariate Kendall's tau undefined")
    return MultiKendall(as_symmetric(total / used), used, skipped)
