"""Dense two-phase simplex for small inequality-form linear programs.

Solves ``min c'x  s.t.  A x <= b, x >= 0`` on a full tableau. Pivoting
prices by the most negative reduced cost and switches to Bland's
smallest-index rule (entering and leaving) as soon as pivots stall on a
degenerate vertex, so the method cannot cycle. ``rule="bland"`` uses
Bland's rule throughout. Once an optimal basis is found the basic
solution is recomputed from the original data to remove accumulated
round-off.
"""

from typing import NamedTuple

import numpy as np

_COST_TOL = 1e-10
_PIVOT_TOL = 1e-12
_DEGENERATE_SWITCH = 10


class LPResult(NamedTuple):
    x: np.ndarray
    objective: float
    status: str  # "optimal" | "infeasible" | "unbounded" | "iteration_limit"
    iterations: int


def _pivot(T, basis, row, col):
    T[row] /= T[row, col]
    factor = T[:, col].copy()
    factor[row] = 0.0
    T -= np.outer(factor, T[row])
    basis[row] = col


def _run_simplex(T, basis, ncols, max_iter, rule="bland"):
    """Simplex iterations on tableau ``T`` whose last row holds reduced costs.

    Only columns ``< ncols`` may enter. With ``rule="bland"`` every pivot
    follows the smallest-index rule. With ``rule="dantzig"`` the most
    negative reduced cost enters until a run of degenerate pivots is seen,
    after which Bland's rule takes over until the objective moves again.
    Returns (status, iterations).
    """
    degenerate_run = 0
    for it in range(max_iter):
        cost = T[-1, :ncols]
        candidates = np.flatnonzero(cost < -_COST_TOL)
        if candidates.size == 0:
            return "optimal", it
        if rule == "bland" or degenerate_run >= _DEGENERATE_SWITCH:
            col = candidates[0]
        else:
            col = candidates[np.argmin(cost[candidates])]
        column = T[:-1, col]
        positive = column > _PIVOT_TOL
        if not positive.any():
            return "unbounded", it
        ratios = np.full(column.shape, np.inf)
        ratios[positive] = T[:-1, -1][positive] / column[positive]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + 1e-12 * max(1.0, abs(best)))
        row = ties[np.argmin(basis[ties])]
        degenerate_run = degenerate_run + 1 if best <= 1e-14 else 0
        _pivot(T, basis, row, col)
    return "iteration_limit", max_iter


def simplex(c, A_ub, b_ub, max_iter=50_000, rule="dantzig"):
    """Minimize ``c'x`` subject to ``A_ub x <= b_ub`` and ``x >= 0``.

    Returns
    -------
    LPResult
        ``x`` is ``None`` unless ``status == "optimal"``.
    """
    c = np.asarray(c, dtype=float)
    A = np.asarray(A_ub, dtype=float)
    b = np.asarray(b_ub, dtype=float)
    m, n = A.shape
    neg = b < 0
    sign = np.where(neg, -1.0, 1.0)
    n_art = int(neg.sum())
    width = n + m + n_art

    # columns: [x (n) | slack (m) | artificial (n_art) | rhs]
    T = np.zeros((m + 1, width + 1))
    T[:m, :n] = A * sign[:, None]
    T[:m, n:n + m] = np.diag(sign)
    T[:m, -1] = b * sign
    basis = np.empty(m, dtype=int)
    art_rows = np.flatnonzero(neg)
    T[art_rows, n + m + np.arange(n_art)] = 1.0
    basis[:] = n + np.arange(m)
    basis[art_rows] = n + m + np.arange(n_art)

    iterations = 0
    if n_art:
        T[-1, :] = -T[art_rows].sum(axis=0)
        T[-1, n + m:width] = 0.0
        status, it = _run_simplex(T, basis, width, max_iter, rule)
        iterations += it
        if status == "iteration_limit":
            return LPResult(None, np.nan, status, iterations)
        if -T[-1, -1] > 1e-9 * max(1.0, np.abs(b).max()):
            return LPResult(None, np.nan, "infeasible", iterations)
        # drive remaining artificials out of the basis
        keep = np.ones(m, dtype=bool)
        for r in range(m):
            if basis[r] >= n + m:
                nz = np.flatnonzero(np.abs(T[r, :n + m]) > 1e-9)
                if nz.size:
                    _pivot(T, basis, r, nz[0])
                else:
                    keep[r] = False
        T = np.vstack([T[:m][keep], T[-1:]])
        basis = basis[keep]
        T = np.delete(T, np.arange(n + m, width), axis=1)

    ncols = n + m
    T[-1, :] = 0.0
    T[-1, :n] = c
    for r, j in enumerate(basis):
        if T[-1, j] != 0.0:
            T[-1] -= T[-1, j] * T[r]
    status, it = _run_simplex(T, basis, ncols, max_iter - iterations, rule)
    iterations += it
    if status != "optimal":
        return LPResult(None, np.nan, status, iterations)

    full = np.hstack([A, np.eye(m)])
    B = full[:, basis]
    xb = np.linalg.lstsq(B, b, rcond=None)[0] if B.shape[0] != B.shape[1] else np.linalg.solve(B, b)
    z = np.zeros(ncols)
    z[basis] = np.maximum(xb, 0.0)
    x = z[:n]
    return LPResult(x, float(c @ x), "optimal", iterations)
