"""Projection of an indefinite residual covariance onto the PSD cone.

``clip`` floors eigenvalues at zero, which is the Frobenius projection.
``maxnorm_dual`` solves::

    max_W  log det W   subject to  ||W - S||_max <= tau

which is the dual of the graphical lasso with an l1 penalty on every
entry. It is solved by block coordinate descent over columns, each
column update being a box-constrained quadratic program handled through
its lasso dual.
"""

import numpy as np

from .errors import InfeasibleError, SolverError
from .linalg import as_symmetric, chol_inverse, clip_psd, is_positive_definite


def _lasso_cd(A, s, tau, beta, tol, max_iter):
    """Minimize ``0.5 b'Ab - s'b + tau ||b||_1`` by cyclic coordinate descent."""
    diag = np.diag(A)
    grad = A @ beta
    for _ in range(max_iter):
        delta = 0.0
        for k in range(beta.size):
            old = beta[k]
            r = s[k] - grad[k] + diag[k] * old
            new = np.sign(r) * max(abs(r) - tau, 0.0) / diag[k]
            if new != old:
                grad += A[:, k] * (new - old)
                beta[k] = new
                delta = max(delta, abs(new - old) * diag[k])
        if delta < tol:
            break
    return beta


def _feasible_start(S, tau):
    p = S.shape[0]
    W = S + tau * np.eye(p)
    if is_positive_definite(W):
        return W
    C = clip_psd(S)
    if np.max(np.abs(C - S)) > tau:
        raise InfeasibleError(
            "no positive semidefinite point within max-norm distance tau of the input"
        )
    np.fill_diagonal(C, np.diag(S) + tau)
    if not is_positive_definite(C):
        raise InfeasibleError("could not find a positive definite feasible starting point")
    return C


def dual_gap(S, W, tau):
    """Glasso duality gap ``tr(S Theta) + tau ||Theta||_1 - p`` at ``Theta = W^-1``."""
    theta = chol_inverse(W)
    return float(np.sum(S * theta) + tau * np.sum(np.abs(theta)) - S.shape[0])


def maxnorm_dual_project(S, tau, tol=1e-6, max_sweeps=500):
    """Positive definite ``W`` maximizing ``log det W`` in the max-norm ball around ``S``.

    Raises
    ------
    InfeasibleError
        If no positive definite starting point exists in the ball.
    SolverError
        If the duality gap is still above ``tol`` after ``max_sweeps``.
    """
    S = as_symmetric(S)
    if not tau > 0:
        raise ValueError("tau must be positive")
    p = S.shape[0]
    W = _feasible_start(S, tau)
    np.fill_diagonal(W, np.diag(S) + tau)
    if p == 1:
        return W
    idx = np.arange(p)
    gap = np.inf
    for _ in range(max_sweeps):
        for j in range(p):
            rest = idx != j
            A = W[np.ix_(rest, rest)]
            beta = np.linalg.solve(A, W[rest, j])
            beta = _lasso_cd(A, S[rest, j], tau, beta, tol=1e-12, max_iter=1000)
            w = A @ beta
            W[rest, j] = w
            W[j, rest] = w
        # coordinate descent stops inside the box only up to round-off
        W = S + np.clip(W - S, -tau, tau)
        gap = dual_gap(S, W, tau)
        if gap <= tol:
            return W
    raise SolverError(f"graphical-lasso dual did not converge, last gap {gap:.3e}", residual=gap)


def psd_project(sigma_u, mode="clip", tau=None):
    """Project ``sigma_u`` onto the PSD cone with the chosen method."""
    if mode == "clip":
        return clip_psd(sigma_u)
    if mode in ("maxnorm_dual", "maxnorm-dual"):
        if tau is None:
            raise ValueError("maxnorm_dual requires tau")
        return maxnorm_dual_project(sigma_u, tau)
    raise ValueError(f"unknown projection mode {mode!r}")
