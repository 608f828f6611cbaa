"""Conditional graphical model: CLIME on the factor-adjusted residual.

Each column of the precision estimate solves::

    min ||w||_1   subject to   ||S w - e_j||_inf <= tau

as a linear program in ``w = w_plus - w_minus``. The column solutions are
symmetrized by keeping, for every pair ``(i, j)``, the entry of smaller
magnitude, and the factor part is added back with the
Sherman-Morrison-Woodbury identity.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import EstimationError, InfeasibleError
from .linalg import as_symmetric, chol_inverse
from .lp import simplex
from .pilot import make_pilot
from .poet import _resolve_psd_mode, rate_wn, residual_covariance
from .psd import psd_project


@dataclass(frozen=True)
class PrecisionEstimate:
    """CLIME output.

    ``feasibility_residual`` is ``||S W1 - I||_max`` for the column-wise LP
    solution ``W1`` (before symmetrization); ``symmetrized_residual`` is the
    same quantity for ``omega_u``.
    """

    omega_u: np.ndarray
    omega: np.ndarray | None
    tau_used: float
    feasibility_residual: float
    symmetrized_residual: float
    columns_failed: tuple
    objective: float
    min_eigenvalue: float
    omega_u_unsymmetrized: np.ndarray | None = None


def clime_column(sigma_u, j, tau, rule="dantzig"):
    """Sparsest (l1) ``w`` with ``||sigma_u w - e_j||_inf <= tau``.

    Raises
    ------
    InfeasibleError
        If the linear program has no feasible point.
    """
    S = as_symmetric(sigma_u)
    p = S.shape[0]
    if tau < 0:
        raise ValueError("tau must be non-negative")
    e = np.zeros(p)
    e[j] = 1.0
    A = np.block([[S, -S], [-S, S]])
    b = np.concatenate([tau + e, tau - e])
    res = simplex(np.ones(2 * p), A, b, rule=rule)
    if res.status != "optimal":
        raise InfeasibleError(f"CLIME column {j}: linear program {res.status}")
    return res.x[:p] - res.x[p:]


def symmetrize_min_magnitude(W):
    """Keep the smaller-magnitude entry of each ``(W_ij, W_ji)`` pair."""
    W = np.asarray(W, dtype=float)
    keep = np.abs(W) <= np.abs(W.T)
    return np.where(keep, W, W.T)


def clime_estimate(sigma_u, tau):
    """Column-by-column CLIME followed by min-magnitude symmetrization.

    Infeasible columns do not abort the estimate: they are left at zero and
    listed in ``columns_failed``.
    """
    S = as_symmetric(sigma_u)
    p = S.shape[0]
    W1 = np.zeros((p, p))
    failed = []
    for j in range(p):
        try:
            W1[:, j] = clime_column(S, j, tau)
        except InfeasibleError:
            failed.append(j)
    omega_u = symmetrize_min_magnitude(W1)
    eye = np.eye(p)
    return PrecisionEstimate(
        omega_u=omega_u,
        omega=None,
        tau_used=float(tau),
        feasibility_residual=float(np.max(np.abs(S @ W1 - eye))),
        symmetrized_residual=float(np.max(np.abs(S @ omega_u - eye))),
        columns_failed=tuple(failed),
        objective=float(np.sum(np.abs(W1))),
        min_eigenvalue=float(np.linalg.eigvalsh(omega_u)[0]),
        omega_u_unsymmetrized=W1,
    )


def precision_from_factor(omega_u, pilot):
    """Full precision matrix from ``omega_u`` and the pilot's eigenstructure."""
    return woodbury_precision(omega_u, pilot.gamma, pilot.lambda_)


def woodbury_precision(omega_u, gamma, lambda_):
    """Full precision matrix by Sherman-Morrison-Woodbury.

    ``omega_u - omega_u G (diag(1/lambda) + G' omega_u G)^-1 G' omega_u``,
    the inverse of ``G diag(lambda) G' + omega_u^-1``.
    """
    omega_u = as_symmetric(omega_u)
    gamma = np.asarray(gamma, dtype=float)
    lam = np.asarray(lambda_, dtype=float)
    if lam.size == 0:
        return omega_u.copy()
    if np.any(lam <= 0):
        raise ValueError("factor eigenvalues must be positive")
    OG = omega_u @ gamma
    core = np.diag(1.0 / lam) + gamma.T @ OG
    if np.linalg.cond(core) > 1e10:
        raise EstimationError("Woodbury core matrix is numerically singular")
    return as_symmetric(omega_u - OG @ chol_inverse(core) @ OG.T)


def conditional_graph_estimate(
    Y,
    m,
    family="subgaussian",
    tau_const=0.5,
    psd_mode=None,
    *,
    tau_override=None,
    config=None,
    kendall_mode="full",
    seed=None,
    pilot=None,
):
    """Estimate the residual precision ``omega_u`` and the full precision.

    The residual covariance of the pilot (PSD-projected when ``psd_mode``
    asks for it) is fed to CLIME with ``tau = tau_const * rate_wn(n, p)``.
    A precomputed ``pilot`` may be passed to skip the pilot step.
    """
    Y = np.asarray(Y, dtype=float)
    n, p = Y.shape
    if pilot is None:
        pilot = make_pilot(Y, m, family, config=config, mode=kendall_mode, seed=seed, allow_zero=True)
    tau = tau_override if tau_override is not None else tau_const * rate_wn(n, p)
    residual = residual_covariance(pilot)
    mode = _resolve_psd_mode(psd_mode, pilot.family)
    if mode != "none":
        residual = psd_project(residual, mode, tau if tau > 0 else rate_wn(n, p))
    est = clime_estimate(residual, tau)
    omega = precision_from_factor(est.omega_u, pilot)
    return replace(est, omega=omega)
