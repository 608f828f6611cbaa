"""Pilot estimators of the covariance, its leading eigenvalues and eigenvectors.

A pilot is the triple ``(sigma, lambda, gamma)`` that the POET procedure
consumes. The three parts need not come from the same matrix: the
elliptical pilot takes eigenvalues from the rank-based covariance
``D R D`` and eigenvectors from the multivariate Kendall's tau matrix.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import RankDeficiencyError
from .kendall import multivariate_kendall, sigma1_estimator
from .linalg import as_symmetric, sym_eigen
from .robust import MEstimatorConfig, robust_variance_vector

FAMILIES = ("subgaussian", "elliptical")


@dataclass(frozen=True)
class PilotTriple:
    sigma: np.ndarray
    lambda_: np.ndarray
    gamma: np.ndarray
    family: str
    m: int
    extras: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.gamma.shape != (self.sigma.shape[0], self.m) or self.lambda_.shape != (self.m,):
            raise ValueError("inconsistent pilot shapes")

    @property
    def low_rank(self):
        """``gamma diag(lambda) gamma^T``."""
        return as_symmetric((self.gamma * self.lambda_) @ self.gamma.T)


def _check_data(Y, m, allow_zero=False):
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2:
        raise ValueError("Y must be an (n, p) matrix")
    if not np.all(np.isfinite(Y)):
        raise ValueError("Y contains non-finite values")
    n, p = Y.shape
    if n < 2:
        raise ValueError("need at least two observations")
    low = 0 if allow_zero else 1
    if not low <= m < min(n, p):
        raise ValueError(f"number of factors must satisfy {low} <= m < min(n, p) = {min(n, p)}, got {m}")
    return Y


def _leading(sigma, m):
    if m == 0:
        return np.zeros(0), np.zeros((sigma.shape[0], 0))
    values, vectors = sym_eigen(sigma, m)
    if values[-1] <= 1e-12 * max(values[0], 0.0) or values[-1] <= 0:
        raise RankDeficiencyError(
            f"eigenvalue {m} of the pilot covariance is {values[-1]:.3e}; "
            "the leading part is rank deficient"
        )
    return values, vectors


def sample_covariance(Y):
    """Column-centered covariance with ``1/n`` normalization."""
    Y = np.asarray(Y, dtype=float)
    Yc = Y - Y.mean(axis=0)
    return as_symmetric(Yc.T @ Yc / Y.shape[0])


def pilot_subgaussian(Y, m, *, allow_zero=False):
    """Sample covariance and its top-``m`` eigenpairs."""
    Y = _check_data(Y, m, allow_zero)
    sigma = sample_covariance(Y)
    lam, gamma = _leading(sigma, m)
    return PilotTriple(sigma, lam, gamma, "subgaussian", m)


def pilot_elliptical(Y, m, config=None, mode="full", seed=None, *, allow_zero=False):
    """Rank-based pilot for elliptical (heavy-tailed) data.

    ``sigma = D R D`` with robust scales ``D`` and sine-transformed
    Kendall's tau ``R``; ``lambda`` are the top eigenvalues of ``sigma``;
    ``gamma`` are the top eigenvectors of the multivariate Kendall's tau.
    """
    Y = _check_data(Y, m, allow_zero)
    config = config or MEstimatorConfig()
    sigma2, D = robust_variance_vector(Y, config)
    sigma = sigma1_estimator(Y, D)
    # keep the robust variances on the diagonal bit-for-bit
    np.fill_diagonal(sigma, sigma2)
    lam, _ = _leading(sigma, m)
    extras = {"robust_variances": sigma2}
    if m == 0:
        gamma = np.zeros((Y.shape[1], 0))
    else:
        mk = multivariate_kendall(Y, mode=mode, seed=seed)
        gamma = sym_eigen(mk.matrix, m).vectors
        extras["kendall_pairs_skipped"] = mk.pairs_skipped
    return PilotTriple(sigma, lam, gamma, "elliptical", m, extras)


def make_pilot(Y, m, family, config=None, mode="full", seed=None, allow_zero=False):
    if family == "subgaussian":
        return pilot_subgaussian(Y, m, allow_zero=allow_zero)
    if family == "elliptical":
        return pilot_elliptical(Y, m, config=config, mode=mode, seed=seed, allow_zero=allow_zero)
    raise ValueError(f"family must be one of {FAMILIES}, got {family!r}")


def estimate_num_factors(eigvals, n=None):
    """Eigenvalue-ratio guess at the number of factors (experimental).

    Returns the ``j`` maximizing ``eigvals[j-1] / eigvals[j]`` over
    ``j <= floor(k / 2)``, where ``k = min(n, len(eigvals))``.
    Never used implicitly by the estimators; ``m`` is always caller-supplied.
    """
    ev = np.asarray(eigvals, dtype=float)
    if ev.ndim != 1 or ev.size < 2:
        raise ValueError("need at least two eigenvalues")
    k = ev.size if n is None else min(n, ev.size)
    jmax = max(1, k // 2)
    jmax = min(jmax, ev.size - 1)
    head = ev[: jmax + 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = head[:-1] / head[1:]
    ratios = np.where(np.isnan(ratios), -np.inf, ratios)
    return int(np.argmax(ratios)) + 1
