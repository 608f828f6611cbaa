"""Coordinatewise robust location and variance for heavy-tailed data.

Each column is estimated by an M-estimator solving
``sum_i h(alpha * (y_i - mu)) = 0`` with either the Huber influence
function or Catoni's logarithmic one. Because both ``h`` are
nondecreasing, the root is bracketed by ``[min(y), max(y)]`` and found
by bisection; all columns are bisected simultaneously.
"""

from dataclasses import dataclass

import numpy as np

from .errors import SampleSizeError

FAMILIES = ("huber", "catoni")


def huber_psi(x):
    return np.clip(x, -1.0, 1.0)


def catoni_psi(x):
    ax = np.abs(x)
    return np.sign(x) * np.log1p(ax + 0.5 * ax * ax)


_PSI = {"huber": huber_psi, "catoni": catoni_psi}


@dataclass(frozen=True)
class MEstimatorConfig:
    """Settings for the robust M-estimators.

    Attributes
    ----------
    family : {"huber", "catoni"}
    epsilon : float or None
        Confidence parameter in (0, 1). ``None`` means ``1 / max(n, p)**2``.
    v : float or "auto"
        Upper bound on the column variances; "auto" takes the largest
        classical sample variance of the data being estimated.
    delta0 : float or None
        Variance floor. ``None`` means ``1e-8 * max(1, median sample variance)``.
    """

    family: str = "catoni"
    epsilon: float | None = None
    v: float | str = "auto"
    delta0: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if self.epsilon is not None and not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.v != "auto" and not float(self.v) > 0:
            raise ValueError("v must be positive or 'auto'")
        if self.delta0 is not None and not self.delta0 > 0:
            raise ValueError("delta0 must be positive")

    def resolve_epsilon(self, n, p=1):
        if self.epsilon is not None:
            return self.epsilon
        return 1.0 / max(n, p) ** 2


def alpha_for(config, n, v=None, p=1):
    """Scale parameter ``alpha`` of the M-estimator for sample size ``n``.

    Huber: ``sqrt(log(1/eps) / (n v^2))``, valid when ``log(1/eps) <= n/8``.
    Catoni: ``sqrt(2 log(1/eps) / (n (v + 2 v log(1/eps) / (n - 2 log(1/eps)))))``,
    valid when ``n > 2 log(1/eps)``.
    """
    if v is None:
        if config.v == "auto":
            raise ValueError("v='auto' must be resolved from data before calling alpha_for")
        v = float(config.v)
    if not v > 0:
        raise ValueError(f"variance bound must be positive, got {v}")
    log_inv_eps = -np.log(config.resolve_epsilon(n, p))
    if config.family == "huber":
        if log_inv_eps > n / 8.0:
            raise SampleSizeError(
                f"Huber estimator needs n >= 8 log(1/eps) = {8 * log_inv_eps:.3f}, got n={n}"
            )
        return float(np.sqrt(log_inv_eps / (n * v * v)))
    if not n > 2.0 * log_inv_eps:
        raise SampleSizeError(
            f"Catoni estimator needs n > 2 log(1/eps) = {2 * log_inv_eps:.3f}, got n={n}"
        )
    denom = n * (v + 2.0 * v * log_inv_eps / (n - 2.0 * log_inv_eps))
    return float(np.sqrt(2.0 * log_inv_eps / denom))


def _bisect_columns(Y, alpha, family, max_iter=200):
    """Solve the estimating equation for every column of ``Y`` at once."""
    psi = _PSI[family]
    alpha = np.broadcast_to(np.asarray(alpha, dtype=float), (Y.shape[1],))
    lo = Y.min(axis=0).astype(float)
    hi = Y.max(axis=0).astype(float)
    tol = 1e-12 * (hi - lo)
    for _ in range(max_iter):
        if np.all(hi - lo <= tol):
            break
        mid = 0.5 * (lo + hi)
        score = psi(alpha * (Y - mid)).sum(axis=0)
        up = score > 0
        lo = np.where(up, mid, lo)
        hi = np.where(up, hi, mid)
        hit = score == 0
        lo[hit] = hi[hit] = mid[hit]
    return 0.5 * (lo + hi)


def m_location(samples, alpha, family="catoni"):
    """Root of ``sum_i h(alpha (y_i - mu))`` for one sample vector."""
    y = np.asarray(samples, dtype=float)
    if y.ndim != 1 or y.size < 2:
        raise ValueError("need a 1-d sample with at least two points")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if not np.all(np.isfinite(y)):
        raise ValueError("samples must be finite")
    if family not in _PSI:
        raise ValueError(f"unknown family {family!r}")
    return float(_bisect_columns(y[:, None], alpha, family)[0])


def _column_locations(Y, config, p_total):
    n, _ = Y.shape
    if config.v == "auto":
        v = float(np.max(Y.var(axis=0, ddof=1)))
        if v <= 0:
            # constant columns: any alpha gives the same root
            v = 1.0
    else:
        v = float(config.v)
    alpha = alpha_for(config, n, v=v, p=p_total)
    return _bisect_columns(Y, alpha, config.family)


def robust_mean_vector(Y, config=None):
    """Columnwise robust mean of an ``(n, p)`` data matrix."""
    config = config or MEstimatorConfig()
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2 or Y.shape[0] < 2:
        raise ValueError("Y must be 2-d with at least two rows")
    return _column_locations(Y, config, Y.shape[1])


def default_delta0(Y):
    Y = np.asarray(Y, dtype=float)
    return 1e-8 * max(1.0, float(np.median(Y.var(axis=0, ddof=1))))


def robust_variance_vector(Y, config=None):
    """Robust variances ``max(eta_j - mu_j**2, delta0)`` and ``D = diag(sigma_j)``.

    ``eta_j`` is the same M-estimator applied to the squared column.
    The variance bound ``v`` is resolved separately for the raw and the
    squared data when ``config.v == "auto"``.

    Returns
    -------
    sigma2 : ndarray, shape (p,)
    D_hat : ndarray, shape (p, p)
    """
    config = config or MEstimatorConfig()
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2 or Y.shape[0] < 2:
        raise ValueError("Y must be 2-d with at least two rows")
    p = Y.shape[1]
    mu = _column_locations(Y, config, p)
    eta = _column_locations(Y * Y, config, p)
    delta0 = config.delta0 if config.delta0 is not None else default_delta0(Y)
    sigma2 = np.maximum(eta - mu * mu, delta0)
    return sigma2, np.diag(np.sqrt(sigma2))
