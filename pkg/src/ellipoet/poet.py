"""Generic POET: low-rank plus thresholded principal orthogonal complement.

Given a pilot triple, the residual ``sigma - gamma diag(lambda) gamma^T``
is (optionally) projected onto the PSD cone, its off-diagonal entries are
shrunk with an entry-adaptive threshold, and the low-rank part is added
back.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import as_symmetric
from .pilot import PilotTriple, make_pilot
from .psd import psd_project

SHRINKAGES = ("hard", "soft", "scad")
PSD_MODES = ("none", "clip", "maxnorm_dual")


@dataclass(frozen=True)
class ThresholdRule:
    """Shrinkage family and threshold level.

    The threshold is ``tau_override`` when given, otherwise
    ``tau_const * rate_wn(n, p)``.
    """

    shrinkage: str = "hard"
    tau_const: float = 0.5
    tau_override: float | None = None
    scad_a: float = 3.7

    def __post_init__(self):
        if self.shrinkage not in SHRINKAGES:
            raise ValueError(f"shrinkage must be one of {SHRINKAGES}, got {self.shrinkage!r}")
        if self.tau_const < 0:
            raise ValueError("tau_const must be non-negative")
        if self.tau_override is not None and self.tau_override < 0:
            raise ValueError("tau_override must be non-negative")
        if self.shrinkage == "scad" and not self.scad_a > 2:
            raise ValueError("scad_a must exceed 2")

    def tau(self, n, p):
        if self.tau_override is not None:
            return float(self.tau_override)
        return self.tau_const * rate_wn(n, p)


@dataclass(frozen=True)
class PoetResult:
    sigma_total: np.ndarray
    sigma_u_thresholded: np.ndarray
    sigma_u_raw: np.ndarray
    tau_used: float
    pilot: PilotTriple
    psd_mode_applied: str
    sigma_u_residual: np.ndarray = field(repr=False)
    threshold_fallback: tuple = ()


def rate_wn(n, p):
    """Benchmark rate ``sqrt(log p / n) + 1 / sqrt(p)``."""
    if n < 2 or p < 2:
        raise ValueError("rate_wn needs n >= 2 and p >= 2")
    return math.sqrt(math.log(p) / n) + 1.0 / math.sqrt(p)


def residual_covariance(pilot):
    """Principal orthogonal complement ``sigma - gamma diag(lambda) gamma^T``."""
    return as_symmetric(pilot.sigma - pilot.low_rank)


def _shrink(z, thr, rule):
    if rule.shrinkage == "hard":
        return z
    soft = np.sign(z) * np.maximum(np.abs(z) - thr, 0.0)
    if rule.shrinkage == "soft":
        return soft
    a = rule.scad_a
    az = np.abs(z)
    middle = ((a - 1.0) * z - np.sign(z) * a * thr) / (a - 2.0)
    return np.where(az <= 2.0 * thr, soft, np.where(az <= a * thr, middle, z))


def threshold_scale(sigma_u):
    """Per-coordinate scales for the entry-adaptive threshold.

    Returns the scales and the indices whose diagonal was not positive
    (those fall back to the largest diagonal entry).
    """
    d = np.diag(sigma_u).astype(float)
    bad = np.flatnonzero(d <= 0)
    if bad.size:
        top = d.max()
        d = np.where(d > 0, d, top if top > 0 else 1.0)
    return np.sqrt(d), tuple(int(i) for i in bad)


def adaptive_threshold(sigma_u, rule, n):
    """Threshold off-diagonal entries at ``tau * sqrt(s_ii s_jj)``.

    Entries below the threshold become zero; the survivors pass through the
    rule's shrinkage function. The diagonal is returned unchanged.
    """
    S = as_symmetric(sigma_u)
    p = S.shape[0]
    if p == 1:
        return S.copy()
    tau = rule.tau(n, p)
    scale, _ = threshold_scale(S)
    thr = tau * np.outer(scale, scale)
    keep = np.abs(S) >= thr
    out = np.where(keep, _shrink(S, thr, rule), 0.0)
    np.fill_diagonal(out, np.diag(S))
    return as_symmetric(out)


def _resolve_psd_mode(psd_mode, family):
    if psd_mode is None:
        return "clip" if family == "elliptical" else "none"
    mode = psd_mode.replace("-", "_")
    if mode not in PSD_MODES:
        raise ValueError(f"psd_mode must be one of {PSD_MODES}, got {psd_mode!r}")
    return mode


def poet_from_pilot(pilot, n, rule=None, psd_mode="none", psd_tau=None):
    """Run the threshold-and-recompose steps on an existing pilot."""
    rule = rule or ThresholdRule()
    p = pilot.sigma.shape[0]
    residual = residual_covariance(pilot)
    tau = rule.tau(n, p) if p > 1 else 0.0
    mode = _resolve_psd_mode(psd_mode, pilot.family)
    if mode == "none":
        raw = residual
    else:
        if psd_tau is None:
            psd_tau = tau if tau > 0 else rate_wn(n, p)
        raw = psd_project(residual, mode, psd_tau)
    thresholded = adaptive_threshold(raw, rule, n)
    _, fallback = threshold_scale(raw)
    # both terms are exactly symmetric, so the sum is too
    total = pilot.low_rank + thresholded
    return PoetResult(
        sigma_total=total,
        sigma_u_thresholded=thresholded,
        sigma_u_raw=raw,
        tau_used=tau,
        pilot=pilot,
        psd_mode_applied=mode,
        sigma_u_residual=residual,
        threshold_fallback=fallback,
    )


def poet_estimate(
    Y,
    m,
    family="subgaussian",
    rule=None,
    psd_mode=None,
    *,
    config=None,
    kendall_mode="full",
    seed=None,
    psd_tau=None,
):
    """POET covariance estimate from an ``(n, p)`` data matrix.

    Parameters
    ----------
    Y : ndarray, shape (n, p)
    m : int
        Number of factors; ``m = 0`` gives plain adaptive thresholding of
        the pilot covariance.
    family : {"subgaussian", "elliptical"}
        Pilot estimator family.
    rule : ThresholdRule, optional
    psd_mode : {"none", "clip", "maxnorm_dual"}, optional
        Projection applied to the residual before thresholding. Defaults to
        "clip" for the elliptical family and "none" otherwise.
    config : MEstimatorConfig, optional
        Robust scale settings for the elliptical family.
    kendall_mode : {"full", "disjoint_pairs"}
    seed : optional
        Seed for ``kendall_mode="disjoint_pairs"``.
    psd_tau : float, optional
        Radius for "maxnorm_dual"; defaults to the threshold level.

    Returns
    -------
    PoetResult
    """
    Y = np.asarray(Y, dtype=float)
    pilot = make_pilot(Y, m, family, config=config, mode=kendall_mode, seed=seed, allow_zero=True)
    return poet_from_pilot(pilot, Y.shape[0], rule=rule, psd_mode=psd_mode, psd_tau=psd_tau)
