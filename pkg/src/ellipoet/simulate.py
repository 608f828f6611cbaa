"""Monte Carlo comparison of the sub-Gaussian and elliptical POET pilots.

Two designs are supported:

``cov``
    ``y = B f + u`` with ``(f, u)`` jointly multivariate t with covariance
    ``diag(I_m, I_p)`` and rows of ``B`` standard normal.
``graph``
    Same factor structure, but ``u`` has block-diagonal precision made of
    2x2 correlation blocks with off-diagonal 0.5.

Every replication draws from its own counter-based Philox stream keyed
by ``(seed, p, rep, stream)``, so a report is a pure function of its
configuration, whatever the number of workers.
"""

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .clime import conditional_graph_estimate, woodbury_precision
from .errors import EstimationError, NotPositiveDefiniteError
from .linalg import (
    as_symmetric,
    chol_inverse,
    clip_psd,
    norm_max,
    norm_relative_fro,
    norm_spectral,
    sym_eigen,
)
from .pilot import make_pilot
from .poet import ThresholdRule, poet_from_pilot
from .robust import MEstimatorConfig

log = logging.getLogger(__name__)

STREAM_LOADINGS = 0
STREAM_DATA = 1
STREAM_KENDALL = 2

COV_METRICS = (
    "sigma_u_spec",
    "sigma_u_inv_spec",
    "sigma_max",
    "sigma_relfro",
    "sigma_inv_spec",
    "pilot_sigma_max",
    "pilot_lambda_rel",
    "pilot_gamma_max",
)
GRAPH_METRICS = ("omega_u_spec", "omega_spec")
REPORT_HEADER = ("design", "p", "n", "m", "nu", "rep", "family", "metric", "value")


def make_rng(seed, p, rep, stream):
    """Independent generator for one (p, replication, stream) cell."""
    ss = np.random.SeedSequence([int(seed) & (2**64 - 1), int(p), int(rep), int(stream)])
    return np.random.Generator(np.random.Philox(ss))


def _psd_factor(cov):
    cov = as_symmetric(cov)
    if not cov.any():
        return np.zeros_like(cov)
    values, vectors = np.linalg.eigh(cov)
    if values[0] < -1e-10 * max(1.0, values[-1]):
        raise ValueError("covariance matrix is not positive semidefinite")
    return vectors * np.sqrt(np.clip(values, 0.0, None))


def sample_gaussian(n, cov, rng):
    L = _psd_factor(cov)
    return rng.standard_normal((n, L.shape[0])) @ L.T


def sample_mvt(n, cov, nu, rng):
    """Multivariate t sample whose covariance (not scatter) is ``cov``.

    ``nu = inf`` gives the Gaussian and consumes the generator exactly as
    :func:`sample_gaussian` does.
    """
    if math.isinf(nu):
        return sample_gaussian(n, cov, rng)
    if not nu > 2:
        raise ValueError("nu must exceed 2 for the covariance to exist")
    z = sample_gaussian(n, np.asarray(cov, dtype=float) * ((nu - 2.0) / nu), rng)
    w = rng.chisquare(nu, size=n) / nu
    return z / np.sqrt(w)[:, None]


def _truth(B, sigma_u, omega_u, m):
    sigma = as_symmetric(B @ B.T + sigma_u)
    lam, gamma = sym_eigen(sigma, m)
    return {
        "Sigma": sigma,
        "Sigma_u": sigma_u,
        "Omega_u": omega_u,
        "Omega": woodbury_precision(omega_u, B, np.ones(B.shape[1])),
        "B": B,
        "Lambda": lam,
        "Gamma": gamma,
    }


def _factor_data(n, B, sigma_u, nu, rng):
    p, m = B.shape
    cov = np.zeros((m + p, m + p))
    cov[:m, :m] = np.eye(m)
    cov[m:, m:] = sigma_u
    fu = sample_mvt(n, cov, nu, rng)
    return fu[:, :m] @ B.T + fu[:, m:]


def gen_cov_design(n, p, m, nu, rng, loadings=None):
    """Factor data with identity idiosyncratic covariance.

    ``loadings`` overrides the random ``B`` (its rows are otherwise drawn
    from ``N(0, I_m)`` using ``rng``).
    """
    if not m < p:
        raise ValueError("need m < p")
    B = rng.standard_normal((p, m)) if loadings is None else np.asarray(loadings, dtype=float)
    eye = np.eye(p)
    Y = _factor_data(n, B, eye, nu, rng)
    return Y, _truth(B, eye, eye, m)


def block_precision(p, rho=0.5):
    if p % 2:
        raise ValueError("graph design needs an even dimension")
    omega_u = np.kron(np.eye(p // 2), np.array([[1.0, rho], [rho, 1.0]]))
    inv = np.array([[1.0, -rho], [-rho, 1.0]]) / (1.0 - rho * rho)
    sigma_u = np.kron(np.eye(p // 2), inv)
    return omega_u, sigma_u


def gen_graph_design(n, p, m, nu, rng, loadings=None):
    """Factor data whose idiosyncratic precision is block diagonal."""
    if not m < p:
        raise ValueError("need m < p")
    omega_u, sigma_u = block_precision(p)
    B = rng.standard_normal((p, m)) if loadings is None else np.asarray(loadings, dtype=float)
    Y = _factor_data(n, B, sigma_u, nu, rng)
    return Y, _truth(B, sigma_u, omega_u, m)


@dataclass(frozen=True)
class ExperimentConfig:
    design: str = "cov"
    p_list: tuple = (50, 100, 200)
    n_rule: object = "half_p"  # "half_p", "point6_p" or a list aligned with p_list
    m: int = 3
    nu: float = 4.2
    reps: int = 50
    seed: int = 7
    tau_const: float = 0.5
    shrinkage: str = "hard"
    psd_mode: str | None = None
    families: tuple = ("subgaussian", "elliptical")
    clime_tau_const: float = 0.5
    robust_family: str = "catoni"
    kendall_mode: str = "full"
    fix_loadings: bool = False

    def __post_init__(self):
        if self.design not in ("cov", "graph"):
            raise ValueError("design must be 'cov' or 'graph'")
        if not (self.nu > 4 or math.isinf(self.nu)):
            raise ValueError("nu must exceed 4 (or be inf)")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if not isinstance(self.n_rule, str) and len(self.n_rule) != len(self.p_list):
            raise ValueError("explicit n list must match p_list")

    def n_for(self, index, p):
        if self.n_rule == "half_p":
            return p // 2
        if self.n_rule == "point6_p":
            return int(round(0.6 * p))
        if isinstance(self.n_rule, str):
            raise ValueError(f"unknown n_rule {self.n_rule!r}")
        return int(self.n_rule[index])


@dataclass
class ErrorReport:
    """Per-replication error rows plus failures and flags.

    ``rows`` holds tuples in :data:`REPORT_HEADER` order. ``failures`` lists
    ``(p, rep, family, reason)`` for replications whose estimator raised;
    ``flags`` lists ``(p, rep, family, metric, note)`` for metrics computed
    after a PSD repair.
    """

    config: ExperimentConfig
    rows: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    flags: list = field(default_factory=list)

    def values(self, metric, family, p=None):
        return np.array(
            [
                r[8]
                for r in self.rows
                if r[7] == metric and r[6] == family and (p is None or r[1] == p) and r[5] != "mean"
            ]
        )

    def aggregate_rows(self):
        out = []
        metrics = COV_METRICS + (GRAPH_METRICS if self.config.design == "graph" else ())
        for p_index, p in enumerate(self.config.p_list):
            n = self.config.n_for(p_index, p)
            means = {}
            for family in self.config.families:
                for metric in metrics:
                    vals = self.values(metric, family, p)
                    if vals.size:
                        means[family, metric] = float(vals.mean())
                        out.append(self._row(p, n, "mean", family, metric, means[family, metric]))
            if {"subgaussian", "elliptical"} <= set(self.config.families):
                for metric in metrics:
                    sg = means.get(("subgaussian", metric))
                    el = means.get(("elliptical", metric))
                    if sg and el:
                        out.append(self._row(p, n, "mean", "log2ratio", metric, math.log2(sg / el)))
        return out

    def _row(self, p, n, rep, family, metric, value):
        c = self.config
        return (c.design, p, n, c.m, c.nu, rep, family, metric, value)

    def to_csv(self, fh=None):
        """Write the report; returns the text when ``fh`` is ``None``."""
        buf = fh if fh is not None else io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_HEADER)
        for row in list(self.rows) + self.aggregate_rows():
            writer.writerow([_fmt(v) for v in row])
        for p, rep, family, reason in self.failures:
            buf.write(f"# failed p={p} rep={rep} family={family} reason={reason}\n")
        for p, rep, family, metric, note in self.flags:
            buf.write(f"# flagged p={p} rep={rep} family={family} metric={metric} note={note}\n")
        if fh is None:
            return buf.getvalue()
        return None


def _fmt(v):
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    return str(v)


def _safe_inverse(M, floor_rel=1e-6):
    """Inverse, repairing a non-PD input by eigenvalue clipping (flagged)."""
    try:
        return chol_inverse(M), None
    except NotPositiveDefiniteError:
        top = float(np.max(np.linalg.eigvalsh(as_symmetric(M))))
        return chol_inverse(clip_psd(M, floor=floor_rel * max(top, 1e-12))), "clipped before inversion"


def align_signs(est, ref):
    """Flip columns of ``est`` that point away from the matching column of ``ref``."""
    signs = np.where(np.sum(est * ref, axis=0) < 0, -1.0, 1.0)
    return est * signs


def covariance_metrics(result, truth):
    """The eight covariance error measures, plus notes for repaired inverses."""
    pilot = result.pilot
    sigma, sigma_u = truth["Sigma"], truth["Sigma_u"]
    notes = {}
    su_inv, note = _safe_inverse(result.sigma_u_thresholded)
    if note:
        notes["sigma_u_inv_spec"] = note
    s_inv, note = _safe_inverse(result.sigma_total)
    if note:
        notes["sigma_inv_spec"] = note
    lam, gam = truth["Lambda"], truth["Gamma"]
    values = {
        "sigma_u_spec": norm_spectral(result.sigma_u_thresholded - sigma_u),
        "sigma_u_inv_spec": norm_spectral(su_inv - truth["Omega_u"]),
        "sigma_max": norm_max(result.sigma_total - sigma),
        "sigma_relfro": norm_relative_fro(result.sigma_total - sigma, sigma),
        "sigma_inv_spec": norm_spectral(s_inv - truth["Omega"]),
        "pilot_sigma_max": norm_max(pilot.sigma - sigma),
        "pilot_lambda_rel": float(np.max(np.abs(pilot.lambda_ / lam - 1.0))),
        "pilot_gamma_max": norm_max(align_signs(pilot.gamma, gam) - gam),
    }
    return values, notes


def _replicate(config, p_index, p, rep):
    """Rows, failures and flags for one (p, rep) cell."""
    n = config.n_for(p_index, p)
    rng = make_rng(config.seed, p, rep, STREAM_DATA)
    loadings_rep = 0 if config.fix_loadings else rep
    loadings = make_rng(config.seed, p, loadings_rep, STREAM_LOADINGS).standard_normal((p, config.m))
    gen = gen_cov_design if config.design == "cov" else gen_graph_design
    Y, truth = gen(n, p, config.m, config.nu, rng, loadings=loadings)
    kendall_seed = make_rng(config.seed, p, rep, STREAM_KENDALL)
    rule = ThresholdRule(shrinkage=config.shrinkage, tau_const=config.tau_const)
    mconf = MEstimatorConfig(family=config.robust_family)

    rows, failures, flags = [], [], []
    for family in config.families:
        try:
            pilot = make_pilot(Y, config.m, family, config=mconf, mode=config.kendall_mode, seed=kendall_seed)
            result = poet_from_pilot(pilot, n, rule=rule, psd_mode=config.psd_mode)
            values, notes = covariance_metrics(result, truth)
            if config.design == "graph":
                prec = conditional_graph_estimate(
                    Y, config.m, family, config.clime_tau_const, config.psd_mode, pilot=pilot
                )
                if prec.columns_failed:
                    notes["omega_u_spec"] = f"clime columns failed: {list(prec.columns_failed)}"
                values["omega_u_spec"] = norm_spectral(prec.omega_u - truth["Omega_u"])
                values["omega_spec"] = norm_spectral(prec.omega - truth["Omega"])
        except (EstimationError, np.linalg.LinAlgError, ValueError) as exc:
            log.warning("p=%d rep=%d family=%s failed: %s", p, rep, family, exc)
            failures.append((p, rep, family, f"{type(exc).__name__}: {exc}"))
            continue
        if not all(math.isfinite(v) for v in values.values()):
            failures.append((p, rep, family, "non-finite metric"))
            continue
        for metric, value in values.items():
            rows.append((config.design, p, n, config.m, config.nu, rep, family, metric, float(value)))
        for metric, note in notes.items():
            flags.append((p, rep, family, metric, note))
    return rows, failures, flags


def _replicate_star(args):
    return _replicate(*args)


def run_experiment(config, workers=1):
    """Run every (p, rep, family) cell and collect an :class:`ErrorReport`.

    Cells are merged in (p, rep, family) order, so ``workers`` only changes
    wall time.
    """
    tasks = [(config, i, p, rep) for i, p in enumerate(config.p_list) for rep in range(config.reps)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replicate_star, tasks))
    else:
        results = [_replicate(*t) for t in tasks]
    report = ErrorReport(config)
    for rows, failures, flags in results:
        report.rows.extend(rows)
        report.failures.extend(failures)
        report.flags.extend(flags)
    return report
