import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ellipoet.errors import InfeasibleError
from ellipoet.linalg import clip_psd, norm_max
from ellipoet.pilot import PilotTriple, pilot_subgaussian, sample_covariance
from ellipoet.poet import (
    ThresholdRule,
    adaptive_threshold,
    poet_estimate,
    poet_from_pilot,
    rate_wn,
    residual_covariance,
)
from ellipoet.psd import dual_gap, maxnorm_dual_project, psd_project
from ellipoet.simulate import gen_cov_design, make_rng
from oracles import grid_logdet_oracle

RHO = np.array([[1.0, 0.5], [0.5, 1.0]])


def test_rate_wn():
    assert rate_wn(100, 100) == pytest.approx(math.sqrt(math.log(100) / 100) + 0.1, rel=1e-15)
    assert rate_wn(100, 100) == pytest.approx(0.3146, abs=1e-4)
    assert rate_wn(4, math.e ** 2) == pytest.approx(math.sqrt(0.5) + math.exp(-1), rel=1e-14)
    assert rate_wn(10 ** 12, 25) == pytest.approx(0.2, abs=1e-5)
    with pytest.raises(ValueError):
        rate_wn(1, 10)


def test_rule_validation():
    with pytest.raises(ValueError):
        ThresholdRule(shrinkage="lasso")
    with pytest.raises(ValueError):
        ThresholdRule(tau_const=-1)
    with pytest.raises(ValueError):
        ThresholdRule(shrinkage="scad", scad_a=2.0)


def test_threshold_examples():
    out = adaptive_threshold(RHO, ThresholdRule("hard", tau_override=0.6), n=10)
    np.testing.assert_array_equal(out, np.eye(2))
    out = adaptive_threshold(RHO, ThresholdRule("soft", tau_override=0.2), n=10)
    np.testing.assert_allclose(out, [[1, 0.3], [0.3, 1]], atol=1e-15)


def test_threshold_uses_adaptive_scale():
    S = np.array([[4.0, 1.0], [1.0, 1.0]])
    # threshold 0.4 * sqrt(4 * 1) = 0.8 keeps the entry, 0.6 * 2 = 1.2 does not
    assert adaptive_threshold(S, ThresholdRule(tau_override=0.4), 5)[0, 1] == 1.0
    assert adaptive_threshold(S, ThresholdRule(tau_override=0.6), 5)[0, 1] == 0.0


def test_scad_pieces():
    S = np.eye(4)
    S[0, 1] = S[1, 0] = 0.15  # below 2 * tau: soft
    S[0, 2] = S[2, 0] = 0.3   # between 2 tau and a tau
    S[0, 3] = S[3, 0] = 0.5   # above a tau: unchanged
    out = adaptive_threshold(S, ThresholdRule("scad", tau_override=0.1), 5)
    assert out[0, 1] == pytest.approx(0.05)
    assert out[0, 2] == pytest.approx((2.7 * 0.3 - 3.7 * 0.1) / 1.7)
    assert out[0, 3] == 0.5


sym_mats = st.integers(0, 10_000).map(
    lambda s: (lambda A: A + A.T)(np.random.default_rng(s).standard_normal((6, 6)))
)


@settings(max_examples=40, deadline=None)
@given(sym_mats, st.sampled_from(["hard", "soft", "scad"]))
def test_threshold_properties(S, shrinkage):
    np.fill_diagonal(S, np.abs(np.diag(S)) + 0.1)
    off = ~np.eye(6, dtype=bool)
    zero = adaptive_threshold(S, ThresholdRule(shrinkage, tau_override=0.0), 5)
    np.testing.assert_array_equal(zero, S)
    prev = None
    for tau in (0.05, 0.2, 0.5, 1.0):
        out = adaptive_threshold(S, ThresholdRule(shrinkage, tau_override=tau), 5)
        assert np.array_equal(out, out.T)
        assert np.array_equal(np.diag(out), np.diag(S))
        assert np.all(np.abs(out[off]) <= np.abs(S[off]) + 1e-15)
        zeros = out == 0
        if prev is not None:
            assert np.all(zeros[prev])
        prev = zeros


def test_residual_diagonal_case():
    sigma = np.diag([5.0, 2.0, 1.0])
    pilot = PilotTriple(sigma, np.array([5.0]), np.array([[1.0], [0.0], [0.0]]), "subgaussian", 1)
    np.testing.assert_array_equal(residual_covariance(pilot), np.diag([0.0, 2.0, 1.0]))


def test_mixed_pilot_residual_can_be_indefinite():
    sigma = np.array([[2.0, 1.0], [1.0, 2.0]])
    # eigenvalue from sigma, eigenvector from another source
    pilot = PilotTriple(sigma, np.array([3.0]), np.array([[1.0], [0.0]]), "elliptical", 1)
    assert np.linalg.eigvalsh(residual_covariance(pilot)).min() < 0


@pytest.mark.parametrize("seed", range(5))
def test_poet_identity(seed):
    rng = np.random.default_rng(seed)
    Y = rng.standard_normal((20, 12))
    res = poet_estimate(Y, 2, "subgaussian", ThresholdRule(tau_override=0.0), "none")
    assert norm_max(res.sigma_total - sample_covariance(Y)) <= 1e-10


def test_poet_result_invariants():
    Y, _ = gen_cov_design(40, 30, 3, 4.2, make_rng(3, 30, 0, 1))
    for family in ("subgaussian", "elliptical"):
        res = poet_estimate(Y, 3, family)
        np.testing.assert_array_equal(res.sigma_total, (res.pilot.low_rank + res.sigma_u_thresholded))
        np.testing.assert_array_equal(np.diag(res.sigma_u_thresholded), np.diag(res.sigma_u_raw))
        assert res.tau_used == pytest.approx(0.5 * rate_wn(40, 30))
    assert poet_estimate(Y, 3, "elliptical").psd_mode_applied == "clip"
    assert poet_estimate(Y, 3, "subgaussian").psd_mode_applied == "none"


def test_poet_m0():
    Y = np.random.default_rng(2).standard_normal((30, 8))
    rule = ThresholdRule(tau_override=0.3)
    res = poet_estimate(Y, 0, "subgaussian", rule, "none")
    np.testing.assert_array_equal(res.sigma_total, adaptive_threshold(sample_covariance(Y), rule, 30))


def test_poet_max_norm_triangle():
    for rep in range(5):
        Y, truth = gen_cov_design(50, 40, 3, 4.2, make_rng(9, 40, rep, 1))
        for family in ("subgaussian", "elliptical"):
            res = poet_estimate(Y, 3, family)
            B = truth["B"]
            lhs = norm_max(res.sigma_total - truth["Sigma"])
            rhs = norm_max(res.pilot.low_rank - B @ B.T) + norm_max(res.sigma_u_thresholded - truth["Sigma_u"])
            assert lhs <= rhs + 1e-12


def test_psd_clip_examples():
    A = np.array([[2.0, 0.3], [0.3, 1.0]])
    assert norm_max(psd_project(A, "clip") - A) <= 1e-10
    np.testing.assert_allclose(psd_project(np.diag([1.0, -0.5]), "clip"), np.diag([1.0, 0.0]), atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(sym_mats)
def test_clip_properties(S):
    C = psd_project(S, "clip")
    assert np.linalg.eigvalsh(C).min() >= -1e-10
    assert norm_max(psd_project(C, "clip") - C) <= 1e-10


def test_maxnorm_dual_2x2_grid_oracle():
    S = np.diag([1.0, -0.5])
    W = psd_project(S, "maxnorm-dual", 0.6)
    assert np.linalg.eigvalsh(W).min() > 0
    assert norm_max(W - S) <= 0.6 + 1e-8
    np.testing.assert_allclose(W, np.diag([1.6, 0.1]), atol=1e-8)
    logdet = np.linalg.slogdet(W)[1]
    assert logdet >= grid_logdet_oracle(S, 0.6) - 1e-9


def test_maxnorm_dual_offdiagonal_grid_oracle():
    S = np.array([[1.0, 1.3], [1.3, 1.0]])
    W = maxnorm_dual_project(S, 0.4)
    assert norm_max(W - S) <= 0.4 + 1e-8
    assert np.linalg.slogdet(W)[1] >= grid_logdet_oracle(S, 0.4) - 1e-9
    assert dual_gap(S, W, 0.4) <= 1e-6


def test_maxnorm_dual_5x5_beats_clip():
    rng = np.random.default_rng(5)
    for _ in range(5):
        A = rng.standard_normal((5, 3))
        S = A @ A.T + np.eye(5) - 1.5 * np.outer(np.ones(5), np.ones(5)) / 5
        S -= (np.linalg.eigvalsh(S).min() + 0.2) * np.eye(5)
        assert np.linalg.eigvalsh(S).min() < 0
        tau = norm_max(clip_psd(S) - S) + 0.1
        W = maxnorm_dual_project(S, tau)
        assert np.linalg.eigvalsh(W).min() > 0
        assert norm_max(W - S) <= tau + 1e-8
        # clipping zeroes an eigenvalue, so its log det is -inf
        sign, logdet_clip = np.linalg.slogdet(clip_psd(S))
        logdet_w = np.linalg.slogdet(W)[1]
        assert sign <= 0 or logdet_w > logdet_clip


def test_maxnorm_dual_infeasible():
    with pytest.raises(InfeasibleError):
        maxnorm_dual_project(np.diag([1.0, -5.0]), 0.5)
    with pytest.raises(ValueError):
        psd_project(np.eye(2), "maxnorm_dual")


def test_projection_error_doubling():
    for rep in range(5):
        Y, truth = gen_cov_design(50, 40, 3, 4.2, make_rng(13, 40, rep, 1))
        pilot = poet_estimate(Y, 3, "elliptical", psd_mode="none").pilot
        resid = residual_covariance(pilot)
        base = norm_max(resid - truth["Sigma_u"])
        # radius at least the distance to the truth keeps the truth feasible
        projected = maxnorm_dual_project(resid, base + 1e-9)
        assert norm_max(projected - truth["Sigma_u"]) <= 2 * base + 1e-8


def test_poet_from_pilot_maxnorm_mode():
    Y, _ = gen_cov_design(60, 20, 2, np.inf, make_rng(2, 20, 0, 1))
    pilot = pilot_subgaussian(Y, 2)
    res = poet_from_pilot(pilot, 60, ThresholdRule(), psd_mode="maxnorm-dual")
    assert res.psd_mode_applied == "maxnorm_dual"
    assert norm_max(res.sigma_u_raw - res.sigma_u_residual) <= res.tau_used + 1e-8
