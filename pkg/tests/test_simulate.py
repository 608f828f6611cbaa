import csv
import io
import math

import numpy as np
import pytest

from ellipoet.linalg import sym_eigen
from ellipoet.simulate import (
    COV_METRICS,
    GRAPH_METRICS,
    REPORT_HEADER,
    ExperimentConfig,
    align_signs,
    block_precision,
    gen_cov_design,
    gen_graph_design,
    make_rng,
    run_experiment,
    sample_gaussian,
    sample_mvt,
)


def test_rng_streams_are_distinct_and_reproducible():
    a = make_rng(7, 100, 0, 1).standard_normal(4)
    assert np.array_equal(a, make_rng(7, 100, 0, 1).standard_normal(4))
    for other in ((8, 100, 0, 1), (7, 50, 0, 1), (7, 100, 1, 1), (7, 100, 0, 2)):
        assert not np.array_equal(a, make_rng(*other).standard_normal(4))


def test_mvt_inf_is_gaussian_path():
    cov = np.array([[2.0, 0.5], [0.5, 1.0]])
    a = sample_mvt(10, cov, math.inf, make_rng(1, 2, 0, 1))
    b = sample_gaussian(10, cov, make_rng(1, 2, 0, 1))
    assert np.array_equal(a, b)


def test_mvt_zero_cov():
    assert not sample_mvt(5, np.zeros((3, 3)), 7.0, make_rng(0, 3, 0, 1)).any()


def test_mvt_rejects_bad_input():
    with pytest.raises(ValueError):
        sample_mvt(5, np.diag([1.0, -1.0]), 7.0, make_rng(0, 2, 0, 1))
    with pytest.raises(ValueError):
        sample_mvt(5, np.eye(2), 2.0, make_rng(0, 2, 0, 1))


@pytest.mark.parametrize("nu", [math.inf, 7.0])
def test_mvt_moments(nu):
    Y = sample_mvt(50_000, np.eye(4), nu, make_rng(3, 4, 0, 1))
    assert np.max(np.abs(np.cov(Y.T, bias=True) - np.eye(4))) < 0.05


def test_cov_design_hooks():
    p = 6
    _, truth = gen_cov_design(10, p, 1, math.inf, make_rng(0, p, 0, 1), loadings=np.ones((p, 1)))
    np.testing.assert_allclose(truth["Sigma"], np.ones((p, p)) + np.eye(p))
    assert truth["Lambda"][0] == pytest.approx(p + 1)
    _, truth = gen_cov_design(10, p, 1, math.inf, make_rng(0, p, 0, 1), loadings=np.zeros((p, 1)))
    np.testing.assert_array_equal(truth["Sigma"], np.eye(p))


def test_cov_design_spiked():
    hits = 0
    for rep in range(20):
        _, truth = gen_cov_design(50, 100, 3, 4.2, make_rng(1, 100, rep, 1))
        ev = sym_eigen(truth["Sigma"], 4).values
        hits += ev[2] > 10 * ev[3]
    assert hits >= 18


def test_graph_design():
    omega_u, sigma_u = block_precision(2)
    np.testing.assert_allclose(omega_u, [[1, 0.5], [0.5, 1]])
    np.testing.assert_allclose(sigma_u, [[4 / 3, -2 / 3], [-2 / 3, 4 / 3]])
    with pytest.raises(ValueError):
        block_precision(5)
    Y, truth = gen_graph_design(20, 10, 2, 7.0, make_rng(2, 10, 0, 1))
    assert Y.shape == (20, 10)
    off_block = np.kron(np.eye(5), np.ones((2, 2))) == 0
    assert np.all(truth["Omega_u"][off_block] == 0)
    B = truth["B"]
    resid = (B @ B.T + truth["Sigma_u"]) @ truth["Omega"] - np.eye(10)
    assert np.max(np.abs(resid)) <= 1e-8


def test_align_signs():
    ref = np.array([[1.0, 0.0], [0.0, 1.0]])
    est = np.array([[-0.9, 0.1], [0.1, 0.9]])
    np.testing.assert_array_equal(align_signs(est, ref), [[0.9, 0.1], [-0.1, 0.9]])


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(nu=4.0)
    with pytest.raises(ValueError):
        ExperimentConfig(reps=0)
    with pytest.raises(ValueError):
        ExperimentConfig(design="other")
    with pytest.raises(ValueError):
        ExperimentConfig(p_list=(10, 20), n_rule=(5,))
    assert ExperimentConfig(n_rule="point6_p").n_for(0, 50) == 30


def small_config(**kw):
    base = dict(design="cov", p_list=(40,), n_rule="half_p", m=2, nu=4.2, reps=1, seed=3)
    base.update(kw)
    return ExperimentConfig(**base)


def parse(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.reader(lines))


def test_report_row_count_and_format():
    report = run_experiment(small_config())
    assert report.failures == []
    assert len(report.rows) == 2 * len(COV_METRICS)
    keys = [(r[5], r[6], r[7]) for r in report.rows]
    assert len(set(keys)) == len(keys)
    table = parse(report.to_csv())
    assert tuple(table[0]) == REPORT_HEADER
    body = table[1:]
    means = [r for r in body if r[5] == "mean"]
    assert len(means) == 3 * len(COV_METRICS)
    assert all(math.isfinite(float(r[8])) for r in body)
    assert all(float(r[8]) >= 0 for r in body if r[6] != "log2ratio")


def test_log2ratio_recomputable():
    report = run_experiment(small_config(reps=3))
    for metric in COV_METRICS:
        sg = report.values(metric, "subgaussian").mean()
        el = report.values(metric, "elliptical").mean()
        row = [r for r in report.aggregate_rows() if r[6] == "log2ratio" and r[7] == metric][0]
        assert row[8] == pytest.approx(math.log2(sg / el), rel=1e-12)


def test_report_deterministic_across_workers():
    cfg = small_config(reps=2)
    a = run_experiment(cfg).to_csv()
    assert a == run_experiment(cfg).to_csv()
    assert a == run_experiment(cfg, workers=2).to_csv()


def test_graph_report_metrics():
    report = run_experiment(small_config(design="graph", n_rule="point6_p", p_list=(30,)))
    metrics = {r[7] for r in report.rows}
    assert set(GRAPH_METRICS) <= metrics
    assert len(report.rows) == 2 * (len(COV_METRICS) + len(GRAPH_METRICS)) - 10 * len(report.failures)


def test_fix_loadings():
    cfg = small_config(reps=2, fix_loadings=True, families=("subgaussian",))
    report = run_experiment(cfg)
    assert len(report.rows) == 2 * len(COV_METRICS)


def test_failures_written_as_comments():
    report = run_experiment(small_config())
    report.failures.append((40, 0, "elliptical", "RankDeficiencyError: test"))
    text = report.to_csv(None)
    assert "# failed p=40 rep=0 family=elliptical" in text
    buf = io.StringIO()
    report.to_csv(buf)
    assert buf.getvalue() == text
