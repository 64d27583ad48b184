import json

import numpy as np
import pytest

from corrtensor import harness, prob
from corrtensor.errors import OracleUnavailable, UnknownMethod


def test_sobol_in_box():
    pts = harness.sobol_lambdas(3, 10, seed=1)
    assert pts.shape == (10, 3)
    assert np.all((pts >= 0) & (pts <= 1.5))
    np.testing.assert_array_equal(pts, harness.sobol_lambdas(3, 10, seed=1))


def test_unknown_measure():
    with pytest.raises(UnknownMethod):
        harness.check_tensorization("nope", prob.dsbs(0.1))


def test_rho_tensorization_and_identity_processing():
    d = prob.from_array([[0.3, 0.1, 0.05], [0.05, 0.2, 0.3]])
    assert harness.check_tensorization("rho", d, n=2).passed
    rep = harness.check_data_processing("rho", d, [None, None])
    assert rep.passed and rep.max_violation <= 1e-10


def test_report_json_roundtrip_and_recomputable():
    d = prob.random_distribution(np.random.default_rng(0), [2, 2, 2])
    rep = harness.check_tensorization("lambda_region", d, n=2, n_samples=8, seed=3)
    blob = json.loads(rep.dumps())
    assert blob["schema_version"] == harness.SCHEMA_VERSION
    assert blob["max_violation"] == max(s["violation"] for s in blob["samples"])
    again = harness.PropertyReport.from_json(blob)
    assert again.max_violation == rep.max_violation
    assert harness.check_tensorization("lambda_region", d, n=2, n_samples=8, seed=3).dumps() == rep.dumps()


def test_lambda_region_additivity_is_and():
    rng = np.random.default_rng(2)
    p, q = prob.random_distribution(rng, [2, 2]), prob.random_distribution(rng, [2, 2])
    rep = harness.check_additivity("lambda_region", p, q, n_samples=16)
    assert rep.passed and rep.oracle_mode == "exact-eigen"


def test_point_mass_additivity_equals_other_factor():
    rng = np.random.default_rng(3)
    p = prob.point_mass([2, 2])
    q = prob.random_distribution(rng, [2, 2])
    rep = harness.check_additivity("g_side_info", p, q, lambda_samples=[[1.3], [2.5]])
    assert rep.passed
    for s in rep.samples:
        assert s["g_p"] == pytest.approx(0.0, abs=1e-12)
        assert s["g_pxq"] == pytest.approx(s["g_q"], abs=1e-9)


def test_additivity_downgrades_on_large_alphabets():
    rng = np.random.default_rng(4)
    p, q = prob.random_distribution(rng, [3, 3]), prob.random_distribution(rng, [2, 2])
    with pytest.raises(OracleUnavailable):
        harness.check_additivity("g_side_info", p, q, lambda_samples=[[1.5]], require_oracle=True)
    rep = harness.check_additivity("g_side_info", p, q, lambda_samples=[[1.5]])
    assert rep.oracle_mode.startswith("one-sided")
    assert "upper_excess" not in rep.samples[0]
    assert rep.passed


def test_g_data_processing_grid_oracle():
    rng = np.random.default_rng(5)
    d = prob.random_distribution(rng, [2, 2])
    ch = prob.random_channel(rng, 2, 2)
    rep = harness.check_data_processing("g_side_info", d, [ch, None], lambda_samples=[[1.2], [2.0]])
    assert rep.oracle_mode == "exhaustive-grid"
    assert rep.passed


def test_hc_tensorization_report():
    rep = harness.check_tensorization("hc_aux", prob.dsbs(0.1), n=2,
                                      lambda_samples=[[0.5, 0.5], [0.6, 0.6], [0.3, 0.7]])
    assert rep.passed
    assert [s["member_p"] for s in rep.samples] == [True, False, True]


def test_strong_probe_is_not_asserted():
    rep = harness.strong_tensorization_probe("lambda_region", prob.dsbs(0.1), prob.dsbs(0.3),
                                             lambda_samples=[[1.2], [3.0]])
    assert rep.passed
    assert "not asserted" in rep.oracle_mode
