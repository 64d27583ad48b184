import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from corrtensor import maxcorr, prob, ribbon
from corrtensor.errors import LambdaOutOfRange
from corrtensor.results import Verdict

from conftest import distributions


def dsbs_boundary(r, l1):
    """Oracle: (1 - l1)(1 - l2) = r^2 l1 l2 solved for l2."""
    return (1 - l1) / (1 - l1 + r * r * l1)


def test_lambda_vector_validation():
    with pytest.raises(LambdaOutOfRange):
        ribbon.LambdaVector((0.5, -0.1))
    with pytest.raises(LambdaOutOfRange):
        ribbon.hc_member_norms(prob.dsbs(0.1), 1.2, 0.5)


@pytest.mark.parametrize("l1", [0.3, 0.5, 0.7])
def test_dsbs_boundary_both_routes(l1):
    d = prob.dsbs(0.1)
    b = dsbs_boundary(0.8, l1)
    for lam2 in (b - 0.01, b + 0.01):
        aux_r = ribbon.hc_member_aux(d, [l1, lam2])
        norm_r = ribbon.hc_member_norms(d, l1, lam2)
        assert aux_r.is_member == norm_r.is_member == (lam2 < b)


def test_certified_verdicts_revalidate():
    d = prob.dsbs(0.1)
    r = ribbon.hc_member_aux(d, [0.7, 0.7])
    assert r.verdict is Verdict.CERTIFIED_NON_MEMBER
    obj = ribbon.side_info_objective(d, (0, 1), [0.7, 0.7])
    assert obj.recompute(r.witness) == pytest.approx(r.margin, abs=1e-10)
    n = ribbon.hc_member_norms(d, 0.7, 0.7)
    f, g = n.witness
    assert ribbon.norm_violation(d.p, f, g, 0.7, 0.7) == pytest.approx(n.margin, abs=1e-10)


def test_perfectly_correlated_bits():
    d = prob.perfectly_correlated_bits()
    assert ribbon.hc_member_aux(d, [0.5, 0.5]).is_member
    assert not ribbon.hc_member_aux(d, [0.6, 0.5]).is_member
    assert not ribbon.hc_member_aux(d, [1.2, 0.5]).is_member


def test_boundary_sample_dsbs():
    d = prob.dsbs(0.1)
    pts = ribbon.hc_boundary_sample(d, [[1.0, 1.0]], resolution=1e-3)
    t = pts[0].t / math.sqrt(2)
    assert t == pytest.approx(1 / 1.8, abs=1e-3)
    assert pts[0].anomalies == []
    csv_text = ribbon.boundary_csv(pts)
    assert csv_text.splitlines()[0].startswith("d1,d2,t,lo,hi")


@settings(max_examples=10)
@given(distributions(max_k=3), st.data())
def test_simplex_and_cube(d, data):
    w = np.asarray(data.draw(st.lists(st.floats(0.01, 1), min_size=d.k, max_size=d.k)))
    inside = w / w.sum() * data.draw(st.floats(0.1, 1.0))
    assert ribbon.hc_member_aux(d, inside).is_member
    out = inside.copy()
    out[data.draw(st.integers(0, d.k - 1))] = data.draw(st.floats(1.01, 1.5))
    assert not ribbon.hc_member_aux(d, out).is_member


@settings(max_examples=10)
@given(distributions(max_k=3), st.booleans())
def test_independence_at_all_ones(d, make_independent):
    if make_independent:
        marg = [prob.marginal_array(d.p, (i,)) for i in range(d.k)]
        arr = marg[0]
        for m in marg[1:]:
            arr = np.multiply.outer(arr, m)
        d = prob.JointDistribution(arr)
    indep = prob.total_correlation(d) <= 1e-9
    assert ribbon.hc_member_aux(d, np.ones(d.k)).is_member == indep


@settings(max_examples=8)
@given(distributions(max_k=2, max_card=3), st.floats(0.05, 0.95), st.floats(0.05, 0.95))
def test_norms_and_aux_agree(d, l1, l2):
    a = ribbon.hc_member_aux(d, [l1, l2])
    if a.is_member != ribbon.hc_member_aux(d, [l1 * (1 - 1e-3), l2 * (1 - 1e-3)]).is_member or \
            a.is_member != ribbon.hc_member_aux(d, [l1 * (1 + 1e-3), l2 * (1 + 1e-3)]).is_member:
        return  # inside the boundary band
    assert ribbon.hc_member_norms(d, l1, l2).is_member == a.is_member


@pytest.mark.parametrize("e", [0.1, 0.25])
def test_s_star_dsbs(e):
    r2 = (1 - 2 * e) ** 2
    for method in ("direct", "lce"):
        assert ribbon.s_star(prob.dsbs(e), method=method) == pytest.approx(r2, abs=2e-3)


def test_s_star_edge_cases():
    assert ribbon.s_star(prob.uniform([2, 3])) == 0.0
    assert ribbon.s_star(prob.perfectly_correlated_bits()) == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=5)
@given(distributions(cards=[2, 2]))
def test_s_star_sandwich(d):
    s = ribbon.s_star(d, restarts=16)
    assert maxcorr.rho(d) ** 2 <= s + 1e-6
    assert s <= 1.0


def test_s_star_conditional():
    a, b = prob.dsbs(0.1).p, prob.dsbs(0.3).p
    d = prob.JointDistribution(np.stack([0.5 * a, 0.5 * b], axis=2))
    assert ribbon.s_star_conditional(d, 0, 1, 2) == pytest.approx(0.64, abs=2e-3)


def test_fork_member_constant_certificate():
    rng = np.random.default_rng(0)
    ch = rng.dirichlet(np.ones(2), size=4)
    d = prob.JointDistribution((prob.dsbs(0.2).p.reshape(4, 1) * ch).reshape(2, 2, 2))
    r = ribbon.fork_member(d, 0.05, 0.0)
    assert r.verdict is Verdict.CERTIFIED_NON_MEMBER
    assert r.diagnostics["certificate"] == "constant"


def test_secure_sim_witness():
    # (X1, X2, Z) all equal: every conditional slice is a point mass
    src = prob.JointDistribution(np.array([[[0.5, 0], [0, 0]], [[0, 0], [0, 0.5]]]))
    rep = ribbon.secure_sim_precondition(src, prob.dsbs(0.1), [[0.4, 0.4], [0.7, 0.7]])
    assert rep["status"] == "witness"
    assert rep["witness_lambda"] == [0.7, 0.7]
    rep = ribbon.secure_sim_precondition(src, prob.uniform([2, 2]), [[0.7, 0.7]])
    assert rep["status"] == "pass"
