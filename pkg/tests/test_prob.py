import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from corrtensor import prob
from corrtensor.errors import (CardinalityMismatch, DimensionMismatch, EmptySubset, IndexOutOfRange,
                               NegativeProbability, NotNormalized, OverlappingSets, SizeCapExceeded,
                               ZeroProbabilityEvent)

from conftest import channels, distributions


def test_from_tensor_row_major():
    d = prob.from_tensor([2, 3], [0.1, 0.2, 0.0, 0.3, 0.1, 0.3])
    assert d.p[1, 0] == pytest.approx(0.3)
    assert d.cardinalities == (2, 3)


@pytest.mark.parametrize("vals, err", [
    ([0.5, 0.6], NotNormalized),
    ([1.2, -0.2], NegativeProbability),
    ([0.5, 0.5, 0.0], DimensionMismatch),
])
def test_from_tensor_rejects(vals, err):
    with pytest.raises(err):
        prob.from_tensor([2], vals)


def test_index_errors():
    d = prob.dsbs(0.1)
    with pytest.raises(IndexOutOfRange):
        prob.entropy(d, [2])
    with pytest.raises(OverlappingSets):
        prob.marginal(d, [0, 0])
    with pytest.raises(EmptySubset):
        prob.marginal(d, [])
    with pytest.raises(ZeroProbabilityEvent):
        prob.condition_on(prob.point_mass([2, 2]), 0, 1)


def test_entropy_known_values():
    d = prob.dsbs(0.11)
    h = -(0.11 * math.log2(0.11) + 0.89 * math.log2(0.89))
    assert prob.entropy(d, [0]) == pytest.approx(1.0, abs=1e-15)
    assert prob.mutual_information(d, [0], [1]) == pytest.approx(1 - h, abs=1e-14)
    assert prob.mutual_information(prob.perfectly_correlated_bits(), [0], [1]) == pytest.approx(1.0)
    assert prob.total_correlation(prob.uniform([2, 3, 2])) == pytest.approx(0.0, abs=1e-14)


def test_tensor_merges_variables():
    p, q = prob.dsbs(0.1), prob.dsbs(0.3)
    t = prob.tensor(p, q)
    assert t.cardinalities == (4, 4)
    # symbol x_p * |q_i| + x_q
    assert t.p[0 * 2 + 1, 1 * 2 + 0] == pytest.approx(p.p[0, 1] * q.p[1, 0])


def test_iid_power_cap():
    with pytest.raises(SizeCapExceeded):
        prob.iid_power(prob.uniform([3, 3]), 20)


def test_split_copies_inverts_power():
    p = prob.from_array([[0.1, 0.2, 0.05], [0.3, 0.15, 0.2]])
    s = prob.split_copies(prob.iid_power(p, 2), p.cardinalities, 2)
    np.testing.assert_allclose(s.p, np.multiply.outer(p.p, p.p), atol=1e-15)


def test_channel_validation():
    with pytest.raises(NotNormalized):
        prob.channel([[0.5, 0.6], [0.5, 0.5]])
    with pytest.raises(CardinalityMismatch):
        prob.apply_local_channel(prob.dsbs(0.1), prob.identity_channel(3), 0)


def test_json_roundtrip(tmp_path):
    d = prob.from_array([[0.1, 0.2], [0.3, 0.4]], labels=["x", "y"])
    path = tmp_path / "d.json"
    prob.dump_json(d, path)
    e = prob.load_json(path)
    np.testing.assert_array_equal(d.p, e.p)
    assert e.labels == ("x", "y")
    c = prob.bsc(0.2)
    path.write_text(json.dumps(c.to_json()))
    np.testing.assert_array_equal(prob.load_json(path).kernel, c.kernel)


@given(distributions())
def test_chain_rule_and_nonnegativity(d):
    k = d.k
    all_ = list(range(k))
    terms = [prob.entropy(d, all_[:i + 1]) - prob.entropy(d, all_[:i]) for i in range(k)]
    assert math.fsum(terms) == pytest.approx(prob.entropy(d), abs=1e-12)
    assert prob.mutual_information(d, [0], [1], all_[2:]) >= 0
    assert prob.entropy(d) <= math.log2(d.p.size) + 1e-12


@given(distributions(cards=[2, 3]), st.data())
def test_data_processing_mi(d, data):
    ch = data.draw(channels(3, 2))
    e = prob.apply_local_channel(d, ch, 1)
    assert prob.mutual_information(e, [0], [1]) <= prob.mutual_information(d, [0], [1]) + 1e-12


@given(distributions(max_k=2), distributions(max_k=2))
def test_tensor_entropy_additive(p, q):
    if p.k != q.k:
        return
    t = prob.tensor(p, q)
    assert prob.entropy(t) == pytest.approx(prob.entropy(p) + prob.entropy(q), abs=1e-12)
    assert prob.mutual_information(t, [0], [1]) == pytest.approx(
        prob.mutual_information(p, [0], [1]) + prob.mutual_information(q, [0], [1]), abs=1e-12)
