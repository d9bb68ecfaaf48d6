import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bqp import reference_model
from bqp.acceptance import degenerate_model
from bqp.bmc import sample_bmc
from bqp.errors import BudgetExceeded, DecodingError, EncodingMismatch
from bqp.forest import UNCOLOURED, Forest, truncate
from bqp.rng import make_rng
from bqp.verify import (
    TreePmf,
    binomial_z,
    decode,
    degenerate_reduction_test,
    dispersion_index,
    empirical_pmf,
    encode,
    enumerate_reweighted_coloured,
    enumerate_truncated_biased,
    enumerate_truncated_bmc,
    exact_identity_suite,
    interlacement_qp_test,
    kuznetsov_anchor_test,
    path_key,
    path_law,
    spine_identity_test,
    statistical_tv_threshold,
    tv_distance,
)


@pytest.fixture
def A():
    return reference_model("A")


def leaf(x, c=UNCOLOURED):
    return (x, c, ())


def test_encoding_ignores_labels_and_child_order():
    f = Forest([5, 9, 2], [None, 5, 5], [1, 0, 2])
    g = Forest([1, 3, 4], [None, 1, 1], [1, 2, 0])
    assert encode(f) == encode(g) == (1, UNCOLOURED, (leaf(0), leaf(2)))
    assert encode(decode(encode(f))) == encode(f)
    with pytest.raises(EncodingMismatch):
        encode(Forest([1, 2], [None, None], [0, 0]))
    with pytest.raises(DecodingError):
        decode((1, 0))


def test_path_key():
    assert path_key(Forest([1, 2, 3], [None, 1, 2], [2, 1, 0])) == (2, 1, 0)
    with pytest.raises(EncodingMismatch):
        path_key(Forest([1, 2, 3], [None, 1, 1], [2, 1, 0]))


def test_plain_enumeration_depth_one_by_hand(A):
    # from 1: no children w.p. 0.6, two children at {0,2} positions w.p. 0.4
    pmf = enumerate_truncated_bmc(A, 1, 1)
    expected = {
        leaf(1): 0.6,
        (1, UNCOLOURED, (leaf(0), leaf(0))): 0.4 * 0.25,
        (1, UNCOLOURED, (leaf(0), leaf(2))): 0.4 * 0.5,
        (1, UNCOLOURED, (leaf(2), leaf(2))): 0.4 * 0.25,
    }
    assert pmf.entries.keys() == expected.keys()
    for k, p in expected.items():
        assert pmf.entries[k] == pytest.approx(p, abs=1e-15)


@pytest.mark.parametrize("x, depth", [(0, 2), (1, 2), (2, 3)])
def test_enumerations_are_probability_laws(A, x, depth):
    assert enumerate_truncated_bmc(A, x, depth).total == pytest.approx(1.0, abs=1e-12)
    assert enumerate_truncated_biased(A, [0], x, depth).total == pytest.approx(1.0, abs=1e-12)
    assert enumerate_reweighted_coloured(A, [0], x, depth).total == pytest.approx(1.0, abs=1e-12)


def test_plain_enumeration_matches_sampling(A):
    rng = make_rng(0)
    n = 40000
    codes = [encode(truncate(sample_bmc(A, 2, rng), 2)) for _ in range(n)]
    exact = enumerate_truncated_bmc(A, 2, 2)
    emp = empirical_pmf(codes, known=exact.entries)
    assert emp.overflow == 0.0
    assert tv_distance(exact, emp) < statistical_tv_threshold(len(exact), n)


def test_budget_exceeded(A):
    with pytest.raises(BudgetExceeded):
        enumerate_truncated_bmc(A, 1, 4, budget=10)


def test_tv_properties():
    a = TreePmf({"x": 0.5, "y": 0.5})
    b = TreePmf({"x": 0.2, "z": 0.3}, overflow=0.5)
    assert tv_distance(a, a) == 0.0
    assert tv_distance(a, b) == pytest.approx(tv_distance(b, a))
    assert tv_distance(a, b) == pytest.approx(0.5 * (0.3 + 0.5 + 0.3 + 0.5))
    with pytest.raises(EncodingMismatch):
        tv_distance(a, TreePmf({}, "path"))


@given(st.lists(st.integers(0, 4), min_size=1, max_size=50),
       st.lists(st.integers(0, 4), min_size=1, max_size=50),
       st.lists(st.integers(0, 4), min_size=1, max_size=50))
def test_tv_triangle_inequality(xs, ys, zs):
    a, b, c = (empirical_pmf(v) for v in (xs, ys, zs))
    assert 0 <= tv_distance(a, b) <= 1 + 1e-12
    assert tv_distance(a, c) <= tv_distance(a, b) + tv_distance(b, c) + 1e-12


def test_empirical_pmf_overflow():
    pmf = empirical_pmf(["a", "b", "b", "c"], known={"a", "b"})
    assert pmf.entries == {"a": 0.25, "b": 0.5}
    assert pmf.overflow == 0.25
    assert math.isclose(pmf.total, 1.0)
    assert statistical_tv_threshold(4, 10000) == pytest.approx(0.045)


def test_spine_identity_exact_leg(A):
    for x in (1, 2):
        rep = spine_identity_test(A, [0], x, 2, 0, None)
        assert rep.passed, rep.lines()


def test_spine_identity_sampled_small(A):
    rep = spine_identity_test(A, [0], 1, 2, 20000, 5)
    assert rep.passed, rep.lines()


def test_spine_identity_detects_wrong_h(A):
    from bqp.acceptance import corrupt_h

    bad = reference_model("A")
    corrupt_h(bad, [0], 1.3)
    rep = spine_identity_test(bad, [0], 1, 2, 0, None)
    assert not rep.passed


def test_path_law_for_single_child_model():
    m = degenerate_model()
    law = path_law(m.G[2], m, [0], 10)
    assert law.total == pytest.approx(1.0, abs=1e-12)
    # whole paths: they hit B and then continue until the single line dies
    assert all(0 in p for p in law.entries)
    assert law.entries[(2, 1, 0)] == pytest.approx(0.136, abs=1e-12)


def test_degenerate_reduction_small():
    m = degenerate_model()
    rep = degenerate_reduction_test(m.G[2], m, [0], 5000, 1, max_len=10)
    assert rep.passed, rep.lines()


def test_kuznetsov_anchor_small(A):
    rep = kuznetsov_anchor_test(A.G[1], A, [0], 5000, 3, sets=[[0, 2], [0, 1]])
    assert rep.passed, rep.lines()


def test_interlacement_qp_small(A):
    rep = interlacement_qp_test(A, [0], [0, 1], A.G[0], 1.0, 3000, 4)
    assert rep.passed, rep.lines()


def test_binomial_z_and_dispersion():
    z = binomial_z(np.array([50, 100]), 100, np.array([0.5, 1.0]))
    np.testing.assert_allclose(z, [0.0, 0.0])
    rng = make_rng(0)
    assert abs(dispersion_index(rng.poisson(3.0, 20000)) - 1) < 0.05


def test_exact_identity_suite(A):
    assert exact_identity_suite(A).passed


def test_spine_identity_single_child_law():
    from bqp import build_model

    a = reference_model("A")
    m = build_model(a.states, a.motion, {1: 1.0})
    rep = spine_identity_test(m, [0], 2, 3, 0, None)
    assert rep.parts[0].statistic == pytest.approx(0.0, abs=1e-15)
    assert rep.passed
