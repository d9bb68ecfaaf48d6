from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bqp import reference_model
from bqp.acceptance import riesz_toy_model
from bqp.errors import NotExcessive, ZeroMassState
from bqp.potential import (
    AvoidingAdjoint,
    KuznetsovSampler,
    adjoint_kernel,
    entrance_family,
    entrance_family_check,
    entrance_measure,
    excessive_to_occupation,
    is_excessive,
    occupation_to_excessive,
    passage_matrix,
    potential_of,
    riesz_decomposition,
    spine_occupation,
    taboo_return_kernel,
)
from bqp.rng import make_rng


@pytest.fixture
def A():
    return reference_model("A")


def test_green_rows_are_excessive_with_unit_charge(A):
    for x in range(3):
        ok, slack = is_excessive(A.G[x], A)
        assert ok
        np.testing.assert_allclose(slack, np.eye(3)[x], atol=1e-12)


def test_non_excessive_measure_rejected(A):
    ok, slack = is_excessive([0.0, 1.0, 0.0], A)
    assert not ok and slack.min() < 0
    with pytest.raises(NotExcessive):
        riesz_decomposition([0.0, 1.0, 0.0], A)
    with pytest.raises(NotExcessive):
        entrance_measure([0.0, 1.0, 0.0], A, [0])


def test_adjoint_kernel_of_green_row(A):
    hat = adjoint_kernel(A.G[0], A)
    assert hat[0, 1] == pytest.approx(8 / 17, abs=1e-12)
    # rows sum to 1 - delta_0(x) / nu(x) for a Green row g(0, .)
    expected = 1 - np.eye(3)[0] / A.G[0]
    np.testing.assert_allclose(hat.sum(axis=1), expected, atol=1e-12)
    with pytest.raises(ZeroMassState):
        adjoint_kernel([1.0, 0.0, 1.0], A)


def test_taboo_kernel_and_passage(A):
    assert taboo_return_kernel(A, [0])[0, 0] == pytest.approx(8 / 17, abs=1e-12)
    W = passage_matrix(A, [0])
    np.testing.assert_allclose(W[:, 0], [1, 10 / 17, 8 / 17], atol=1e-12)
    # with B = everything, Q^B is Q itself
    np.testing.assert_allclose(taboo_return_kernel(A, [0, 1, 2]), A.Q, atol=1e-15)


def test_taboo_kernel_by_path_enumeration(A):
    # oracle: sum over excursions 0 -> (1|2)^k -> 0 by brute-force matrix powers
    Q = np.asarray(A.Q)
    Qcc = Q[1:, 1:]
    total = Q[0, 0]
    power = np.eye(2)
    for _ in range(3000):
        total += Q[0, 1:] @ power @ Q[1:, 0]
        power = power @ Qcc
    assert taboo_return_kernel(A, [0])[0, 0] == pytest.approx(total, abs=1e-12)


@pytest.mark.parametrize("x, expected", [(0, 1.0), (1, 10 / 17), (2, 8 / 17)])
def test_entrance_measure_of_green_rows(A, x, expected):
    mu = entrance_measure(A.G[x], A, [0])
    np.testing.assert_allclose(mu, [expected, 0, 0], atol=1e-12)


def test_entrance_measure_recovers_nu_on_B(A):
    nu = A.G[0] + 2 * A.G[2]
    mu = entrance_measure(nu, A, [0, 1])
    np.testing.assert_allclose(mu[[0, 1]] @ A.G[np.ix_([0, 1], [0, 1])], nu[[0, 1]], atol=1e-12)


def test_entrance_family_consistency(A):
    fam = entrance_family(A.G[1], A, [[0], [0, 1], [0, 1, 2]])
    rep = entrance_family_check(fam, A)
    assert rep.passed and rep.statistic < 1e-12
    np.testing.assert_allclose(fam.measures[-1], np.eye(3)[1], atol=1e-12)


def test_riesz_decomposition_pure_potential(A):
    rp = riesz_decomposition(A.G[0] + 3 * A.G[2], A)
    np.testing.assert_allclose(rp.pot, [1, 0, 3], atol=1e-12)
    np.testing.assert_allclose(rp.inv, 0, atol=1e-12)


def test_riesz_decomposition_with_invariant_part():
    toy = riesz_toy_model()
    nu = potential_of([1.0, 0, 0, 0], toy) + [0, 0, 2.0, 2.0]
    rp = riesz_decomposition(nu, toy)
    np.testing.assert_allclose(rp.inv, [0, 0, 2, 2], atol=1e-12)
    np.testing.assert_allclose(rp.pot, [1, 0, 0, 0], atol=1e-12)
    # the charge lives on the transient pair where G is finite
    np.testing.assert_allclose(potential_of([1.0, 0, 0, 0], toy), [4 / 3, 2 / 3, 0, 0], atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0, 5), min_size=3, max_size=3))
def test_riesz_round_trip_property(charge):
    A = reference_model("A")
    nu = potential_of(charge, A)
    rp = riesz_decomposition(nu, A)
    np.testing.assert_allclose(rp.pot, charge, atol=1e-9)
    np.testing.assert_allclose(rp.inv, 0, atol=1e-9)


def test_occupation_excessive_round_trip(A):
    for B in ([0], [0, 1]):
        for nu in (A.G[0], A.G[1], A.G[0] + 2 * A.G[2]):
            mu = excessive_to_occupation(nu, A, B)
            np.testing.assert_allclose(occupation_to_excessive(mu, A, B), nu, atol=1e-12)


def test_spine_occupation_against_simulation(A):
    # oracle: h(x) times the expected visits of the p^h chain, by simulation
    from bqp.bmc import sample_spine

    rng = make_rng(7)
    visits = np.zeros(3)
    n = 20000
    for _ in range(n):
        for s in sample_spine(A, [0], 2, rng).states:
            visits[s] += 1
    expected = spine_occupation(A, [0], 2)
    h2 = 8 / 17
    assert expected[0] == pytest.approx(h2, abs=1e-12)  # exactly one visit to B
    np.testing.assert_allclose(h2 * visits / n, expected, rtol=0.03)


def test_avoiding_adjoint_never_visits_B(A):
    aa = AvoidingAdjoint(A.G[1], A, [0])
    rng = make_rng(3)
    for _ in range(200):
        back, died = aa.walk(1, rng, 1000)
        assert died
        assert 0 not in back


def test_kuznetsov_sampler_anchor_law(A):
    nu = A.G[1]
    ks = KuznetsovSampler(nu, A, [0])
    assert ks.mass == pytest.approx(10 / 17, abs=1e-12)
    rng = make_rng(11)
    paths = [ks(rng) for _ in range(300)]
    assert all(p.anchor == 0 for p in paths)
    assert all(0 not in p.backward for p in paths)


def test_entrance_measure_exact_fraction_oracle():
    # hand computation in exact arithmetic for nu = g(1, .), B = {0}
    Q = [[F(0), F(4, 5), F(0)], [F(2, 5), F(0), F(2, 5)], [F(0), F(4, 5), F(0)]]
    # h(1) = Q(1,0) + Q(1,2) h(2), h(2) = Q(2,1) h(1)
    h1 = Q[1][0] / (1 - Q[1][2] * Q[2][1])
    QB = Q[0][1] * h1
    assert QB == F(8, 17)
    nu0 = F(10, 9)
    A = reference_model("A")
    assert entrance_measure(A.G[1], A, [0])[0] == pytest.approx(float(nu0 * (1 - QB)), abs=1e-13)
