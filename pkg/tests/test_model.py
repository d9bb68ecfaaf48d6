from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bqp import (
    OffspringLaw,
    build_model,
    green_function,
    h_function,
    h_transform_kernel,
    intensity_operator,
    reference_model,
    size_biased_law,
    spectral_radius,
)
from bqp.errors import (
    DimensionMismatch,
    DivergentGreen,
    EmptyStateSpace,
    InvalidOffspringLaw,
    MissingOffspringLaw,
    NotNormingRegion,
    RowSumViolation,
    UnknownState,
    ZeroMeanOffspring,
)


def neumann(Q, terms=4000):
    """Oracle: partial sums of I + Q + Q^2 + ..."""
    total = np.eye(len(Q))
    power = np.eye(len(Q))
    for _ in range(terms):
        power = power @ Q
        total += power
    return total


@pytest.fixture
def A():
    return reference_model("A")


def test_offspring_law_moments():
    law = OffspringLaw({0: 0.6, 2: 0.4})
    assert law.mean == pytest.approx(0.8)
    assert law.second_moment == pytest.approx(1.6)
    assert law.counts == (0, 2)


def test_offspring_law_draw_inverts_cdf():
    law = OffspringLaw({0: 0.25, 1: 0.5, 3: 0.25})
    assert [law.draw(u) for u in (0.0, 0.2499, 0.25, 0.74, 0.75, 0.999)] == [0, 0, 1, 1, 3, 3]


@pytest.mark.parametrize("bad", [{}, {-1: 1.0}, {0: 0.5, 1: 0.4}, {0: float("nan"), 1: 1.0}])
def test_offspring_law_rejects(bad):
    with pytest.raises(InvalidOffspringLaw):
        OffspringLaw(bad)


def test_size_biased_law():
    assert size_biased_law({0: 0.6, 2: 0.4}).as_dict() == pytest.approx({2: 1.0})
    sb = size_biased_law({1: 0.5, 2: 0.5})
    assert sb.as_dict() == pytest.approx({1: 1 / 3, 2: 2 / 3})
    with pytest.raises(ZeroMeanOffspring):
        size_biased_law({0: 1.0})


def test_intensity_operator(A):
    expected = 0.8 * np.array([[0, 1, 0], [0.5, 0, 0.5], [0, 1, 0]])
    np.testing.assert_allclose(intensity_operator(A), expected, atol=1e-15)


def test_green_function_model_a_exact(A):
    G = green_function(A)
    expected = np.array([[17, 20, 8], [10, 25, 10], [8, 20, 17]]) / 9
    np.testing.assert_allclose(G, expected, atol=1e-12)
    np.testing.assert_allclose((np.eye(3) - A.Q) @ G, np.eye(3), atol=1e-12)


def test_green_function_matches_neumann_series(A):
    np.testing.assert_allclose(green_function(A), neumann(A.Q), atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 5).flatmap(lambda n: st.tuples(
    st.just(n),
    st.lists(st.floats(0.05, 1.0), min_size=n * n, max_size=n * n),
    st.floats(0.1, 0.9))))
def test_green_function_random_subcritical(data):
    n, raw, m = data
    P = np.array(raw).reshape(n, n)
    P /= P.sum(axis=1, keepdims=True)
    model = build_model(range(n), P, {0: 1 - m / 2, 2: m / 2})
    np.testing.assert_allclose(model.G, neumann(model.Q, 600), atol=1e-8)
    assert spectral_radius(model.Q) == pytest.approx(m, abs=1e-6)


def test_critical_model_diverges():
    with pytest.raises(DivergentGreen):
        green_function(reference_model("B"))
    assert reference_model("B").spectral_radius == pytest.approx(1.0)


def test_spectral_radius_reducible():
    Q = np.array([[0.5, 0.3], [0.0, 0.2]])
    assert spectral_radius(Q) == pytest.approx(0.5, abs=1e-8)


def test_h_function_model_a(A):
    h = h_function(A, [0])
    assert h[1] == pytest.approx(float(Fraction(10, 17)), abs=1e-12)
    assert h[2] == pytest.approx(float(Fraction(8, 17)), abs=1e-12)
    assert h[0] == 1.0
    np.testing.assert_allclose((A.Q @ h)[1:], h[1:], atol=1e-12)


def test_h_is_expected_entrance_count(A):
    # oracle: E^x[#H_B] = sum_{z in B} W(x, z) with W from a truncated path sum
    Qcc = A.Q[1:, 1:]
    W = np.linalg.matrix_power(np.eye(2) - Qcc, -1) @ A.Q[1:, :1]
    np.testing.assert_allclose(h_function(A, [0])[1:], W[:, 0], atol=1e-12)


def test_h_transform_is_stochastic_off_B(A):
    ph = h_transform_kernel(A, [0])
    np.testing.assert_allclose(ph[1:].sum(axis=1), 1.0, atol=1e-12)
    assert not ph[0].any()
    assert ph[1, 0] == pytest.approx(0.68)
    assert ph[2, 1] == pytest.approx(1.0)


def test_h_with_whole_space_B(A):
    np.testing.assert_array_equal(h_function(A, [0, 1, 2]), np.ones(3))


def test_not_norming_region():
    P = [[1, 0], [0, 1]]
    m = build_model([0, 1], P, {0: 0.5, 1: 0.5})
    with pytest.raises(NotNormingRegion) as info:
        h_function(m, [0])
    assert info.value.unreachable == [1]


def test_single_child_h_exists_without_green():
    a = reference_model("A")
    d = build_model(a.states, a.motion, {1: 1.0}, B=[0])
    with pytest.raises(DivergentGreen):
        d.G
    np.testing.assert_allclose(h_function(d, [0]), 1.0)


def test_build_model_validation():
    with pytest.raises(EmptyStateSpace):
        build_model([], [], {1: 1})
    with pytest.raises(RowSumViolation) as info:
        build_model(["a", "b"], [[0.5, 0.4], [0, 1]], {1: 1})
    assert info.value.row == "a"
    with pytest.raises(DimensionMismatch):
        build_model([0, 1], [[1.0]], {1: 1})
    with pytest.raises(MissingOffspringLaw):
        build_model([0, 1], [[0, 1], [1, 0]], {0: {1: 1.0}})
    with pytest.raises(UnknownState):
        build_model([0, 1], {(0, 2): 1.0}, {1: 1})
    with pytest.raises(UnknownState):
        build_model([0, 1], [[0, 1], [1, 0]], {1: 1}, B=[5])


def test_build_model_from_triplets_and_labels():
    m = build_model(["x", "y"], {("x", "y"): 1.0, ("y", "x"): 1.0}, {"x": {0: 1.0}, "y": {2: 1.0}})
    assert m.index("y") == 1
    np.testing.assert_allclose(m.Q, [[0, 0], [2, 0]])
    assert not m.is_sub_markovian


def test_model_arrays_are_read_only(A):
    with pytest.raises(ValueError):
        A.Q[0, 0] = 1.0
