import numpy as np
import pytest

from bqp import build_model, reference_model
from bqp.errors import NotSubMarkovian
from bqp.forest import UNCOLOURED, entrance_set, validate_forest
from bqp.interlacement import (
    BACKWARD_TRUNCATED,
    FORWARD_TRUNCATED,
    InterlacementSampler,
    QuasiPath,
    death_b,
    occupation_csv,
    occupation_z_scores,
    progeny_occupation_check,
    sample_branching_interlacement,
    sample_hitting_quasi_process,
)
from bqp.rng import make_rng, stream


@pytest.fixture
def A():
    return reference_model("A")


def test_quasi_path_and_death():
    p = QuasiPath((2, 1), 0, (1, 2), frozenset({FORWARD_TRUNCATED}))
    assert p.states == (2, 1, 0, 1, 2)
    cut = death_b(p)
    assert cut.states == (2, 1, 0) and FORWARD_TRUNCATED not in cut.flags
    assert death_b(cut) is cut
    f = p.as_forest()
    assert len(f) == 5 and f.roots() == [0]


def test_level_zero_is_empty(A):
    s = sample_branching_interlacement(A.G[0], A, [0], 0.0, make_rng(0))
    assert s.trees == [] and s.n_paths == 0
    assert sample_hitting_quasi_process(A.G[0], A, [0], 0.0, make_rng(0)) == []


def test_negative_level_rejected(A):
    with pytest.raises(ValueError):
        InterlacementSampler(A.G[0], A, [0]).sample(-1.0, make_rng(0))


def test_super_markovian_rejected():
    m = build_model([0], [[1.0]], {2: 1.0})
    with pytest.raises(NotSubMarkovian):
        InterlacementSampler([1.0], m, [0])


def test_paths_are_anchored_at_entrance(A):
    paths = sample_hitting_quasi_process(A.G[0] + A.G[2], A, [0], 50.0, make_rng(1))
    assert paths
    for p in paths:
        assert p.anchor == 0
        assert 0 not in p.backward
        assert BACKWARD_TRUNCATED not in p.flags


def test_number_of_paths_is_poisson(A):
    # oracle: |mu_B| for nu = g(1, .) is 10/17, so the count is Poisson(u 10/17)
    sampler = InterlacementSampler(A.G[1], A, [0])
    assert sampler.mass == pytest.approx(10 / 17, abs=1e-12)
    u = 3.0
    counts = np.array([len(sampler.paths(u, stream(5, k))) for k in range(4000)])
    lam = u * 10 / 17
    assert abs(counts.mean() - lam) < 4 * np.sqrt(lam / counts.size)
    assert abs(counts.var() / counts.mean() - 1) < 0.1


def test_trees_hit_B_and_are_uncoloured(A):
    s = sample_branching_interlacement(A.G[0], A, [0], 20.0, make_rng(2), seed=2)
    assert s.seed == 2 and s.u == 20.0
    assert len(s.trees) <= s.n_paths
    assert s.advisory["C"] == pytest.approx(965 / 306)
    for t in s.trees:
        assert validate_forest(t, tree=True) == []
        assert entrance_set(t, {0})
        assert set(t.colours) == {UNCOLOURED}


def test_progeny_occupation_matches_entrance_green(A):
    nu = A.G[0]
    sampler = InterlacementSampler(nu, A, [0])
    samples = [sampler.sample(1.0, stream(9, k)) for k in range(4000)]
    rep, target, emp, z = progeny_occupation_check(samples, A, [0], threshold=4.0)
    np.testing.assert_allclose(target, A.G[0], atol=1e-12)  # entrance measure is delta_0
    assert rep.passed, (emp, z)


def test_progeny_check_vacuous_at_zero(A):
    s = sample_branching_interlacement(A.G[0], A, [0], 0.0, make_rng(0))
    rep, *_ = progeny_occupation_check(s, A, [0])
    assert rep.passed and "vacuous" in rep.notes


def test_z_scores_and_csv():
    z = occupation_z_scores([10.0, 0.0, 1.0], [25.0, 0.0, 0.0], 2.0, [4.0, 0.0, 0.0])
    np.testing.assert_allclose(z[:2], [0.4, 0.0])
    assert np.isinf(z[2])
    text = occupation_csv(["a", "b"], [1.0, 2.0], [1.0, 2.5], [0.0, -1.0])
    assert text.splitlines() == ["state,empirical_occupation,exact_target,z_score",
                                 "a,1,1,0", "b,2,2.5,-1"]
