import numpy as np
import pytest

from rilab import renorm as T
from rilab.lattice import ScaleLadder


def test_tree_indexing():
    assert [T.node_bits(i) for i in range(7)] == ["", "1", "2", "11", "12", "21", "22"]
    assert all(T.node_index(T.node_bits(i)) == i for i in range(31))
    assert T.rho("111", "112") == 1 and T.rho("111", "211") == 3


def test_tree_sphere_sizes():
    assert sorted(T.tree_sphere("111", 3)) == ["211", "212", "221", "222"]
    for k in range(1, 4):
        assert len(T.tree_sphere("121", k)) == 2 ** (k - 1)


def test_count_formula():
    assert T.constant_C(2) == 4608
    assert T.count_formula(1, 3) == 2_994_628
    assert T.count_from_branching(2, 2) == T.count_formula(2, 2)


def test_enumeration_small():
    assert T.enumeration_count(1, (0, 0), 2) == 4608
    assert T.enumeration_count(0, (0, 0), 2) == 1


def test_random_embedding_is_proper():
    for seed in range(5):
        e = T.random_embedding(3, (0, 0, 0), 3, seed)
        assert T.validate(e).valid and T.separation_check(e)
        assert T.separation_bruteforce(e)


def test_validation_reports_condition():
    e = T.random_embedding(1, (0, 0), 2, 0)
    pts = e.points.copy()
    pts[1] += 1
    v = T.validate(T.ProperEmbedding(1, 1, pts))
    assert not v.valid and v.condition in (2, 3)


def test_embedding_json_roundtrip():
    e = T.random_embedding(2, (0, 0, 0), 3, 1, L0=2)
    f = T.ProperEmbedding.from_json(e.to_json())
    assert np.array_equal(e.points, f.points) and f.L0 == 2


def test_extraction_from_random_paths():
    for i in range(12):
        n = 1 + i % 2
        kind = "nearest_neighbor" if i % 2 else "star_connected"
        path = T.random_crossing_path((0, 0, 0), n, 1, i, kind)
        e = T.extract_embedding(path, (0, 0, 0), n, 1)
        assert T.validate(e).valid and T.leaf_spheres_met(e, path) and T.separation_check(e)


def test_extraction_needs_crossing():
    from rilab.lattice import PathTrace
    short = PathTrace(np.array([[0, 0, 0], [1, 0, 0]]), "nearest_neighbor")
    with pytest.raises(T.NoCrossing):
        T.extract_embedding(short, (0, 0, 0), 1, 1)


def test_leaf_capacity_and_green_sum():
    from rilab.green import reference_constants
    C = reference_constants(3).C_hat
    e = T.random_embedding(2, (0, 0, 0), 3, 3)
    cap, lower = T.leaf_capacity_check(e, C_hat=C)
    assert cap >= lower
    assert T.green_sum_check(e, C_hat=C) <= 2.5 * C


def test_parameters():
    from rilab.green import reference_constants
    nc = reference_constants(4)
    assert T.p_parameter(200, 4, nc.c_hat, nc.C_hat) > 1
    assert T.p_parameter(400, 4, nc.c_hat, nc.C_hat) < 1
    assert T.q_parameter(T.q_threshold(4, nc.C_hat), 4, nc.C_hat) == pytest.approx(1.0)
    big = T.admissible_L0(3, *(lambda c: (c.c_hat, c.C_hat))(reference_constants(3)))
    assert big > 10**1000


def test_chernoff_needs_small_p():
    from rilab.green import reference_constants
    nc = reference_constants(4)
    with pytest.raises(ValueError):
        T.chernoff_bound_eval(0.1, 200, 4, nc.c_hat, nc.C_hat)
    assert T.chernoff_bound_eval(1e-6, 1000, 4, nc.c_hat, nc.C_hat) > 0


def test_escape_chain_small():
    e = T.random_planar_embedding(1, (0, 0, 0, 0), 4, 1, L0=10)
    r = T.escape_chain_check(e, 0)
    assert 0 < r.probability < 1 and r.method == "exact"


def test_domination_small():
    e = T.random_planar_embedding(1, (0, 0, 0, 0), 4, 2, L0=10)
    rep = T.domination_check(e, 2000, seed=1)
    assert rep.survival[0] == 1.0
    assert not rep.flagged


def test_frames_disjoint():
    e = T.random_planar_embedding(2, (0, 0, 0), 3, 5, L0=3)
    assert T.embedding_frames_pairwise_disjoint(e)
    assert ScaleLadder(3)[2] == 108
