import numpy as np
import pytest

from rilab import green as G
from rilab import potential as P
from rilab.lattice import ball_array, frame_array, stick_array


def test_single_point_capacity():
    assert P.capacity_exact([(0, 0, 0)]) == pytest.approx(1 / 1.516386059152, rel=1e-10)


def test_translation_invariance():
    K = ball_array(3, 1)
    assert P.capacity_exact(K + [5, -3, 2]) == pytest.approx(P.capacity_exact(K), rel=1e-12)


def test_identity_residual_and_weights(rng):
    table = G.reference_table(3)
    for _ in range(20):
        K = rng.integers(-4, 5, size=(int(rng.integers(1, 12)), 3))
        m = P.equilibrium_exact(K, table)
        pts = m.points
        assert np.abs(table.pairwise(pts) @ m.weights - 1).max() < 1e-8
        assert (m.weights >= 0).all()


def test_sandwich_and_monotone():
    K = ball_array(3, 1)
    lo, hi = P.capacity_bounds_sandwich(K)
    assert lo <= P.capacity_exact(K) <= hi
    assert P.check_monotonicity(K[:5], K)
    assert P.check_subadditivity(K[:10], K[10:])


def test_solver_cap_and_json():
    with pytest.raises(P.SolverCapExceeded):
        P.equilibrium_exact(ball_array(3, 2), solver_cap=10)
    m = P.equilibrium_exact(stick_array(4, 3))
    assert P.EquilibriumMeasure.from_json(m.to_json()).capacity == pytest.approx(m.capacity)


def test_hitting_probability_below_bound():
    K = ball_array(3, 1)
    exact, bound = P.hitting_bound((4, 0, 0), K)
    assert 0 < exact <= bound


def test_escape_mc_matches_capacity():
    est = P.escape_mc((0, 0, 0), [(0, 0, 0)], 100_000, 200, seed=3)
    assert abs(est.estimate - 1 / 1.516386059152) <= est.error_bound


def test_hitting_mc_matches_exact():
    K = ball_array(3, 1)
    exact, _ = P.hitting_bound((4, 0, 0), K)
    est = P.hitting_mc((4, 0, 0), K, 50_000, 400, seed=5)
    assert abs(est.estimate - exact) <= est.error_bound


def test_frame_and_stick_bounds_hold():
    for d in (3, 4):
        c = G.reference_constants(d).c_hat
        for L in (2, 3):
            assert P.capacity_exact(frame_array((0,) * d, L)) <= P.frame_capacity_bound(L, d, c)
        assert P.capacity_exact(stick_array(10, d)) <= P.stick_capacity_bound(10, d, c)
