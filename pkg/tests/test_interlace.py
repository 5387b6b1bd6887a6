import io
import json

import numpy as np
import pytest

from rilab import interlace as I
from rilab import potential as P
from rilab.lattice import ball_array


def test_zero_level_is_empty():
    s = I.sample_window(ball_array(3, 1), 0.0, seed=1)
    assert s.n_trajectories == 0 and not s.occupied_mask.any()
    assert len(s.vacant) == 27


def test_emptiness_matches_capacity():
    r = I.emptiness_test(ball_array(3, 1), 1.0, 20_000, seed=7)
    assert r.passed, r


def test_coupled_sweep_is_monotone():
    s = I.WindowSampler.for_points(ball_array(3, 1), u_max=2.0)
    res = s.sweep([0.5, 1.0, 2.0], 300, seed=3)
    a, b, c = (res.occupied(u) for u in (0.5, 1.0, 2.0))
    assert (a <= b).all() and (b <= c).all()
    assert (res.n_trajectories(0.5) <= res.n_trajectories(2.0)).all()


def test_results_do_not_depend_on_replicate_split():
    s = I.WindowSampler.for_points(ball_array(3, 1), u_max=1.0)
    whole = s.sweep([1.0], 20, seed=11).labels
    first = s.sweep([1.0], 8, seed=11).labels
    rest = s.sweep([1.0], 12, seed=11, first_rep=8).labels
    assert np.array_equal(whole, np.vstack([first, rest]))


def test_trajectory_counts_are_poisson():
    K = ball_array(3, 1)
    s = I.WindowSampler.for_points(K, u_max=1.0)
    res = s.sweep([1.0], 3000, seed=5)
    _, pval = I.poisson_chi_square(res.n_trajectories(1.0), P.capacity_exact(K))
    assert pval > 1e-3


def test_subwindow_restriction():
    K = ball_array(3, 1)
    s = I.WindowSampler.for_points(K, u_max=1.0)
    res = s.sweep([1.0], 20_000, seed=9)
    r = I.subwindow_emptiness(res, s.points, [0, 1, 2], 1.0)
    assert r.passed


def test_covariance_of_neighbours():
    r = I.covariance_probe((0, 0, 0), (1, 0, 0), 1.0, 40_000, seed=2)
    assert abs(r.covariance - r.theory) <= 3 * r.standard_error + 1e-3


def test_jsonl_dump():
    s = I.WindowSampler.for_points(ball_array(3, 1), u_max=1.0)
    res = s.sweep([1.0], 3, seed=1)
    buf = io.StringIO()
    I.write_samples(res.samples(s.points, 1.0, "box"), buf)
    lines = buf.getvalue().splitlines()
    assert len(lines) == 3
    obj = json.loads(lines[0])
    assert set(obj) == {"u", "window_id", "occupied_indices", "n_traj", "seed"}


def test_kill_radius_certificate():
    K = ball_array(3, 1)
    cert = I.choose_kill_radius(K, 1.0, P.capacity_exact(K))
    assert cert.certified and cert.kill_radius > 2


def test_harmonic_law_close_to_exact():
    K = ball_array(3, 1)
    exact = P.equilibrium_exact(K)
    law = I.harmonic_entrance_law(K, 20_000, seed=4)
    assert law.method == "harmonic" and law.bias_flag
    assert law.capacity == pytest.approx(exact.capacity, rel=0.05)


def test_negative_level_rejected():
    s = I.WindowSampler.for_points(ball_array(3, 1), u_max=1.0)
    with pytest.raises(ValueError):
        s.sweep([-1.0], 1, seed=0)
