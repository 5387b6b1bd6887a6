import io

import numpy as np
import pytest

from rilab import lattice as L


def test_sphere_sizes_match_formula():
    for d in (2, 3, 4):
        for R in range(0, 5):
            assert len(L.sphere(L.origin(d), R)) == L.sphere_size(d, R)


def test_sphere_is_sup_norm_level_set():
    pts = L.sphere_array(3, 3, (1, -2, 0))
    assert (np.abs(pts - [1, -2, 0]).max(axis=1) == 3).all()
    assert len(np.unique(pts, axis=0)) == len(pts)


def test_chebyshev_and_dimension_check():
    assert L.chebyshev((0, 0, 0), (3, -5, 1)) == 5
    with pytest.raises(L.DimensionMismatch):
        L.add((0, 0), (1, 1, 1))


def test_frame_is_planar_ring():
    f = L.frame((0, 0, 0), 4)
    assert len(f) == 8 * 3
    assert all(p[2] == 0 and max(abs(p[0]), abs(p[1])) == 3 for p in f)
    assert set().union(*L.frame_sticks((0, 0, 0), 4)) == f
    with pytest.raises(ValueError):
        L.frame((0, 0, 1), 3)
    assert L.frame((0, 0, 0), 1) == {(0, 0, 0)}


def test_stick():
    assert L.stick(3, 2) == {(1, 0), (2, 0), (3, 0)}
    with pytest.raises(ValueError):
        L.stick(0, 3)


def test_scale_ladder():
    lad = L.ScaleLadder(2)
    assert lad.levels(3) == [2, 12, 72, 432]
    with pytest.raises(ValueError):
        L.ScaleLadder(0)


def test_path_connectivity_is_enforced():
    L.PathTrace(np.array([[0, 0], [1, 1], [2, 1]]), "star_connected")
    with pytest.raises(ValueError):
        L.PathTrace(np.array([[0, 0], [1, 1]]), "nearest_neighbor")


def test_path_roundtrip_and_crossing():
    p = L.PathTrace(np.array([[i, 0, 0] for i in range(0, 13)]), "nearest_neighbor")
    buf = io.StringIO()
    L.write_paths([p], buf)
    buf.seek(0)
    (q,) = L.read_paths(buf)
    assert np.array_equal(q.sites, p.sites) and q.kind == p.kind
    assert L.crosses_annulus(p, (0, 0, 0), 5, 12)
    assert not L.crosses_annulus(p, (0, 0, 0), 5, 13)


def test_point_json():
    assert L.point_from_json(L.point_to_json((1, -2, 3))) == (1, -2, 3)
