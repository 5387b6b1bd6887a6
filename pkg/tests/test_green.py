import numpy as np
import pytest

from rilab import green as G


def test_quadrature_origin_values():
    # g(0) = 1 / (escape probability of the origin); independent closed-form values
    assert G.heat_kernel(3).evaluate_canonical(np.zeros((1, 3), int))[0] == pytest.approx(1.516386059152, abs=1e-10)
    assert G.heat_kernel(4).evaluate_canonical(np.zeros((1, 4), int))[0] == pytest.approx(1.239467121848, abs=1e-10)


def test_solve_is_harmonic_and_matches_quadrature():
    for d in (3, 4):
        table, report = G.green_solve(d)
        assert G.harmonicity_residual(table) < 1e-10
        assert max(report.residuals) < 1e-10
        cv = G.cross_validate(table, G.reference_table(d))
        assert cv["agree"], cv


def test_solve_rejects_small_radius():
    with pytest.raises(ValueError):
        G.green_solve(3, radius=6, table_radius=6)


def test_mc_agrees_with_reference():
    res = G.green_mc_table(3, 2, 200_000, 300, seed=4)
    cv = G.cross_validate(res.table, G.reference_table(3), 2)
    assert cv["agree"], cv


def test_mc_standard_error_scales_with_walks():
    a = G.green_mc_table(3, 1, 40_000, 100, seed=1).standard_errors[0, 0, 0]
    b = G.green_mc_table(3, 1, 160_000, 100, seed=2).standard_errors[0, 0, 0]
    assert a / b == pytest.approx(2.0, rel=0.15)


def test_table_lookup_and_far_field():
    t = G.reference_table(3)
    assert t((1, -2, 0)) == t((2, 1, 0)) == t((0, 1, -2))
    far = (40, 3, 0)
    assert t(far) == pytest.approx(G.heat_kernel(3)(np.array([far]))[0])
    bare = G.GreenTable(t.dim, t.radius, t.values, t.errors, t.methods)
    with pytest.raises(G.MissingGreenEntry):
        bare(far)


def test_json_roundtrip(tmp_path):
    t = G.quadrature_table(3, 4)
    path = tmp_path / "g.json"
    t.save(path)
    u = G.GreenTable.load(path)
    assert np.array_equal(u.values, t.values) and u.radius == 4


def test_norm_constants():
    nc = G.reference_constants(3)
    g0 = G.reference_table(3).at((0, 0, 0))
    assert nc.c_hat <= g0 <= nc.C_hat
    with pytest.raises(G.IncompleteTable):
        G.norm_constants(G.quadrature_table(3, 4), 10)


def test_pairwise_symmetric():
    pts = np.array([[0, 0, 0], [3, 1, 0], [-2, 5, 7]])
    M = G.reference_table(3).pairwise(pts)
    assert np.allclose(M, M.T)
    assert M[0, 0] == pytest.approx(1.516386059152, abs=1e-10)
