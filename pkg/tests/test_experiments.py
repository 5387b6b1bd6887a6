import json

import numpy as np
import pytest

from rilab.cli import main, parse_set
from rilab.experiments.bounds import bound_report
from rilab.experiments.config import ConfigError, ExperimentConfig, load_config, worker_count
from rilab.experiments.crossing import (MemoryGuard, WindowTooSmall, duality_audit, estimate_A,
                                        estimate_B, has_crossing, annulus_masks)
from rilab.experiments.suite import run_suite


def test_config_validation(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig(dim=2)
    with pytest.raises(ConfigError):
        ExperimentConfig(u=-1.0)
    with pytest.raises(ConfigError):
        ExperimentConfig(green_table=str(tmp_path / "missing.json"))
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"dim": 4, "u": [0.5, 1.0], "reps": 7}))
    cfg = load_config(path, reps=9)
    assert cfg.dim == 4 and cfg.u_values == (0.5, 1.0) and cfg.reps == 9
    assert cfg.digest() == load_config(path, reps=9).digest()


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("INTERLACE_THREADS", "1")
    assert worker_count() == 1
    monkeypatch.setenv("INTERLACE_THREADS", "x")
    with pytest.raises(ConfigError):
        worker_count()


def test_crossing_detection_on_fixed_patterns():
    region, inner, outer = annulus_masks(2, 2, 6)
    everything = np.ones_like(region)
    assert has_crossing(everything, region, inner, outer, star=False)
    assert not has_crossing(~everything, region, inner, outer, star=False)
    diag = np.eye(13, dtype=bool)
    assert has_crossing(diag, region, inner, outer, star=True)
    assert not has_crossing(diag, region, inner, outer, star=False)


def test_duality_trivial_cases():
    side = 25
    vac = duality_audit(np.zeros((side, side), bool), 1, 1)
    assert vac.vacant_crossing and not vac.occupied_circuit
    occ = duality_audit(np.ones((side, side), bool), 1, 1)
    assert occ.occupied_circuit and not occ.vacant_crossing
    with pytest.raises(WindowTooSmall):
        duality_audit(np.zeros((11, 11), bool), 1, 1)


def test_duality_corner_cut():
    # ring one step outside the inner sphere plus a diagonal shortcut at a vacant corner
    L = 6
    side = 4 * L + 1
    c = 2 * L
    occ = np.zeros((side, side), bool)
    r = L - 1
    for a in range(-r, r + 1):
        for b in (-r, r):
            occ[c + a, c + b] = occ[c + b, c + a] = True
    occ[c + r, c + r] = False
    res = duality_audit(occ, 1, 1)
    assert res.complementary and res.vacant_crossing


def test_duality_random_bernoulli():
    g = np.random.default_rng(0)
    for _ in range(300):
        occ = g.random((25, 25)) < g.uniform(0.2, 0.8)
        assert duality_audit(occ, 1, 1).complementary


def test_estimate_A_basic():
    cfg = ExperimentConfig(dim=3, reps=10)
    est = estimate_A([0.0, 1.0, 4.0], 1, cfg, seed=1, workers=1)
    assert est.probability[0] == 1.0
    assert np.all(np.diff(est.probability) <= 0)
    with pytest.raises(ValueError):
        estimate_A(1.0, 1, cfg.with_overrides(L0=2), seed=1)
    with pytest.raises(MemoryGuard):
        estimate_A(1.0, 3, cfg, seed=1)


def test_estimate_B_basic():
    cfg = ExperimentConfig(dim=3, reps=20)
    est = estimate_B([0.0, 0.5, 3.0], 1, np.zeros(3, int), cfg, seed=2, workers=1)
    assert est.probability[0] == 0.0
    assert np.all(np.diff(est.probability) >= 0)
    with pytest.raises(ValueError):
        estimate_B(1.0, 1, np.array([0, 0, 1]), cfg, seed=1)


def test_bound_report_shape():
    rep = bound_report(3)
    d = rep.to_dict()
    assert d["C_2"] == 4608 and d["C_d"] == 2_994_628
    assert rep.consistent
    assert rep.upper_bound == pytest.approx(2.5 * rep.C_hat * np.log(2_994_628), rel=1e-12)
    assert bound_report(3).to_json() == rep.to_json()


def test_suite_is_deterministic(tmp_path):
    cfg = ExperimentConfig(dim=3, u=(0.5, 2.0), reps=8, experiments=("bounds", "crossing-b", "duality"))
    a = run_suite(cfg, tmp_path / "a")
    b = run_suite(cfg, tmp_path / "b")
    assert a.exit_status == 0
    assert a.csv_path.read_bytes() == b.csv_path.read_bytes()
    header = a.csv_path.read_text().splitlines()[0]
    assert header == "experiment,dim,u,L0,n,reps,estimate,stderr,bound,flag,seed"
    mirror = json.loads(a.json_path.read_text())
    assert mirror["config_digest"] == cfg.digest() and "timestamp" in mirror


def test_suite_records_failures(tmp_path):
    cfg = ExperimentConfig(dim=3, reps=2, experiments=("nonsense", "bounds"))
    res = run_suite(cfg, tmp_path)
    assert res.failures == ["nonsense"] and res.exit_status == 1
    assert [o.name for o in res.outcomes] == ["nonsense", "bounds"]


def test_cli_commands(tmp_path, capsys):
    assert len(parse_set("box:3", 3)) == 27
    assert main(["cap", "--set", "box:2", "--dim", "3", "--out", str(tmp_path / "m.json")]) == 0
    assert json.loads((tmp_path / "m.json").read_text())["capacity"] > 0
    assert main(["embed", "count", "--dim", "2", "--depth", "1"]) == 0
    assert main(["embed", "check", "--depth", "2", "--seed", "1"]) == 0
    assert main(["bounds", "--dim", "5"]) == 0
    assert main(["green", "--dim", "3", "--radius", "4", "--backend", "quadrature",
                 "--out", str(tmp_path / "g.json")]) == 0
    assert main(["cap", "--set", "[[0,0,0],[2,0,0]]", "--dim", "3", "--green", str(tmp_path / "g.json")]) == 0
    assert main(["sample", "--dim", "3", "--window", "box:2", "--u", "1.0", "--reps", "200"]) == 0
    assert main(["duality", "--dim", "3", "--u", "0.5", "1.0", "--reps", "20"]) == 0
    capsys.readouterr()


def test_cli_config_error(tmp_path):
    with pytest.raises(SystemExit):
        main(["duality", "--green", str(tmp_path / "nope.json")])
