"""Acceptance criteria, one check per criterion.

Every criterion runs once; its verdict line is collected and printed in the
terminal summary, so `pytest -v` shows one PASS/FAIL line per criterion.
"""
import pytest

from rilab.experiments.acceptance import run_criterion
from rilab.experiments.config import ExperimentConfig

CONFIG = ExperimentConfig(seed=20240)

# runtime ceilings in seconds, per criterion
BUDGET = {1: 600, 2: 60, 3: 600, 4: 300, 5: 300, 6: 300, 7: 120, 8: 1800, 9: 3600, 10: 600}

_cache = {}


def result(number):
    if number not in _cache:
        _cache[number] = run_criterion(number, CONFIG)
        pytest.acceptance_lines[number] = _cache[number].line()
    return _cache[number]


def check(number):
    r = result(number)
    assert r.passed, r.line()
    if number in BUDGET:
        assert r.seconds <= BUDGET[number], f"criterion {number} took {r.seconds:.0f} s"


def test_green_backends_agree():
    check(1)


def test_equilibrium_identity():
    check(2)


def test_window_emptiness_law():
    check(3)


def test_embedding_counts():
    check(4)


def test_extraction_from_crossing_paths():
    check(5)


def test_leaf_capacity_lower_bound():
    check(6)


def test_frame_and_stick_capacity():
    check(7)


def test_escape_chain_and_domination_bounds():
    r = result(8)
    assert r.details["bounds_ok"], r.line()
    assert all(p < 1 for p in r.details["supplementary_p"])
    assert r.seconds <= BUDGET[8]


@pytest.mark.xfail(strict=True, reason="p = 12 (C/c) / L0 exceeds 1 at L0 = 200 with the computed "
                                       "constants; p < 1 needs L0 >= 333")
def test_p_below_one_at_L0_200():
    assert result(8).details["p_below_one_at_200"]


def test_crossing_bounds_one_sided():
    check(9)


def test_planar_duality():
    check(10)


def test_bound_report():
    check(11)
