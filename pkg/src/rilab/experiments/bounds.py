"""Numerical evaluation of the two-sided bound on the critical level u_*.

    c_hat / L0 / C_2 * 2^-(d+5)  <=  u_*  <=  2.5 C_hat ln(C_d)

with L0 the smallest admissible base scale.  In d = 3 that scale is
exp(48 (C_hat/c_hat) C_2), far beyond floating point, so it is carried as an
mpmath number and printed in magnitude notation.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import mpmath

from ..green import GreenTable, norm_constants, reference_table
from ..renorm import constant_C, lower_threshold, p_parameter, admissible_L0, q_parameter, q_threshold

DIGITS = 12
P_TABLE_L0 = (10, 100, 200, 400, 1000)
Q_TABLE_FACTORS = (0.5, 1.0, 1.5, 2.0, 3.0)


def magnitude(x) -> str:
    """Fixed-precision string for mpmath or float values, stable across runs."""
    return mpmath.nstr(mpmath.mpf(x), DIGITS, min_fixed=-4, max_fixed=12)


@dataclass(frozen=True)
class BoundReport:
    dim: int
    c_hat: float
    C_hat: float
    scan_radius: int
    C_2: int
    C_d: int
    L0_min: object
    p_at_L0_min: object
    lower_bound: object
    upper_bound: float
    q_table: tuple[tuple[float, float], ...]
    p_table: tuple[tuple[int, float], ...]

    @property
    def consistent(self) -> bool:
        lo = mpmath.mpf(self.lower_bound)
        return bool(mpmath.isfinite(lo) and lo > 0 and math.isfinite(self.upper_bound)
                    and 0 < self.upper_bound and lo < self.upper_bound)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "c_hat": magnitude(self.c_hat),
            "C_hat": magnitude(self.C_hat),
            "scan_radius": self.scan_radius,
            "C_2": self.C_2,
            "C_d": self.C_d,
            "L0_min": magnitude(self.L0_min),
            "log10_L0_min": magnitude(mpmath.log10(mpmath.mpf(self.L0_min))),
            "p_at_L0_min": magnitude(self.p_at_L0_min),
            "lower_bound": magnitude(self.lower_bound),
            "upper_bound": magnitude(self.upper_bound),
            "q_table": [{"u": magnitude(u), "q": magnitude(q)} for u, q in self.q_table],
            "p_table": [{"L0": L, "p": magnitude(p)} for L, p in self.p_table],
            "consistent": self.consistent,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)


def bound_report(dim: int, green_table: GreenTable | None = None, scan_radius: int = 10) -> BoundReport:
    """Evaluate both sides of the bound and the q and p tables from the table's own constants."""
    if dim < 3:
        raise ValueError("the bound concerns d >= 3")
    if scan_radius < 10:
        raise ValueError("scan_radius must be at least 10")
    table = reference_table(dim, scan_radius) if green_table is None else green_table
    if table.dim != dim:
        raise ValueError(f"green table is for d={table.dim}")
    nc = norm_constants(table, scan_radius)
    c, C = nc.c_hat, nc.C_hat
    L0 = admissible_L0(dim, c, C)
    with mpmath.workdps(30):
        lower = lower_threshold(dim, L0, c)
        p_star = p_parameter(mpmath.mpf(L0), dim, c, C)
    upper = q_threshold(dim, C)
    q_tab = tuple((f * upper, q_parameter(f * upper, dim, C)) for f in Q_TABLE_FACTORS)
    p_tab = tuple((L, float(p_parameter(L, dim, c, C))) for L in P_TABLE_L0)
    return BoundReport(dim, c, C, scan_radius, constant_C(2), constant_C(dim), L0, p_star,
                       lower, upper, q_tab, p_tab)
