"""Capacity and equilibrium measure of finite sets, hitting probabilities, and capacity bounds.

The exact path solves G w = 1 on K, where G is the Green matrix of K: the
equilibrium measure is the unique w whose potential equals one on K.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from . import walks
from .green import GreenTable, reference_constants, reference_table

log = logging.getLogger(__name__)

SOLVER_CAP = 5000
CLAMP_TOL = 1e-9
RESIDUAL_TOL = 1e-8


class SolverCapExceeded(ValueError):
    pass


class IllConditioned(ArithmeticError):
    pass


def as_points(K) -> np.ndarray:
    """Normalize a point collection to a duplicate-free (N, d) int64 array, order kept."""
    if isinstance(K, np.ndarray):
        pts = K.astype(np.int64, copy=False)
    else:
        pts = np.array([tuple(p) for p in K], dtype=np.int64)
    if pts.ndim != 2 or len(pts) == 0:
        raise ValueError("K must be a nonempty collection of points")
    _, first = np.unique(pts, axis=0, return_index=True)
    if len(first) != len(pts):
        pts = pts[np.sort(first)]
    return pts


def _table(dim: int, green: GreenTable | None) -> GreenTable:
    return reference_table(dim) if green is None else green


@dataclass(frozen=True)
class EquilibriumMeasure:
    points: np.ndarray
    weights: np.ndarray
    method: str = "exact"
    residual: float = 0.0

    def __post_init__(self):
        if len(self.points) != len(self.weights):
            raise ValueError("one weight per point")
        if (self.weights < 0).any():
            raise ValueError("equilibrium weights must be nonnegative")
        if self.capacity <= 0:
            raise ValueError("capacity must be positive")

    @property
    def capacity(self) -> float:
        return float(self.weights.sum())

    @property
    def normalized(self) -> np.ndarray:
        return self.weights / self.weights.sum()

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return len(self.points)

    def to_json(self) -> str:
        return json.dumps({"points": self.points.tolist(), "weights": self.weights.tolist(),
                           "capacity": self.capacity, "method": self.method,
                           "residual": self.residual})

    @classmethod
    def from_json(cls, text: str) -> "EquilibriumMeasure":
        obj = json.loads(text)
        return cls(np.array(obj["points"], dtype=np.int64), np.array(obj["weights"], dtype=float),
                   obj.get("method", "exact"), float(obj.get("residual", 0.0)))


def equilibrium_exact(K, green: GreenTable | None = None, solver_cap: int = SOLVER_CAP
                      ) -> EquilibriumMeasure:
    """Solve G w = 1 by Cholesky; negatives above -1e-9 are clamped, larger ones abort."""
    pts = as_points(K)
    if len(pts) > solver_cap:
        raise SolverCapExceeded(f"|K| = {len(pts)} exceeds solver cap {solver_cap}")
    table = _table(pts.shape[1], green)
    G = table.pairwise(pts)
    ones = np.ones(len(pts))
    try:
        factor = linalg.cho_factor(G, lower=True, check_finite=True)
    except linalg.LinAlgError as exc:
        raise IllConditioned("Green matrix of K is not positive definite") from exc
    w = linalg.cho_solve(factor, ones)
    residual = float(np.abs(G @ w - ones).max())
    if residual > RESIDUAL_TOL:
        raise IllConditioned(f"equilibrium residual {residual:.3e} exceeds {RESIDUAL_TOL}")
    if w.min() < -CLAMP_TOL:
        raise IllConditioned(f"negative equilibrium weight {w.min():.3e}; Green table suspect")
    if w.min() < 0:
        log.warning("clamping %d tiny negative weights (min %.2e)", int((w < 0).sum()), w.min())
        w = np.maximum(w, 0.0)
    return EquilibriumMeasure(pts, w, "exact", residual)


def capacity_exact(K, green: GreenTable | None = None, solver_cap: int = SOLVER_CAP) -> float:
    return equilibrium_exact(K, green, solver_cap).capacity


def capacity_bounds_sandwich(K, green: GreenTable | None = None) -> tuple[float, float]:
    """|K| / max_x sum_y g(x,y)  <=  cap(K)  <=  |K| / min_x sum_y g(x,y)."""
    pts = as_points(K)
    rows = _table(pts.shape[1], green).pairwise(pts).sum(axis=1)
    return len(pts) / float(rows.max()), len(pts) / float(rows.min())


def hitting_bound(x, K, measure: EquilibriumMeasure | None = None,
                  green: GreenTable | None = None) -> tuple[float, float]:
    """(P_x[hit K], cap(K) * max_y g(x,y)) for x outside K."""
    pts = as_points(K)
    x = np.asarray(x, dtype=np.int64)
    if (pts == x).all(axis=1).any():
        raise ValueError("x must lie outside K")
    if measure is None:
        measure = equilibrium_exact(pts, green)
    table = _table(pts.shape[1], green)
    gx = table(measure.points - x)
    return float(gx @ measure.weights), measure.capacity * float(table(pts - x).max())


def _kill_bias(cap_upper: float, C_hat: float, dist: float, d: int) -> float:
    """Upper bound on P_z[hit K] for |z - K| >= dist, through the hitting inequality."""
    return min(1.0, cap_upper * C_hat * max(dist, 1.0) ** (2 - d))


def _center(pts: np.ndarray) -> np.ndarray:
    return (pts.min(axis=0) + pts.max(axis=0)) // 2


def _radius(pts: np.ndarray) -> int:
    return int(np.abs(pts - _center(pts)).max())


@dataclass(frozen=True)
class MCEstimate:
    estimate: float
    standard_error: float
    bias_bound: float
    walks: int
    seed: int

    @property
    def error_bound(self) -> float:
        return 3 * self.standard_error + self.bias_bound


def escape_mc(x, K, walks_count: int, trunc_radius: int, seed: int,
              green: GreenTable | None = None, C_hat: float | None = None) -> MCEstimate:
    """Fraction of walks from x in K that never return to K before leaving the truncation ball.

    The truncation ball is centered at the bounding-box center of K.  A walk
    killed at z may still return later, so the estimate is high by at most
    cap_upper(K) * C_hat * (trunc_radius - diam(K))^(2-d).
    """
    pts = as_points(K)
    d = pts.shape[1]
    x = np.asarray(x, dtype=np.int64)
    diam = int((pts.max(axis=0) - pts.min(axis=0)).max())
    if trunc_radius <= diam:
        raise ValueError("trunc_radius must exceed diam(K)")
    if not (pts == x).all(axis=1).any():
        raise ValueError("x must belong to K")
    if C_hat is None:
        C_hat = reference_constants(d).C_hat
    target = walks.BoxTarget.from_points(pts)
    seeds = walks.walk_seeds(np.random.default_rng(seed), walks_count)
    starts = np.repeat(x[None, :], walks_count, axis=0)
    hits = walks.first_hits(target, starts, seeds, trunc_radius, first_time=1)
    esc = (hits < 0).astype(float)
    p = float(esc.mean())
    se = float(esc.std(ddof=1) / math.sqrt(walks_count)) if walks_count > 1 else float("inf")
    upper = capacity_bounds_sandwich(pts, green)[1]
    gap = trunc_radius + 1 - _radius(pts)
    return MCEstimate(p, se, _kill_bias(upper, C_hat, gap, d), walks_count, seed)


def hitting_mc(x, K, walks_count: int, trunc_radius: int, seed: int,
               green: GreenTable | None = None, C_hat: float | None = None) -> MCEstimate:
    """Frequency of walks from x (outside K) that reach K before the truncation ball is left."""
    pts = as_points(K)
    d = pts.shape[1]
    x = np.asarray(x, dtype=np.int64)
    c = _center(pts)
    if int(np.abs(x - c).max()) >= trunc_radius:
        raise ValueError("start point must lie inside the truncation ball")
    if C_hat is None:
        C_hat = reference_constants(d).C_hat
    target = walks.BoxTarget.from_points(pts)
    seeds = walks.walk_seeds(np.random.default_rng(seed), walks_count)
    starts = np.repeat(x[None, :], walks_count, axis=0)
    hit = (walks.first_hits(target, starts, seeds, trunc_radius) >= 0).astype(float)
    upper = capacity_bounds_sandwich(pts, green)[1]
    gap = trunc_radius + 1 - _radius(pts)
    se = float(hit.std(ddof=1) / math.sqrt(walks_count)) if walks_count > 1 else float("inf")
    return MCEstimate(float(hit.mean()), se, _kill_bias(upper, C_hat, gap, d), walks_count, seed)


def frame_capacity_bound(L: int, d: int, c_hat: float) -> float:
    """8L / c_hat in d >= 4 and 8L / (c_hat (1 + ln L)) in d = 3."""
    if d < 3:
        raise ValueError("capacity bounds need d >= 3")
    if L < 1:
        raise ValueError("L must be >= 1")
    return 8 * L / c_hat if d >= 4 else 8 * L / (c_hat * (1 + math.log(L)))


def stick_capacity_bound(length: int, d: int, c_hat: float) -> float:
    """length / c_hat in d >= 4 and length / (c_hat (1 + ln length)) in d = 3."""
    if d < 3:
        raise ValueError("capacity bounds need d >= 3")
    if length < 1:
        raise ValueError("stick length must be >= 1")
    return length / c_hat if d >= 4 else length / (c_hat * (1 + math.log(length)))


def check_subadditivity(K1, K2, green: GreenTable | None = None, slack: float = 1e-8) -> bool:
    a, b = as_points(K1), as_points(K2)
    union = as_points(np.concatenate([a, b]))
    return capacity_exact(union, green) <= capacity_exact(a, green) + capacity_exact(b, green) + slack


def check_monotonicity(K, K_sup, green: GreenTable | None = None, slack: float = 1e-8) -> bool:
    a, b = as_points(K), as_points(K_sup)
    if not {tuple(p) for p in a.tolist()} <= {tuple(p) for p in b.tolist()}:
        raise ValueError("monotonicity check needs K to be a subset of K'")
    return capacity_exact(a, green) <= capacity_exact(b, green) + slack
