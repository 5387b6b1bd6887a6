"""Local sampler for the interlacement set inside a finite window K.

I^u ∩ K has the law of the union of the ranges (intersected with K) of N_K
independent walks, where N_K ~ Poisson(u cap(K)) and every walk starts from
the normalized equilibrium measure of K.  Walks are killed once they leave a
truncation ball; the effect of the kill is certified through the hitting
inequality.

u-sweeps are coupled: trajectories arrive as a Poisson process of rate
cap(K) on [0, u_max], each site keeps the smallest arrival label among the
walks that visit it, and the sample at level u is {labels <= u}.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import walks
from .green import GreenTable, reference_constants, reference_table
from .lattice import sphere_size
from .potential import (EquilibriumMeasure, as_points, capacity_bounds_sandwich,
                        equilibrium_exact)

log = logging.getLogger(__name__)

MAX_KILL_RADIUS = 4096


@dataclass(frozen=True)
class EntranceLaw:
    """Starting law of the trajectories that reach K, with the total rate cap(K)."""

    points: np.ndarray
    probs: np.ndarray
    capacity: float
    method: str = "exact"
    bias_flag: str = ""

    @classmethod
    def from_measure(cls, m: EquilibriumMeasure) -> "EntranceLaw":
        return cls(m.points, m.normalized, m.capacity, m.method)


@dataclass(frozen=True)
class KillCertificate:
    kill_radius: int
    per_walk_return_bound: float
    tv_bound: float
    target: float

    @property
    def certified(self) -> bool:
        return self.tv_bound <= self.target


def choose_kill_radius(points: np.ndarray, u: float, capacity: float, cap_upper: float | None = None,
                       min_prob: float = 1.0, C_hat: float | None = None,
                       max_radius: int = MAX_KILL_RADIUS) -> KillCertificate:
    """Smallest 8 (diam v 1) 2^j whose certified distortion is below 1% of min_prob.

    A walk killed at distance r from the window comes back with probability at
    most cap(K) C_hat r^(2-d); a union bound over the E[N_K] = u cap(K) walks
    bounds the total-variation distance between truncated and exact window laws.
    """
    d = points.shape[1]
    if C_hat is None:
        C_hat = reference_constants(d).C_hat
    if cap_upper is None:
        cap_upper = capacity
    lo, hi = points.min(axis=0), points.max(axis=0)
    diam = int((hi - lo).max())
    half = int(((hi - lo + 1) // 2).max())
    R = 8 * max(diam, 1)
    target = 0.01 * min_prob
    while True:
        per_walk = min(1.0, cap_upper * C_hat * float(R + 1 - half) ** (2 - d))
        tv = min(1.0, u * capacity * per_walk)
        if tv <= target or 2 * R > max_radius:
            cert = KillCertificate(R, per_walk, tv, target)
            if not cert.certified:
                log.info("kill radius capped at %d; certified distortion %.3g > %.3g", R, tv, target)
            return cert
        R *= 2


@dataclass(frozen=True)
class WindowSample:
    window: np.ndarray
    u: float
    occupied_mask: np.ndarray
    n_trajectories: int
    seed: int
    replicate: int = 0
    window_id: str = ""

    def __post_init__(self):
        if self.u == 0 and (self.n_trajectories or self.occupied_mask.any()):
            raise ValueError("u = 0 sample must be empty")

    @property
    def occupied(self) -> np.ndarray:
        return self.window[self.occupied_mask]

    @property
    def vacant(self) -> np.ndarray:
        return self.window[~self.occupied_mask]

    @property
    def occupied_indices(self) -> np.ndarray:
        return np.flatnonzero(self.occupied_mask)

    def to_json(self) -> str:
        return json.dumps({"u": self.u, "window_id": self.window_id,
                           "occupied_indices": self.occupied_indices.tolist(),
                           "n_traj": int(self.n_trajectories),
                           "seed": [int(self.seed), int(self.replicate)]})


def replicate_rng(seed: int, rep: int) -> np.random.Generator:
    """Private stream of replicate ``rep``; independent of how replicates are split among workers."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rep,)))


@dataclass
class SweepResult:
    """Coupled samples: labels[r, i] is the first arrival level at site i (inf if never)."""

    us: np.ndarray
    labels: np.ndarray
    arrivals: list[np.ndarray]
    seed: int
    first_rep: int
    killed: int
    certificate: KillCertificate | None = None

    def occupied(self, u: float) -> np.ndarray:
        return self.labels <= u

    def n_trajectories(self, u: float) -> np.ndarray:
        return np.array([int((a <= u).sum()) for a in self.arrivals])

    def samples(self, window: np.ndarray, u: float, window_id: str = "") -> list[WindowSample]:
        occ = self.occupied(u)
        n = self.n_trajectories(u)
        return [WindowSample(window, float(u), occ[r], int(n[r]), self.seed, self.first_rep + r, window_id)
                for r in range(len(occ))]


@dataclass
class WindowSampler:
    """Sampler for a fixed window; the window is given by points or as a full cube target."""

    points: np.ndarray
    law: EntranceLaw
    target: walks.BoxTarget
    kill_radius: int
    certificate: KillCertificate | None = None

    def __post_init__(self):
        if self.kill_radius <= int((self.target.hi - self.target.lo).max()):
            raise ValueError("trunc_radius must exceed diam(K)")

    @classmethod
    def for_points(cls, K, law: EntranceLaw | EquilibriumMeasure | None = None,
                   trunc_radius: int | None = None, u_max: float = 1.0, min_prob: float = 1.0,
                   green: GreenTable | None = None) -> "WindowSampler":
        pts = as_points(K)
        if law is None:
            law = equilibrium_exact(pts, green)
        if isinstance(law, EquilibriumMeasure):
            law = EntranceLaw.from_measure(law)
        cert = None
        if trunc_radius is None:
            upper = law.capacity if law.method != "exact" else capacity_bounds_sandwich(pts, green)[1]
            cert = choose_kill_radius(pts, u_max, law.capacity, upper, min_prob)
            trunc_radius = cert.kill_radius
        return cls(pts, law, walks.BoxTarget.from_points(pts), int(trunc_radius), cert)

    @classmethod
    def for_cube(cls, d: int, radius: int, law: EntranceLaw, trunc_radius: int,
                 center=None) -> "WindowSampler":
        target = walks.BoxTarget.cube(d, radius, center)
        axes = [np.arange(l, h + 1) for l, h in zip(target.lo, target.hi)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
        return cls(pts, law, target, int(trunc_radius))

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def _draw(self, rng: np.random.Generator, u_max: float):
        n = int(rng.poisson(u_max * self.law.capacity)) if u_max > 0 else 0
        labels = np.sort(rng.uniform(0.0, u_max, n))
        starts = rng.choice(len(self.law.points), size=n, p=self.law.probs)
        seeds = walks.walk_seeds(rng, n)
        return labels, self.law.points[starts], seeds

    def sweep(self, us, reps: int, seed: int, first_rep: int = 0, chunk: int = 4096) -> SweepResult:
        us = np.atleast_1d(np.asarray(us, dtype=float))
        if (us < 0).any():
            raise ValueError("levels must be nonnegative")
        if reps < 1:
            raise ValueError("need at least one replicate")
        u_max = float(us.max())
        n_sites = len(self.points)
        out = np.full((reps, n_sites), np.inf)
        arrivals = []
        killed = 0
        per_chunk = max(1, min(chunk, 50_000_000 // max(n_sites, 1)))
        for c0 in range(0, reps, per_chunk):
            c1 = min(reps, c0 + per_chunk)
            L, S, W, G = [], [], [], []
            for r in range(c0, c1):
                lab, st, sd = self._draw(replicate_rng(seed, first_rep + r), u_max)
                arrivals.append(lab)
                L.append(lab)
                S.append(st)
                W.append(sd)
                G.append(np.full(len(lab), r - c0, dtype=np.int64))
            if sum(len(x) for x in L) == 0:
                continue
            marks, k = walks.mark_walks(self.target, np.concatenate(S), np.concatenate(W),
                                        np.concatenate(L), np.concatenate(G), c1 - c0, self.kill_radius)
            killed += k
            out[c0:c1] = marks[:, :n_sites]
        return SweepResult(us, out, arrivals, seed, first_rep, killed, self.certificate)

    def sample(self, u: float, seed: int, rep: int = 0, window_id: str = "") -> WindowSample:
        res = self.sweep([u], 1, seed, first_rep=rep)
        return res.samples(self.points, u, window_id)[0]


def sample_window(K, u: float, measure: EquilibriumMeasure | EntranceLaw | None = None,
                  trunc_radius: int | None = None, seed: int = 0, green: GreenTable | None = None
                  ) -> WindowSample:
    if u < 0:
        raise ValueError("u must be nonnegative")
    sampler = WindowSampler.for_points(K, measure, trunc_radius, u_max=max(u, 1e-12), green=green)
    return sampler.sample(u, seed)


def write_samples(samples, fh) -> None:
    for s in samples:
        fh.write(s.to_json() + "\n")


# ----------------------------------------------------------------------------
# statistical checks


@dataclass(frozen=True)
class EmptinessResult:
    empirical: float
    theory: float
    standard_error: float
    z_score: float
    samples: int

    @property
    def passed(self) -> bool:
        if self.theory < 1e-6 and self.empirical == 0:
            return True
        return abs(self.empirical - self.theory) <= 3 * self.standard_error


def emptiness_test(K, u: float, samples: int, seed: int, green: GreenTable | None = None,
                   sampler: WindowSampler | None = None) -> EmptinessResult:
    """Frequency of {I^u ∩ K = ∅} against exp(-u cap(K)).

    The standard error is the binomial one under the theory value.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    m = equilibrium_exact(K, green)
    if sampler is None:
        sampler = WindowSampler.for_points(m.points, m, u_max=max(u, 1e-12), green=green)
    theory = math.exp(-u * m.capacity)
    res = sampler.sweep([u], samples, seed)
    empty = float((~res.occupied(u).any(axis=1)).mean())
    se = math.sqrt(max(theory * (1 - theory), 1e-300) / samples)
    return EmptinessResult(empty, theory, se, (empty - theory) / se, samples)


def subwindow_emptiness(result: SweepResult, window: np.ndarray, sub_indices, u: float,
                        green: GreenTable | None = None) -> EmptinessResult:
    """Restriction consistency: emptiness of a sub-window read off samples of the full window."""
    sub = window[np.asarray(sub_indices)]
    theory = math.exp(-u * equilibrium_exact(sub, green).capacity)
    occ = result.occupied(u)[:, np.asarray(sub_indices)]
    n = len(occ)
    emp = float((~occ.any(axis=1)).mean())
    se = math.sqrt(max(theory * (1 - theory), 1e-300) / n)
    return EmptinessResult(emp, theory, se, (emp - theory) / se, n)


def poisson_chi_square(counts: np.ndarray, mean: float) -> tuple[float, float]:
    """Chi-square statistic and p-value of trajectory counts against Poisson(mean)."""
    counts = np.asarray(counts)
    kmax = int(stats.poisson.ppf(1 - 1e-4, mean)) + 1
    lo = int(stats.poisson.ppf(1e-4, mean))
    edges = list(range(lo, kmax + 1))
    obs = [int((counts <= lo).sum())] + [int((counts == k).sum()) for k in edges[1:-1]] \
        + [int((counts >= kmax).sum())]
    probs = [stats.poisson.cdf(lo, mean)] + [stats.poisson.pmf(k, mean) for k in edges[1:-1]] \
        + [stats.poisson.sf(kmax - 1, mean)]
    exp = np.array(probs) * len(counts)
    obs = np.array(obs)
    # merge sparse cells from the tails inward
    keep_obs, keep_exp, acc_o, acc_e = [], [], 0, 0.0
    for o, e in zip(obs, exp):
        acc_o += o
        acc_e += e
        if acc_e >= 5:
            keep_obs.append(acc_o)
            keep_exp.append(acc_e)
            acc_o, acc_e = 0, 0.0
    if acc_e > 0 and keep_exp:
        keep_obs[-1] += acc_o
        keep_exp[-1] += acc_e
    chi = float(((np.array(keep_obs) - np.array(keep_exp)) ** 2 / np.array(keep_exp)).sum())
    return chi, float(stats.chi2.sf(chi, len(keep_obs) - 1))


@dataclass(frozen=True)
class CovarianceResult:
    covariance: float
    standard_error: float
    theory: float
    samples: int


def covariance_theory(x, y, u: float, green: GreenTable | None = None) -> float:
    """Cov(1[x vacant], 1[y vacant]) = e^{-u cap{x,y}} - e^{-u cap{x}} e^{-u cap{y}}."""
    pair = equilibrium_exact([tuple(x), tuple(y)], green).capacity
    single = equilibrium_exact([tuple(x)], green).capacity
    return math.exp(-u * pair) - math.exp(-2 * u * single)


def covariance_probe(x, y, u: float, samples: int, seed: int, green: GreenTable | None = None,
                     trunc_radius: int | None = None) -> CovarianceResult:
    """Empirical covariance of the vacancy indicators of x and y, with a delta-method SE."""
    x, y = tuple(int(c) for c in x), tuple(int(c) for c in y)
    if x == y:
        raise ValueError("x and y must differ")
    window = sorted([x, y])
    m = equilibrium_exact(window, green)
    sampler = WindowSampler.for_points(window, m, trunc_radius, u_max=u, green=green)
    occ = sampler.sweep([u], samples, seed).occupied(u)
    a = (~occ[:, window.index(x)]).astype(float)
    b = (~occ[:, window.index(y)]).astype(float)
    cov = float((a * b).mean() - a.mean() * b.mean())
    psi = (a - a.mean()) * (b - b.mean()) - cov
    se = float(psi.std(ddof=1) / math.sqrt(samples))
    return CovarianceResult(cov, se, covariance_theory(x, y, u, green), samples)


# ----------------------------------------------------------------------------
# harmonic measure from a distant sphere


def uniform_sphere_points(rng: np.random.Generator, d: int, R: int, n: int) -> np.ndarray:
    """Uniform draws from S(0, R) by face choice plus rejection on shared edges."""
    out = np.empty((0, d), dtype=np.int64)
    while len(out) < n:
        m = 2 * (n - len(out)) + 16
        pts = rng.integers(-R, R + 1, size=(m, d))
        face = rng.integers(0, d, size=m)
        sign = rng.integers(0, 2, size=m) * 2 - 1
        pts[np.arange(m), face] = sign * R
        mult = (np.abs(pts) == R).sum(axis=1)
        keep = rng.random(m) < 1.0 / mult
        out = np.concatenate([out, pts[keep]])
    return out[:n]


def sphere_mean_green(d: int, R: int, n: int = 4000, seed: int = 0,
                      green: GreenTable | None = None) -> float:
    """Average of g(0, z) over z uniform on S(0, R)."""
    table = reference_table(d) if green is None else green
    table = table if table.far_field is not None else table.with_far_field()
    if sphere_size(d, R) <= n:
        from .lattice import sphere_array
        return float(table(sphere_array(d, R)).mean())
    return float(table(uniform_sphere_points(np.random.default_rng(seed), d, R, n)).mean())


@dataclass(frozen=True)
class HarmonicHits:
    hit_index: np.ndarray  # per walk, index into K or -1 for a miss
    capacity_estimate: float
    capacity_se: float
    source_radius: int
    kill_radius: int
    bias_flag: str

    @property
    def hits(self) -> np.ndarray:
        return self.hit_index[self.hit_index >= 0]

    def entry_distribution(self, size: int) -> np.ndarray:
        return np.bincount(self.hits, minlength=size) / max(len(self.hits), 1)


def harmonic_hit_sampler(K_large, source_radius: int, seed: int, walks_count: int = 1,
                         kill_factor: int = 8, green: GreenTable | None = None) -> HarmonicHits:
    """Entry points into K of walks started uniformly on a sphere around K.

    Conditionally on hitting, the entry point approximates the normalized
    equilibrium measure up to O(diam(K) / source_radius).  With h the hit
    frequency and gbar(r) the sphere-averaged Green function,
    cap(K) ~ h / (gbar(source) - (1 - h) gbar(kill)); the second term accounts
    to first order for walks that would return after the kill.
    """
    pts = as_points(K_large)
    d = pts.shape[1]
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    diam = int((hi - lo).max())
    if source_radius < 4 * max(diam, 1):
        raise ValueError("source_radius must be at least 4 diam(K)")
    center = (lo + hi) // 2
    rng = np.random.default_rng(seed)
    starts = uniform_sphere_points(rng, d, source_radius, walks_count) + center
    kill = kill_factor * source_radius
    idx = walks.first_hits(walks.BoxTarget.from_points(pts), starts, walks.walk_seeds(rng, walks_count),
                           kill)
    h = float((idx >= 0).mean())
    se_h = math.sqrt(max(h * (1 - h), 1e-300) / walks_count)
    g_src = sphere_mean_green(d, source_radius, green=green)
    g_kill = sphere_mean_green(d, kill + 1, green=green)
    denom = g_src - (1 - h) * g_kill
    flag = f"harmonic-measure approximation, relative bias O(diam/source_radius) = O({diam / source_radius:.3f})"
    return HarmonicHits(idx, h / denom, se_h / denom, source_radius, kill, flag)


def harmonic_entrance_law(K_large, hits: int, seed: int, source_factor: int = 8,
                          green: GreenTable | None = None, max_walks: int = 50_000_000) -> EntranceLaw:
    """Empirical entrance law for windows beyond the exact solver, with a bias flag."""
    pts = as_points(K_large)
    diam = int((pts.max(axis=0) - pts.min(axis=0)).max())
    R = source_factor * max(diam, 1)
    pilot = harmonic_hit_sampler(pts, R, seed, 2000, green=green)
    rate = max(len(pilot.hits) / 2000, 1e-4)
    n = int(min(max_walks, math.ceil(hits / rate * 1.1)))
    res = harmonic_hit_sampler(pts, R, seed + 1, n, green=green)
    probs = res.entry_distribution(len(pts))
    support = probs > 0
    return EntranceLaw(pts[support], probs[support], res.capacity_estimate, "harmonic", res.bias_flag)


def shell_entrance_law(d: int, radius: int, center=None, green: GreenTable | None = None,
                       solver_cap: int = 5000, hits: int = 200_000, seed: int = 0) -> EntranceLaw:
    """Entrance law of a full cube: equilibrium measure lives on its boundary sphere."""
    from .lattice import sphere_array
    shell = sphere_array(d, radius, center)
    if len(shell) <= solver_cap:
        return EntranceLaw.from_measure(equilibrium_exact(shell, green, solver_cap))
    return harmonic_entrance_law(shell, hits, seed, green=green)
