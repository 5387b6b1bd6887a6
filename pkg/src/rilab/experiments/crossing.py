"""Annulus crossing events and the planar duality audit.

A^u_n: a nearest-neighbour path in the vacant set joins S(0, L_n - 1) to S(0, 2 L_n).
B^u_{n,x}: a *-connected path in I^u ∩ F joins S(x, L_n - 1) to S(x, 2 L_n).

Both events only depend on the configuration inside the closed annulus
L_n - 1 <= |y - x| <= 2 L_n, since a crossing path can be cut at its last
visit to the inner sphere and its first visit to the outer one.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numba as nb
import numpy as np
from scipy import ndimage

from ..interlace import EntranceLaw, WindowSampler, choose_kill_radius, harmonic_entrance_law
from ..lattice import ScaleLadder, sphere_array
from ..potential import equilibrium_exact
from .config import ExperimentConfig, worker_count


class MemoryGuard(ValueError):
    pass


class WindowTooSmall(ValueError):
    pass


def annulus_masks(d: int, r_in: int, r_out: int):
    """Boolean masks (region, inner sphere, outer sphere) over the cube of radius r_out."""
    ax = np.arange(-r_out, r_out + 1)
    grids = np.meshgrid(*([ax] * d), indexing="ij", sparse=True)
    sup = np.abs(grids[0])
    for g in grids[1:]:
        sup = np.maximum(sup, np.abs(g))
    return sup >= r_in, sup == r_in, sup == r_out


def has_crossing(open_sites: np.ndarray, region: np.ndarray, inner: np.ndarray, outer: np.ndarray,
                 star: bool) -> bool:
    """Open cluster (nearest-neighbour or * adjacency) inside region touching both spheres."""
    structure = ndimage.generate_binary_structure(open_sites.ndim, open_sites.ndim if star else 1)
    labels, count = ndimage.label(open_sites & region, structure)
    if count == 0:
        return False
    a = np.unique(labels[inner])
    b = np.unique(labels[outer])
    common = np.intersect1d(a[a > 0], b[b > 0], assume_unique=True)
    return len(common) > 0


@nb.njit(cache=True)
def _winding_circuit(occ, region, c, r_in):
    """True iff the *-graph of occupied region sites has a cycle winding around (c, c + 1/2).

    A diagonal step between the two sphere neighbours of a vacant corner of
    S(c, r_in) would leave that corner outside the cycle, so it is not allowed.
    """
    n = occ.shape[0]
    UNSEEN = -(1 << 40)
    pot = np.full((n, n), UNSEEN, dtype=np.int64)
    qa = np.empty(n * n, dtype=np.int64)
    qb = np.empty(n * n, dtype=np.int64)
    for sa in range(n):
        for sb in range(n):
            if not (occ[sa, sb] and region[sa, sb]) or pot[sa, sb] != UNSEEN:
                continue
            pot[sa, sb] = 0
            head = 0
            tail = 1
            qa[0] = sa
            qb[0] = sb
            while head < tail:
                a = qa[head]
                b = qb[head]
                head += 1
                for da in range(-1, 2):
                    for db in range(-1, 2):
                        if da == 0 and db == 0:
                            continue
                        a2 = a + da
                        b2 = b + db
                        if a2 < 0 or b2 < 0 or a2 >= n or b2 >= n:
                            continue
                        if not (occ[a2, b2] and region[a2, b2]):
                            continue
                        if da != 0 and db != 0 and max(abs(a - c), abs(b - c)) == r_in \
                                and max(abs(a2 - c), abs(b2 - c)) == r_in:
                            if abs(a2 - c) == r_in and abs(b - c) == r_in and not occ[a2, b]:
                                continue
                            if abs(a - c) == r_in and abs(b2 - c) == r_in and not occ[a, b2]:
                                continue
                        delta = 0
                        if 2 * c < a + a2:
                            if b == c and b2 == c + 1:
                                delta = 1
                            elif b == c + 1 and b2 == c:
                                delta = -1
                        want = pot[a, b] + delta
                        if pot[a2, b2] == UNSEEN:
                            pot[a2, b2] = want
                            qa[tail] = a2
                            qb[tail] = b2
                            tail += 1
                        elif pot[a2, b2] != want:
                            return True
    return False


@dataclass(frozen=True)
class DualityResult:
    vacant_crossing: bool
    occupied_circuit: bool

    @property
    def complementary(self) -> bool:
        return self.vacant_crossing != self.occupied_circuit


def duality_audit(occupied: np.ndarray, n: int, L0: int) -> DualityResult:
    """Compare a vacant nearest-neighbour crossing with an occupied *-circuit around S(x, L_n - 1).

    occupied is the planar window of radius 2 L_n centered at x; the two
    predicates are computed by unrelated searches (cluster labelling versus a
    winding-number lift).
    """
    L = ScaleLadder(L0)[n]
    side = 4 * L + 1
    occ = np.asarray(occupied, dtype=bool)
    if occ.shape != (side, side):
        raise WindowTooSmall(f"planar window must be {side}x{side} for L_n = {L}")
    if L - 1 < 1:
        raise WindowTooSmall("the inner sphere must enclose a hole (L_n >= 2)")
    region, inner, outer = annulus_masks(2, L - 1, 2 * L)
    crossing = has_crossing(~occ, region, inner, outer, star=False)
    circuit = bool(_winding_circuit(occ, region, 2 * L, L - 1))
    return DualityResult(crossing, circuit)


# ----------------------------------------------------------------------------
# windows and estimators


@dataclass
class CrossingEstimate:
    experiment: str
    us: np.ndarray
    probability: np.ndarray
    standard_error: np.ndarray
    reps: int
    seed: int
    n: int
    L0: int
    dim: int
    flags: list[str] = field(default_factory=list)
    outcomes: np.ndarray | None = None

    def at(self, u: float) -> tuple[float, float]:
        i = int(np.flatnonzero(np.isclose(self.us, u))[0])
        return float(self.probability[i]), float(self.standard_error[i])


def _summarize(outcomes: np.ndarray):
    p = outcomes.mean(axis=0)
    se = np.sqrt(p * (1 - p) / len(outcomes))
    return p, se


def _sweep_block(args):
    sampler, us, first, count, seed, kind, d, r_in, r_out = args
    region, inner, outer = annulus_masks(d, r_in, r_out)
    side = 2 * r_out + 1
    out = np.zeros((count, len(us)), dtype=bool)
    ntraj = np.zeros((count, len(us)), dtype=np.int64)
    block = max(1, 4_000_000 // sampler.points.shape[0])
    for s in range(0, count, block):
        m = min(block, count - s)
        res = sampler.sweep(us, m, seed, first_rep=first + s)
        for r in range(m):
            lab = res.labels[r].reshape((side,) * d)
            for j, u in enumerate(us):
                occ = lab <= u
                if kind == "A":
                    out[s + r, j] = has_crossing(~occ, region, inner, outer, star=False)
                else:
                    out[s + r, j] = has_crossing(occ, region, inner, outer, star=True)
        for j, u in enumerate(us):
            ntraj[s:s + m, j] = res.n_trajectories(u)
    return out, ntraj


def _run(sampler, us, reps, seed, kind, d, r_in, r_out, workers):
    workers = max(1, min(workers, reps))
    bounds = np.linspace(0, reps, workers + 1).astype(int)
    jobs = [(sampler, us, int(a), int(b - a), seed, kind, d, r_in, r_out)
            for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    if workers == 1:
        parts = [_sweep_block(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_sweep_block, jobs))
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def cube_window_law(d: int, radius: int, config: ExperimentConfig, seed: int) -> EntranceLaw:
    """Entrance law of the full cube of given radius; it lives on the boundary sphere."""
    shell = sphere_array(d, radius)
    green = config.load_green()
    if len(shell) <= config.solver_cap:
        return EntranceLaw.from_measure(equilibrium_exact(shell, green, config.solver_cap))
    return harmonic_entrance_law(shell, config.harmonic_hits, seed, config.source_factor, green)


def planar_window(d: int, radius: int, center) -> np.ndarray:
    c = np.asarray(center, dtype=np.int64)
    ax = np.arange(-radius, radius + 1)
    a, b = np.meshgrid(ax, ax, indexing="ij")
    pts = np.zeros((a.size, d), dtype=np.int64)
    pts[:, 0] = a.ravel()
    pts[:, 1] = b.ravel()
    return pts + c


def _kill(law: EntranceLaw, pts: np.ndarray, u_max: float, config: ExperimentConfig):
    if config.trunc_radius is not None:
        return config.trunc_radius, None
    cert = choose_kill_radius(pts, max(u_max, 1e-12), law.capacity)
    return cert.kill_radius, cert


def _flags(law: EntranceLaw, cert) -> list[str]:
    flags = []
    if law.bias_flag:
        flags.append(law.bias_flag)
    if cert is not None and not cert.certified:
        flags.append(f"kill radius {cert.kill_radius}: certified distortion <= {cert.tv_bound:.3g}")
    return flags


def estimate_A(u, n: int, config: ExperimentConfig, seed: int, reps: int | None = None,
               workers: int | None = None) -> CrossingEstimate:
    """Frequency of a vacant nearest-neighbour crossing of the annulus at scale L_n (L0 = 1)."""
    us = np.atleast_1d(np.asarray(u, dtype=float))
    if config.L0 != 1:
        raise ValueError("A^u_n is defined with L0 = 1")
    if n < 1:
        raise ValueError("n must be >= 1")
    d = config.dim
    L = ScaleLadder(1)[n]
    R = 2 * L
    if (2 * R + 1) ** d > config.max_window_sites:
        raise MemoryGuard(f"window with {(2 * R + 1) ** d} sites exceeds {config.max_window_sites}")
    reps = config.reps if reps is None else reps
    law = cube_window_law(d, R, config, seed)
    kill, cert = _kill(law, sphere_array(d, R), float(us.max()), config)
    sampler = WindowSampler.for_cube(d, R, law, kill)
    out, _ = _run(sampler, us, reps, seed, "A", d, L - 1, R, workers or worker_count())
    p, se = _summarize(out)
    return CrossingEstimate("A", us, p, se, reps, seed, n, 1, d, _flags(law, cert), out)


def estimate_B(u, n: int, x, config: ExperimentConfig, seed: int, reps: int | None = None,
               workers: int | None = None) -> CrossingEstimate:
    """Frequency of an occupied *-connected crossing inside F of the annulus around x at scale L_n."""
    us = np.atleast_1d(np.asarray(u, dtype=float))
    if n < 1:
        raise ValueError("n must be >= 1")
    d = config.dim
    x = np.asarray(x, dtype=np.int64)
    lad = ScaleLadder(config.L0)
    if (x[2:] != 0).any() or (x % lad[n]).any():
        raise ValueError("x must lie in L_n Z^d ∩ F")
    L = lad[n]
    R = 2 * L
    if (2 * R + 1) ** 2 > config.max_window_sites:
        raise MemoryGuard("planar window exceeds the site budget")
    reps = config.reps if reps is None else reps
    pts = planar_window(d, R, x)
    green = config.load_green()
    if len(pts) <= config.solver_cap:
        law = EntranceLaw.from_measure(equilibrium_exact(pts, green, config.solver_cap))
    else:
        law = harmonic_entrance_law(pts, config.harmonic_hits, seed, config.source_factor, green)
    kill, cert = _kill(law, pts, float(us.max()), config)
    sampler = WindowSampler.for_points(pts, law, kill)
    out, _ = _run(sampler, us, reps, seed, "B", 2, L - 1, R, workers or worker_count())
    p, se = _summarize(out)
    return CrossingEstimate("B", us, p, se, reps, seed, n, config.L0, d, _flags(law, cert), out)


def planar_samples(us, n: int, config: ExperimentConfig, seed: int, reps: int):
    """Coupled planar window samples around the origin, reshaped to (reps, side, side) per u."""
    d = config.dim
    L = ScaleLadder(config.L0)[n]
    R = 2 * L
    pts = planar_window(d, R, np.zeros(d, dtype=np.int64))
    green = config.load_green()
    if len(pts) <= config.solver_cap:
        law = EntranceLaw.from_measure(equilibrium_exact(pts, green, config.solver_cap))
    else:
        law = harmonic_entrance_law(pts, config.harmonic_hits, seed, config.source_factor, green)
    kill, _ = _kill(law, pts, float(max(us)), config)
    res = WindowSampler.for_points(pts, law, kill).sweep(us, reps, seed)
    side = 2 * R + 1
    return {float(u): res.occupied(u).reshape(reps, side, side) for u in us}


def geometric_mean_bound(q: float, n: int) -> float:
    return q ** (2**n) if q < 1 else math.inf
