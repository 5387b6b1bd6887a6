"""Dyadic trees embedded in Z^d across the scales L_k = L0 6^k.

Nodes of T_n are stored in heap order: the root is 0 and the children m1, m2
of node i are 2i+1 and 2i+2.  A node at depth k is mapped into L_{n-k} Z^d;
its first child sits at sup-distance L_{n-k} and its second at 2 L_{n-k}.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

import mpmath
import numpy as np

from . import walks
from .green import GreenTable, reference_table
from .lattice import PathTrace, ScaleLadder, frame_array, sphere_array
from .potential import SOLVER_CAP, equilibrium_exact

ENUMERATION_GUARD = 10**8


class EnumerationGuard(ValueError):
    pass


class NoCrossing(ValueError):
    pass


# ----------------------------------------------------------------------------
# tree indices


def n_nodes(n: int) -> int:
    return 2 ** (n + 1) - 1


def node_depth(i: int) -> int:
    return (i + 1).bit_length() - 1


def node_bits(i: int) -> str:
    """Index word over {1, 2} of heap node i ('' for the root)."""
    k = node_depth(i)
    j = i + 1 - 2**k
    return "".join("2" if (j >> (k - 1 - t)) & 1 else "1" for t in range(k))


def node_index(bits: str) -> int:
    i = 0
    for b in bits:
        if b not in "12":
            raise ValueError("tree indices use the letters 1 and 2")
        i = 2 * i + int(b)
    return i


def leaves(n: int) -> range:
    return range(2**n - 1, 2 ** (n + 1) - 1)


def rho(m: str, m2: str) -> int:
    """Lexicographic distance of two leaves of equal depth."""
    if len(m) != len(m2):
        raise ValueError("leaves must have the same depth")
    common = 0
    for a, b in zip(m, m2):
        if a != b:
            break
        common += 1
    return len(m) - common


def tree_sphere(m: str, k: int) -> set[str]:
    """Leaves at lexicographic distance k from m."""
    n = len(m)
    if not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    if k == 0:
        return {m}
    pre = m[: n - k]
    flip = "2" if m[n - k] == "1" else "1"
    return {pre + flip + "".join(t) for t in itertools.product("12", repeat=k - 1)}


def constant_C(d: int) -> int:
    return (13**d - 11**d) * (25**d - 23**d)


def count_formula(n: int, d: int) -> int:
    if n < 0:
        raise ValueError("depth must be nonnegative")
    return constant_C(d) ** (2**n - 1)


# ----------------------------------------------------------------------------
# embeddings


@dataclass(frozen=True)
class ProperEmbedding:
    depth: int
    L0: int
    points: np.ndarray  # (2^(n+1) - 1, d) in heap order

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.int64)
        if pts.ndim != 2 or len(pts) != n_nodes(self.depth):
            raise ValueError(f"need {n_nodes(self.depth)} node positions")
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def ladder(self) -> ScaleLadder:
        return ScaleLadder(self.L0)

    @property
    def root(self) -> np.ndarray:
        return self.points[0]

    def __getitem__(self, bits: str) -> np.ndarray:
        return self.points[node_index(bits)]

    @property
    def leaf_points(self) -> np.ndarray:
        return self.points[2**self.depth - 1:]

    @property
    def is_planar(self) -> bool:
        return bool((self.points[:, 2:] == 0).all())

    def to_json(self) -> str:
        nodes = [{"index_bits": node_bits(i), "point": p.tolist()} for i, p in enumerate(self.points)]
        return json.dumps({"depth": self.depth, "L0": self.L0, "dim": self.dim, "nodes": nodes})

    @classmethod
    def from_json(cls, text: str) -> "ProperEmbedding":
        obj = json.loads(text)
        pts = np.zeros((n_nodes(obj["depth"]), obj["dim"]), dtype=np.int64)
        for node in obj["nodes"]:
            pts[node_index(node["index_bits"])] = node["point"]
        return cls(obj["depth"], obj["L0"], pts)


@dataclass(frozen=True)
class Validation:
    valid: bool
    condition: int = 0
    node: str = ""
    message: str = ""

    def __bool__(self) -> bool:
        return self.valid


def validate(e: ProperEmbedding, root=None) -> Validation:
    """Check the three defining conditions; report the first violation."""
    lad, n = e.ladder, e.depth
    if root is not None and not np.array_equal(e.points[0], np.asarray(root)):
        return Validation(False, 1, "", f"root {e.points[0].tolist()} != {list(root)}")
    for i, p in enumerate(e.points):
        k = node_depth(i)
        if (p % lad[n - k]).any():
            return Validation(False, 2, node_bits(i), f"{p.tolist()} not in L_{n - k} Z^d")
    for i in range(2**n - 1):
        k = node_depth(i)
        s = lad[n - k]
        for c, mult in ((2 * i + 1, 1), (2 * i + 2, 2)):
            dist = int(np.abs(e.points[c] - e.points[i]).max())
            if dist != mult * s:
                return Validation(False, 3, node_bits(c),
                                  f"child at distance {dist}, expected {mult * s}")
    return Validation(True)


@lru_cache(maxsize=None)
def _unit_spheres(d: int) -> tuple[np.ndarray, np.ndarray]:
    return sphere_array(d, 6), sphere_array(d, 12)


def random_embedding(n: int, x, d: int, seed, L0: int = 1) -> ProperEmbedding:
    """Uniform element of Lambda_{n,x}: independent uniform child offsets at every node."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    x = np.asarray(x, dtype=np.int64)
    if len(x) != d:
        raise ValueError("root dimension mismatch")
    lad = ScaleLadder(L0)
    if (x % lad[n]).any():
        raise ValueError("root must lie in L_n Z^d")
    s6, s12 = _unit_spheres(d)
    pts = np.empty((n_nodes(n), d), dtype=np.int64)
    pts[0] = x
    for i in range(2**n - 1):
        scale = lad[n - node_depth(i) - 1]
        pts[2 * i + 1] = pts[i] + scale * s6[rng.integers(len(s6))]
        pts[2 * i + 2] = pts[i] + scale * s12[rng.integers(len(s12))]
    return ProperEmbedding(n, L0, pts)


def random_planar_embedding(n: int, x, d: int, seed, L0: int = 1) -> ProperEmbedding:
    """Uniform proper embedding into the plane F (first two coordinates)."""
    x = np.asarray(x, dtype=np.int64)
    if (x[2:] != 0).any():
        raise ValueError("root must lie in F")
    e2 = random_embedding(n, x[:2], 2, seed, L0)
    pts = np.zeros((len(e2.points), d), dtype=np.int64)
    pts[:, :2] = e2.points
    return ProperEmbedding(n, L0, pts)


def random_embedding_batch(n: int, d: int, count: int, seed, L0: int = 1) -> np.ndarray:
    """(count, nodes, d) array of uniform embeddings rooted at 0."""
    rng = np.random.default_rng(seed)
    lad = ScaleLadder(L0)
    s6, s12 = _unit_spheres(d)
    pts = np.zeros((count, n_nodes(n), d), dtype=np.int64)
    for i in range(2**n - 1):
        scale = lad[n - node_depth(i) - 1]
        pts[:, 2 * i + 1] = pts[:, i] + scale * s6[rng.integers(len(s6), size=count)]
        pts[:, 2 * i + 2] = pts[:, i] + scale * s12[rng.integers(len(s12), size=count)]
    return pts


def _lattice_candidates(center: np.ndarray, radius: int, spacing: int) -> np.ndarray:
    """Brute-force scan of spacing*Z^d within sup-distance radius of center, kept if at exactly radius."""
    d = len(center)
    r = radius // spacing + 1
    axes = [np.arange(-r, r + 1) * spacing] * d
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    grid = grid[np.abs(grid).max(axis=1) == radius]
    return grid + center


def enumerate_embeddings(n: int, x, d: int, L0: int = 1, chunk: int = 1 << 16
                         ) -> Iterator[np.ndarray]:
    """Stream all proper embeddings as (batch, nodes, d) arrays, each exactly once.

    Child positions are found by scanning the renormalized lattice, not from
    the sphere formula, so the total count is an independent check.
    """
    if count_formula(n, d) > ENUMERATION_GUARD:
        raise EnumerationGuard(f"C_{d}^(2^{n}-1) = {count_formula(n, d)} exceeds {ENUMERATION_GUARD}")
    x = np.asarray(x, dtype=np.int64)
    lad = ScaleLadder(L0)
    if (x % lad[n]).any():
        raise ValueError("root must lie in L_n Z^d")
    if n == 0:
        yield x[None, None, :]
        return
    # the guard leaves only n = 1 here, since C_d^3 > 1e8 for every d >= 2
    scale, sp = lad[n], lad[n - 1]
    c1, c2 = _lattice_candidates(x, scale, sp), _lattice_candidates(x, 2 * scale, sp)
    pairs = len(c1) * len(c2)
    for start in range(0, pairs, chunk):
        idx = np.arange(start, min(start + chunk, pairs))
        out = np.empty((len(idx), 3, d), dtype=np.int64)
        out[:, 0] = x
        out[:, 1] = c1[idx // len(c2)]
        out[:, 2] = c2[idx % len(c2)]
        yield out


def enumerate_proper(n: int, x, d: int, L0: int = 1) -> Iterator[ProperEmbedding]:
    for block in enumerate_embeddings(n, x, d, L0):
        for pts in block:
            yield ProperEmbedding(n, L0, pts)


def enumeration_count(n: int, x, d: int, L0: int = 1) -> int:
    return sum(len(b) for b in enumerate_embeddings(n, x, d, L0))


def branching_factors(n: int, d: int, L0: int = 1) -> list[tuple[int, int]]:
    """Per-level (child-1, child-2) candidate counts by lattice scans around the origin."""
    lad = ScaleLadder(L0)
    out = []
    for k in range(n):
        origin = np.zeros(d, dtype=np.int64)
        sp = lad[n - k - 1]
        out.append((len(_lattice_candidates(origin, lad[n - k], sp)),
                    len(_lattice_candidates(origin, 2 * lad[n - k], sp))))
    return out


def count_from_branching(n: int, d: int, L0: int = 1) -> int:
    total = 1
    for k, (a, b) in enumerate(branching_factors(n, d, L0)):
        total *= (a * b) ** (2**k)
    return total


# ----------------------------------------------------------------------------
# extraction from a crossing path


def extract_embedding(path: PathTrace, x, n: int, ladder: ScaleLadder | int) -> ProperEmbedding:
    """Embedding whose leaf spheres S(T(m), L0 - 1) all meet the path.

    At a node with center c and scales L = L_{n-k}, l = L_{n-k-1}, the path
    meets S(c, L + l - 1) and S(c, 2L - l + 1).  The first child is the
    lexicographically smallest y in S(c, L) ∩ l Z^d with |gamma(i) - y| = l - 1,
    where i is the earliest path index on S(c, L + l - 1); the second child is
    chosen the same way from S(c, 2L) ∩ l Z^d and S(c, 2L - l + 1).
    """
    lad = ladder if isinstance(ladder, ScaleLadder) else ScaleLadder(int(ladder))
    x = np.asarray(x, dtype=np.int64)
    sites = path.sites
    d = path.dim
    if len(x) != d:
        raise ValueError("dimension mismatch between path and root")
    if (x % lad[n]).any():
        raise ValueError("root must lie in L_n Z^d")

    def touches(c, R) -> bool:
        return bool((np.abs(sites - c).max(axis=1) == R).any())

    if not (touches(x, lad[n] - 1) and touches(x, 2 * lad[n])):
        raise NoCrossing("path does not cross from S(x, L_n - 1) to S(x, 2 L_n)")
    pts = np.zeros((n_nodes(n), d), dtype=np.int64)
    pts[0] = x
    for i in range(2**n - 1):
        c = pts[i]
        L = lad[n - node_depth(i)]
        l = lad[n - node_depth(i) - 1]
        dist = np.abs(sites - c).max(axis=1)
        for child, (target, radius) in ((2 * i + 1, (L + l - 1, L)), (2 * i + 2, (2 * L - l + 1, 2 * L))):
            on = np.flatnonzero(dist == target)
            if len(on) == 0:
                raise AssertionError(f"path misses S(c, {target}) at node {node_bits(i)!r}")
            p = sites[on[0]]
            cand = c + l * sphere_array(d, radius // l)
            ok = cand[np.abs(cand - p).max(axis=1) == l - 1]
            if len(ok) == 0:
                raise AssertionError("no child center covers the path site")
            pts[child] = ok[np.lexsort(ok.T[::-1])][0]
            if not (touches(pts[child], l - 1) and touches(pts[child], 2 * l)):
                raise AssertionError(f"two-sphere invariant fails at node {node_bits(child)!r}")
    return ProperEmbedding(n, lad.L0, pts)


def leaf_spheres_met(e: ProperEmbedding, path: PathTrace) -> bool:
    r = e.L0 - 1
    return all(bool((np.abs(path.sites - c).max(axis=1) == r).any()) for c in e.leaf_points)


def random_crossing_path(x, n: int, L0: int, seed, kind: str = "nearest_neighbor",
                         block: int = 1 << 16) -> PathTrace:
    """Random walk from x until it first reaches S(x, 2 L_n); it crosses S(x, L_n - 1) on the way."""
    rng = np.random.default_rng(seed)
    x = np.asarray(x, dtype=np.int64)
    d = len(x)
    target = 2 * ScaleLadder(L0)[n]
    if kind == "nearest_neighbor":
        moves = np.concatenate([np.eye(d, dtype=np.int64), -np.eye(d, dtype=np.int64)])
    else:
        moves = np.array([m for m in itertools.product((-1, 0, 1), repeat=d) if any(m)], dtype=np.int64)
    chunks = [x[None, :]]
    pos = x.copy()
    while True:
        steps = moves[rng.integers(len(moves), size=block)]
        traj = pos + np.cumsum(steps, axis=0)
        r = np.abs(traj - x).max(axis=1)
        hit = np.flatnonzero(r >= target)
        if len(hit):
            chunks.append(traj[: hit[0] + 1])
            break
        chunks.append(traj)
        pos = traj[-1]
    return PathTrace(np.concatenate(chunks), kind)


# ----------------------------------------------------------------------------
# separation


def _leaf_pairs(n: int):
    lv = list(leaves(n))
    for a in range(len(lv)):
        for b in range(a + 1, len(lv)):
            yield lv[a], lv[b], rho(node_bits(lv[a]), node_bits(lv[b]))


def separation_check(e: ProperEmbedding) -> bool:
    """|T(m) - T(m')| >= L_{k-1} + 2 (L0 - 1) for every leaf pair at lexicographic distance k."""
    lad = e.ladder
    for a, b, k in _leaf_pairs(e.depth):
        dist = int(np.abs(e.points[a] - e.points[b]).max())
        if dist < lad[k - 1] + 2 * (e.L0 - 1):
            return False
    return True


def separation_margin(e: ProperEmbedding) -> float:
    """Smallest ratio |T(m) - T(m')| / L_{k-1} over leaf pairs (inf for n = 0)."""
    lad = e.ladder
    return min((float(np.abs(e.points[a] - e.points[b]).max()) / lad[k - 1]
                for a, b, k in _leaf_pairs(e.depth)), default=math.inf)


def separation_bruteforce(e: ProperEmbedding) -> bool:
    """The pointwise statement: all y on S(T(m), L0-1), z on S(T(m'), L0-1) satisfy |y - z| >= L_{k-1}."""
    lad = e.ladder
    base = sphere_array(e.dim, e.L0 - 1)
    for a, b, k in _leaf_pairs(e.depth):
        ys = base + e.points[a]
        zs = base + e.points[b]
        if np.abs(ys[:, None, :] - zs[None, :, :]).max(axis=2).min() < lad[k - 1]:
            return False
    return True


# ----------------------------------------------------------------------------
# leaf sets and the capacity ingredients


def leaf_point_set(e: ProperEmbedding) -> np.ndarray:
    return e.leaf_points.copy()


def leaf_frame_set(e: ProperEmbedding) -> np.ndarray:
    """Union of the frames S(T(m), L0 - 1) ∩ F over leaves; frames are disjoint for proper embeddings."""
    if not e.is_planar:
        raise ValueError("frame sets need an embedding into F")
    frames = [frame_array(c, e.L0) for c in e.leaf_points]
    out = np.concatenate(frames)
    if len(np.unique(out, axis=0)) != len(out):
        raise AssertionError("leaf frames overlap")
    return out


def green_sum_check(e: ProperEmbedding, green: GreenTable | None = None,
                    C_hat: float | None = None) -> float:
    """max_m sum_{m'} g(T(m), T(m')); asserts the bound 2.5 C_hat."""
    if e.L0 != 1:
        raise ValueError("the Green-sum bound is stated for L0 = 1")
    table = _with_far(green, e.dim)
    lp = e.leaf_points
    val = float(table.pairwise(lp).sum(axis=1).max())
    if C_hat is not None and val > 2.5 * C_hat:
        raise AssertionError(f"Green sum {val} exceeds 2.5 C_hat = {2.5 * C_hat}")
    return val


def leaf_capacity_check(e: ProperEmbedding, green: GreenTable | None = None,
                        C_hat: float | None = None) -> tuple[float, float]:
    """(cap(X_T), 0.4 2^n / C_hat)."""
    if e.depth > 3:
        raise ValueError("exact leaf capacities are run for n <= 3")
    table = _with_far(green, e.dim)
    if C_hat is None:
        from .green import reference_constants
        C_hat = reference_constants(e.dim).C_hat
    return equilibrium_exact(e.leaf_points, table).capacity, 0.4 * 2**e.depth / C_hat


def _with_far(green: GreenTable | None, d: int) -> GreenTable:
    t = reference_table(d) if green is None else green
    return t if t.far_field is not None else t.with_far_field()


def p_parameter(L0, d: int, c_hat: float, C_hat: float):
    """12 (C/c) L0^(3-d) in d >= 4 and 12 (C/c) / (1 + ln L0) in d = 3; mpmath input is kept exact."""
    if d < 3:
        raise ValueError("need d >= 3")
    if L0 < 1:
        raise ValueError("L0 must be >= 1")
    ratio = 12 * C_hat / c_hat
    if isinstance(L0, mpmath.mpf) or (isinstance(L0, int) and L0 > 10**300):
        L0 = mpmath.mpf(L0)
        return ratio * L0 ** (3 - d) if d >= 4 else ratio / (1 + mpmath.log(L0))
    return ratio * float(L0) ** (3 - d) if d >= 4 else ratio / (1 + math.log(L0))


def q_parameter(u: float, d: int, C_hat: float) -> float:
    if u < 0:
        raise ValueError("u must be nonnegative")
    return float(mpmath.mpf(constant_C(d)) * mpmath.exp(-0.4 * u / C_hat))


def q_threshold(d: int, C_hat: float) -> float:
    return 2.5 * C_hat * math.log(constant_C(d))


def admissible_L0(d: int, c_hat: float, C_hat: float):
    """ceil(exp(48 (C/c) C_2)) in d = 3 (as an mpmath number), ceil((48 (C/c) C_2)^(1/(d-3))) otherwise."""
    a = 48 * (C_hat / c_hat) * constant_C(2)
    if d == 3:
        with mpmath.workdps(50):
            return mpmath.ceil(mpmath.exp(mpmath.mpf(a)))
    return math.ceil(a ** (1.0 / (d - 3)))


def lower_threshold(d: int, L0, c_hat: float):
    """c_hat / (L0 C_2) 2^-(d+5)."""
    return mpmath.mpf(c_hat) / (mpmath.mpf(L0) * constant_C(2)) * mpmath.mpf(2) ** (-(d + 5))


@dataclass(frozen=True)
class EscapeChain:
    probability: float
    p: float
    method: str
    vacuous: bool

    @property
    def holds(self) -> bool:
        return self.vacuous or self.probability <= self.p


def escape_chain_check(e: ProperEmbedding, leaf: int, green: GreenTable | None = None,
                       c_hat: float | None = None, C_hat: float | None = None,
                       solver_cap: int = SOLVER_CAP) -> EscapeChain:
    """max over y in the frame of leaf m of P_y[hit the other frames], against p.

    Exact through the equilibrium measure of the other frames when they fit
    the solver; otherwise the sum over frames of the exact single-frame hitting
    probabilities, which is an upper bound.
    """
    if not e.is_planar:
        raise ValueError("escape chain needs a planar embedding")
    d = e.dim
    if c_hat is None or C_hat is None:
        from .green import reference_constants
        nc = reference_constants(d)
        c_hat = nc.c_hat if c_hat is None else c_hat
        C_hat = nc.C_hat if C_hat is None else C_hat
    p = p_parameter(e.L0, d, c_hat, C_hat)
    lp = e.leaf_points
    if not 0 <= leaf < len(lp):
        raise IndexError("leaf index out of range")
    own = frame_array(lp[leaf], e.L0)
    others = [frame_array(c, e.L0) for j, c in enumerate(lp) if j != leaf]
    if not others:
        return EscapeChain(0.0, p, "none", p >= 1)
    table = _with_far(green, d)
    rest = np.concatenate(others)
    if len(rest) <= solver_cap:
        m = equilibrium_exact(rest, table, solver_cap)
        prob = float((table.pairwise(own, m.points) @ m.weights).max())
        method = "exact"
    else:
        cap_cache = {}
        total = np.zeros(len(own))
        for f in others:
            rel = f - f[0]
            key = rel.tobytes()
            if key not in cap_cache:
                cap_cache[key] = equilibrium_exact(f, table, solver_cap).weights
            total += table.pairwise(own, f) @ cap_cache[key]
        prob = float(total.max())
        method = "union"
    return EscapeChain(prob, p, method, p >= 1)


@dataclass(frozen=True)
class DominationReport:
    k: np.ndarray
    survival: np.ndarray
    standard_error: np.ndarray
    geometric: np.ndarray
    flags: np.ndarray
    walks: int
    killed: int
    return_bound: float
    p: float
    start_law: str

    @property
    def flagged(self) -> bool:
        return bool(self.flags.any())


def domination_check(e: ProperEmbedding, walks_count: int, seed: int, p: float | None = None,
                     start_law=None, kill_dist: int | None = None, green: GreenTable | None = None,
                     return_target: float = 1e-3) -> DominationReport:
    """Survival function of the number of distinct frames visited, against p^(k-1).

    Walks start from the given law on K = X_T^box (points, probabilities) or,
    by default, the exact normalized equilibrium measure of K.  A walk is
    killed once it is farther than kill_dist from every frame; the chance that
    it would still reach another frame is at most cap(K) C_hat (kill_dist+1)^(2-d),
    and the default kill_dist makes this at most return_target.
    """
    from .green import reference_constants
    d = e.dim
    nc = reference_constants(d)
    if p is None:
        p = p_parameter(e.L0, d, nc.c_hat, nc.C_hat)
    K = leaf_frame_set(e)
    if start_law is None:
        m = equilibrium_exact(K, _with_far(green, d), max(SOLVER_CAP, len(K)))
        pts, probs, cap, label = m.points, m.normalized, m.capacity, "exact"
    else:
        pts, probs, cap, label = start_law.points, start_law.probs, start_law.capacity, start_law.method
    if kill_dist is None:
        kill_dist = max(1, math.ceil((cap * nc.C_hat / return_target) ** (1 / (d - 2))) - 1)
    rng = np.random.default_rng(seed)
    starts = pts[rng.choice(len(pts), size=walks_count, p=probs)]
    counts, killed = walks.count_frames(e.leaf_points, e.L0 - 1, starts,
                                        walks.walk_seeds(rng, walks_count), kill_dist)
    nf = 2**e.depth
    ks = np.arange(1, nf + 1)
    surv = np.array([(counts >= k).mean() for k in ks])
    se = np.sqrt(surv * (1 - surv) / walks_count)
    geo = np.minimum(1.0, float(p) ** (ks - 1.0))
    flags = surv - 3 * se > geo
    bound = min(1.0, cap * nc.C_hat * float(kill_dist + 1) ** (2 - d))
    return DominationReport(ks, surv, se, geo, flags, walks_count, int(killed.sum()), bound, float(p), label)


def chernoff_bound_eval(u, L0, d: int, c_hat: float, C_hat: float, cap_frame=None) -> mpmath.mpf:
    """Per-leaf factor exp(u cap(box_0) / p) * 2 p C_2 of the final exponential Chebyshev step.

    cap(box_0) defaults to the frame bound 8 L0 / c_hat (with the logarithmic
    gain in d = 3); an exact value can be passed instead.
    """
    p = mpmath.mpf(p_parameter(L0, d, c_hat, C_hat))
    if p >= 0.5:
        raise ValueError(f"the exponential Chebyshev step needs p < 1/2 (p = {mpmath.nstr(p, 6)})")
    if cap_frame is None:
        L = mpmath.mpf(L0)
        cap_frame = 8 * L / c_hat if d >= 4 else 8 * L / (c_hat * (1 + mpmath.log(L)))
    return mpmath.exp(mpmath.mpf(u) * cap_frame / p) * 2 * p * constant_C(2)


def embedding_frames_pairwise_disjoint(e: ProperEmbedding) -> bool:
    frames = [{tuple(r) for r in frame_array(c, e.L0).tolist()} for c in e.leaf_points]
    return all(not (a & b) for a, b in itertools.combinations(frames, 2))

