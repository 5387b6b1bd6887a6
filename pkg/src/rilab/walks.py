"""Simple-random-walk engine with exact cube-jump acceleration.

Far from the target set the walk is advanced by jumping to the exit point of
the largest lattice cube Q(x, s) that avoids the target.  The exit law of the
cube is the exact harmonic measure of the lattice walk started at its center,
so the sequence of positions visited *near* the target has exactly the law of
the plain walk.  Exit laws are computed once per dimension by a transverse
sine-transform solve and cached.

Every walk owns an independent xoshiro256** stream seeded from a 64-bit key,
which makes results bit-reproducible regardless of how walks are batched.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numba as nb
import numpy as np
from scipy.fft import dstn

_TABLE_VERSION = 1
# max number of transverse entries in a cube-exit solve, per dimension
_MAX_FACE = 20_000_000


# ----------------------------------------------------------------------------
# cube exit laws


def cube_exit_face(d: int, s: int) -> np.ndarray:
    """Exit law on the face x_1 = s + 1 of the cube |x| <= s, walk started at 0.

    Returns an array of shape (2s+1,)*(d-1) indexed by transverse offset + s.
    Summed over all 2d faces the law has total mass 1.
    """
    if d < 2:
        raise ValueError("cube exit laws need d >= 2")
    n = 2 * s + 1
    k = np.arange(1, n + 1)
    theta = np.pi * k / (n + 1)
    phi0 = np.sqrt(2.0 / (n + 1)) * np.sin(np.pi * k / 2.0)
    m = d - 1
    cosh_a = np.full((n,) * m, float(d))
    coef = np.full((n,) * m, 0.5)
    for j in range(m):
        shape = [1] * m
        shape[j] = n
        cosh_a = cosh_a - np.cos(theta).reshape(shape)
        coef = coef * phi0.reshape(shape)
    a = np.arccosh(cosh_a) * (s + 1)
    coef *= 2.0 * np.exp(-a) / (1.0 + np.exp(-2.0 * a))
    return dstn(coef, type=1, norm="ortho")


def _quadrant_law(d: int, s: int) -> np.ndarray:
    face = cube_exit_face(d, s)
    q = face[(slice(s, None),) * (d - 1)].copy()
    for j in range(d - 1):
        shape = [1] * (d - 1)
        shape[j] = s + 1
        mult = np.full(s + 1, 2.0)
        mult[0] = 1.0
        q = q * mult.reshape(shape)
    q = np.clip(q, 0.0, None)
    return q.ravel() / q.sum()


def max_jump_radius(d: int) -> int:
    s = 1
    while (2 * (2 * s) + 1) ** (d - 1) <= _MAX_FACE:
        s *= 2
    return s


@dataclass(frozen=True)
class ExitTables:
    dim: int
    radii: np.ndarray  # jump radii s, ascending, radii[0] == 1
    starts: np.ndarray  # offset of each radius' cumulative law in `cum`
    cum: np.ndarray  # concatenated cumulative quadrant laws


def _cache_dir() -> Path:
    root = os.environ.get("RILAB_CACHE") or os.path.join(Path.home(), ".cache", "rilab")
    return Path(root)


@lru_cache(maxsize=None)
def exit_tables(d: int) -> ExitTables:
    path = _cache_dir() / f"exit_d{d}_v{_TABLE_VERSION}.npz"
    if path.exists():
        with np.load(path) as z:
            return ExitTables(d, z["radii"], z["starts"], z["cum"])
    radii, starts, cums = [], [], []
    off = 0
    s = 1
    s_max = max_jump_radius(d)
    while s <= s_max:
        law = _quadrant_law(d, s)
        c = np.cumsum(law)
        c[-1] = 1.0
        radii.append(s)
        starts.append(off)
        cums.append(c)
        off += len(c)
        s *= 2
    tab = ExitTables(d, np.array(radii, dtype=np.int64), np.array(starts, dtype=np.int64),
                     np.concatenate(cums))
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp.npz")
        np.savez(tmp, radii=tab.radii, starts=tab.starts, cum=tab.cum)
        os.replace(tmp, path)
    except OSError:
        pass
    return tab


# ----------------------------------------------------------------------------
# RNG


@nb.njit(cache=True)
def _splitmix(z):
    z = (z + np.uint64(0x9E3779B97F4A7C15))
    x = z
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    x = x ^ (x >> np.uint64(31))
    return z, x


@nb.njit(cache=True)
def _seed_state(seed, state):
    z = np.uint64(seed)
    for i in range(4):
        z, v = _splitmix(z)
        state[i] = v


@nb.njit(cache=True)
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@nb.njit(cache=True)
def _next(state):
    result = _rotl(state[1] * np.uint64(5), 7) * np.uint64(9)
    t = state[1] << np.uint64(17)
    state[2] ^= state[0]
    state[3] ^= state[1]
    state[1] ^= state[2]
    state[0] ^= state[3]
    state[2] ^= t
    state[3] = _rotl(state[3], 45)
    return result


@nb.njit(cache=True)
def _uniform(state):
    return float(_next(state) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@nb.njit(cache=True)
def _randint(state, n):
    return int(_uniform(state) * n)


@nb.njit(cache=True)
def _simple_step(x, d, state):
    r = _randint(state, 2 * d)
    if r < d:
        x[r] += 1
    else:
        x[r - d] -= 1


@nb.njit(cache=True)
def _cube_jump(x, d, k, radii, starts, cum, state):
    """Move x to the exit point of the cube of radius radii[k] around it."""
    s = radii[k]
    lo = starts[k]
    size = (s + 1) ** (d - 1)
    u = _uniform(state)
    # binary search in cum[lo : lo + size]
    a = lo
    b = lo + size - 1
    while a < b:
        mid = (a + b) // 2
        if cum[mid] < u:
            a = mid + 1
        else:
            b = mid
    idx = a - lo
    face = _randint(state, 2 * d)
    axis = face % d
    sign = 1 if face < d else -1
    x[axis] += sign * (s + 1)
    for j in range(d):
        if j == axis:
            continue
        v = idx % (s + 1)
        idx //= s + 1
        if v != 0:
            if _uniform(state) < 0.5:
                x[j] += v
            else:
                x[j] -= v


@nb.njit(cache=True)
def _pick_jump(dist, radii):
    """Largest table index k with radii[k] <= dist - 1, or -1 for a plain step."""
    k = -1
    for i in range(len(radii)):
        if radii[i] <= dist - 1:
            k = i
        else:
            break
    return k


@nb.njit(cache=True)
def _sup_from(x, c, d):
    m = 0
    for j in range(d):
        v = abs(x[j] - c[j])
        if v > m:
            m = v
    return m


@nb.njit(cache=True)
def _box_dist(x, lo, hi, d):
    m = 0
    for j in range(d):
        v = 0
        if x[j] < lo[j]:
            v = lo[j] - x[j]
        elif x[j] > hi[j]:
            v = x[j] - hi[j]
        if v > m:
            m = v
    return m


@nb.njit(cache=True)
def _box_index(x, lo, shape, d):
    flat = 0
    for j in range(d):
        flat = flat * shape[j] + (x[j] - lo[j])
    return flat


# ----------------------------------------------------------------------------
# box-target walks

MODE_MARK = 0  # record min label at every visited target site
MODE_FIRST = 1  # stop at first visit to the target at time >= first_time


@nb.njit(cache=True)
def _walk_box(x, d, state, lo, hi, shape, index_map, center, kill_radius,
              radii, starts, cum, mode, label, marks, first_time, max_moves):
    """Advance one walk from x; returns (first hit index or -1, killed flag)."""
    t = 0
    moves = 0
    while True:
        dist = _box_dist(x, lo, hi, d)
        if dist == 0:
            idx = index_map[_box_index(x, lo, shape, d)]
            if idx >= 0:
                if mode == MODE_MARK:
                    if label < marks[idx]:
                        marks[idx] = label
                elif t >= first_time:
                    return idx, False
        if _sup_from(x, center, d) > kill_radius:
            return -1, True
        if max_moves > 0 and moves >= max_moves:
            return -1, True
        k = _pick_jump(dist, radii)
        if k < 0:
            _simple_step(x, d, state)
        else:
            _cube_jump(x, d, k, radii, starts, cum, state)
        t += 1
        moves += 1


@nb.njit(cache=True)
def _mark_walks(starts_xyz, seeds, labels, groups, lo, hi, shape, index_map, center,
                kill_radius, radii, starts, cum, marks2d):
    """Run many walks in MARK mode; marks2d[group, site] = min label seen."""
    n, d = starts_xyz.shape
    state = np.empty(4, dtype=np.uint64)
    x = np.empty(d, dtype=np.int64)
    killed = 0
    for w in range(n):
        _seed_state(seeds[w], state)
        for j in range(d):
            x[j] = starts_xyz[w, j]
        _, k = _walk_box(x, d, state, lo, hi, shape, index_map, center, kill_radius,
                         radii, starts, cum, MODE_MARK, labels[w], marks2d[groups[w]], 0, 0)
        killed += k
    return killed


@nb.njit(cache=True)
def _first_hits(starts_xyz, seeds, lo, hi, shape, index_map, center, kill_radius,
                radii, starts, cum, first_time, out):
    n, d = starts_xyz.shape
    state = np.empty(4, dtype=np.uint64)
    x = np.empty(d, dtype=np.int64)
    dummy = np.empty(1, dtype=np.float64)
    for w in range(n):
        _seed_state(seeds[w], state)
        for j in range(d):
            x[j] = starts_xyz[w, j]
        idx, _ = _walk_box(x, d, state, lo, hi, shape, index_map, center, kill_radius,
                           radii, starts, cum, MODE_FIRST, 0.0, dummy, first_time, 0)
        out[w] = idx


@nb.njit(cache=True)
def _green_counts(n_walks, seed0, d, r_tab, key_map, orbit, kill_radius,
                  radii, starts, cum, sums, sumsq):
    """Visit counts of walks from 0 in the ball |x| <= r_tab, pooled per symmetry key.

    Per walk the orbit-averaged visit count of each key contributes to sums and sumsq.
    """
    side = 2 * r_tab + 1
    lo = np.full(d, -r_tab, dtype=np.int64)
    hi = np.full(d, r_tab, dtype=np.int64)
    shape = np.full(d, side, dtype=np.int64)
    center = np.zeros(d, dtype=np.int64)
    nkeys = len(orbit)
    counts = np.zeros(nkeys, dtype=np.int64)
    touched = np.empty(nkeys, dtype=np.int64)
    state = np.empty(4, dtype=np.uint64)
    x = np.empty(d, dtype=np.int64)
    killed_outside = 0
    for w in range(n_walks):
        _seed_state(np.uint64(seed0) + np.uint64(w) * np.uint64(0x9E3779B97F4A7C15), state)
        for j in range(d):
            x[j] = 0
        nt = 0
        while True:
            dist = _box_dist(x, lo, hi, d)
            if dist == 0:
                key = key_map[_box_index(x, lo, shape, d)]
                if counts[key] == 0:
                    touched[nt] = key
                    nt += 1
                counts[key] += 1
            if _sup_from(x, center, d) > kill_radius:
                break
            k = _pick_jump(dist, radii)
            if k < 0:
                _simple_step(x, d, state)
            else:
                _cube_jump(x, d, k, radii, starts, cum, state)
        for i in range(nt):
            key = touched[i]
            v = counts[key] / orbit[key]
            sums[key] += v
            sumsq[key] += v * v
            counts[key] = 0
        killed_outside += 1
    return killed_outside


# ----------------------------------------------------------------------------
# frame-target walks (planar square rings in F)


@nb.njit(cache=True)
def _frames_dist(x, d, fc, r):
    off = 0
    for j in range(2, d):
        v = abs(x[j])
        if v > off:
            off = v
    best = 1 << 62
    hit = -1
    for m in range(fc.shape[0]):
        a = abs(x[0] - fc[m, 0])
        b = abs(x[1] - fc[m, 1])
        ring = abs(max(a, b) - r)
        v = max(off, ring)
        if v < best:
            best = v
            hit = m
    return best, hit


@nb.njit(cache=True)
def _count_frames(starts_xyz, seeds, fc, r, kill_dist, radii, starts, cum, out_counts, out_killed):
    """Number of distinct frames visited by each walk (start frame included).

    A walk is killed once its sup-distance to every frame exceeds kill_dist.
    """
    n, d = starts_xyz.shape
    nf = fc.shape[0]
    seen = np.zeros(nf, dtype=np.uint8)
    state = np.empty(4, dtype=np.uint64)
    x = np.empty(d, dtype=np.int64)
    for w in range(n):
        _seed_state(seeds[w], state)
        for j in range(d):
            x[j] = starts_xyz[w, j]
        for m in range(nf):
            seen[m] = 0
        cnt = 0
        while True:
            dist, m = _frames_dist(x, d, fc, r)
            if dist == 0 and seen[m] == 0:
                seen[m] = 1
                cnt += 1
                if cnt == nf:
                    break
            if dist > kill_dist:
                out_killed[w] = 1
                break
            k = _pick_jump(dist, radii)
            if k < 0:
                _simple_step(x, d, state)
            else:
                _cube_jump(x, d, k, radii, starts, cum, state)
        out_counts[w] = cnt


# ----------------------------------------------------------------------------
# python-side helpers


@dataclass(frozen=True)
class BoxTarget:
    """A finite target set K described by its bounding box and an index map."""

    points: np.ndarray  # (N, d) int64, the sites of K in index order
    lo: np.ndarray
    hi: np.ndarray
    shape: np.ndarray
    index_map: np.ndarray  # flat over the box, -1 outside K

    @classmethod
    def from_points(cls, points) -> "BoxTarget":
        pts = np.asarray(points, dtype=np.int64)
        if pts.ndim != 2 or len(pts) == 0:
            raise ValueError("target set must be a nonempty (N, d) array")
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        shape = hi - lo + 1
        size = int(np.prod(shape))
        if size > 200_000_000:
            raise MemoryError(f"bounding box of target has {size} sites")
        index_map = np.full(size, -1, dtype=np.int32)
        flat = np.ravel_multi_index(tuple((pts - lo).T), tuple(shape))
        if len(np.unique(flat)) != len(flat):
            raise ValueError("target points must be distinct")
        index_map[flat] = np.arange(len(pts), dtype=np.int32)
        return cls(pts, lo, hi, shape.astype(np.int64), index_map)

    @classmethod
    def cube(cls, d: int, radius: int, center=None) -> "BoxTarget":
        c = np.zeros(d, dtype=np.int64) if center is None else np.asarray(center, dtype=np.int64)
        lo = c - radius
        hi = c + radius
        shape = np.full(d, 2 * radius + 1, dtype=np.int64)
        n = int(np.prod(shape))
        return cls(None, lo, hi, shape, np.arange(n, dtype=np.int32))

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def size(self) -> int:
        return int((self.index_map >= 0).sum()) if self.points is None else len(self.points)

    @property
    def center(self) -> np.ndarray:
        return (self.lo + self.hi) // 2

    @property
    def diameter(self) -> int:
        return int((self.hi - self.lo).max())


def walk_seeds(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.integers(0, 2**63 - 1, size=n, dtype=np.int64).astype(np.uint64)


def mark_walks(target: BoxTarget, starts_xyz, seeds, labels, groups, n_groups, kill_radius):
    """Min-label marks of walks on the target; returns (marks[n_groups, |K|], killed)."""
    tab = exit_tables(target.dim)
    n_sites = int(target.index_map.max()) + 1
    marks = np.full((n_groups, n_sites), np.inf)
    killed = _mark_walks(np.ascontiguousarray(starts_xyz, dtype=np.int64), seeds,
                         np.asarray(labels, dtype=np.float64), np.asarray(groups, dtype=np.int64),
                         target.lo, target.hi, target.shape, target.index_map, target.center,
                         int(kill_radius), tab.radii, tab.starts, tab.cum, marks)
    return marks, int(killed)


def first_hits(target: BoxTarget, starts_xyz, seeds, kill_radius, first_time=0):
    tab = exit_tables(target.dim)
    out = np.empty(len(seeds), dtype=np.int64)
    _first_hits(np.ascontiguousarray(starts_xyz, dtype=np.int64), seeds, target.lo, target.hi,
                target.shape, target.index_map, target.center, int(kill_radius),
                tab.radii, tab.starts, tab.cum, int(first_time), out)
    return out


def count_frames(frame_centers, ring_radius, starts_xyz, seeds, kill_dist):
    """Distinct planar rings S(c, ring_radius) ∩ F visited per walk, and kill flags."""
    starts_xyz = np.ascontiguousarray(starts_xyz, dtype=np.int64)
    tab = exit_tables(starts_xyz.shape[1])
    counts = np.empty(len(seeds), dtype=np.int64)
    killed = np.zeros(len(seeds), dtype=np.int64)
    _count_frames(starts_xyz, seeds, np.ascontiguousarray(frame_centers, dtype=np.int64),
                  int(ring_radius), int(kill_dist), tab.radii, tab.starts, tab.cum, counts, killed)
    return counts, killed
