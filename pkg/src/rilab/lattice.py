"""Lattice geometry on Z^d: sup-norm spheres, the plane F, frames, sticks, scales, paths.

Points are plain tuples of Python ints; the dimension is ``len(point)``.
Everything here is exact integer arithmetic.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Sequence

import numpy as np

Point = tuple[int, ...]


class DimensionMismatch(ValueError):
    pass


def point(*coords: int) -> Point:
    if len(coords) == 1 and not isinstance(coords[0], (int, np.integer)):
        coords = tuple(coords[0])
    return tuple(int(c) for c in coords)


def origin(dim: int) -> Point:
    return (0,) * dim


def _check_dims(x: Sequence[int], y: Sequence[int]) -> None:
    if len(x) != len(y):
        raise DimensionMismatch(f"dimension mismatch: {len(x)} vs {len(y)}")


def add(x: Point, y: Point) -> Point:
    _check_dims(x, y)
    return tuple(a + b for a, b in zip(x, y))


def sub(x: Point, y: Point) -> Point:
    _check_dims(x, y)
    return tuple(a - b for a, b in zip(x, y))


def scale(x: Point, k: int) -> Point:
    return tuple(k * a for a in x)


def norm(x: Sequence[int]) -> int:
    """Sup-norm |x|."""
    return max((abs(int(a)) for a in x), default=0)


def chebyshev(x: Sequence[int], y: Sequence[int]) -> int:
    _check_dims(x, y)
    return max((abs(int(a) - int(b)) for a, b in zip(x, y)), default=0)


def iter_sphere(x: Point, R: int) -> Iterator[Point]:
    """Yield S(x, R) in lexicographic order without materializing the ball."""
    if R < 0:
        raise ValueError("radius must be nonnegative")
    d = len(x)
    if R == 0:
        yield tuple(x)
        return
    rng = range(-R, R + 1)
    # lexicographic over offsets; skip interior by jumping the last coordinate
    for head in itertools.product(rng, repeat=d - 1):
        if max((abs(h) for h in head), default=0) == R:
            for t in rng:
                yield tuple(a + b for a, b in zip(x, head + (t,)))
        else:
            for t in (-R, R):
                yield tuple(a + b for a, b in zip(x, head + (t,)))


def sphere(x: Point, R: int) -> set[Point]:
    return set(iter_sphere(x, R))


def sphere_size(d: int, R: int) -> int:
    return 1 if R == 0 else (2 * R + 1) ** d - (2 * R - 1) ** d


def sphere_array(d: int, R: int, center: Sequence[int] | None = None) -> np.ndarray:
    """S(center, R) as an (M, d) int64 array, lexicographically sorted."""
    pts = np.array(list(iter_sphere(origin(d), R)), dtype=np.int64).reshape(-1, d)
    if center is not None:
        pts = pts + np.asarray(center, dtype=np.int64)
    return pts


def ball_array(d: int, R: int, center: Sequence[int] | None = None) -> np.ndarray:
    axes = [np.arange(-R, R + 1)] * d
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d).astype(np.int64)
    if center is not None:
        pts = pts + np.asarray(center, dtype=np.int64)
    return pts


def in_plane(x: Sequence[int]) -> bool:
    return all(int(a) == 0 for a in x[2:])


def plane_section(points: Iterable[Point]) -> set[Point]:
    """Intersection with F = Z^2 x {0}^(d-2)."""
    return {tuple(p) for p in points if in_plane(p)}


def frame(y: Point, L: int) -> set[Point]:
    """The planar square ring S(y, L-1) ∩ F (y must lie in F)."""
    if L < 1:
        raise ValueError("frame side parameter L must be >= 1")
    if not in_plane(y):
        raise ValueError(f"frame center {y} is not in the plane F")
    r = L - 1
    tail = tuple(y[2:])
    if r == 0:
        return {tuple(y)}
    out = set()
    for a in range(-r, r + 1):
        for b in (-r, r):
            out.add((y[0] + a, y[1] + b) + tail)
            out.add((y[0] + b, y[1] + a) + tail)
    return out


def frame_array(y: Sequence[int], L: int) -> np.ndarray:
    return np.array(sorted(frame(tuple(int(c) for c in y), L)), dtype=np.int64)


def frame_sticks(y: Point, L: int) -> list[set[Point]]:
    """The four (corner-overlapping) sticks of length 2L-1 whose union is the frame."""
    if not in_plane(y):
        raise ValueError(f"frame center {y} is not in the plane F")
    r = L - 1
    tail = tuple(y[2:])
    x0, x1 = y[0], y[1]
    span = range(-r, r + 1)
    return [
        {(x0 + a, x1 - r) + tail for a in span},
        {(x0 + a, x1 + r) + tail for a in span},
        {(x0 - r, x1 + a) + tail for a in span},
        {(x0 + r, x1 + a) + tail for a in span},
    ]


def stick(length: int, d: int) -> set[Point]:
    """{1, ..., length} x {0}^(d-1)."""
    if length < 1:
        raise ValueError("stick length must be >= 1")
    return {(i,) + (0,) * (d - 1) for i in range(1, length + 1)}


def stick_array(length: int, d: int) -> np.ndarray:
    return np.array(sorted(stick(length, d)), dtype=np.int64)


@dataclass(frozen=True)
class ScaleLadder:
    """L_n = L0 * 6**n."""

    L0: int
    ratio: int = field(default=6, init=False, repr=False)

    def __post_init__(self):
        if int(self.L0) < 1:
            raise ValueError("L0 must be a positive integer")

    def __getitem__(self, n: int) -> int:
        if n < 0:
            raise IndexError("scale index must be nonnegative")
        return self.L0 * 6**n

    def levels(self, n: int) -> list[int]:
        return [self[k] for k in range(n + 1)]


class PathKind(str, Enum):
    nearest_neighbor = "nearest_neighbor"
    star_connected = "star_connected"


@dataclass(frozen=True)
class PathTrace:
    sites: np.ndarray
    kind: PathKind = PathKind.star_connected

    def __post_init__(self):
        sites = np.asarray(self.sites, dtype=np.int64)
        if sites.ndim != 2 or len(sites) == 0:
            raise ValueError("a path needs at least one site given as an (l+1, d) array")
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "kind", PathKind(self.kind))
        steps = np.diff(sites, axis=0)
        if len(steps):
            if self.kind is PathKind.nearest_neighbor:
                ok = np.abs(steps).sum(axis=1) == 1
            else:
                ok = np.abs(steps).max(axis=1) == 1
            if not ok.all():
                i = int(np.argmin(ok)) + 1
                raise ValueError(f"step {i} violates {self.kind.value} connectivity")

    @property
    def dim(self) -> int:
        return self.sites.shape[1]

    def __len__(self) -> int:
        return len(self.sites)

    def range_set(self) -> set[Point]:
        return {tuple(int(c) for c in s) for s in self.sites}

    def to_json(self) -> str:
        return json.dumps({"kind": self.kind.value, "sites": self.sites.tolist()})

    @classmethod
    def from_json(cls, line: str) -> "PathTrace":
        obj = json.loads(line)
        return cls(np.array(obj["sites"], dtype=np.int64).reshape(len(obj["sites"]), -1), obj["kind"])


def write_paths(paths: Iterable[PathTrace], fh) -> None:
    for p in paths:
        fh.write(p.to_json() + "\n")


def read_paths(fh) -> list[PathTrace]:
    return [PathTrace.from_json(line) for line in fh if line.strip()]


def point_to_json(x: Point) -> str:
    return json.dumps([int(c) for c in x])


def point_from_json(s: str) -> Point:
    return tuple(int(c) for c in json.loads(s))


def sup_dist_to_center(sites: np.ndarray, x: Sequence[int]) -> np.ndarray:
    return np.abs(np.asarray(sites, dtype=np.int64) - np.asarray(x, dtype=np.int64)).max(axis=1)


def crosses_annulus(path: PathTrace, x: Sequence[int], R_in: int, R_out: int) -> bool:
    """True iff the path range meets both S(x, R_in) and S(x, R_out)."""
    if R_in >= R_out:
        raise ValueError("need R_in < R_out")
    if len(x) != path.dim:
        raise DimensionMismatch(f"dimension mismatch: {len(x)} vs {path.dim}")
    r = sup_dist_to_center(path.sites, x)
    return bool((r == R_in).any() and (r == R_out).any())
