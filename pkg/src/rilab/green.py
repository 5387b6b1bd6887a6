"""Green function g(x, y) of simple random walk on Z^d, d >= 3.

Three independent evaluators:

* ``green_solve``: killed Green functions of two lattice boxes, obtained
  exactly by a type-I sine transform, combined by Richardson extrapolation
  in the effective boundary radius;
* ``green_mc``: visit counts of accelerated random walks with a truncation
  certificate;
* ``HeatKernelGreen``: numerical quadrature of the continuous-time heat kernel
  integral  g(0, x) = int_0^inf prod_i e^{-t/d} I_{x_i}(t/d) dt,  used for
  displacements far outside any tabulated box.

Tables are keyed by displacement, so translation invariance and the
hyperoctahedral symmetry are structural.
"""
from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numba as nb
import numpy as np
from scipy.fft import dstn
from scipy.special import ive

from . import walks

log = logging.getLogger(__name__)

METHODS = ("monte_carlo", "lattice_solve", "quadrature")


class MissingGreenEntry(KeyError):
    pass


class IncompleteTable(ValueError):
    pass


# ----------------------------------------------------------------------------
# heat-kernel quadrature


def _ive_debye(nu: float, z: np.ndarray) -> np.ndarray:
    w = z / nu
    sq = np.sqrt(1.0 + w * w)
    p = 1.0 / sq
    eta_minus_w = 1.0 / (sq + w) - np.arcsinh(1.0 / w)
    p2 = p * p
    u1 = p * (3 - 5 * p2) / 24
    u2 = p2 * (81 - 462 * p2 + 385 * p2**2) / 1152
    u3 = p * p2 * (30375 - 369603 * p2 + 765765 * p2**2 - 425425 * p2**3) / 414720
    u4 = p2 * p2 * (4465125 - 94121676 * p2 + 349922430 * p2**2 - 446185740 * p2**3
                    + 185910725 * p2**4) / 39813120
    series = 1 + u1 / nu + u2 / nu**2 + u3 / nu**3 + u4 / nu**4
    return np.exp(nu * eta_minus_w) / np.sqrt(2 * np.pi * nu) / (1 + w * w) ** 0.25 * series


def _ive_hankel(nu: float, z: np.ndarray, terms: int = 6) -> np.ndarray:
    mu = 4.0 * nu * nu
    term = np.ones_like(z)
    total = np.ones_like(z)
    for k in range(1, terms + 1):
        term = term * (-(mu - (2 * k - 1) ** 2) / (k * 8.0 * z))
        total += term
    return total / np.sqrt(2 * np.pi * z)


def scaled_bessel(nu: int, z: np.ndarray) -> np.ndarray:
    """e^{-z} I_nu(z), valid beyond scipy's argument range."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = z <= 1e8
    out[small] = ive(nu, z[small])
    big = ~small
    if big.any():
        out[big] = _ive_debye(float(nu), z[big]) if nu >= 20 else _ive_hankel(float(nu), z[big])
    return out


@nb.njit(cache=True)
def _quad_sum(idx, rows, first, weights, out):
    n, d = idx.shape
    q = rows.shape[1]
    for i in range(n):
        k0 = 0
        for j in range(d):
            f = first[idx[i, j]]
            if f > k0:
                k0 = f
        acc = 0.0
        for k in range(k0, q):
            prod = weights[k]
            for j in range(d):
                prod *= rows[idx[i, j], k]
            acc += prod
        out[i] = acc


class HeatKernelGreen:
    """g(0, x) by trapezoidal quadrature in log-time with analytic tails.

    The integrand is analytic in s = log t, so the trapezoid rule converges
    geometrically; step 0.2 reproduces the step-0.1 values to ~1e-12.
    """

    def __init__(self, dim: int, step: float = 0.2, s_min: float = -40.0, s_max: float = 50.0):
        if dim < 3:
            raise ValueError("the Green function is finite only for d >= 3")
        self.dim = dim
        self.s = np.arange(s_min, s_max + step / 2, step)
        self.t = np.exp(self.s)
        self.weights = step * self.t
        self.weights[-1] *= 0.5
        self.T = self.t[-1]
        self._rows: dict[int, int] = {}
        self._table = np.zeros((0, len(self.s)))
        self._first = np.zeros(0, dtype=np.int64)
        self._cache: dict[tuple, float] = {}

    def _ensure_rows(self, values: np.ndarray) -> None:
        new = [int(v) for v in values if int(v) not in self._rows]
        if not new:
            return
        z = self.t / self.dim
        block = np.stack([scaled_bessel(v, z) for v in new])
        first = np.array([int(np.argmax(r > 1e-300 * max(r.max(), 1e-300))) for r in block])
        base = len(self._table)
        self._table = np.vstack([self._table, block])
        self._first = np.concatenate([self._first, first]).astype(np.int64)
        for i, v in enumerate(new):
            self._rows[v] = base + i

    def evaluate_canonical(self, keys: np.ndarray) -> np.ndarray:
        """Values for an (N, d) array of nonnegative displacements."""
        keys = np.asarray(keys, dtype=np.int64)
        d = self.dim
        self._ensure_rows(np.unique(keys))
        lookup = np.vectorize(self._rows.__getitem__, otypes=[np.int64])
        idx = lookup(keys) if keys.size else keys.copy()
        out = np.empty(len(keys))
        _quad_sum(idx.reshape(len(keys), d), self._table, self._first, self.weights, out)
        # tail beyond T from the large-argument expansion of the integrand
        a = (d / (2 * np.pi)) ** (d / 2)
        corr = d * (4.0 * (keys.astype(float) ** 2) - 1.0).sum(axis=1) / 8.0
        out += a * (self.T ** (1 - d / 2) / (d / 2 - 1) - corr * self.T ** (-d / 2) / (d / 2))
        zero = ~keys.any(axis=1)
        out[zero] += math.exp(self.s[0])
        return out

    def __call__(self, disp) -> np.ndarray:
        disp = np.atleast_2d(np.asarray(disp, dtype=np.int64))
        keys = -np.sort(-np.abs(disp), axis=1)
        uniq, inv = np.unique(keys, axis=0, return_inverse=True)
        return self.evaluate_canonical(uniq)[inv.ravel()]

    def error_bound(self, values: np.ndarray) -> np.ndarray:
        return 1e-11 + 1e-9 * np.abs(values)


@lru_cache(maxsize=None)
def heat_kernel(dim: int) -> HeatKernelGreen:
    return HeatKernelGreen(dim)


# ----------------------------------------------------------------------------
# tables


def canonical_keys(dim: int, radius: int) -> np.ndarray:
    """Nonincreasing nonnegative displacements with sup-norm <= radius."""
    keys = [k for k in itertools.combinations_with_replacement(range(radius, -1, -1), dim)]
    return np.array(keys, dtype=np.int64).reshape(-1, dim)


def orbit_size(key: Sequence[int]) -> int:
    key = [abs(int(k)) for k in key]
    n = math.factorial(len(key))
    for v in set(key):
        n //= math.factorial(key.count(v))
    return n * 2 ** sum(1 for k in key if k)


@dataclass
class GreenTable:
    """Dense table of g(0, x) over |x| <= radius, indexed by |x_1|, ..., |x_d|."""

    dim: int
    radius: int
    values: np.ndarray
    errors: np.ndarray
    methods: np.ndarray  # uint8 codes into METHODS
    far_field: HeatKernelGreen | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.dim < 3:
            raise ValueError("GreenTable requires d >= 3")
        shape = (self.radius + 1,) * self.dim
        for name in ("values", "errors", "methods"):
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} must have shape {shape}")

    @classmethod
    def from_canonical(cls, dim, radius, keys, values, errors, method, far_field=None):
        shape = (radius + 1,) * dim
        vals = np.full(shape, np.nan)
        errs = np.full(shape, np.nan)
        meth = np.zeros(shape, dtype=np.uint8)
        code = METHODS.index(method) if isinstance(method, str) else None
        for i, key in enumerate(np.asarray(keys)):
            for perm in set(itertools.permutations(key.tolist())):
                vals[perm] = values[i]
                errs[perm] = errors[i]
                meth[perm] = code if code is not None else method[i]
        if np.isnan(vals).any():
            raise IncompleteTable("canonical keys do not cover the table box")
        return cls(dim, radius, vals, errs, meth, far_field)

    def with_far_field(self) -> "GreenTable":
        return GreenTable(self.dim, self.radius, self.values, self.errors, self.methods,
                          heat_kernel(self.dim))

    def covers(self, radius: int) -> bool:
        return radius <= self.radius

    def _split(self, disp):
        disp = np.atleast_2d(np.asarray(disp, dtype=np.int64))
        if disp.shape[1] != self.dim:
            raise ValueError(f"displacements must have {self.dim} columns")
        a = np.abs(disp)
        inside = a.max(axis=1) <= self.radius
        return a, inside

    def __call__(self, disp) -> np.ndarray:
        a, inside = self._split(disp)
        out = np.empty(len(a))
        out[inside] = self.values[tuple(a[inside].T)]
        if not inside.all():
            if self.far_field is None:
                far = a[~inside][0]
                raise MissingGreenEntry(f"displacement {far.tolist()} outside table radius {self.radius}")
            out[~inside] = self.far_field(a[~inside])
        return out

    def error(self, disp) -> np.ndarray:
        a, inside = self._split(disp)
        out = np.empty(len(a))
        out[inside] = self.errors[tuple(a[inside].T)]
        if not inside.all():
            if self.far_field is None:
                raise MissingGreenEntry("displacement outside table radius")
            out[~inside] = self.far_field.error_bound(self.far_field(a[~inside]))
        return out

    def g(self, x: Sequence[int], y: Sequence[int]) -> float:
        return float(self(np.subtract(x, y))[0])

    def at(self, key: Sequence[int]) -> float:
        return float(self(np.asarray(key)[None, :])[0])

    def pairwise(self, points, others=None) -> np.ndarray:
        """Matrix g(p_i, q_j); large sets are evaluated through unique displacements."""
        P = np.asarray(points, dtype=np.int64)
        Q = P if others is None else np.asarray(others, dtype=np.int64)
        n, m = len(P), len(Q)
        out = np.empty((n, m))
        chunk = max(1, 2_000_000 // max(m, 1))
        if n * m <= 4_000_000:
            keys = -np.sort(-np.abs(P[:, None, :] - Q[None, :, :]), axis=2).reshape(-1, self.dim)
            uniq, inv = np.unique(keys, axis=0, return_inverse=True)
            return self(uniq)[inv.ravel()].reshape(n, m)
        base = max(int(np.abs(P).max() + np.abs(Q).max()) * 2 + 1, 2)
        weights = base ** np.arange(self.dim - 1, -1, -1, dtype=np.int64)
        codes = []
        for i in range(0, n, chunk):
            k = -np.sort(-np.abs(P[i:i + chunk, None, :] - Q[None, :, :]), axis=2)
            codes.append(np.unique(k.reshape(-1, self.dim) @ weights))
        uniq = np.unique(np.concatenate(codes))
        dec = np.empty((len(uniq), self.dim), dtype=np.int64)
        rem = uniq.copy()
        for j in range(self.dim):
            dec[:, j] = rem // weights[j]
            rem = rem % weights[j]
        vals = self(dec)
        for i in range(0, n, chunk):
            k = -np.sort(-np.abs(P[i:i + chunk, None, :] - Q[None, :, :]), axis=2)
            c = k.reshape(-1, self.dim) @ weights
            out[i:i + chunk] = vals[np.searchsorted(uniq, c)].reshape(-1, m)
        return out

    def canonical_entries(self):
        keys = canonical_keys(self.dim, self.radius)
        idx = tuple(keys.T)
        return keys, self.values[idx], self.errors[idx], self.methods[idx]

    def to_json(self) -> str:
        keys, vals, errs, meth = self.canonical_entries()
        entries = [{"dx": k.tolist(), "value": float(v), "err": float(e), "method": METHODS[int(m)]}
                   for k, v, e, m in zip(keys, vals, errs, meth)]
        return json.dumps({"dim": self.dim, "scan_radius": self.radius, "entries": entries})

    @classmethod
    def from_json(cls, text: str, far_field: bool = True) -> "GreenTable":
        obj = json.loads(text)
        dim, radius = int(obj["dim"]), int(obj["scan_radius"])
        ents = obj["entries"]
        keys = np.array([sorted((abs(v) for v in e["dx"]), reverse=True) for e in ents], dtype=np.int64)
        vals = np.array([e["value"] for e in ents])
        errs = np.array([e["err"] for e in ents])
        meth = np.array([METHODS.index(e["method"]) for e in ents], dtype=np.uint8)
        return cls.from_canonical(dim, radius, keys, vals, errs, meth,
                                  heat_kernel(dim) if far_field else None)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path, far_field: bool = True) -> "GreenTable":
        with open(path) as fh:
            return cls.from_json(fh.read(), far_field=far_field)


def quadrature_table(dim: int, radius: int) -> GreenTable:
    hk = heat_kernel(dim)
    keys = canonical_keys(dim, radius)
    vals = hk.evaluate_canonical(keys)
    return GreenTable.from_canonical(dim, radius, keys, vals, hk.error_bound(vals), "quadrature", hk)


@lru_cache(maxsize=None)
def reference_table(dim: int, radius: int = 10) -> GreenTable:
    """The table used by downstream modules: quadrature near field plus far field."""
    return quadrature_table(dim, radius)


# ----------------------------------------------------------------------------
# lattice solve


def killed_green(dim: int, R: int) -> np.ndarray:
    """Green function of the walk killed on leaving |x| <= R, started at 0.

    Exact (to rounding) via the sine basis that diagonalizes the generator with
    zero boundary values on |x| = R + 1.  Returned over the full box, center at R.
    """
    n = 2 * R + 1
    theta = np.pi * np.arange(1, n + 1) / (n + 1)
    lam = np.ones((n,) * dim)
    for j in range(dim):
        shape = [1] * dim
        shape[j] = n
        lam = lam - np.cos(theta).reshape(shape) / dim
    b = np.zeros((n,) * dim)
    b[(R,) * dim] = 1.0
    return dstn(dstn(b, type=1, norm="ortho") / lam, type=1, norm="ortho")


def generator_residual(u: np.ndarray, R: int) -> np.ndarray:
    """u(x) - mean of neighbors - 1{x = 0}, on the interior of a centered box array."""
    d = u.ndim
    pad = np.pad(u, 1)
    nb_sum = np.zeros_like(u)
    for j in range(d):
        nb_sum += np.roll(pad, 1, axis=j)[(slice(1, -1),) * d]
        nb_sum += np.roll(pad, -1, axis=j)[(slice(1, -1),) * d]
    res = u - nb_sum / (2 * d)
    res[(R,) * d] -= 1.0
    return res


def harmonicity_residual(table: GreenTable) -> float:
    """max |g(x) - mean of neighbors - 1{x = 0}| over |x| < table radius."""
    r = table.radius
    idx = np.abs(np.arange(-r, r + 1))
    full = table.values[np.ix_(*([idx] * table.dim))]
    res = generator_residual(full, r)
    inner = (slice(1, -1),) * table.dim
    return float(np.abs(res[inner]).max())


@dataclass
class SolveReport:
    radii: tuple[int, int]
    residuals: tuple[float, float]
    ratio: float


def default_solve_radius(dim: int) -> int:
    return {3: 48, 4: 16, 5: 6}.get(dim, 4)


def green_solve(dim: int, radius: int | None = None, table_radius: int | None = None
                ) -> tuple[GreenTable, SolveReport]:
    """Tabulate g by solving on boxes of radius R and 2R and extrapolating.

    The killed Green function differs from g by a harmonic correction of order
    (R + 1)^(2 - d); linear Richardson in (R + 1)^(2 - d) removes it.  The
    reported per-entry error is the size of that correction at the larger box.
    """
    if dim < 3:
        raise ValueError("green_solve needs d >= 3")
    R = default_solve_radius(dim) if radius is None else int(radius)
    if R < 4:
        raise ValueError("radius must be >= 4")
    tr = R // 2 if table_radius is None else int(table_radius)
    if tr > R - 1:
        raise ValueError(f"radius {R} too small for table radius {tr}")
    g1 = killed_green(dim, R)
    g2 = killed_green(dim, 2 * R)
    res = (float(np.abs(generator_residual(g1, R)).max()),
           float(np.abs(generator_residual(g2, 2 * R)).max()))
    ratio = ((2 * R + 1) / (R + 1)) ** (dim - 2)
    sl1 = (slice(R, R + tr + 1),) * dim
    sl2 = (slice(2 * R, 2 * R + tr + 1),) * dim
    a1, a2 = g1[sl1], g2[sl2]
    ext = (ratio * a2 - a1) / (ratio - 1.0)
    err = np.abs(ext - a2)
    table = GreenTable(dim, tr, ext, err, np.full(ext.shape, METHODS.index("lattice_solve"), np.uint8))
    return table, SolveReport((R, 2 * R), res, ratio)


# ----------------------------------------------------------------------------
# Monte Carlo


@dataclass
class MCResult:
    table: GreenTable
    standard_errors: np.ndarray
    walks: int
    trunc_radius: int
    bias_bound: np.ndarray
    seed: int


def _key_map(dim: int, r: int):
    keys = canonical_keys(dim, r)
    lookup = {tuple(k): i for i, k in enumerate(keys.tolist())}
    pts = itertools.product(range(-r, r + 1), repeat=dim)
    kmap = np.array([lookup[tuple(sorted((abs(c) for c in p), reverse=True))] for p in pts],
                    dtype=np.int64)
    orbit = np.array([orbit_size(k) for k in keys], dtype=np.float64)
    return keys, kmap, orbit


def _default_C_hat(dim: int) -> float:
    return norm_constants(reference_table(dim), 10).C_hat


def green_mc_table(dim: int, radius: int, walks_count: int, trunc_radius: int, seed: int,
                   C_hat: float | None = None, batches: int = 16) -> MCResult:
    """Monte Carlo table of g(0, x), |x| <= radius, from walks killed beyond trunc_radius.

    The estimator counts visits before the kill, hence is biased low by at most
    the expected number of later visits, which the Green bound controls by
    C_hat * (trunc_radius + 1 - |x|)^(2 - d).  The reported error is 3 SE plus that bias.
    """
    if dim < 3:
        raise ValueError("green_mc needs d >= 3")
    if trunc_radius <= radius:
        raise ValueError("trunc_radius must exceed every requested |x|")
    if C_hat is None:
        C_hat = _default_C_hat(dim)
    keys, kmap, orbit = _key_map(dim, radius)
    tab = walks.exit_tables(dim)
    sums = np.zeros(len(keys))
    sumsq = np.zeros(len(keys))
    ss = np.random.SeedSequence(seed)
    per = [walks_count // batches + (1 if i < walks_count % batches else 0) for i in range(batches)]
    for child, n in zip(ss.spawn(batches), per):
        s = np.zeros(len(keys))
        q = np.zeros(len(keys))
        seed0 = int(child.generate_state(1, dtype=np.uint64)[0])
        walks._green_counts(n, np.uint64(seed0), dim, radius, kmap, orbit, int(trunc_radius),
                            tab.radii, tab.starts, tab.cum, s, q)
        sums += s
        sumsq += q
    mean = sums / walks_count
    var = np.maximum(sumsq / walks_count - mean**2, 0.0) * walks_count / max(walks_count - 1, 1)
    se = np.sqrt(var / walks_count)
    dist = trunc_radius + 1 - keys.max(axis=1)
    bias = C_hat * dist.astype(float) ** (2 - dim)
    table = GreenTable.from_canonical(dim, radius, keys, mean, 3 * se + bias, "monte_carlo")
    se_full = GreenTable.from_canonical(dim, radius, keys, se, se, "monte_carlo").values
    bias_full = GreenTable.from_canonical(dim, radius, keys, bias, bias, "monte_carlo").values
    return MCResult(table, se_full, walks_count, trunc_radius, bias_full, seed)


def green_mc(x: Sequence[int], walks_count: int, trunc_radius: int, seed: int,
             C_hat: float | None = None) -> tuple[float, float, float]:
    """(estimate, standard error, error bound) for g(0, x)."""
    x = np.asarray(x, dtype=np.int64)
    r = int(np.abs(x).max())
    res = green_mc_table(len(x), r, walks_count, trunc_radius, seed, C_hat)
    idx = tuple(np.abs(x))
    return float(res.table.values[idx]), float(res.standard_errors[idx]), float(res.table.errors[idx])


def cross_validate(a: GreenTable, b: GreenTable, radius: int | None = None) -> dict:
    """Compare two tables on shared displacements against their joint error bounds."""
    r = min(a.radius, b.radius) if radius is None else radius
    sl = (slice(0, r + 1),) * a.dim
    diff = np.abs(a.values[sl] - b.values[sl])
    joint = a.errors[sl] + b.errors[sl]
    worst = np.unravel_index(np.argmax(diff - joint), diff.shape)
    return {
        "radius": r,
        "max_abs_diff": float(diff.max()),
        "max_excess": float((diff - joint).max()),
        "worst_displacement": [int(v) for v in worst],
        "agree": bool((diff <= joint).all()),
    }


# ----------------------------------------------------------------------------
# norm constants


@dataclass(frozen=True)
class NormConstants:
    c_hat: float
    C_hat: float
    scan_radius: int
    argmin: tuple[int, ...]
    argmax: tuple[int, ...]
    caveat: str = ("empirical min/max of g(0,x)*(|x| v 1)^(d-2) over |x| <= scan_radius; "
                   "not the global best constants")

    def __post_init__(self):
        if not 0 < self.c_hat <= self.C_hat:
            raise ValueError("need 0 < c_hat <= C_hat")


def norm_constants(table: GreenTable, scan_radius: int) -> NormConstants:
    if scan_radius > table.radius:
        raise IncompleteTable(f"table radius {table.radius} < scan radius {scan_radius}")
    d = table.dim
    keys = canonical_keys(d, scan_radius)
    vals = table.values[tuple(keys.T)]
    scaled = vals * np.maximum(keys.max(axis=1), 1).astype(float) ** (d - 2)
    i, j = int(np.argmin(scaled)), int(np.argmax(scaled))
    return NormConstants(float(scaled[i]), float(scaled[j]), scan_radius,
                         tuple(int(v) for v in keys[i]), tuple(int(v) for v in keys[j]))


@lru_cache(maxsize=None)
def reference_constants(dim: int, scan_radius: int = 10) -> NormConstants:
    return norm_constants(reference_table(dim, max(scan_radius, 10)), scan_radius)
