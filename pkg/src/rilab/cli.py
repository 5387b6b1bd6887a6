"""Command line entry point: `rilab <subcommand> ...`."""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import green as G
from . import potential as P
from . import renorm as T
from .experiments.config import ConfigError, load_config
from .lattice import ball_array, frame_array, stick_array


def parse_set(spec: str, dim: int) -> np.ndarray:
    """Point sets given as box:k (side k), ball:R, frame:L, stick:l, or a JSON list of points."""
    if spec.lstrip().startswith("["):
        return P.as_points(np.array(json.loads(spec), dtype=np.int64))
    kind, _, arg = spec.partition(":")
    try:
        k = int(arg)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad set size in {spec!r}") from None
    if kind == "box":
        axes = [np.arange(k)] * dim
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    if kind == "ball":
        return ball_array(dim, k)
    if kind == "frame":
        return frame_array((0,) * dim, k)
    if kind == "stick":
        return stick_array(k, dim)
    raise argparse.ArgumentTypeError(f"unknown set kind {kind!r} (box, ball, frame, stick or JSON)")


def _green(path: str | None, dim: int) -> G.GreenTable:
    if path is None:
        return G.reference_table(dim)
    table = G.GreenTable.load(path)
    if table.dim != dim:
        raise SystemExit(f"green table is for d={table.dim}, not {dim}")
    return table


def _emit(obj, out: str | None) -> None:
    text = obj if isinstance(obj, str) else json.dumps(obj, indent=1, default=str)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


# ----------------------------------------------------------------------------


def cmd_green(a) -> int:
    if a.backend in ("solve", "both"):
        table, report = G.green_solve(a.dim, table_radius=a.radius)
        print(f"lattice solve radii {report.radii}, harmonicity residual "
              f"{G.harmonicity_residual(table):.2e}, max error {table.errors.max():.2e}", file=sys.stderr)
    elif a.backend == "quadrature":
        table = G.quadrature_table(a.dim, a.radius)
    else:
        table = G.green_mc_table(a.dim, a.radius, a.walks, a.trunc, a.seed).table
    if a.backend == "both":
        mc = G.green_mc_table(a.dim, min(a.radius, 5), a.walks, a.trunc, a.seed).table
        cv = G.cross_validate(mc, table)
        print(json.dumps(cv), file=sys.stderr)
        if not cv["agree"]:
            print("backends disagree beyond joint error bounds", file=sys.stderr)
            return 1
    nc = G.norm_constants(table, a.radius)
    print(f"g(0)={table.values[(0,) * a.dim]:.12f} c_hat={nc.c_hat:.6g} C_hat={nc.C_hat:.6g}", file=sys.stderr)
    _emit(table.to_json(), a.out)
    return 0


def cmd_cap(a) -> int:
    K = parse_set(a.set, a.dim)
    m = P.equilibrium_exact(K, _green(a.green, a.dim), a.solver_cap)
    _emit(m.to_json(), a.out)
    print(f"cap = {m.capacity:.12g} over {len(m)} points (residual {m.residual:.1e})", file=sys.stderr)
    return 0


def cmd_sample(a) -> int:
    from .interlace import WindowSampler, emptiness_test, write_samples
    K = parse_set(a.window, a.dim)
    table = _green(a.green, a.dim)
    sampler = WindowSampler.for_points(K, None, a.trunc, u_max=a.u, green=table)
    if a.out:
        res = sampler.sweep([a.u], a.reps, a.seed)
        with open(a.out, "w") as fh:
            write_samples(res.samples(sampler.points, a.u, a.window), fh)
    r = emptiness_test(K, a.u, a.reps, a.seed, table, sampler)
    print(f"P[window empty] = {r.empirical:.5f} ± {r.standard_error:.5f}; "
          f"exp(-u cap) = {r.theory:.5f}; z = {r.z_score:+.2f}")
    return 0


def cmd_embed(a) -> int:
    x = (0,) * a.dim
    if a.action == "count":
        out = {"depth": a.depth, "dim": a.dim, "formula": T.count_formula(a.depth, a.dim)}
        if a.depth <= 1:
            out["enumerated"] = T.enumeration_count(a.depth, x, a.dim, a.L0)
        elif a.depth == 2:
            out["branching_product"] = T.count_from_branching(2, a.dim, a.L0)
        _emit(out, a.out)
        return 0
    if a.action == "enumerate":
        fh = open(a.out, "w") if a.out else sys.stdout
        try:
            for i, e in enumerate(T.enumerate_proper(a.depth, x, a.dim, a.L0)):
                if a.limit is not None and i >= a.limit:
                    break
                fh.write(e.to_json() + "\n")
        finally:
            if a.out:
                fh.close()
        return 0
    if a.action == "extract":
        if a.path:
            from .lattice import read_paths
            with open(a.path) as fh:
                paths = read_paths(fh)
        else:
            paths = [T.random_crossing_path(x, a.depth, a.L0, a.seed, a.kind)]
        lines = [T.extract_embedding(p, x, a.depth, a.L0).to_json() for p in paths]
        _emit("\n".join(lines), a.out)
        return 0
    # check
    if a.embedding:
        with open(a.embedding) as fh:
            e = T.ProperEmbedding.from_json(fh.read())
    else:
        e = T.random_embedding(a.depth, x, a.dim, a.seed, a.L0)
    v = T.validate(e)
    out = {"valid": v.valid, "condition": v.condition, "node": v.node, "message": v.message,
           "separated": T.separation_check(e)}
    _emit(out, a.out)
    return 0 if v.valid and out["separated"] else 1


def _config(a, **extra):
    try:
        return load_config(a.config, dim=a.dim, u=a.u, L0=a.L0, depth=a.depth, reps=a.reps,
                           seed=a.seed, green_table=a.green, out_dir=getattr(a, "out_dir", None), **extra)
    except ConfigError as exc:
        raise SystemExit(f"config error: {exc}") from None


def _crossing(a, kind: str) -> int:
    from .experiments.crossing import estimate_A, estimate_B
    cfg = _config(a)
    n = max(cfg.depth, 1)
    if kind == "A":
        est = estimate_A(list(cfg.u_values), n, cfg, cfg.seed)
    else:
        est = estimate_B(list(cfg.u_values), n, np.zeros(cfg.dim, dtype=np.int64), cfg, cfg.seed)
    rows = [{"u": float(u), "probability": float(p), "stderr": float(s), "reps": est.reps,
             "seed": est.seed, "n": n, "L0": est.L0, "flags": est.flags}
            for u, p, s in zip(est.us, est.probability, est.standard_error)]
    _emit(rows, a.out)
    return 0


def cmd_duality(a) -> int:
    from .experiments.suite import _duality
    cfg = _config(a)
    o = _duality(cfg)
    print(o.summary)
    return 0 if o.passed else 1


def cmd_bounds(a) -> int:
    from .experiments.bounds import bound_report
    rep = bound_report(a.dim or 3, _green(a.green, a.dim or 3) if a.green else None, a.scan_radius)
    _emit(rep.to_json(), a.out)
    return 0 if rep.consistent else 1


def cmd_suite(a) -> int:
    from .experiments.suite import run_suite
    extra = {"experiments": a.experiments} if a.experiments else {}
    cfg = _config(a, **extra)
    res = run_suite(cfg, a.out_dir, echo=print)
    print(f"wrote {res.csv_path} and {res.json_path}")
    if res.failures:
        print("failed: " + ", ".join(res.failures))
    return res.exit_status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rilab", description="Random interlacement percolation laboratory.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("green", help="tabulate the lattice Green function")
    g.add_argument("--dim", type=int, default=3)
    g.add_argument("--radius", type=int, default=10)
    g.add_argument("--backend", choices=("solve", "monte_carlo", "quadrature", "both"), default="both")
    g.add_argument("--walks", type=int, default=1_000_000)
    g.add_argument("--trunc", type=int, default=400)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.set_defaults(func=cmd_green)

    c = sub.add_parser("cap", help="equilibrium measure and capacity of a finite set")
    c.add_argument("--set", required=True, help="box:k, ball:R, frame:L, stick:l or a JSON point list")
    c.add_argument("--dim", type=int, default=3)
    c.add_argument("--green")
    c.add_argument("--solver-cap", type=int, default=P.SOLVER_CAP)
    c.add_argument("--out")
    c.set_defaults(func=cmd_cap)

    s = sub.add_parser("sample", help="sample the interlacement inside a window")
    s.add_argument("--dim", type=int, default=3)
    s.add_argument("--window", required=True)
    s.add_argument("--u", type=float, required=True)
    s.add_argument("--reps", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--trunc", type=int)
    s.add_argument("--green")
    s.add_argument("--out", help="JSONL dump of the samples")
    s.set_defaults(func=cmd_sample)

    e = sub.add_parser("embed", help="proper embeddings of the dyadic tree")
    e.add_argument("action", choices=("count", "enumerate", "extract", "check"))
    e.add_argument("--dim", type=int, default=3)
    e.add_argument("--depth", type=int, default=1)
    e.add_argument("--L0", type=int, default=1)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--kind", choices=("nearest_neighbor", "star_connected"), default="nearest_neighbor")
    e.add_argument("--path", help="JSONL file of crossing paths to extract from")
    e.add_argument("--embedding", help="embedding JSON file to check")
    e.add_argument("--limit", type=int)
    e.add_argument("--out")
    e.set_defaults(func=cmd_embed)

    def experiment_args(q, default_dim=None):
        q.add_argument("--config")
        q.add_argument("--dim", type=int, default=default_dim)
        q.add_argument("--u", type=float, nargs="+")
        q.add_argument("--L0", type=int)
        q.add_argument("--depth", type=int)
        q.add_argument("--reps", type=int)
        q.add_argument("--seed", type=int)
        q.add_argument("--green")

    for name, kind in (("crossing-a", "A"), ("crossing-b", "B")):
        q = sub.add_parser(name, help=f"estimate the crossing probability of event {kind}")
        experiment_args(q)
        q.add_argument("--out")
        q.set_defaults(func=lambda a, k=kind: _crossing(a, k))

    q = sub.add_parser("duality", help="audit planar duality on sampled configurations")
    experiment_args(q)
    q.set_defaults(func=cmd_duality)

    b = sub.add_parser("bounds", help="evaluate the two-sided bound on the critical level")
    b.add_argument("--dim", type=int, default=3)
    b.add_argument("--green")
    b.add_argument("--scan-radius", type=int, default=10)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bounds)

    q = sub.add_parser("suite", help="run named experiment sets and write CSV and JSON")
    experiment_args(q)
    q.add_argument("--experiments", nargs="+")
    q.add_argument("--out-dir")
    q.set_defaults(func=cmd_suite)
    return p


def _fix_u(a) -> None:
    u = getattr(a, "u", None)
    if isinstance(u, list):
        a.u = u[0] if len(u) == 1 else u


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if a.command in ("crossing-a", "crossing-b", "duality", "suite"):
        _fix_u(a)
    return int(a.func(a) or 0)


if __name__ == "__main__":
    sys.exit(main())
