"""``xcluster`` command line: gen | build | eval | bench | oracle.

Report CSV columns (header row always written):

  instance, algorithm, p, seed, stream, k, cost_reference, cost_optimal,
  cost_unconstrained, ratio_to_reference, ratio_optimal_to_reference,
  ratio_to_oracle, accepted_cuts, discarded_cuts, internal_nodes, wall_time,
  status, error

``bench`` appends one aggregate row per (instance, algorithm, p) with
ratio_mean, ratio_median, ratio_p95 (of ratio_to_reference), runs, failures.
``--long`` additionally writes plot-ready rows (instance, k, algorithm, p,
statistic, value).

Worker pool size: --workers, else $XCLUSTER_WORKERS, else the CPU count.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np

from . import io
from .builders import build_imm_min_cut, build_lp, build_modified, build_uniform
from .core import InputError, cost_of_tree, cost_to_centers
from .fast_structures import build_fast
from .instances import Instance, gen_adversarial, gen_gaussian_mixture, gen_lower_bound, reference_centers
from .oracle import brute_force_opt_tree
from .samplers import rng_stream

ALGORITHMS = ("uniform", "modified", "lp", "imm", "fast-uniform", "fast-modified", "fast-lp")


@dataclass(frozen=True)
class RunConfig:
    instance_path: str
    algorithm: str
    p: float
    ell: int
    seed: int
    stream: int = 0
    oracle_cost: Optional[float] = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise InputError(f"unknown algorithm {self.algorithm!r}")
        if not self.p >= 1:
            raise InputError("p must be >= 1")


def build_tree(inst: Instance, algorithm: str, p: float, ell: int, rng):
    """Dispatch to a builder; returns (tree, trace or None)."""
    C = inst.centers
    if C is None:
        raise InputError("instance has no centers; run gen or supply a centers file")
    if algorithm == "imm":
        if inst.points is None or inst.points.shape[0] == 0:
            raise InputError("imm needs data points")
        return build_imm_min_cut(inst.points, C, p), None
    if algorithm == "uniform":
        return build_uniform(C, rng)
    if algorithm == "modified":
        return build_modified(C, rng, ell)
    if algorithm == "lp":
        return build_lp(C, p, rng, ell)
    return build_fast(C, p, rng, algorithm.split("-", 1)[1], ell)


def run_one(cfg: RunConfig, inst: Optional[Instance] = None) -> dict:
    """Build and evaluate one tree; failures become a row with status=error."""
    row = {"instance": cfg.instance_path, "algorithm": cfg.algorithm, "p": cfg.p,
           "seed": cfg.seed, "stream": cfg.stream}
    try:
        inst = inst or io.read_instance(cfg.instance_path)
        row["k"] = inst.k
        rng = rng_stream(cfg.seed, cfg.stream)
        t0 = time.perf_counter()
        tree, trace = build_tree(inst, cfg.algorithm, cfg.p, cfg.ell, rng)
        wall = time.perf_counter() - t0
        rep = cost_of_tree(inst.points, tree, inst.centers, cfg.p, seed=cfg.seed, wall_time=wall)
        row.update(
            cost_reference=rep.cost_reference_centers, cost_optimal=rep.cost_optimal_leaf_centers,
            cost_unconstrained=rep.cost_unconstrained, ratio_to_reference=rep.ratio_to_reference,
            ratio_optimal_to_reference=(rep.cost_optimal_leaf_centers / rep.cost_unconstrained
                                        if rep.cost_unconstrained > 0 else None),
            ratio_to_oracle=(rep.cost_optimal_leaf_centers / cfg.oracle_cost
                             if cfg.oracle_cost else None),
            accepted_cuts=(trace.n_accepted if trace is not None else len(tree.internal_nodes())),
            discarded_cuts=(trace.n_discarded if trace is not None else 0),
            internal_nodes=len(tree.internal_nodes()), wall_time=wall, status="ok", error="")
        row["_tree"] = tree
    except Exception as exc:  # recorded per row; the campaign continues
        row.update(status="error", error=f"{type(exc).__name__}: {exc}")
    return row


def _run_for_pool(args):
    cfg, inst = args
    row = run_one(cfg, inst)
    row.pop("_tree", None)
    return row


def worker_count(requested: Optional[int] = None) -> int:
    if requested:
        return max(1, int(requested))
    env = os.environ.get("XCLUSTER_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InputError(f"XCLUSTER_WORKERS must be an integer, got {env!r}")
    return os.cpu_count() or 1


def run_campaign(configs: list[RunConfig], instances: dict[str, Instance],
                 workers: int = 1) -> list[dict]:
    """Run every config; rows come back in campaign order whatever the pool does."""
    jobs = [(cfg, instances.get(cfg.instance_path)) for cfg in configs]
    if workers <= 1 or len(jobs) <= 1:
        return [_run_for_pool(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_for_pool, jobs, chunksize=max(1, len(jobs) // (8 * workers))))


def aggregate(rows: list[dict]) -> list[dict]:
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault((r["instance"], r["algorithm"], r["p"]), []).append(r)
    out = []
    for (inst, algo, p), rs in groups.items():
        ratios = np.array([r["ratio_to_reference"] for r in rs
                           if r.get("status") == "ok" and r.get("ratio_to_reference") is not None],
                          dtype=float)
        agg = {"instance": inst, "algorithm": algo, "p": p, "status": "aggregate",
               "k": rs[0].get("k"), "runs": len(rs),
               "failures": sum(1 for r in rs if r.get("status") != "ok")}
        if ratios.size:
            agg.update(ratio_mean=float(ratios.mean()), ratio_median=float(np.median(ratios)),
                       ratio_p95=float(np.percentile(ratios, 95)))
        out.append(agg)
    return out


def long_rows(aggs: list[dict]) -> list[dict]:
    out = []
    for a in aggs:
        for stat in ("ratio_mean", "ratio_median", "ratio_p95"):
            if a.get(stat) is not None:
                out.append({"instance": a["instance"], "k": a["k"], "algorithm": a["algorithm"],
                            "p": a["p"], "statistic": stat, "value": a[stat]})
    return out


# -- subcommands -----------------------------------------------------------------


def cmd_gen(args) -> int:
    if args.kind == "lower-bound":
        inst = gen_lower_bound(args.m)
    elif args.kind == "adversarial":
        inst = gen_adversarial(args.m)
    else:
        if args.seed is None:
            raise InputError("gaussian instances need an explicit --seed")
        for name in ("k", "d", "n", "sigma"):
            if getattr(args, name) is None:
                raise InputError(f"gaussian instances need --{name}")
        inst = gen_gaussian_mixture(args.k, args.d, args.n, args.sigma, rng_stream(args.seed),
                                    seed=args.seed)
    io.write_instance(inst, args.output)
    opt = inst.meta.get("opt_cost")
    print(f"n={inst.n} k={inst.k} d={inst.d}")
    if opt is not None:
        print(f"OPT={opt:g}")
    else:
        print(f"reference_cost_p{args.p:g}={cost_to_centers(inst.points, inst.centers, args.p):.17g}")
    return 0


def _print_rows(rows: list[dict], columns: list[str]) -> None:
    w = csv.DictWriter(sys.stdout, fieldnames=columns, extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({c: io._fmt(r.get(c)) for c in columns})


def cmd_build(args) -> int:
    cfg = RunConfig(args.instance, args.algo, args.p, args.ell, args.seed)
    inst = io.read_instance(args.instance, args.centers)
    row = run_one(cfg, inst)
    if row["status"] != "ok":
        print(row["error"], file=sys.stderr)
        return 1
    if args.output:
        io.write_tree(row["_tree"], args.output)
    _print_rows([row], io.REPORT_COLUMNS)
    if args.report:
        io.write_report([row], args.report, io.REPORT_COLUMNS)
    return 0


def cmd_eval(args) -> int:
    inst = io.read_instance(args.instance, args.centers)
    tree = io.read_tree(args.tree)
    tree.validate(inst.centers)
    rep = cost_of_tree(inst.points, tree, inst.centers, args.p)
    print(f"cost_reference_centers={rep.cost_reference_centers!r}")
    print(f"cost_optimal_leaf_centers={rep.cost_optimal_leaf_centers!r}")
    print(f"cost_unconstrained={rep.cost_unconstrained!r}")
    print(f"ratio_to_reference={rep.ratio_to_reference!r}")
    if rep.empty_leaves:
        print(f"empty_leaves={rep.empty_leaves}")
    return 0


def cmd_bench(args) -> int:
    instances = {path: io.read_instance(path) for path in args.instances}
    oracle = {}
    if args.with_oracle:
        for path, inst in instances.items():
            try:
                oracle[path] = brute_force_opt_tree(inst.points, inst.centers, args.p).cost
            except InputError:
                oracle[path] = None
    configs = [RunConfig(path, algo, args.p, args.ell, args.seed, r, oracle.get(path))
               for path in args.instances for algo in args.algo for r in range(args.reps)]
    rows = run_campaign(configs, instances, worker_count(args.workers))
    aggs = aggregate(rows)
    io.write_report(rows + aggs, args.output)
    if args.long:
        io.write_report(long_rows(aggs), args.long, io.LONG_COLUMNS)
    failed = sum(1 for r in rows if r.get("status") != "ok")
    print(f"{len(rows)} runs, {failed} failed -> {args.output}")
    return 0 if failed == 0 else 1


def cmd_oracle(args) -> int:
    inst = io.read_instance(args.instance, args.centers)
    res = brute_force_opt_tree(inst.points, inst.centers, args.p)
    print(f"optimal_cost={res.cost!r}")
    print(f"optimal_cost_reference_centers={res.cost_reference!r}")
    print(f"unconstrained_cost={cost_to_centers(inst.points, inst.centers, args.p)!r}")
    print(f"subproblems={res.explored}")
    if args.output:
        io.write_tree(res.tree, args.output)
    return 0


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="xcluster", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate an instance file")
    g.add_argument("kind", choices=["lower-bound", "adversarial", "gaussian"])
    g.add_argument("--m", type=int, default=3)
    g.add_argument("--k", type=int)
    g.add_argument("--d", type=int)
    g.add_argument("--n", type=int, help="points per cluster")
    g.add_argument("--sigma", type=float)
    g.add_argument("--seed", type=int)
    g.add_argument("--p", type=float, default=1.0, help="exponent for the printed cost")
    g.add_argument("-o", "--output", required=True)
    g.set_defaults(func=cmd_gen)

    b = sub.add_parser("build", help="build one threshold tree and report its cost")
    b.add_argument("--instance", required=True)
    b.add_argument("--centers", help="CSV of centers (for CSV instances)")
    b.add_argument("--algo", choices=ALGORITHMS, required=True)
    b.add_argument("--p", type=float, default=1.0)
    b.add_argument("--ell", type=int, default=4)
    b.add_argument("--seed", type=int, required=True)
    b.add_argument("-o", "--output", help="tree JSON path")
    b.add_argument("--report", help="report CSV path")
    b.set_defaults(func=cmd_build)

    e = sub.add_parser("eval", help="evaluate a tree file on an instance")
    e.add_argument("--instance", required=True)
    e.add_argument("--centers")
    e.add_argument("--tree", required=True)
    e.add_argument("--p", type=float, default=1.0)
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("bench", help="run a seeded campaign and write a report CSV")
    c.add_argument("--instances", nargs="+", required=True)
    c.add_argument("--algo", nargs="+", choices=ALGORITHMS, required=True)
    c.add_argument("--p", type=float, default=1.0)
    c.add_argument("--ell", type=int, default=4)
    c.add_argument("--seed", type=int, required=True, help="base seed; run r uses substream r")
    c.add_argument("--reps", type=int, default=1)
    c.add_argument("--workers", type=int)
    c.add_argument("--with-oracle", action="store_true", help="fill ratio_to_oracle when small enough")
    c.add_argument("-o", "--output", required=True)
    c.add_argument("--long", help="plot-ready long-format CSV path")
    c.set_defaults(func=cmd_bench)

    o = sub.add_parser("oracle", help="exhaustive optimal tree for a tiny instance")
    o.add_argument("--instance", required=True)
    o.add_argument("--centers")
    o.add_argument("--p", type=float, default=1.0)
    o.add_argument("-o", "--output", help="tree JSON path")
    o.set_defaults(func=cmd_oracle)
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, ValueError, OSError) as exc:
        print(f"xcluster {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
