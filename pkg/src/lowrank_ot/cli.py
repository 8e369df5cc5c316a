"""Command-line front end.

Reports are a pure function of (argv, input files): seeds are explicit and
timestamps are never written, so fixed-seed reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .clustering import lot_cluster, shortest_path_cost
from .divergences import dlot
from .errors import LowRankOTError, ParseError, UsageError
from .experiments import (
    RateGrid,
    approx_gap_experiment,
    init_comparison_experiment,
    make_surrogate_dataset,
    rate_slopes,
    rates_experiment,
)
from .flows import FlowConfig, flow_run
from .io import read_measure, read_points_csv, report_json, write_points_csv, write_report
from .initializers import make_init
from .measures import DenseCost, sq_euclidean_factored
from .solver import SolverConfig, lot_solve, normalized_cost

SCHEMA_VERSION = 1


def _add_shared(p):
    p.add_argument("--rank", "-r", type=int, default=2)
    p.add_argument("--gamma", type=float, default=10.0)
    p.add_argument("--gamma-mode", choices=["fixed", "adaptive"],
                   default="adaptive")
    p.add_argument("--init", choices=["random", "rank2", "kmeans",
                                      "general-kmeans"], default="random")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iters", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cost", default="sqeucl",
                   help="sqeucl | graph | file:<dense-matrix.csv>")
    p.add_argument("--out", type=Path, default=None, help="output directory")
    p.add_argument("--json", action="store_true",
                   help="emit the JSON report to stdout")
    p.add_argument("--threads", type=int,
                   default=int(os.environ.get("LOWRANK_OT_THREADS",
                                              os.cpu_count() or 1)))


def build_parser():
    parser = argparse.ArgumentParser(prog="lowrank-ot")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve the low-rank transport problem")
    p.add_argument("x", type=Path)
    p.add_argument("y", type=Path)
    _add_shared(p)

    p = sub.add_parser("divergence", help="debiased divergence between measures")
    p.add_argument("x", type=Path)
    p.add_argument("y", type=Path)
    _add_shared(p)

    p = sub.add_parser("cluster", help="generalized k-means clustering")
    p.add_argument("x", type=Path)
    _add_shared(p)
    p.add_argument("--bandwidth", default="median",
                   help="graph-cost kernel bandwidth (or 'median')")
    p.add_argument("--restarts", type=int, default=5)

    p = sub.add_parser("flow", help="particle descent toward a target measure")
    p.add_argument("x", type=Path)
    p.add_argument("y", type=Path)
    _add_shared(p)
    p.add_argument("--steps", type=int, default=300)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--objective", choices=["dlot", "lot"], default="dlot")
    p.add_argument("--snapshot-every", type=int, default=25)

    p = sub.add_parser("rates", help="statistical-rate grid experiment")
    _add_shared(p)
    p.add_argument("--dims", type=int, nargs="+", default=[5, 10])
    p.add_argument("--sizes", type=int, nargs="+",
                   default=[100, 200, 400, 800, 1600, 3200])
    p.add_argument("--ranks", type=int, nargs="+", default=[1, 5])
    p.add_argument("--trials", type=int, default=10)

    p = sub.add_parser("approx-gap", help="gap to the exact transport value")
    _add_shared(p)
    p.add_argument("--n", type=int, default=32)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--ranks", type=int, nargs="+", default=[2, 4, 8, 16])

    p = sub.add_parser("init-compare", help="compare initialization strategies")
    _add_shared(p)
    p.add_argument("--n", type=int, default=250)
    p.add_argument("--dim", type=int, default=50)
    p.add_argument("--ranks", type=int, nargs="+", default=[10, 50])
    p.add_argument("--use-stopping", action="store_true")
    return parser


def _solver_config(args):
    return SolverConfig(rank=args.rank, gamma=args.gamma,
                        gamma_mode=args.gamma_mode, outer_tol=args.tol,
                        max_outer_iters=args.max_iters, seed=args.seed)


def _config_dict(args):
    return {k: (str(v) if isinstance(v, Path) else v)
            for k, v in sorted(vars(args).items()) if k != "command"}


def _build_cost(args, mx, my):
    spec = args.cost
    if spec == "sqeucl":
        if mx.points is None or my.points is None:
            raise UsageError("cost 'sqeucl' needs point clouds")
        return sq_euclidean_factored(mx.points, my.points)
    if spec.startswith("file:"):
        return DenseCost(read_points_csv(spec[len("file:"):]))
    raise UsageError(f"cost {spec!r} not valid here (use sqeucl or file:)")


def _emit(args, report):
    report = {"schema_version": SCHEMA_VERSION, "version": __version__,
              **report}
    text = report_json(report)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "report.json").write_text(text)
    if args.json or args.out is None:
        sys.stdout.write(text)


def _read_measure_checked(path):
    if not Path(path).exists():
        raise UsageError(f"input file not found: {path}")
    return read_measure(path)


def cmd_solve(args):
    mx = _read_measure_checked(args.x)
    my = _read_measure_checked(args.y)
    cfg = _solver_config(args)
    C = _build_cost(args, mx, my)
    # solve at unit cost scale (argmin-invariant), report rescaled values
    C_solve, scale = normalized_cost(C)
    init = make_init(args.init, mx.weights, my.weights, cfg, C=C_solve,
                     points_x=mx.points, points_y=my.points)
    cpl, rep = lot_solve(C_solve, mx.weights, my.weights, cfg, init)
    _emit(args, {
        "command": "solve",
        "config": _config_dict(args),
        "value": rep.value * scale,
        "converged": rep.converged,
        "iterations": rep.iterations,
        "marginal_residual": cpl.marginal_residual(mx.weights, my.weights),
        "cost_trace": [v * scale for v in rep.cost_trace],
        "delta_trace": rep.delta_trace,
    })
    return 0


def cmd_divergence(args):
    mx = _read_measure_checked(args.x)
    my = _read_measure_checked(args.y)
    cfg = _solver_config(args)
    if args.cost != "sqeucl":
        raise UsageError("divergence currently supports --cost sqeucl")
    if mx.points is None or my.points is None:
        raise UsageError("divergence needs point clouds on both sides")
    res = dlot(mx, my,
               sq_euclidean_factored(mx.points, my.points),
               sq_euclidean_factored(mx.points, mx.points),
               sq_euclidean_factored(my.points, my.points),
               cfg, init_strategy=args.init)
    _emit(args, {
        "command": "divergence",
        "config": _config_dict(args),
        "value": res.value,
        "lot_xy": res.lot_xy,
        "lot_xx": res.lot_xx,
        "lot_yy": res.lot_yy,
    })
    return 0


def cmd_cluster(args):
    mx = _read_measure_checked(args.x)
    cfg = _solver_config(args)
    if args.cost == "sqeucl":
        if mx.points is None:
            raise UsageError("cost 'sqeucl' needs a point cloud")
        from .measures import sq_euclidean_dense
        C = sq_euclidean_dense(mx.points, mx.points)
        bandwidth = None
    elif args.cost == "graph":
        if mx.points is None:
            raise UsageError("cost 'graph' needs a point cloud")
        bandwidth = (args.bandwidth if args.bandwidth == "median"
                     else float(args.bandwidth))
        C = shortest_path_cost(mx.points, bandwidth=bandwidth)
    elif args.cost.startswith("file:"):
        C = DenseCost(read_points_csv(args.cost[len("file:"):]))
        bandwidth = None
    else:
        raise UsageError(f"unknown cost {args.cost!r}")
    res = lot_cluster(C, mx.weights, args.rank, cfg, restarts=args.restarts)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        write_points_csv(args.out / "labels.csv", res.labels[:, None])
    _emit(args, {
        "command": "cluster",
        "config": _config_dict(args),
        "bandwidth": bandwidth,
        "objective": res.objective,
        "labels": res.labels,
        "g": res.g,
        "Q": res.Q,
    })
    return 0


def cmd_flow(args):
    mx = _read_measure_checked(args.x)
    my = _read_measure_checked(args.y)
    if mx.points is None or my.points is None:
        raise UsageError("flow needs point clouds on both sides")
    cfg = FlowConfig(rank=args.rank, steps=args.steps,
                     learning_rate=args.lr, objective=args.objective,
                     solver=_solver_config(args),
                     snapshot_every=args.snapshot_every)
    trace = flow_run(mx.points, my, cfg)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        for step, pos in trace.snapshots:
            write_points_csv(args.out / f"snapshot_{step:05d}.csv", pos)
    _emit(args, {
        "command": "flow",
        "config": _config_dict(args),
        "loss_trace": trace.loss_trace,
        "grad_norm_trace": trace.grad_norm_trace,
        "final_dlot": trace.final_dlot,
        "aborted": trace.aborted,
        "snapshot_steps": [s for s, _ in trace.snapshots],
    })
    return 0


def cmd_rates(args):
    grid = RateGrid(dims=args.dims, sample_sizes=args.sizes,
                    ranks=args.ranks, trials=args.trials, seed=args.seed)
    table = rates_experiment(grid, _solver_config(args))
    slopes = rate_slopes(table)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        table.to_csv(args.out / "rates.csv", index=False)
        slopes.to_csv(args.out / "slopes.csv", index=False)
    _emit(args, {
        "command": "rates",
        "config": _config_dict(args),
        "slopes": slopes.to_dict(orient="records"),
        "n_rows": len(table),
    })
    return 0


def cmd_approx_gap(args):
    table = approx_gap_experiment(args.n, args.ranks, _solver_config(args),
                                  seed=args.seed, d=args.dim)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        table.to_csv(args.out / "approx_gap.csv", index=False)
    _emit(args, {
        "command": "approx-gap",
        "config": _config_dict(args),
        "rows": table.to_dict(orient="records"),
    })
    return 0


def cmd_init_compare(args):
    mx, my = make_surrogate_dataset(n=args.n, d=args.dim, seed=args.seed)
    results = init_comparison_experiment(mx, my, args.ranks,
                                         _solver_config(args),
                                         use_stopping=args.use_stopping)
    summary = {str(r): {s: {"final_cost": v["final_cost"],
                            "init_ops": v["init_ops"],
                            "converged": v["converged"]}
                        for s, v in per.items()}
               for r, per in results.items()}
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        rows = []
        for r, per in results.items():
            for strat, v in per.items():
                for i, (c, d_, ops) in enumerate(zip(
                        v["cost_trace"], v["delta_trace"],
                        v["op_count_trace"])):
                    rows.append({"rank": r, "init": strat, "iter": i,
                                 "cost": c, "delta": d_, "ops": ops})
        import pandas as pd
        pd.DataFrame(rows).to_csv(args.out / "init_compare.csv", index=False)
    _emit(args, {
        "command": "init-compare",
        "config": _config_dict(args),
        "summary": summary,
    })
    return 0


COMMANDS = {
    "solve": cmd_solve,
    "divergence": cmd_divergence,
    "cluster": cmd_cluster,
    "flow": cmd_flow,
    "rates": cmd_rates,
    "approx-gap": cmd_approx_gap,
    "init-compare": cmd_init_compare,
}


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (LowRankOTError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
