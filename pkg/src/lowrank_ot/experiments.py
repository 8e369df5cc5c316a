"""Desk-scale experiment harness: statistical rates, approximation gap and
initialization comparison, emitting plot-ready tables."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import DegenerateFit
from .divergences import dlot, exact_ot
from .measures import (
    DenseCost,
    new_discrete_measure,
    sq_euclidean_dense,
    sq_euclidean_factored,
)
from .opcount import OpCounter
from .solver import SolverConfig, lot_solve, lot_solve_restarts
from . import initializers

N_MIXTURE_COMPONENTS = 10
MIXTURE_MEAN_RANGE = (-5.0, 5.0)
MIXTURE_COV_RANGE = (0.1, 2.0)


@dataclass
class RateGrid:
    dims: list = field(default_factory=lambda: [5, 10])
    sample_sizes: list = field(default_factory=lambda: [100, 200, 400, 800, 1600, 3200])
    ranks: list = field(default_factory=lambda: [1, 5])
    trials: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.trials < 3:
            raise ValueError("trials must be >= 3")
        if any(v <= 0 for v in list(self.dims) + list(self.sample_sizes) + list(self.ranks)):
            raise ValueError("grid entries must be positive")


def _mixture_params(d, mixture_seed):
    rng = np.random.default_rng(np.random.SeedSequence([77, mixture_seed, d]))
    means = rng.uniform(*MIXTURE_MEAN_RANGE, size=(N_MIXTURE_COMPONENTS, d))
    covs = rng.uniform(*MIXTURE_COV_RANGE, size=(N_MIXTURE_COMPONENTS, d))
    return means, covs


def sample_gaussian_mixture(d, n, seed, mixture_seed=0):
    """n draws from a fixed mixture of 10 anisotropic diagonal Gaussians.

    The mixture parameters depend only on (d, mixture_seed), so independent
    samples from the same population use distinct `seed` values.
    """
    means, covs = _mixture_params(d, mixture_seed)
    rng = np.random.default_rng(np.random.SeedSequence([13, seed, d, n]))
    comp = rng.integers(0, N_MIXTURE_COMPONENTS, size=n)
    noise = rng.standard_normal((n, d))
    return means[comp] + noise * np.sqrt(covs[comp])


def rates_experiment(grid: RateGrid, cfg: SolverConfig) -> pd.DataFrame:
    """Debiased divergence between two independent empirical measures, over
    the (d, n, r, trial) grid; long-format output."""
    rows = []
    for d in grid.dims:
        for n in grid.sample_sizes:
            for r in grid.ranks:
                for trial in range(grid.trials):
                    cell_seed = int(
                        np.random.SeedSequence(
                            [grid.seed, d, n, r, trial]).generate_state(1)[0]
                        % (2**31))
                    X = sample_gaussian_mixture(d, n, 2 * cell_seed,
                                                mixture_seed=grid.seed)
                    Y = sample_gaussian_mixture(d, n, 2 * cell_seed + 1,
                                                mixture_seed=grid.seed)
                    mx = new_discrete_measure(points=X)
                    my = new_discrete_measure(points=Y)
                    ccfg = SolverConfig(**{**cfg.__dict__, "rank": r,
                                           "seed": cell_seed})
                    val = dlot(mx, my,
                               sq_euclidean_factored(X, Y),
                               sq_euclidean_factored(X, X),
                               sq_euclidean_factored(Y, Y),
                               ccfg, restarts=1).value
                    rows.append({"d": d, "n": n, "r": r, "trial": trial,
                                 "dlot_value": val})
    return pd.DataFrame(rows)


def slope_fit(xs, ys) -> float:
    """Ordinary least-squares slope of ys against xs."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.size < 3 or not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
        raise DegenerateFit("need >= 3 finite points")
    if np.ptp(xs) == 0:
        raise DegenerateFit("all abscissae equal")
    return float(np.polyfit(xs, ys, 1)[0])


def rate_slopes(table: pd.DataFrame) -> pd.DataFrame:
    """Log-log slope of median dlot against n, per (d, r)."""
    med = (table.groupby(["d", "r", "n"])["dlot_value"]
           .median().reset_index())
    out = []
    for (d, r), sub in med.groupby(["d", "r"]):
        s = slope_fit(np.log(sub["n"]), np.log(np.maximum(sub["dlot_value"],
                                                          1e-300)))
        out.append({"d": d, "r": r, "slope": s})
    return pd.DataFrame(out)


def approx_gap_experiment(n, ranks, cfg: SolverConfig, seed=0, d=2,
                          restarts=3) -> pd.DataFrame:
    """Low-rank value vs exact LP value and the log gap bound, per rank."""
    if n > 128:
        raise ValueError("approx gap experiment limited to n <= 128")
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 1, size=(n, d))
    Y = rng.uniform(0, 1, size=(n, d))
    a = np.full(n, 1.0 / n)
    b = np.full(n, 1.0 / n)
    C = sq_euclidean_dense(X, Y)
    ot_value = exact_ot(C, a, b)
    rows = []
    for r in ranks:
        if r < 2:
            raise ValueError("gap bound requires r >= 2")
        rcfg = SolverConfig(**{**cfg.__dict__, "rank": int(r), "seed": seed})
        _, rep = lot_solve_restarts(C, a, b, rcfg, restarts=restarts,
                                    strategy="random",
                                    points_x=X, points_y=Y)
        bound = C.max_abs * np.log(min(C.shape) / (r - 1))
        rows.append({"r": int(r), "lot_value": rep.value,
                     "ot_value": ot_value, "bound": float(bound)})
    return pd.DataFrame(rows)


def make_surrogate_dataset(n=250, d=50, seed=0):
    """Synthetic stand-in for embedded-text measures: two Gaussian-mixture
    point clouds with uniform weights."""
    X = sample_gaussian_mixture(d, n, 2 * seed + 100, mixture_seed=seed)
    Y = sample_gaussian_mixture(d, n, 2 * seed + 101, mixture_seed=seed + 1)
    return new_discrete_measure(points=X), new_discrete_measure(points=Y)


def init_comparison_experiment(measure_x, measure_y, ranks,
                               cfg: SolverConfig, use_stopping=False):
    """Per-init solve traces on a shared instance, cost normalized by max.

    With use_stopping=False the solver runs for max_outer_iters regardless
    of Delta_k. Traces are indexed by cumulative op counts, which include
    the work done by the initializer, so curves start at different offsets.
    """
    X, Y = measure_x.points, measure_y.points
    a, b = measure_x.weights, measure_y.weights
    C = sq_euclidean_factored(X, Y)
    scale = C.max_abs
    C = sq_euclidean_factored(X / np.sqrt(scale), Y / np.sqrt(scale))
    results = {}
    for r in ranks:
        per_rank = {}
        for strategy in initializers.STRATEGIES:
            counter = OpCounter()
            rcfg = SolverConfig(**{**cfg.__dict__, "rank": int(r)})
            if not use_stopping:
                rcfg.outer_tol = 1e-300
            init = initializers.make_init(strategy, a, b, rcfg, C=C,
                                          points_x=X / np.sqrt(scale),
                                          points_y=Y / np.sqrt(scale),
                                          counter=counter)
            init_ops = counter.count
            _, rep = lot_solve(C, a, b, rcfg, init, counter=counter)
            per_rank[strategy] = {
                "init_ops": init_ops,
                "cost_trace": rep.cost_trace,
                "delta_trace": rep.delta_trace,
                "op_count_trace": rep.op_count_trace,
                "final_cost": rep.value,
                "converged": rep.converged,
            }
        results[int(r)] = per_rank
    return results
