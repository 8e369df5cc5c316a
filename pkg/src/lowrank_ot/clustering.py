"""Generalized k-means through the symmetric low-rank transport objective."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import shortest_path as _csgraph_shortest_path

from .errors import (
    AsymmetricCost,
    DimensionMismatch,
    NonFiniteKernel,
    NonPositiveBandwidth,
)
from .measures import (
    CostMatrix,
    DenseCost,
    FactoredCost,
    LowRankCoupling,
    sq_euclidean_dense,
)
from .opcount import OpCounter
from .solver import SolverConfig, stopping_delta
from .measures import cost_apply


@dataclass
class ClusterResult:
    Q: np.ndarray
    labels: np.ndarray
    objective: float
    g: np.ndarray
    converged: bool = True
    iterations: int = 0


def _sym_residual(Q, a, g):
    return (np.abs(Q.sum(axis=1) - a).sum()
            + np.abs(Q.sum(axis=0) - g).sum())


def _sym_inner_projection(xi, xi3, a, g_fixed, cfg, counter=None,
                          allow_stall=True):
    """Dykstra-corrected alternating projections for the symmetric block.

    Row sums are rescaled to a; the shared-column projection either uses the
    closed form with duplicated column-sum blocks (free g) or rescales
    columns to a fixed g.
    """
    Q = xi
    g = g_fixed if g_fixed is not None else xi3
    vQ = np.ones_like(Q)
    wQ = np.ones_like(Q)
    wg = np.ones_like(g)
    window_res = np.inf
    for it in range(1, cfg.max_inner_iters + 1):
        y = Q * vQ
        Qn = y * (a / np.maximum(y.sum(axis=1), cfg.kernel_floor))[:, None]
        # keep entries off exact zero: underflow turns the correction terms
        # into 0/0 NaN that poisons every later iterate
        Qn = np.maximum(Qn, cfg.kernel_floor)
        vQ = y / Qn

        y = Qn * wQ
        s = np.maximum(y.sum(axis=0), cfg.kernel_floor)
        if g_fixed is None:
            yg = g * wg
            g = np.maximum(np.cbrt(yg * s * s), cfg.g_floor)
            wg = yg / g
        else:
            g = g_fixed
        Q = np.maximum(y * (g / s)[None, :], cfg.kernel_floor)
        wQ = y / Q
        if counter is not None:
            counter.add(10 * Q.size + 6 * g.size)
        res = _sym_residual(Q, a, g)
        if res <= cfg.inner_tol:
            return Q, g, it, True
        if allow_stall and it % 20 == 0:
            if res > 0.1 * window_res:
                return Q, g, it, False
            window_res = res
    return Q, g, cfg.max_inner_iters, False


def _sym_solve(C: CostMatrix, a, k, cfg: SolverConfig, g_fixed=None,
               init_Q=None, counter=None):
    """Mirror descent on Q (and g when free) for the symmetric objective."""
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[0]
    rng = np.random.default_rng(cfg.seed)
    if init_Q is None:
        xi = np.abs(rng.standard_normal((n, k))) + 0.1
    else:
        xi = np.maximum(init_Q, cfg.kernel_floor)
    g0 = g_fixed if g_fixed is not None else np.full(k, 1.0 / k)
    Q, g, _, _ = _sym_inner_projection(xi, g0.copy(), a, g_fixed, cfg,
                                       counter=counter)
    delta_trace = []
    converged = False
    iters = 0
    inner_ok = True
    for it in range(cfg.max_outer_iters):
        CQ = cost_apply(C, Q, side="right", counter=counter)
        omega = np.einsum("ij,ij->j", Q, CQ)
        grad_q = 2.0 * CQ / g[None, :]
        grad_g = omega / (g * g)
        if counter is not None:
            counter.add(4 * Q.size + 4 * g.size)
        if cfg.gamma_mode == "adaptive":
            from .solver import _MAX_KERNEL_EXPONENT
            m = max(np.abs(grad_q).max(), np.abs(grad_g).max())
            # gamma0 / m^2 with the same exponent safeguard as the
            # asymmetric solver (see _adaptive_from_blocks)
            gamma_k = (cfg.gamma if m == 0.0
                       else min(cfg.gamma / (m * m),
                                _MAX_KERNEL_EXPONENT / m))
        else:
            gamma_k = cfg.gamma
        with np.errstate(over="ignore"):
            xi = Q * np.exp(-gamma_k * grad_q)
            xi3 = g * np.exp(gamma_k * grad_g)
        if not (np.all(np.isfinite(xi)) and np.all(np.isfinite(xi3))):
            raise NonFiniteKernel(
                "kernel overflow/NaN; reduce gamma or use "
                "gamma_mode='adaptive'")
        xi = np.maximum(xi, cfg.kernel_floor)
        xi3 = np.maximum(xi3, cfg.kernel_floor)
        if counter is not None:
            counter.add(3 * Q.size + 3 * g.size)
        Qn, gn, _, inner_ok = _sym_inner_projection(xi, xi3, a, g_fixed, cfg,
                                                    counter=counter)
        prev = LowRankCoupling(Q=Q, R=Q, g=g)
        cur = LowRankCoupling(Q=Qn, R=Qn, g=gn)
        delta = stopping_delta(prev, cur, gamma_k, cfg.kernel_floor)
        Q, g = Qn, gn
        iters = it + 1
        delta_trace.append(delta)
        if np.isfinite(delta) and delta < cfg.outer_tol:
            converged = True
            break
    if not inner_ok:
        # last kernels were too degenerate for the inner loop; polish the
        # returned factors with a stall-free projection pass
        Q, g, _, _ = _sym_inner_projection(
            np.maximum(Q, cfg.kernel_floor),
            None if g_fixed is not None else np.maximum(g, cfg.g_floor),
            a, g_fixed, cfg, counter=counter, allow_stall=False)
    CQ = cost_apply(C, Q, side="right", counter=counter)
    omega = np.einsum("ij,ij->j", Q, CQ)
    objective = float((omega / g).sum())
    return Q, g, objective, converged, iters


def lot_cluster(C, a, k, cfg: SolverConfig, g_fixed=None, restarts=5,
                init_Q=None, counter=None) -> ClusterResult:
    """Cluster a measure against itself; hard labels come from row argmax.

    C must be symmetric (checked on dense costs). Multiple seeded restarts
    are run and the best objective kept; the non-convex landscape makes a
    single run unreliable.
    """
    a = np.asarray(a, dtype=np.float64)
    if isinstance(C, np.ndarray):
        C = DenseCost(C)
    if isinstance(C, DenseCost):
        if C.shape[0] != C.shape[1]:
            raise AsymmetricCost("cost must be square")
        if np.abs(C.entries - C.entries.T).max() > 1e-9:
            raise AsymmetricCost("cost must be symmetric within 1e-9")
    elif C.shape[0] != C.shape[1]:
        raise AsymmetricCost("cost must be square")
    if k > a.shape[0]:
        raise DimensionMismatch(f"k={k} > n={a.shape[0]}")
    # The argmin is invariant under positive cost scaling, but the adaptive
    # step gamma0/||grad||_inf^2 is not: large costs shrink the step by the
    # scale squared and the iteration crawls. Normalize to max |C| = 1 and
    # rescale the objective afterwards.
    scale = C.max_abs
    if scale > 0 and not np.isclose(scale, 1.0):
        if isinstance(C, DenseCost):
            C_solve = DenseCost(C.entries / scale)
        else:
            C_solve = FactoredCost(C.A / scale, C.B)
    else:
        C_solve, scale = C, 1.0
    best = None
    n_runs = 1 if init_Q is not None else max(1, restarts)
    for i in range(n_runs):
        icfg = SolverConfig(**{**cfg.__dict__, "seed": cfg.seed + i})
        Q, g, obj, conv, iters = _sym_solve(
            C_solve, a, k, icfg, g_fixed=g_fixed, init_Q=init_Q,
            counter=counter)
        if best is None or obj < best[2]:
            best = (Q, g, obj, conv, iters)
    Q, g, obj, conv, iters = best
    return ClusterResult(Q=Q, labels=Q.argmax(axis=1), objective=obj * scale,
                         g=g, converged=conv, iterations=iters)


def kmeans_equivalence_check(points, k, seed, cfg: SolverConfig | None = None,
                             restarts=5, lloyd_restarts=10):
    """Compare the clustering objective against twice the Lloyd objective.

    Both are reported at the corollary's normalization (unit mass per point),
    obtained by scaling the mass-1 solution by n.
    """
    from .initializers import lloyd_kmeans

    X = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n = X.shape[0]
    a = np.full(n, 1.0 / n)
    C = sq_euclidean_dense(X, X)
    if cfg is None:
        cfg = SolverConfig(rank=k, seed=seed)
    res = lot_cluster(C, a, k, cfg, restarts=restarts)
    lot_objective = n * res.objective

    best_ssd = np.inf
    for i in range(lloyd_restarts):
        Z, labels = lloyd_kmeans(X, a, k, seed + i)
        ssd = float(((X - Z[labels]) ** 2).sum())
        best_ssd = min(best_ssd, ssd)
    return lot_objective, best_ssd


def shortest_path_cost(points, bandwidth="median") -> DenseCost:
    """All-pairs shortest paths on the complete graph with Gaussian-kernel
    edge weights w_ij = 1 - exp(-|x_i - x_j|^2 / (2 sigma^2))."""
    X = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n = X.shape[0]
    d2 = ((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2)
    d2 = np.maximum(d2, 0.0)
    if bandwidth == "median":
        iu = np.triu_indices(n, k=1)
        sigma = float(np.median(np.sqrt(d2[iu]))) if n > 1 else 1.0
    else:
        sigma = float(bandwidth)
    if sigma <= 0:
        raise NonPositiveBandwidth(f"bandwidth {sigma} must be positive")
    W = 1.0 - np.exp(-d2 / (2.0 * sigma * sigma))
    np.fill_diagonal(W, 0.0)
    D = _csgraph_shortest_path(W, method="D", directed=False)
    D = 0.5 * (D + D.T)
    np.fill_diagonal(D, 0.0)
    return DenseCost(D)
