"""Initialization strategies for the low-rank solver.

Four strategies: Gaussian random (with feasibility repair), the closed-form
rank-2 construction, the entropic k-means barycenter, and the generalized
k-means run on each input measure with a fixed uniform column marginal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, RankTooSmall
from .measures import LowRankCoupling, sq_euclidean_dense
from .solver import SolverConfig, inner_projection

DEFAULT_EPSILON = 0.1  # entropic regularization of the barycenter init

STRATEGIES = ("random", "rank2", "kmeans", "general-kmeans")


@dataclass(frozen=True)
class InitStrategy:
    name: str
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if self.name not in STRATEGIES:
            raise ValueError(f"unknown init strategy {self.name!r}")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


def init_random(a, b, r, seed, cfg: SolverConfig | None = None,
                counter=None) -> LowRankCoupling:
    """|N(0,1)| + 0.1 draws repaired to feasibility by the inner projection."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    rng = np.random.default_rng(seed)
    xi1 = np.abs(rng.standard_normal((a.shape[0], r))) + 0.1
    xi2 = np.abs(rng.standard_normal((b.shape[0], r))) + 0.1
    xi3 = np.abs(rng.standard_normal(r)) + 0.1
    if cfg is None:
        cfg = SolverConfig(rank=r, seed=seed)
    if counter is not None:
        counter.add(2 * (xi1.size + xi2.size + xi3.size))
    res = inner_projection(xi1, xi2, xi3, a, b, cfg, counter=counter,
                           allow_stall=False)
    return res.coupling


def init_rank2(a, b, r, cfg: SolverConfig | None = None,
               counter=None) -> LowRankCoupling:
    """Two-term outer-product construction meeting both marginals exactly."""
    if r < 2:
        raise RankTooSmall("rank-2 initialization needs r >= 2")
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    g = np.full(r, 1.0 / r)
    lam = 0.5 * min(a.min(), b.min(), 1.0 / r)

    def ramp(k):
        v = np.arange(1, k + 1, dtype=np.float64)
        return v / v.sum()

    a_t, b_t, g_t = ramp(len(a)), ramp(len(b)), ramp(r)
    Q = lam * np.outer(a_t, g_t) + np.outer(a - lam * a_t, g - lam * g_t) / (1 - lam)
    R = lam * np.outer(b_t, g_t) + np.outer(b - lam * b_t, g - lam * g_t) / (1 - lam)
    if counter is not None:
        counter.add(4 * Q.size + 4 * R.size)
    if Q.min() < 0 or R.min() < 0:
        # cannot happen for the lambda above, but repair if clamped
        Q, R = np.maximum(Q, 0.0), np.maximum(R, 0.0)
        if cfg is None:
            cfg = SolverConfig(rank=r)
        res = inner_projection(np.maximum(Q, cfg.kernel_floor),
                               np.maximum(R, cfg.kernel_floor),
                               np.maximum(g, cfg.kernel_floor),
                               a, b, cfg, counter=counter, allow_stall=False)
        return res.coupling
    return LowRankCoupling(Q=Q, R=R, g=g)


def lloyd_kmeans(points, weights, k, seed, max_iters=100, counter=None):
    """Weighted Lloyd iterations from k-means++-style seeding.

    Empty clusters are re-seeded at the point farthest from its centroid.
    Returns (centroids, labels).
    """
    X = np.atleast_2d(np.asarray(points, dtype=np.float64))
    w = np.asarray(weights, dtype=np.float64)
    n = X.shape[0]
    if k > n:
        raise DimensionMismatch(f"k={k} > n={n}")
    rng = np.random.default_rng(seed)

    # k-means++ seeding on the weighted cloud
    centroids = np.empty((k, X.shape[1]))
    idx = rng.choice(n, p=w / w.sum())
    centroids[0] = X[idx]
    d2 = ((X - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        p = w * d2
        if p.sum() <= 0:
            idx = rng.choice(n)
        else:
            idx = rng.choice(n, p=p / p.sum())
        centroids[j] = X[idx]
        d2 = np.minimum(d2, ((X - centroids[j]) ** 2).sum(axis=1))

    labels = np.full(n, -1)
    for _ in range(max_iters):
        dist = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_labels = dist.argmin(axis=1)
        if counter is not None:
            counter.add(3 * n * k * X.shape[1])
        for j in range(k):
            mask = new_labels == j
            if not mask.any():
                far = dist[np.arange(n), new_labels].argmax()
                centroids[j] = X[far]
                new_labels[far] = j
                mask = new_labels == j
            wm = w[mask]
            centroids[j] = (X[mask] * wm[:, None]).sum(axis=0) / wm.sum()
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return centroids, labels


def init_kmeans_barycenter(X, a, Y, b, r, epsilon=DEFAULT_EPSILON, seed=0,
                           cfg: SolverConfig | None = None,
                           counter=None) -> LowRankCoupling:
    """Entropic barycenter initialization through r k-means centroids.

    Centroids come from the measure with more points (ties go to X). The
    shared column marginal is enforced by rescaling both blocks to the
    geometric mean of their column sums at each Bregman round.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if cfg is None:
        cfg = SolverConfig(rank=r, seed=seed)
    if X.shape[0] >= Y.shape[0]:
        Z, _ = lloyd_kmeans(X, a, r, seed, counter=counter)
    else:
        Z, _ = lloyd_kmeans(Y, b, r, seed, counter=counter)
    C_XZ = sq_euclidean_dense(X, Z).entries
    C_YZ = sq_euclidean_dense(Y, Z).entries
    KQ = np.maximum(np.exp(-C_XZ / epsilon), cfg.kernel_floor)
    KR = np.maximum(np.exp(-C_YZ / epsilon), cfg.kernel_floor)
    if counter is not None:
        counter.add(4 * KQ.size + 4 * KR.size)

    Q, R = KQ, KR
    max_rounds = 5000
    for _ in range(max_rounds):
        Q = Q * (a / np.maximum(Q.sum(axis=1), cfg.kernel_floor))[:, None]
        R = R * (b / np.maximum(R.sum(axis=1), cfg.kernel_floor))[:, None]
        pQ = Q.sum(axis=0)
        pR = R.sum(axis=0)
        p = np.sqrt(np.maximum(pQ, cfg.kernel_floor)
                    * np.maximum(pR, cfg.kernel_floor))
        Q = Q * (p / np.maximum(pQ, cfg.kernel_floor))[None, :]
        R = R * (p / np.maximum(pR, cfg.kernel_floor))[None, :]
        if counter is not None:
            counter.add(6 * Q.size + 6 * R.size)
        res = (np.abs(Q.sum(axis=1) - a).sum()
               + np.abs(R.sum(axis=1) - b).sum()
               + np.abs(Q.sum(axis=0) - R.sum(axis=0)).sum())
        if res <= cfg.inner_tol:
            break
    g = np.maximum(Q.sum(axis=0), cfg.g_floor)
    cpl = LowRankCoupling(Q=Q, R=R, g=g)
    if cpl.marginal_residual(a, b) > max(cfg.inner_tol, 1e-9):
        # tighten with one exact projection pass onto C1 /\ C2
        cpl = inner_projection(np.maximum(Q, cfg.kernel_floor),
                               np.maximum(R, cfg.kernel_floor), g,
                               a, b, cfg, counter=counter,
                               allow_stall=False).coupling
    return cpl


def init_generalized_kmeans(C_XX, a, C_YY, b, r, cfg: SolverConfig,
                            counter=None) -> LowRankCoupling:
    """Cluster each measure against itself with fixed marginal 1_r/r."""
    from .clustering import lot_cluster

    # a warm start does not need deep convergence; bound the internal solves
    # so extreme caller settings (no-stopping budgets) cannot degrade the
    # factors into underflow before the main solve even starts
    cfg_q = SolverConfig(**{**cfg.__dict__,
                            "max_outer_iters": min(cfg.max_outer_iters, 100),
                            "outer_tol": max(cfg.outer_tol, 1e-7)})
    g = np.full(r, 1.0 / r)
    res_q = lot_cluster(C_XX, a, r, cfg_q, g_fixed=g, restarts=1,
                        counter=counter)
    cfg_r = SolverConfig(**{**cfg_q.__dict__, "seed": cfg.seed + 1})
    res_r = lot_cluster(C_YY, b, r, cfg_r, g_fixed=g, restarts=1,
                        counter=counter)
    return LowRankCoupling(Q=res_q.Q, R=res_r.Q, g=g)


def make_init(strategy, a, b, cfg: SolverConfig, C=None,
              points_x=None, points_y=None, counter=None) -> LowRankCoupling:
    """Dispatch on strategy name (see STRATEGIES)."""
    if isinstance(strategy, InitStrategy):
        eps = strategy.epsilon
        strategy = strategy.name
    else:
        eps = DEFAULT_EPSILON
    r = cfg.rank
    if strategy == "random":
        return init_random(a, b, r, cfg.seed, cfg=cfg, counter=counter)
    if strategy == "rank2":
        return init_rank2(a, b, r, cfg=cfg, counter=counter)
    if strategy == "kmeans":
        if points_x is None or points_y is None:
            raise ValueError("kmeans init needs Euclidean points on both sides")
        return init_kmeans_barycenter(points_x, a, points_y, b, r,
                                      epsilon=eps, seed=cfg.seed, cfg=cfg,
                                      counter=counter)
    if strategy == "general-kmeans":
        if points_x is None or points_y is None:
            raise ValueError("general-kmeans init needs points to build "
                             "the self-cost matrices")
        C_XX = sq_euclidean_dense(points_x, points_x)
        C_YY = sq_euclidean_dense(points_y, points_y)
        return init_generalized_kmeans(C_XX, a, C_YY, b, r, cfg,
                                       counter=counter)
    raise ValueError(f"unknown init strategy {strategy!r}")
