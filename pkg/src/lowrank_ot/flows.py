"""Particle descent on the (debiased) low-rank transport objective.

The couplings returned by the solver act as fixed gradients of the cost
matrix (Danskin), and the chain rule through squared Euclidean entries gives
the particle updates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NonFiniteGradient
from .measures import (
    DiscreteMeasure,
    LowRankCoupling,
    sq_euclidean_factored,
)
from .solver import SolverConfig, inner_projection, lot_solve, normalized_cost
from .clustering import lot_cluster


@dataclass
class FlowConfig:
    rank: int = 100
    steps: int = 300
    learning_rate: float = 0.1
    objective: str = "dlot"  # "dlot" | "lot"
    solver: SolverConfig = field(default_factory=SolverConfig)
    snapshot_every: int = 25

    def __post_init__(self):
        if self.steps < 1 or self.learning_rate <= 0:
            raise ValueError("steps >= 1 and learning_rate > 0 required")
        if self.objective not in ("dlot", "lot"):
            raise ValueError(f"unknown objective {self.objective!r}")


@dataclass
class FlowTrace:
    snapshots: list = field(default_factory=list)  # (step, positions)
    loss_trace: list = field(default_factory=list)
    grad_norm_trace: list = field(default_factory=list)
    final_positions: np.ndarray | None = None
    final_dlot: float = float("nan")
    aborted: bool = False


def _row_weighted(P, X_or_Y, side):
    """(row sums, P @ Y) or (col sums, P.T @ X) without materializing P."""
    if isinstance(P, LowRankCoupling):
        if side == "row":
            rs = P.Q @ (P.R.sum(axis=0) / P.g)
            prod = (P.Q / P.g[None, :]) @ (P.R.T @ X_or_Y)
        else:
            rs = P.R @ (P.Q.sum(axis=0) / P.g)
            prod = (P.R / P.g[None, :]) @ (P.Q.T @ X_or_Y)
        return rs, prod
    P = np.asarray(P, dtype=np.float64)
    if side == "row":
        return P.sum(axis=1), P @ X_or_Y
    return P.sum(axis=0), P.T @ X_or_Y


def danskin_grad_points(X, a, Y, b, P_xy, P_xx=None, mode="lot"):
    """Gradient of the transport cost w.r.t. particle positions at fixed
    couplings, for the squared Euclidean ground cost."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if X.shape[1] != Y.shape[1]:
        raise DimensionMismatch("particle and target dimensions differ")
    rs, PY = _row_weighted(P_xy, Y, "row")
    grad = 2.0 * (rs[:, None] * X - PY)
    if mode == "dlot":
        if P_xx is None:
            raise ValueError("mode='dlot' needs the self coupling P_xx")
        rs_x, PX = _row_weighted(P_xx, X, "row")
        cs_x, PtX = _row_weighted(P_xx, X, "col")
        grad -= ((rs_x + cs_x)[:, None] * X - PX - PtX)
    return grad


def _warm_start(cpl, a, b, cfg, tau=1e-3):
    """Reuse the previous factors as the next init.

    Near-zero entries make the alternating projections contract too slowly
    to restore feasibility, so blend in a small multiple of the product
    coupling a g^T / b g^T (which shares the marginals) before projecting.
    """
    g = np.maximum(cpl.g, cfg.g_floor)
    Q = (1.0 - tau) * np.maximum(cpl.Q, 0.0) + tau * np.outer(a, g)
    R = (1.0 - tau) * np.maximum(cpl.R, 0.0) + tau * np.outer(b, g)
    out = inner_projection(Q, R, g, a, b, cfg, allow_stall=False).coupling
    if out.marginal_residual(a, b) <= 1e-4:
        return out
    # projection budget exhausted: restart from random. The product
    # coupling would be feasible but is an exact fixed point of the mirror
    # step (its gradient is constant along rows), so it cannot seed descent.
    from .initializers import init_random
    return init_random(a, b, len(g), cfg.seed, cfg=cfg)


def flow_run(X0, target: DiscreteMeasure, cfg: FlowConfig) -> FlowTrace:
    """Gradient descent over particle positions with uniform weights.

    Both required transport problems are re-solved each step, warm-started
    from the previous factors; the target self-term is constant and computed
    once.
    """
    X = np.atleast_2d(np.asarray(X0, dtype=np.float64)).copy()
    Y = target.points
    if Y is None:
        raise ValueError("flow target must have Euclidean support")
    b = target.weights
    n = X.shape[0]
    a = np.full(n, 1.0 / n)
    scfg = SolverConfig(**{**cfg.solver.__dict__, "rank": cfg.rank})

    C_yy = sq_euclidean_factored(Y, Y)
    from .divergences import _self_lot
    l_yy = _self_lot(C_yy, b, scfg, restarts=1)

    trace = FlowTrace()
    cpl_xy = None
    Q_xx = None
    for step in range(cfg.steps):
        C_xy = sq_euclidean_factored(X, Y)
        if cpl_xy is None:
            from .initializers import init_random
            init = init_random(a, b, cfg.rank, scfg.seed, cfg=scfg)
        else:
            init = _warm_start(cpl_xy, a, b, scfg)
        C_solve, scale = normalized_cost(C_xy)
        cpl_xy, rep_xy = lot_solve(C_solve, a, b, scfg, init,
                                   collect_traces=False)
        val_xy = rep_xy.value * scale
        C_xx = sq_euclidean_factored(X, X)
        res_xx = lot_cluster(C_xx, a, cfg.rank, scfg, init_Q=Q_xx,
                             restarts=1)
        Q_xx = res_xx.Q
        P_xx = LowRankCoupling(Q=res_xx.Q, R=res_xx.Q, g=res_xx.g)

        loss_dlot = val_xy - 0.5 * (res_xx.objective + l_yy)
        loss = loss_dlot if cfg.objective == "dlot" else val_xy
        grad = danskin_grad_points(X, a, Y, b, cpl_xy,
                                   P_xx if cfg.objective == "dlot" else None,
                                   mode=cfg.objective)
        gnorm = float(np.linalg.norm(grad))
        trace.loss_trace.append(loss)
        trace.grad_norm_trace.append(gnorm)
        if step % cfg.snapshot_every == 0:
            trace.snapshots.append((step, X.copy()))
        if not np.all(np.isfinite(grad)):
            trace.aborted = True
            trace.final_positions = X
            return trace
        X = X - cfg.learning_rate * grad

    trace.snapshots.append((cfg.steps, X.copy()))
    trace.final_positions = X

    # final debiased value at the last positions, for either objective
    C_xy = sq_euclidean_factored(X, Y)
    init = _warm_start(cpl_xy, a, b, scfg)
    C_solve, scale = normalized_cost(C_xy)
    _, rep_xy = lot_solve(C_solve, a, b, scfg, init, collect_traces=False)
    C_xx = sq_euclidean_factored(X, X)
    res_xx = lot_cluster(C_xx, a, cfg.rank, scfg, init_Q=Q_xx, restarts=1)
    trace.final_dlot = rep_xy.value * scale - 0.5 * (res_xx.objective + l_yy)
    return trace
