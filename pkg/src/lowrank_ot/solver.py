"""Mirror-descent solver for the rank-constrained transport problem.

Each outer iteration builds multiplicative kernels from the current factors,
then KL-projects them back onto the intersection of the two marginal
constraint sets with alternating Bregman projections carrying Dykstra
correction terms. Stopping uses the symmetrized-KL statistic Delta_k.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InfeasibleInit, NonFiniteKernel, ZeroColumnSum, ZeroRowSum
from .measures import CostMatrix, LowRankCoupling, coupling_cost
from .opcount import OpCounter


@dataclass
class SolverConfig:
    rank: int = 2
    gamma: float = 10.0
    gamma_mode: str = "adaptive"  # "fixed" | "adaptive"
    outer_tol: float = 1e-6
    max_outer_iters: int = 2000
    inner_tol: float = 1e-9  # marginal L1 residual threshold (delta_marg)
    max_inner_iters: int = 10000
    g_floor: float = 1e-10
    kernel_floor: float = 1e-300
    seed: int = 0
    # allow the inner projection to bail out early when its residual
    # stagnates; disable for maximum-quality projections at higher cost
    inner_stall_exit: bool = True

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if self.gamma <= 0 or self.outer_tol <= 0 or self.inner_tol <= 0:
            raise ValueError("gamma and tolerances must be positive")
        if self.gamma_mode not in ("fixed", "adaptive"):
            raise ValueError(f"unknown gamma_mode {self.gamma_mode!r}")


@dataclass
class SolveReport:
    cost_trace: list = field(default_factory=list)
    delta_trace: list = field(default_factory=list)
    gamma_trace: list = field(default_factory=list)
    op_count_trace: list = field(default_factory=list)
    inner_iter_trace: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    wall_time: float = 0.0
    value: float = float("nan")


def gradient_blocks(cpl: LowRankCoupling, C: CostMatrix, counter=None):
    """The three gradient blocks of the objective in factored form.

    Returns (CR/g, C.T Q/g, omega) with omega_i = (Q.T C R)_ii. The diagonal
    is accumulated from Q and C@R directly, never forming Q.T C R.
    """
    Q, R, g = cpl.Q, cpl.R, cpl.g
    CR = C.apply(R, side="right", counter=counter)
    CtQ = C.apply(Q, side="transpose-left", counter=counter)
    omega = np.einsum("ij,ij->j", Q, CR)
    if counter is not None:
        counter.add(2 * Q.size + Q.size + R.size + g.size)
    return CR / g[None, :], CtQ / g[None, :], omega


def md_kernels(cur: LowRankCoupling, C: CostMatrix, gamma_k: float,
               kernel_floor: float = 1e-300, counter=None):
    """Multiplicative mirror-descent kernels (xi1, xi2, xi3)."""
    CRg, CtQg, omega = gradient_blocks(cur, C, counter=counter)
    return _kernels_from_blocks(cur, CRg, CtQg, omega, gamma_k,
                                kernel_floor, counter=counter)


def _kernels_from_blocks(cur, CRg, CtQg, omega, gamma_k, kernel_floor,
                         counter=None):
    Q, R, g = cur.Q, cur.R, cur.g
    # overflow to inf is deliberate here; it is caught and reported below
    with np.errstate(over="ignore"):
        xi1 = Q * np.exp(-gamma_k * CRg)
        xi2 = R * np.exp(-gamma_k * CtQg)
        xi3 = g * np.exp(gamma_k * omega / (g * g))
    if not (np.all(np.isfinite(xi1)) and np.all(np.isfinite(xi2))
            and np.all(np.isfinite(xi3))):
        raise NonFiniteKernel(
            "kernel overflow/NaN; reduce gamma or use gamma_mode='adaptive'")
    if counter is not None:
        counter.add(3 * xi1.size + 3 * xi2.size + 5 * xi3.size)
    return (np.maximum(xi1, kernel_floor), np.maximum(xi2, kernel_floor),
            np.maximum(xi3, kernel_floor))


def adaptive_step(cur: LowRankCoupling, C: CostMatrix, gamma0: float,
                  counter=None) -> float:
    """Step size gamma0 / ||gradient blocks||_inf^2; gamma0 unchanged if the
    gradient vanishes identically (zero cost)."""
    CRg, CtQg, omega = gradient_blocks(cur, C, counter=counter)
    return _adaptive_from_blocks(CRg, CtQg, omega, cur.g, gamma0)


# cap on |gamma_k * gradient| so the multiplicative kernels stay finite;
# exp(400) is representable with ample headroom
_MAX_KERNEL_EXPONENT = 400.0


def _adaptive_from_blocks(CRg, CtQg, omega, g, gamma0):
    m = max(np.abs(CRg).max(), np.abs(CtQg).max(),
            np.abs(omega / (g * g)).max())
    if m == 0.0:
        return gamma0
    # gamma0 / m^2, safeguarded: when the gradient becomes very small the
    # raw rule blows the kernel exponent (gamma_k * m = gamma0 / m) past
    # floating-point range, so bound the exponent instead of overflowing
    return min(gamma0 / (m * m), _MAX_KERNEL_EXPONENT / m)


def project_c1(xi1, xi2, a, b, counter=None):
    """KL projection onto the row-sum constraints: row rescaling."""
    r1 = xi1.sum(axis=1)
    r2 = xi2.sum(axis=1)
    if r1.min() <= 0 or r2.min() <= 0:
        raise ZeroRowSum("kernel row sum vanished")
    Q = xi1 * (a / r1)[:, None]
    R = xi2 * (b / r2)[:, None]
    if counter is not None:
        counter.add(2 * xi1.size + 2 * xi2.size + 2 * len(a) + 2 * len(b))
    return Q, R


def project_c2(xi1, xi2, xi3, g_floor=1e-10, counter=None):
    """Closed-form KL projection onto the shared column-marginal set.

    First-order conditions give g' = (xi3 * colsum(xi1) * colsum(xi2))^(1/3),
    then both factor blocks are column-rescaled to have column sums g'.
    """
    s1 = xi1.sum(axis=0)
    s2 = xi2.sum(axis=0)
    if s1.min() <= 0 or s2.min() <= 0:
        raise ZeroColumnSum("kernel column sum vanished")
    g = np.cbrt(xi3 * s1 * s2)
    g = np.maximum(g, g_floor)
    Q = xi1 * (g / s1)[None, :]
    R = xi2 * (g / s2)[None, :]
    if counter is not None:
        counter.add(2 * xi1.size + 2 * xi2.size + 8 * len(g))
    return Q, R, g


@dataclass
class InnerResult:
    coupling: LowRankCoupling
    iterations: int
    converged: bool


def inner_projection(xi1, xi2, xi3, a, b, cfg: SolverConfig,
                     counter=None, allow_stall=True) -> InnerResult:
    """KL projection of the kernels onto C1 /\\ C2.

    Alternating Bregman projections with multiplicative Dykstra corrections;
    both sets are affine, so the corrections do not move the fixed point but
    are kept as prescribed. Returns the first iterate whose combined L1
    marginal residual drops below cfg.inner_tol.
    """
    Q, R, g = xi1, xi2, xi3
    vQ = np.ones_like(Q)
    vR = np.ones_like(R)
    wQ = np.ones_like(Q)
    wR = np.ones_like(R)
    wg = np.ones_like(g)
    best = None
    best_res = np.inf
    window_res = np.inf
    floor = cfg.kernel_floor
    for it in range(1, cfg.max_inner_iters + 1):
        yQ, yR = Q * vQ, R * vR
        Qn, Rn = project_c1(yQ, yR, a, b, counter=counter)
        # keep entries off exact zero: underflow here turns the Dykstra
        # weights into 0/0 and poisons every later iterate with NaN
        Qn = np.maximum(Qn, floor)
        Rn = np.maximum(Rn, floor)
        vQ = yQ / Qn
        vR = yR / Rn

        yQ, yR, yg = Qn * wQ, Rn * wR, g * wg
        Q, R, g = project_c2(yQ, yR, yg, g_floor=cfg.g_floor, counter=counter)
        Q = np.maximum(Q, floor)
        R = np.maximum(R, floor)
        wQ = yQ / Q
        wR = yR / R
        wg = yg / g
        if counter is not None:
            counter.add(4 * Q.size + 4 * R.size + 2 * g.size)

        # after the column projection both factor blocks have column sums
        # exactly g, so the coupling's row sums collapse to the factors' own
        # row sums and the residual needs no matrix-vector products
        res = (np.abs(Q.sum(axis=1) - a).sum()
               + np.abs(R.sum(axis=1) - b).sum())
        if counter is not None:
            counter.add(2 * Q.size + 2 * R.size)
        if res < best_res:
            best, best_res = (Q, R, g), res
        if res <= cfg.inner_tol:
            return InnerResult(coupling=LowRankCoupling(Q=Q, R=R, g=g),
                               iterations=it, converged=True)
        # near-degenerate kernels contract too slowly for the budget to
        # matter; bail out when 20 rounds buy less than one order of
        # magnitude
        if allow_stall and it % 20 == 0:
            if res > 0.1 * window_res:
                return InnerResult(
                    coupling=LowRankCoupling(Q=best[0], R=best[1], g=best[2]),
                    iterations=it, converged=False)
            window_res = res
    return InnerResult(
        coupling=LowRankCoupling(Q=best[0], R=best[1], g=best[2]),
        iterations=cfg.max_inner_iters, converged=False)


def _kl_blocks(p, q, floor):
    p = np.maximum(p, floor)
    q = np.maximum(q, floor)
    return float(np.sum(p * np.log(p / q)))


def stopping_delta(prev: LowRankCoupling, cur: LowRankCoupling,
                   gamma_k: float, kernel_floor: float = 1e-300) -> float:
    """Delta_k = (KL(cur, prev) + KL(prev, cur)) / gamma_k^2 over Q, R, g."""
    tot = 0.0
    for p, q in ((cur.Q, prev.Q), (cur.R, prev.R), (cur.g, prev.g)):
        tot += _kl_blocks(p, q, kernel_floor) + _kl_blocks(q, p, kernel_floor)
    # the symmetrized KL is nonnegative; roundoff in the entrywise sums can
    # drive the total a hair below zero for near-identical iterates
    return max(tot, 0.0) / (gamma_k * gamma_k)


def lot_solve(C: CostMatrix, a, b, cfg: SolverConfig,
              init: LowRankCoupling, counter: Optional[OpCounter] = None,
              collect_traces: bool = True):
    """Run the mirror-descent scheme from a feasible initial triple.

    Returns (coupling, SolveReport); report.value is <C, P> evaluated from
    the factors without materializing P.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if counter is None:
        counter = OpCounter()
    # near-feasible inits (warm starts whose repair projection stalled at a
    # boundary) are fine: the first inner projection restores feasibility.
    # Reject only grossly infeasible inits, e.g. built for other marginals.
    feas_tol = max(cfg.inner_tol, 1e-3)
    init_res = init.marginal_residual(a, b)
    # NaN compares false against any threshold; catch it explicitly
    if not np.isfinite(init_res) or init_res > feas_tol:
        raise InfeasibleInit(
            f"init residual {init_res:.3e} > {feas_tol:.1e}")
    cur = init
    report = SolveReport()
    t0 = time.perf_counter()
    delta = np.inf
    for k in range(cfg.max_outer_iters):
        CRg, CtQg, omega = gradient_blocks(cur, C, counter=counter)
        cost_k = float((omega / cur.g).sum())
        if cfg.gamma_mode == "adaptive":
            gamma_k = _adaptive_from_blocks(CRg, CtQg, omega, cur.g, cfg.gamma)
        else:
            gamma_k = cfg.gamma
        xi1, xi2, xi3 = _kernels_from_blocks(
            cur, CRg, CtQg, omega, gamma_k, cfg.kernel_floor, counter=counter)
        inner = inner_projection(xi1, xi2, xi3, a, b, cfg, counter=counter,
                                 allow_stall=cfg.inner_stall_exit)
        nxt = inner.coupling
        delta = stopping_delta(cur, nxt, gamma_k, cfg.kernel_floor)
        if collect_traces:
            report.cost_trace.append(cost_k)
            report.delta_trace.append(delta)
            report.gamma_trace.append(gamma_k)
            report.op_count_trace.append(counter.count)
            report.inner_iter_trace.append(inner.iterations)
        cur = nxt
        report.iterations = k + 1
        # NaN delta (fully clamped state) is treated as not converged
        if np.isfinite(delta) and delta < cfg.outer_tol:
            report.converged = True
            break
    if not inner.converged:
        # the last kernels were too degenerate for the inner loop; polish
        # the returned triple with a stall-free projection pass
        polish = inner_projection(
            np.maximum(cur.Q, cfg.kernel_floor),
            np.maximum(cur.R, cfg.kernel_floor),
            np.maximum(cur.g, cfg.g_floor), a, b, cfg,
            counter=counter, allow_stall=False)
        cur = polish.coupling
    report.value = coupling_cost(C, cur, counter=counter)
    report.wall_time = time.perf_counter() - t0
    if collect_traces:
        report.op_count_trace.append(counter.count)
    return cur, report


def normalized_cost(C: CostMatrix):
    """Rescale a cost to max |entry| 1 for solving; returns (cost, scale).

    The argmin coupling is invariant under positive scaling and the value is
    linear in C, but the adaptive step gamma0/||grad||_inf^2 shrinks with the
    scale squared, so solving at unit scale converges far faster.
    """
    from .measures import DenseCost, FactoredCost

    scale = C.max_abs
    if scale <= 0 or np.isclose(scale, 1.0):
        return C, 1.0
    if isinstance(C, DenseCost):
        return DenseCost(C.entries / scale), scale
    return FactoredCost(C.A / scale, C.B), scale


def lot_solve_restarts(C: CostMatrix, a, b, cfg: SolverConfig, restarts=3,
                       strategy="random", points_x=None, points_y=None,
                       counter=None, normalize=True):
    """Best-of-k solve over seeded restarts; returns the lowest-value run.

    The cost is solved at unit scale (see normalized_cost) and the reported
    value rescaled, unless normalize=False.
    """
    from . import initializers

    C_solve, scale = normalized_cost(C) if normalize else (C, 1.0)
    best = None
    for i in range(restarts):
        icfg = SolverConfig(**{**cfg.__dict__, "seed": cfg.seed + i})
        init = initializers.make_init(
            strategy, a=a, b=b, cfg=icfg, C=C_solve,
            points_x=points_x, points_y=points_y, counter=counter)
        cpl, rep = lot_solve(C_solve, a, b, icfg, init, counter=counter,
                             collect_traces=False)
        if best is None or rep.value < best[1].value:
            best = (cpl, rep)
    cpl, rep = best
    if scale != 1.0:
        rep.value *= scale
        rep.cost_trace = [v * scale for v in rep.cost_trace]
    return cpl, rep
