"""Discrete measures, ground costs and the low-rank coupling representation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyMeasure,
    NonPositiveWeight,
    SizeCapExceeded,
    WeightSumMismatch,
)
from .opcount import OpCounter

WEIGHT_SUM_TOL = 1e-9
MATERIALIZE_CAP = 10**6


@dataclass(frozen=True)
class DiscreteMeasure:
    """Weighted point cloud; points may be absent for cost-indexed measures."""

    weights: np.ndarray
    points: Optional[np.ndarray] = None

    @property
    def n(self):
        return self.weights.shape[0]

    @property
    def dim(self):
        return None if self.points is None else self.points.shape[1]


def new_discrete_measure(points=None, weights=None) -> DiscreteMeasure:
    """Build a measure with strictly positive weights summing to one.

    Missing weights default to uniform 1/n. Weight sums off by more than
    1e-9 are rejected; smaller drift is renormalized.
    """
    pts = None
    if points is not None:
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.size == 0:
            raise EmptyMeasure("empty point list")
    if weights is None:
        if pts is None:
            raise EmptyMeasure("need points or weights")
        w = np.full(pts.shape[0], 1.0 / pts.shape[0])
    else:
        w = np.asarray(weights, dtype=np.float64).ravel().copy()
    if w.size == 0:
        raise EmptyMeasure("empty weight vector")
    if pts is not None and pts.shape[0] != w.shape[0]:
        raise DimensionMismatch(
            f"{pts.shape[0]} points vs {w.shape[0]} weights"
        )
    if np.any(w <= 0.0) or not np.all(np.isfinite(w)):
        raise NonPositiveWeight("weights must be strictly positive and finite")
    s = w.sum()
    if abs(s - 1.0) > WEIGHT_SUM_TOL:
        raise WeightSumMismatch(f"weights sum to {s!r}, expected 1")
    w = w / s
    return DiscreteMeasure(weights=w, points=pts)


class CostMatrix:
    """Ground cost C, dense n x m or factored C = A @ B.T (inner dim q)."""

    shape: tuple

    def apply(self, M, side="right", counter: Optional[OpCounter] = None):
        raise NotImplementedError

    def materialize(self, cap=MATERIALIZE_CAP):
        raise NotImplementedError

    @property
    def max_abs(self):
        raise NotImplementedError


class DenseCost(CostMatrix):
    def __init__(self, entries):
        entries = np.asarray(entries, dtype=np.float64)
        if entries.ndim != 2:
            raise DimensionMismatch("dense cost must be a 2-D array")
        if not np.all(np.isfinite(entries)) or np.any(entries < 0):
            raise ValueError("dense cost entries must be finite and >= 0")
        self.entries = entries
        self.shape = entries.shape
        self._max_abs = float(np.abs(entries).max()) if entries.size else 0.0

    @property
    def max_abs(self):
        return self._max_abs

    def apply(self, M, side="right", counter=None):
        M = np.asarray(M, dtype=np.float64)
        n, m = self.shape
        k = 1 if M.ndim == 1 else M.shape[-1]
        if side == "right":
            if M.shape[0] != m:
                raise DimensionMismatch(f"C@M: C is {self.shape}, M has {M.shape[0]} rows")
            out = self.entries @ M
        elif side == "transpose-left":
            if M.shape[0] != n:
                raise DimensionMismatch(f"C.T@M: C is {self.shape}, M has {M.shape[0]} rows")
            out = self.entries.T @ M
        elif side == "left":
            if M.shape[-1] != n:
                raise DimensionMismatch(f"M@C: C is {self.shape}, M has {M.shape[-1]} cols")
            out = M @ self.entries
        else:
            raise ValueError(f"unknown side {side!r}")
        if counter is not None:
            counter.matmul(n, m, k)
        return out

    def materialize(self, cap=MATERIALIZE_CAP):
        _check_cap(self.shape, cap)
        return self.entries


class FactoredCost(CostMatrix):
    """Cost given as A @ B.T; products route through the factors."""

    def __init__(self, A, B):
        A = np.asarray(A, dtype=np.float64)
        B = np.asarray(B, dtype=np.float64)
        if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[1]:
            raise DimensionMismatch("factored cost needs A (n,q), B (m,q)")
        self.A = A
        self.B = B
        self.shape = (A.shape[0], B.shape[0])
        self.q = A.shape[1]
        self._max_abs = None

    @property
    def max_abs(self):
        if self._max_abs is None:
            # chunked row scan; never forms the full n x m matrix at once
            best = 0.0
            step = max(1, MATERIALIZE_CAP // max(1, self.shape[1]))
            for lo in range(0, self.shape[0], step):
                block = self.A[lo:lo + step] @ self.B.T
                best = max(best, float(np.abs(block).max()))
            self._max_abs = best
        return self._max_abs

    def apply(self, M, side="right", counter=None):
        M = np.asarray(M, dtype=np.float64)
        n, m = self.shape
        k = 1 if M.ndim == 1 else M.shape[-1]
        if side == "right":
            if M.shape[0] != m:
                raise DimensionMismatch(f"C@M: C is {self.shape}, M has {M.shape[0]} rows")
            out = self.A @ (self.B.T @ M)
        elif side == "transpose-left":
            if M.shape[0] != n:
                raise DimensionMismatch(f"C.T@M: C is {self.shape}, M has {M.shape[0]} rows")
            out = self.B @ (self.A.T @ M)
        elif side == "left":
            if M.shape[-1] != n:
                raise DimensionMismatch(f"M@C: C is {self.shape}, M has {M.shape[-1]} cols")
            out = (M @ self.A) @ self.B.T
        else:
            raise ValueError(f"unknown side {side!r}")
        if counter is not None:
            counter.add(2 * (n + m) * self.q * k)
        return out

    def materialize(self, cap=MATERIALIZE_CAP):
        _check_cap(self.shape, cap)
        # tiny negative entries from cancellation are clamped to zero
        return np.maximum(self.A @ self.B.T, 0.0)


def _check_cap(shape, cap):
    if shape[0] * shape[1] > cap:
        raise SizeCapExceeded(f"{shape[0]}x{shape[1]} exceeds cap {cap}")


def cost_apply(C: CostMatrix, M, side="right", counter=None):
    return C.apply(M, side=side, counter=counter)


def sq_euclidean_factored(X, Y) -> FactoredCost:
    """Squared Euclidean cost as an exact rank-(d+2) factorization."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if X.shape[1] != Y.shape[1]:
        raise DimensionMismatch(f"points have dims {X.shape[1]} and {Y.shape[1]}")
    nx2 = (X * X).sum(axis=1)
    ny2 = (Y * Y).sum(axis=1)
    A = np.hstack([nx2[:, None], np.ones((X.shape[0], 1)), -2.0 * X])
    B = np.hstack([np.ones((Y.shape[0], 1)), ny2[:, None], Y])
    return FactoredCost(A, B)


def sq_euclidean_dense(X, Y) -> DenseCost:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if X.shape[1] != Y.shape[1]:
        raise DimensionMismatch(f"points have dims {X.shape[1]} and {Y.shape[1]}")
    d2 = ((X[:, None, :] - Y[None, :, :]) ** 2).sum(axis=2)
    return DenseCost(np.maximum(d2, 0.0))


@dataclass(frozen=True)
class LowRankCoupling:
    """Factor triple (Q, R, g) for the coupling P = Q @ diag(1/g) @ R.T."""

    Q: np.ndarray
    R: np.ndarray
    g: np.ndarray

    @property
    def rank(self):
        return self.g.shape[0]

    @property
    def shape(self):
        return (self.Q.shape[0], self.R.shape[0])

    def marginal_residual(self, a, b):
        """L1 residual over the four marginal equalities."""
        return (
            np.abs(self.Q.sum(axis=1) - a).sum()
            + np.abs(self.R.sum(axis=1) - b).sum()
            + np.abs(self.Q.sum(axis=0) - self.g).sum()
            + np.abs(self.R.sum(axis=0) - self.g).sum()
        )


def coupling_materialize(cpl: LowRankCoupling, cap=MATERIALIZE_CAP) -> np.ndarray:
    """Form P = Q diag(1/g) R.T densely; test/oracle facility only."""
    n, m = cpl.shape
    _check_cap((n, m), cap)
    return (cpl.Q / cpl.g[None, :]) @ cpl.R.T


def coupling_cost(C: CostMatrix, cpl: LowRankCoupling, counter=None) -> float:
    """<C, P> via the trace identity sum_i (Q.T C R)_ii / g_i."""
    CR = C.apply(cpl.R, side="right", counter=counter)
    omega = np.einsum("ij,ij->j", cpl.Q, CR)
    if counter is not None:
        counter.add(2 * cpl.Q.size + 2 * cpl.rank)
    return float((omega / cpl.g).sum())
