import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_force_ot

from lowrank_ot.divergences import (
    DivergenceValue,
    dlot,
    exact_ot,
    mmd_neg_cost,
)
from lowrank_ot.errors import DimensionMismatch, SizeCapExceeded
from lowrank_ot.measures import (
    new_discrete_measure,
    sq_euclidean_dense,
)
from lowrank_ot.solver import SolverConfig


def _measures(rng, n, m, d=2):
    X = rng.uniform(0, 1, (n, d))
    Y = rng.uniform(0, 1, (m, d))
    return new_discrete_measure(points=X), new_discrete_measure(points=Y)


def _costs(mx, my):
    return (sq_euclidean_dense(mx.points, my.points),
            sq_euclidean_dense(mx.points, mx.points),
            sq_euclidean_dense(my.points, my.points))


@settings(deadline=None, max_examples=15)
@given(st.integers(2, 6), st.integers(0, 10_000))
def test_exact_ot_matches_brute_force(n, seed):
    rng = np.random.default_rng(seed)
    C = rng.uniform(0, 1, (n, n))
    a = b = np.full(n, 1.0 / n)
    assert np.isclose(exact_ot(C, a, b), brute_force_ot(C, a, b), atol=1e-9)


def test_exact_ot_cap():
    n = 300
    with pytest.raises(SizeCapExceeded):
        exact_ot(np.ones((n, n)), np.full(n, 1 / n), np.full(n, 1 / n))


def test_exact_ot_diagonal_zero_cost():
    C = 1.0 - np.eye(4)
    a = b = np.full(4, 0.25)
    assert np.isclose(exact_ot(C, a, b), 0.0, atol=1e-12)


def test_mmd_shape_checks():
    rng = np.random.default_rng(0)
    mx, my = _measures(rng, 4, 5)
    C_xy, C_xx, C_yy = _costs(mx, my)
    with pytest.raises(DimensionMismatch):
        mmd_neg_cost(mx, my, C_xx, C_xx, C_yy)
    with pytest.raises(DimensionMismatch):
        mmd_neg_cost(mx, my, C_xy, C_yy, C_yy)


@settings(deadline=None, max_examples=20)
@given(st.integers(2, 8), st.integers(2, 8), st.integers(0, 10_000))
def test_dlot_rank1_equals_mmd(n, m, seed):
    rng = np.random.default_rng(seed)
    mx, my = _measures(rng, n, m)
    C_xy, C_xx, C_yy = _costs(mx, my)
    cfg = SolverConfig(rank=1, seed=seed)
    res = dlot(mx, my, C_xy, C_xx, C_yy, cfg)
    ref = mmd_neg_cost(mx, my, C_xy, C_xx, C_yy)
    assert abs(res.value - ref) <= 1e-9


def test_dlot_delta0_vs_delta2():
    # point masses at 0 and 2 on the line: DLOT_1 = |0-2|^2 = 4
    mx = new_discrete_measure(points=np.array([[0.0]]))
    my = new_discrete_measure(points=np.array([[2.0]]))
    C_xy, C_xx, C_yy = _costs(mx, my)
    res = dlot(mx, my, C_xy, C_xx, C_yy, SolverConfig(rank=1))
    assert abs(res.value - 4.0) <= 1e-9


def test_dlot_self_is_exact_zero():
    rng = np.random.default_rng(1)
    mx, _ = _measures(rng, 6, 6)
    C_xx = sq_euclidean_dense(mx.points, mx.points)
    for r in (1, 3):
        res = dlot(mx, mx, C_xx, C_xx, C_xx, SolverConfig(rank=r, seed=0))
        assert res.value == 0.0


def test_dlot_nonnegative_sq_euclidean():
    rng = np.random.default_rng(2)
    for seed in range(5):
        rng = np.random.default_rng(seed)
        mx, my = _measures(rng, 10, 10)
        C_xy, C_xx, C_yy = _costs(mx, my)
        res = dlot(mx, my, C_xy, C_xx, C_yy, SolverConfig(rank=3, seed=seed))
        assert res.value >= -1e-6 * C_xy.max_abs


def test_dlot_reports_components():
    rng = np.random.default_rng(3)
    mx, my = _measures(rng, 5, 7)
    C_xy, C_xx, C_yy = _costs(mx, my)
    res = dlot(mx, my, C_xy, C_xx, C_yy, SolverConfig(rank=2, seed=0))
    assert isinstance(res, DivergenceValue)
    assert np.isclose(res.value,
                      res.lot_xy - 0.5 * (res.lot_xx + res.lot_yy))
    assert res.lot_xx >= 0 and res.lot_yy >= 0
