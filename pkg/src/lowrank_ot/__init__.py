"""Low-rank optimal transport toolkit.

A mirror-descent solver for transport couplings constrained to low
nonnegative rank, the debiased divergence built on it, a generalized
k-means clustering method, particle gradient flows, and a desk-scale
experiment harness.
"""

__version__ = "0.1.0"

from .measures import (
    CostMatrix,
    DenseCost,
    DiscreteMeasure,
    FactoredCost,
    LowRankCoupling,
    cost_apply,
    coupling_cost,
    coupling_materialize,
    new_discrete_measure,
    sq_euclidean_dense,
    sq_euclidean_factored,
)
from .solver import SolverConfig, SolveReport, lot_solve, lot_solve_restarts
from .divergences import DivergenceValue, dlot, exact_ot, mmd_neg_cost
from .clustering import ClusterResult, kmeans_equivalence_check, lot_cluster, shortest_path_cost
from .flows import FlowConfig, FlowTrace, danskin_grad_points, flow_run
from .opcount import OpCounter
