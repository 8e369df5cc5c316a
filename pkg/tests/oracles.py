"""Independent reference computations used by the tests.

Everything here is deliberately slow and simple: brute force where possible,
generic constrained optimization otherwise, never sharing code with the
package under test.
"""

import itertools

import numpy as np
from scipy.optimize import linear_sum_assignment, minimize


def brute_force_ot(C, a, b, max_n=7):
    """Exact transport optimum by enumerating basic feasible solutions is
    impractical; instead solve the LP via the north-west-corner-free
    simplex in scipy only for assignment-shaped problems, and by vertex
    enumeration over permutations for tiny uniform square instances."""
    C = np.asarray(C, dtype=np.float64)
    n, m = C.shape
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if n == m and np.allclose(a, 1.0 / n) and np.allclose(b, 1.0 / n):
        # Birkhoff: the optimum sits at a permutation matrix / n
        if n <= max_n:
            best = np.inf
            for perm in itertools.permutations(range(n)):
                best = min(best, C[np.arange(n), perm].sum() / n)
            return best
        r, c = linear_sum_assignment(C)
        return C[r, c].sum() / n
    raise ValueError("brute_force_ot only handles uniform square instances")


def numerical_kl_projection_c2(xi1, xi2, xi3):
    """KL-project (xi1, xi2, xi3) onto the shared-column-sum set
    { (Q, R, g) : colsum(Q) = colsum(R) = g } by generic SLSQP on the
    stacked variables, for very small shapes."""
    xi1 = np.asarray(xi1, dtype=np.float64)
    xi2 = np.asarray(xi2, dtype=np.float64)
    xi3 = np.asarray(xi3, dtype=np.float64)
    n, r = xi1.shape
    m = xi2.shape[0]

    def unpack(z):
        Q = z[:n * r].reshape(n, r)
        R = z[n * r:n * r + m * r].reshape(m, r)
        g = z[n * r + m * r:]
        return Q, R, g

    def kl(p, q):
        return np.sum(p * np.log(p / q) - p + q)

    def obj(z):
        Q, R, g = unpack(z)
        return kl(Q, xi1) + kl(R, xi2) + kl(g, xi3)

    cons = [
        {"type": "eq",
         "fun": lambda z: unpack(z)[0].sum(axis=0) - unpack(z)[2]},
        {"type": "eq",
         "fun": lambda z: unpack(z)[1].sum(axis=0) - unpack(z)[2]},
    ]
    z0 = np.concatenate([xi1.ravel(), xi2.ravel(), xi3.ravel()])
    res = minimize(obj, z0, method="SLSQP", constraints=cons,
                   bounds=[(1e-12, None)] * z0.size,
                   options={"maxiter": 2000, "ftol": 1e-14})
    if not res.success:
        raise RuntimeError(f"oracle projection failed: {res.message}")
    return unpack(res.x)


def finite_difference_cost_grad(X, Y, P, h=1e-5):
    """Central finite differences of <C(X, Y), P> w.r.t. X for the squared
    Euclidean cost, at fixed coupling P."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    P = np.asarray(P, dtype=np.float64)

    def val(Xp):
        C = ((Xp[:, None, :] - Y[None, :, :]) ** 2).sum(axis=2)
        return (C * P).sum()

    grad = np.zeros_like(X)
    for i in range(X.shape[0]):
        for j in range(X.shape[1]):
            Xp = X.copy()
            Xp[i, j] += h
            Xm = X.copy()
            Xm[i, j] -= h
            grad[i, j] = (val(Xp) - val(Xm)) / (2 * h)
    return grad


def finite_difference_self_grad(X, P, h=1e-5):
    """Central finite differences of <C(X, X), P> w.r.t. X (both slots)."""
    X = np.asarray(X, dtype=np.float64)
    P = np.asarray(P, dtype=np.float64)

    def val(Xp):
        C = ((Xp[:, None, :] - Xp[None, :, :]) ** 2).sum(axis=2)
        return (C * P).sum()

    grad = np.zeros_like(X)
    for i in range(X.shape[0]):
        for j in range(X.shape[1]):
            Xp = X.copy()
            Xp[i, j] += h
            Xm = X.copy()
            Xm[i, j] -= h
            grad[i, j] = (val(Xp) - val(Xm)) / (2 * h)
    return grad
