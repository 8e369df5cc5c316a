"""Machine-independent accounting of algebraic operations.

The cost model: a matrix product of shapes (p, q) x (q, s) charges 2*p*q*s
operations; elementwise exp/log/divide/multiply and reductions charge 1 per
entry touched. Traces built on this model are reproducible across machines.
"""

from dataclasses import dataclass


@dataclass
class OpCounter:
    count: int = 0

    def add(self, n):
        self.count += int(n)

    def matmul(self, rows, inner, cols):
        self.count += 2 * int(rows) * int(inner) * int(cols)

    def elementwise(self, n_entries):
        self.count += int(n_entries)
