"""Toy convex problems shared by the decomposition tests."""
import numpy as np

from orkit.decomposition import piecewise_linear_oracle
from orkit.lp import solve_lp


def abs_pair():
    """f(x) = |x - 1| + |x + 1| on [-10, 10]; minimum 2 on [-1, 1]."""
    return [
        piecewise_linear_oracle([([1.0], -1.0), ([-1.0], 1.0)]),
        piecewise_linear_oracle([([1.0], 1.0), ([-1.0], -1.0)]),
    ]


def affine_one():
    return [piecewise_linear_oracle([([2.0, -1.0], 0.5)])]


class Newsvendor:
    """Two-scenario order problem.

    First stage: order x in [0, 10] at unit cost c. Scenario s with
    probability p_s and demand d_s sells min(x, d_s) at price q and
    salvages the rest at r < q. The recourse cost is
    -q min(x, d) - r max(x - d, 0) = max(-q x, -r x - (q - r) d).
    """

    c, q, r = 1.0, 3.0, 0.5
    demand = (3.0, 7.0)
    prob = (0.4, 0.6)
    lower, upper = [0.0], [10.0]

    def oracles(self):
        out = [piecewise_linear_oracle([([self.c], 0.0)])]
        for d, p in zip(self.demand, self.prob):
            out.append(
                piecewise_linear_oracle([([-self.q * p], 0.0), ([-self.r * p], -(self.q - self.r) * d * p)])
            )
        return out

    def extensive_form(self):
        """Deterministic equivalent over (x, sold_1, salvage_1, sold_2, salvage_2)."""
        (d1, d2), (p1, p2) = self.demand, self.prob
        c = [self.c, -self.q * p1, -self.r * p1, -self.q * p2, -self.r * p2]
        A = [
            [0, 1, 0, 0, 0],
            [-1, 1, 1, 0, 0],
            [0, 0, 0, 1, 0],
            [-1, 0, 0, 1, 1],
        ]
        b = [d1, 0, d2, 0]
        res = solve_lp(c, A, b, lower=[0] * 5, upper=[10, np.inf, np.inf, np.inf, np.inf])
        return res.fun, res.x[0]


def random_polyhedral(seed, dim=2, components=3, pieces=4):
    """Sum of random max-of-affine functions, bounded below on the box."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(components):
        pcs = [(rng.normal(size=dim), float(rng.normal())) for _ in range(pieces)]
        out.append(piecewise_linear_oracle(pcs))
    return out
